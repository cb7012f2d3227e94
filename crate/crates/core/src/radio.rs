//! Link budget, SINR models and the CQI to rate mapping.
//!
//! Every SINR is computed as `signal / (interference + noise)` in linear
//! milliwatts. Transmitters spread their power over the whole carrier, so the
//! thermal noise is taken over the same number of RBs as the carrier holds.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::topology::{CellId, CellSite, UserTerminal};

/// CQI index. 0 means the link cannot be served; 1..=15 are MCS levels.
pub type Cqi = u8;

pub const MAX_CQI: Cqi = 15;
pub const SUBCARRIERS_PER_RB: f64 = 12.0;
pub const SYMBOLS_PER_SUBFRAME: f64 = 14.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkBudgetParams {
    pub carrier_freq_ghz: f64,
    pub rb_bandwidth_khz: f64,
    pub thermal_noise_dbm_hz: f64,
    pub gnb_noise_figure_db: f64,
    pub ue_noise_figure_db: f64,
    pub bler_target: f64,
    /// Distances below this are clamped before applying the pathloss law.
    pub min_distance_m: f64,
}

impl Default for LinkBudgetParams {
    fn default() -> Self {
        Self {
            carrier_freq_ghz: 2.0,
            rb_bandwidth_khz: 180.0,
            thermal_noise_dbm_hz: -174.0,
            gnb_noise_figure_db: 5.0,
            ue_noise_figure_db: 9.0,
            bler_target: 0.01,
            min_distance_m: 3.0,
        }
    }
}

impl LinkBudgetParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.carrier_freq_ghz,
            self.rb_bandwidth_khz,
            self.thermal_noise_dbm_hz,
            self.gnb_noise_figure_db,
            self.ue_noise_figure_db,
            self.bler_target,
            self.min_distance_m,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return invalid("link budget parameters must be finite");
        }
        if !(self.bler_target > 0.0 && self.bler_target < 1.0) {
            return invalid(format!("bler_target must be in (0,1), got {}", self.bler_target));
        }
        if self.rb_bandwidth_khz <= 0.0 || self.min_distance_m <= 0.0 {
            return invalid("rb bandwidth and minimum distance must be positive");
        }
        Ok(())
    }
}

/// SINR thresholds and spectral efficiencies for CQI 1..=15.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CqiTable {
    pub sinr_thresholds: [f64; 15],
    pub efficiencies: [f64; 15],
}

impl Default for CqiTable {
    fn default() -> Self {
        Self {
            sinr_thresholds: [
                -6.7, -4.7, -2.3, 0.2, 2.4, 4.3, 5.9, 8.1, 10.3, 11.7, 14.1, 16.3, 18.7, 21.0, 22.7,
            ],
            efficiencies: [
                0.1523, 0.2344, 0.3770, 0.6016, 0.8770, 1.1758, 1.4766, 1.9141, 2.4063, 2.7305, 3.3223, 3.9023, 4.5234,
                5.1152, 5.5547,
            ],
        }
    }
}

impl CqiTable {
    pub fn new(sinr_thresholds: [f64; 15], efficiencies: [f64; 15]) -> Result<Self> {
        let table = Self {
            sinr_thresholds,
            efficiencies,
        };
        table.validate()?;
        Ok(table)
    }

    /// Builds a table from slices, as read from a config file.
    pub fn from_slices(sinr_thresholds: &[f64], efficiencies: &[f64]) -> Result<Self> {
        let thr: [f64; 15] = sinr_thresholds.try_into().map_err(|_| {
            crate::Error::InvalidArgument(format!("expected 15 thresholds, got {}", sinr_thresholds.len()))
        })?;
        let eff: [f64; 15] = efficiencies.try_into().map_err(|_| {
            crate::Error::InvalidArgument(format!("expected 15 efficiencies, got {}", efficiencies.len()))
        })?;
        Self::new(thr, eff)
    }

    pub fn validate(&self) -> Result<()> {
        let increasing = |v: &[f64; 15]| v.iter().all(|x| x.is_finite()) && v.windows(2).all(|w| w[0] < w[1]);
        if !increasing(&self.sinr_thresholds) {
            return invalid("CQI SINR thresholds must be finite and strictly increasing");
        }
        if !increasing(&self.efficiencies) || self.efficiencies[0] <= 0.0 {
            return invalid("CQI efficiencies must be positive and strictly increasing");
        }
        Ok(())
    }
}

/// Link budget parameters bundled with the CQI table in use.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RadioModel {
    pub params: LinkBudgetParams,
    pub cqi: CqiTable,
}

impl RadioModel {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.cqi.validate()
    }

    pub fn cqi_for(&self, sinr_linear: f64) -> Cqi {
        sinr_to_cqi(linear_to_db(sinr_linear), &self.cqi)
    }

    /// Pathloss with this model's distance clamp, for a distance in meters.
    pub fn pathloss_m(&self, distance_m: f64) -> f64 {
        pathloss_db_clamped(distance_m / 1000.0, self.params.min_distance_m / 1000.0)
    }

    /// Received power in mW from a cell at a user.
    pub fn cell_rx_mw(&self, cell: &CellSite, ue: &UserTerminal) -> f64 {
        let pl = self.pathloss_m(cell.center.distance_to(&ue.position));
        dbm_to_mw(rx_power_dbm(cell.tx_power, cell.antenna_gain, ue.antenna_gain, pl))
    }

    /// Received power in mW over a sidelink from `relay` at `ue`.
    pub fn sidelink_rx_mw(&self, relay: &UserTerminal, ue: &UserTerminal) -> f64 {
        let pl = self.pathloss_m(relay.position.distance_to(&ue.position));
        dbm_to_mw(rx_power_dbm(
            relay.tx_power_d2d,
            relay.antenna_gain,
            ue.antenna_gain,
            pl,
        ))
    }

    /// Receiver noise in mW over `n_rb` RBs for a given noise figure.
    pub fn noise_mw(&self, n_rb: u32, receiver_nf: f64) -> Result<f64> {
        noise_dbm(n_rb, &self.params, receiver_nf).map(dbm_to_mw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrSample {
    /// mW
    pub signal: f64,
    /// mW
    pub interference: f64,
    /// mW
    pub noise: f64,
}

impl SinrSample {
    pub fn ratio(&self) -> f64 {
        self.signal / (self.interference + self.noise)
    }

    pub fn db(&self) -> f64 {
        linear_to_db(self.ratio())
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `128.1 + 37.6 log10(R)` with `R` in km, clamped at the default 3 m floor.
pub fn pathloss_db(distance_km: f64) -> f64 {
    pathloss_db_clamped(distance_km, LinkBudgetParams::default().min_distance_m / 1000.0)
}

pub fn pathloss_db_clamped(distance_km: f64, min_distance_km: f64) -> f64 {
    128.1 + 37.6 * distance_km.max(min_distance_km).log10()
}

pub fn rx_power_dbm(tx_dbm: f64, tx_gain: f64, rx_gain: f64, pl: f64) -> f64 {
    tx_dbm + tx_gain + rx_gain - pl
}

/// Thermal noise over `n_rb` RBs plus the receiver noise figure.
pub fn noise_dbm(n_rb: u32, params: &LinkBudgetParams, receiver_nf: f64) -> Result<f64> {
    if n_rb == 0 {
        return invalid("noise bandwidth needs at least one RB");
    }
    let bandwidth_hz = f64::from(n_rb) * params.rb_bandwidth_khz * 1000.0;
    Ok(params.thermal_noise_dbm_hz + 10.0 * bandwidth_hz.log10() + receiver_nf)
}

pub fn mbsfn_sample(
    ue: &UserTerminal,
    serving_area_cells: &BTreeSet<CellId>,
    all_cells: &[CellSite],
    radio: &RadioModel,
    n_rb: u32,
) -> Result<SinrSample> {
    if serving_area_cells.is_empty() {
        return invalid("MBSFN serving set is empty");
    }
    let mut signal = 0.0;
    let mut interference = 0.0;
    for cell in all_cells {
        let p = radio.cell_rx_mw(cell, ue);
        if serving_area_cells.contains(&cell.id) {
            signal += p;
        } else {
            interference += p;
        }
    }
    let noise = radio.noise_mw(n_rb, ue.noise_figure)?;
    Ok(SinrSample {
        signal,
        interference,
        noise,
    })
}

/// SINR of a user combining every cell of its MBSFN area; all other cells interfere.
pub fn sinr_mbsfn(
    ue: &UserTerminal,
    serving_area_cells: &BTreeSet<CellId>,
    all_cells: &[CellSite],
    radio: &RadioModel,
    n_rb: u32,
) -> Result<f64> {
    mbsfn_sample(ue, serving_area_cells, all_cells, radio, n_rb).map(|s| s.ratio())
}

pub fn unicast_sample(
    ue: &UserTerminal,
    serving_cell: &CellSite,
    all_cells: &[CellSite],
    radio: &RadioModel,
    n_rb: u32,
) -> Result<SinrSample> {
    if !all_cells.iter().any(|c| c.id == serving_cell.id) {
        return invalid(format!(
            "serving {} is not among the transmitting cells",
            serving_cell.id
        ));
    }
    let mut signal = 0.0;
    let mut interference = 0.0;
    for cell in all_cells {
        let p = radio.cell_rx_mw(cell, ue);
        if cell.id == serving_cell.id {
            signal += p;
        } else {
            interference += p;
        }
    }
    let noise = radio.noise_mw(n_rb, ue.noise_figure)?;
    Ok(SinrSample {
        signal,
        interference,
        noise,
    })
}

/// SINR of a point-to-point link from `serving_cell`; every other cell interferes.
pub fn sinr_unicast(
    ue: &UserTerminal,
    serving_cell: &CellSite,
    all_cells: &[CellSite],
    radio: &RadioModel,
    n_rb: u32,
) -> Result<f64> {
    unicast_sample(ue, serving_cell, all_cells, radio, n_rb).map(|s| s.ratio())
}

pub fn d2d_sample<'a>(
    ue: &UserTerminal,
    relays_same_area: impl IntoIterator<Item = &'a UserTerminal>,
    relays_other_areas: impl IntoIterator<Item = &'a UserTerminal>,
    radio: &RadioModel,
    n_rb: u32,
) -> Result<SinrSample> {
    let signal: f64 = relays_same_area.into_iter().map(|r| radio.sidelink_rx_mw(r, ue)).sum();
    if signal == 0.0 {
        return invalid("D2D SINR needs at least one co-area relay");
    }
    let interference = relays_other_areas
        .into_iter()
        .map(|r| radio.sidelink_rx_mw(r, ue))
        .sum();
    let noise = radio.noise_mw(n_rb, ue.noise_figure)?;
    Ok(SinrSample {
        signal,
        interference,
        noise,
    })
}

/// Single-frequency sidelink SINR: co-area relays combine, relays of other
/// areas reuse the same uplink RBs and interfere.
pub fn sinr_d2d<'a>(
    ue: &UserTerminal,
    relays_same_area: impl IntoIterator<Item = &'a UserTerminal>,
    relays_other_areas: impl IntoIterator<Item = &'a UserTerminal>,
    radio: &RadioModel,
    n_rb: u32,
) -> Result<f64> {
    d2d_sample(ue, relays_same_area, relays_other_areas, radio, n_rb).map(|s| s.ratio())
}

/// Largest CQI whose threshold is met; 0 below the first threshold.
pub fn sinr_to_cqi(sinr_db: f64, table: &CqiTable) -> Cqi {
    table.sinr_thresholds.iter().take_while(|&&thr| thr <= sinr_db).count() as Cqi
}

/// Bits carried by one RB in one 1 ms subframe at the given CQI.
pub fn rate_per_rb(cqi: Cqi, table: &CqiTable) -> Result<f64> {
    match cqi {
        1..=MAX_CQI => Ok(SUBCARRIERS_PER_RB * SYMBOLS_PER_SUBFRAME * table.efficiencies[usize::from(cqi) - 1]),
        _ => invalid(format!("CQI {cqi} has no rate")),
    }
}

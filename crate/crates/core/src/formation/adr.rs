//! Aggregate data rate of a formation configuration, normalised per frame.
//!
//! MBSFN and unicast users are served in D subframes. D2D users are served in
//! U subframes, but a relay cannot forward more than it ingested over the
//! MBSFN transmission, so their per-frame volume is the smaller of the relay
//! ingress and the sidelink capacity of the full uplink pool.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AreaId, FormationConfiguration, MbsfnArea};
use crate::error::{invalid, Result};
use crate::frame::{TddConfiguration, FRAME_DURATION_S};
use crate::radio::{rate_per_rb, Cqi, CqiTable};
use crate::topology::CellId;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AreaAdr {
    pub area: AreaId,
    pub mbsfn: f64,
    pub unicast: f64,
    pub d2d: f64,
}

impl AreaAdr {
    pub fn total(&self) -> f64 {
        self.mbsfn + self.unicast + self.d2d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CellAdr {
    pub mbsfn: f64,
    pub unicast: f64,
    pub d2d: f64,
}

/// ADR in bit/s, split by delivery path, by area and by home cell.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AdrBreakdown {
    pub total: f64,
    pub mbsfn: f64,
    pub unicast: f64,
    pub d2d: f64,
    pub per_area: Vec<AreaAdr>,
    pub per_cell: BTreeMap<CellId, CellAdr>,
}

/// Bits per RB per subframe, with unservable links carrying nothing.
pub(crate) fn rate_or_zero(cqi: Cqi, table: &CqiTable) -> f64 {
    rate_per_rb(cqi, table).unwrap_or(0.0)
}

/// Bits a relay of `area` ingests per frame from the MBSFN transmission.
pub(crate) fn ingress_per_frame(area: &MbsfnArea, tdd: &TddConfiguration, table: &CqiTable) -> f64 {
    rate_or_zero(area.mcs, table) * f64::from(area.rb_b) * f64::from(tdd.n_downlink())
}

/// Bits one D2D user of `area` receives per frame once flow conservation is applied.
pub(crate) fn d2d_bits_per_frame(area: &MbsfnArea, n_rb_ul: u32, tdd: &TddConfiguration, table: &CqiTable) -> f64 {
    let capacity = rate_or_zero(area.d2d_mcs, table) * f64::from(n_rb_ul) * f64::from(tdd.n_uplink());
    ingress_per_frame(area, tdd, table).min(capacity)
}

/// Uplink RBs per U subframe needed to forward the area's per-frame ingress.
pub(crate) fn d2d_rb_need(area: &MbsfnArea, n_rb_ul: u32, tdd: &TddConfiguration, table: &CqiTable) -> u32 {
    let rate = rate_or_zero(area.d2d_mcs, table);
    let n_u = f64::from(tdd.n_uplink());
    if rate == 0.0 || n_u == 0.0 {
        return 0;
    }
    let flow = d2d_bits_per_frame(area, n_rb_ul, tdd, table);
    ((flow / (rate * n_u)).ceil() as u32).min(n_rb_ul)
}

/// Checks the downlink and uplink RB pools of `cfg`.
pub(crate) fn check_pools(cfg: &FormationConfiguration) -> std::result::Result<(), String> {
    let mut area_load: BTreeMap<AreaId, u64> = cfg.areas.iter().map(|a| (a.id, u64::from(a.rb_b))).collect();
    let mut cell_load: BTreeMap<CellId, u64> = BTreeMap::new();
    for (user, g) in &cfg.unicast_users {
        match g.area {
            Some(a) => match area_load.get_mut(&a) {
                Some(load) => *load += u64::from(g.rbs),
                None => return Err(format!("{user} draws from unknown area {a}")),
            },
            None => *cell_load.entry(g.cell).or_default() += u64::from(g.rbs),
        }
    }
    for (a, load) in area_load {
        if load > u64::from(cfg.n_rb_dl) {
            return Err(format!("area {a} uses {load} downlink RBs of {}", cfg.n_rb_dl));
        }
    }
    for (c, load) in cell_load {
        if load > u64::from(cfg.n_rb_dl) {
            return Err(format!("{c} uses {load} downlink RBs of {}", cfg.n_rb_dl));
        }
    }
    for a in &cfg.areas {
        if a.rb_d2d > cfg.n_rb_ul {
            return Err(format!("area {} uses {} uplink RBs of {}", a.id, a.rb_d2d, cfg.n_rb_ul));
        }
    }
    Ok(())
}

/// Computes the ADR of `cfg` under `tdd` in bit/s.
///
/// Fails when the configuration oversubscribes an RB pool or references an
/// area that does not exist. Users on an unservable link (CQI 0) contribute 0.
pub fn compute_adr(cfg: &FormationConfiguration, tdd: &TddConfiguration, table: &CqiTable) -> Result<AdrBreakdown> {
    if let Err(msg) = check_pools(cfg) {
        return invalid(msg);
    }
    let frames_per_s = 1.0 / FRAME_DURATION_S;
    let n_d = f64::from(tdd.n_downlink());
    let areas: BTreeMap<AreaId, &MbsfnArea> = cfg.areas.iter().map(|a| (a.id, a)).collect();
    let mut per_area: BTreeMap<AreaId, AreaAdr> = cfg
        .areas
        .iter()
        .map(|a| {
            (
                a.id,
                AreaAdr {
                    area: a.id,
                    ..Default::default()
                },
            )
        })
        .collect();
    let mut per_cell: BTreeMap<CellId, CellAdr> = BTreeMap::new();
    let mut mbsfn = 0.0;
    let mut unicast = 0.0;
    let mut d2d = 0.0;

    for m in cfg.mbsfn_users.values() {
        let Some(area) = areas.get(&m.area) else {
            return invalid(format!("MBSFN member of unknown area {}", m.area));
        };
        let r = rate_or_zero(area.mcs, table) * f64::from(area.rb_b) * n_d * frames_per_s;
        mbsfn += r;
        per_area.get_mut(&m.area).unwrap().mbsfn += r;
        per_cell.entry(m.cell).or_default().mbsfn += r;
    }
    for g in cfg.unicast_users.values() {
        let r = rate_or_zero(g.cqi, table) * f64::from(g.rbs) * n_d * frames_per_s;
        unicast += r;
        if let Some(a) = g.area {
            per_area.get_mut(&a).unwrap().unicast += r;
        }
        per_cell.entry(g.cell).or_default().unicast += r;
    }
    for l in cfg.d2d_users.values() {
        let Some(area) = areas.get(&l.area) else {
            return invalid(format!("D2D user of unknown area {}", l.area));
        };
        let r = d2d_bits_per_frame(area, cfg.n_rb_ul, tdd, table) * frames_per_s;
        d2d += r;
        per_area.get_mut(&l.area).unwrap().d2d += r;
        per_cell.entry(l.cell).or_default().d2d += r;
    }
    Ok(AdrBreakdown {
        total: mbsfn + unicast + d2d,
        mbsfn,
        unicast,
        d2d,
        per_area: per_area.into_values().collect(),
        per_cell,
    })
}

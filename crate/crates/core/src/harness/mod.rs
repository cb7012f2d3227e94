//! Monte-Carlo scenarios: sweeps, replications, aggregation and output files.

mod output;
mod stats;

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::delivery::{simulate_delivery, DEFAULT_CONTENT_BYTES};
use crate::error::{invalid, Error, Result};
use crate::formation::{
    ensure_valid, run_formation_with_links, Algorithm, AllocationPolicy, FormationInput, LinkTable,
};
use crate::frame::{rb_count, tdd_config, CarrierGrid, SUPPORTED_BANDWIDTHS_MHZ, TDD_CONFIG_COUNT};
use crate::radio::RadioModel;
use crate::topology::{build_hex_grid, place_users, SynchronizationArea};

pub use output::{emit_results, RAW_COLUMNS, SUMMARY_COLUMNS};
pub use stats::{ci95_half_width, MetricStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParameter {
    UsersPerCell,
    Cells,
    BandwidthMhz,
}

impl SweepParameter {
    pub fn for_scenario(scenario: u8) -> Result<Self> {
        match scenario {
            1 => Ok(Self::UsersPerCell),
            2 => Ok(Self::Cells),
            3 => Ok(Self::BandwidthMhz),
            s => invalid(format!("scenario must be 1, 2 or 3, got {s}")),
        }
    }

    /// Short axis name used in chart file names.
    pub fn axis(self) -> &'static str {
        match self {
            Self::UsersPerCell => "users",
            Self::Cells => "cells",
            Self::BandwidthMhz => "bw",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::UsersPerCell => "users per cell",
            Self::Cells => "cells",
            Self::BandwidthMhz => "bandwidth [MHz]",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario: u8,
    pub sweep_values: Vec<u32>,
    pub users_per_cell: u32,
    pub cells: u32,
    pub bandwidth_mhz: u32,
    pub isd_m: f64,
    /// Surround the grid with one ring of co-channel cells that only interfere.
    pub interferer_ring: bool,
    pub tdd: Vec<u8>,
    pub algorithms: Vec<Algorithm>,
    pub replications: u32,
    pub base_seed: u64,
    pub content_bytes: u64,
    pub radio: RadioModel,
    pub policy: AllocationPolicy,
}

impl ScenarioSpec {
    pub fn new(scenario: u8) -> Result<Self> {
        let sweep_values = match SweepParameter::for_scenario(scenario)? {
            SweepParameter::UsersPerCell => (200..=400).step_by(50).collect(),
            SweepParameter::Cells => (10..=36).step_by(2).collect(),
            SweepParameter::BandwidthMhz => SUPPORTED_BANDWIDTHS_MHZ.to_vec(),
        };
        Ok(Self {
            scenario,
            sweep_values,
            users_per_cell: 300,
            cells: 10,
            bandwidth_mhz: 50,
            isd_m: 500.0,
            interferer_ring: true,
            tdd: (0..TDD_CONFIG_COUNT).collect(),
            algorithms: Algorithm::ALL.to_vec(),
            replications: 20,
            base_seed: 1,
            content_bytes: DEFAULT_CONTENT_BYTES,
            radio: RadioModel::default(),
            policy: AllocationPolicy::default(),
        })
    }

    pub fn sweep(&self) -> SweepParameter {
        SweepParameter::for_scenario(self.scenario).expect("scenario checked on construction")
    }

    pub fn validate(&self) -> Result<()> {
        let sweep = SweepParameter::for_scenario(self.scenario)?;
        if self.sweep_values.is_empty() {
            return invalid("sweep range is empty");
        }
        if self.replications == 0 {
            return invalid("at least one replication is required");
        }
        if self.tdd.is_empty() || self.algorithms.is_empty() {
            return invalid("pick at least one TDD configuration and one algorithm");
        }
        for &t in &self.tdd {
            tdd_config(t)?;
        }
        if self.content_bytes == 0 {
            return invalid("content must hold at least one byte");
        }
        self.radio.validate()?;
        self.policy.validate()?;
        for p in self.points_for(sweep) {
            if p.users_per_cell == 0 {
                return invalid("users per cell must be positive");
            }
            build_hex_grid(p.cells as usize, self.isd_m)?;
            rb_count(p.bandwidth_mhz)?;
        }
        Ok(())
    }

    fn points_for(&self, sweep: SweepParameter) -> Vec<GridPoint> {
        self.sweep_values
            .iter()
            .map(|&v| {
                let mut p = GridPoint {
                    sweep_value: v,
                    users_per_cell: self.users_per_cell,
                    cells: self.cells,
                    bandwidth_mhz: self.bandwidth_mhz,
                };
                match sweep {
                    SweepParameter::UsersPerCell => p.users_per_cell = v,
                    SweepParameter::Cells => p.cells = v,
                    SweepParameter::BandwidthMhz => p.bandwidth_mhz = v,
                }
                p
            })
            .collect()
    }

    pub fn points(&self) -> Vec<GridPoint> {
        self.points_for(self.sweep())
    }

    pub fn seed(&self, rep: u32) -> u64 {
        self.base_seed.wrapping_add(u64::from(rep))
    }

    pub fn deployment(&self, point: &GridPoint) -> Result<SynchronizationArea> {
        let area = build_hex_grid(point.cells as usize, self.isd_m)?;
        Ok(if self.interferer_ring {
            area.with_interferer_ring()
        } else {
            area
        })
    }
}

/// Overrides read from a JSON file; absent keys keep the scenario defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Option<u8>,
    pub sweep_values: Option<Vec<u32>>,
    pub users_per_cell: Option<u32>,
    pub cells: Option<u32>,
    pub bandwidth_mhz: Option<u32>,
    pub isd_m: Option<f64>,
    pub interferer_ring: Option<bool>,
    pub tdd: Option<Vec<u8>>,
    pub algorithms: Option<Vec<Algorithm>>,
    pub replications: Option<u32>,
    pub base_seed: Option<u64>,
    pub content_bytes: Option<u64>,
    pub radio: Option<RadioModel>,
    pub policy: Option<AllocationPolicy>,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Builds the spec for `scenario` (or the file's own scenario) with these overrides applied.
    pub fn into_spec(self, scenario: Option<u8>) -> Result<ScenarioSpec> {
        let Some(id) = scenario.or(self.scenario) else {
            return invalid("no scenario given");
        };
        let mut spec = ScenarioSpec::new(id)?;
        macro_rules! take {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { spec.$f = v; })* };
        }
        take!(
            sweep_values,
            users_per_cell,
            cells,
            bandwidth_mhz,
            isd_m,
            interferer_ring,
            tdd,
            algorithms,
            replications,
            base_seed,
            content_bytes,
            radio,
            policy
        );
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridPoint {
    pub sweep_value: u32,
    pub users_per_cell: u32,
    pub cells: u32,
    pub bandwidth_mhz: u32,
}

/// One row of `raw.csv`; field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub scenario: u8,
    pub sweep_value: u32,
    pub tdd: u8,
    pub algo: Algorithm,
    pub rep: u32,
    pub seed: u64,
    pub adr_bps: f64,
    pub adr_b_bps: f64,
    pub adr_u_bps: f64,
    pub adr_d2d_bps: f64,
    pub avg_thr_bps: f64,
    pub delivery_time_s: f64,
    pub used_d2d_rb_pct: f64,
    pub n_areas: usize,
    pub n_mbsfn_users: usize,
    pub n_unicast_users: usize,
    pub n_d2d_users: usize,
    pub n_relays: usize,
}

/// Metric columns aggregated into `summary.csv`, in order.
pub const METRICS: [&str; 12] = [
    "adr_bps",
    "adr_b_bps",
    "adr_u_bps",
    "adr_d2d_bps",
    "avg_thr_bps",
    "delivery_time_s",
    "used_d2d_rb_pct",
    "n_areas",
    "n_mbsfn_users",
    "n_unicast_users",
    "n_d2d_users",
    "n_relays",
];

impl RawRecord {
    pub fn metrics(&self) -> [f64; 12] {
        [
            self.adr_bps,
            self.adr_b_bps,
            self.adr_u_bps,
            self.adr_d2d_bps,
            self.avg_thr_bps,
            self.delivery_time_s,
            self.used_d2d_rb_pct,
            self.n_areas as f64,
            self.n_mbsfn_users as f64,
            self.n_unicast_users as f64,
            self.n_d2d_users as f64,
            self.n_relays as f64,
        ]
    }
}

/// Aggregate of all replications at one grid point, TDD configuration and algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scenario: u8,
    pub sweep_value: u32,
    pub tdd: u8,
    pub algo: Algorithm,
    pub stats: Vec<MetricStats>,
}

impl SummaryRow {
    pub fn metric(&self, name: &str) -> Option<&MetricStats> {
        METRICS.iter().position(|m| *m == name).map(|i| &self.stats[i])
    }

    pub fn mean(&self, name: &str) -> f64 {
        self.metric(name).map_or(f64::NAN, |s| s.mean)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub spec: ScenarioSpec,
    pub raw: Vec<RawRecord>,
    pub summary: Vec<SummaryRow>,
}

impl ScenarioResult {
    pub fn row(&self, sweep_value: u32, tdd: u8, algo: Algorithm) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.sweep_value == sweep_value && r.tdd == tdd && r.algo == algo)
    }
}

/// Runs every TDD configuration and algorithm of `spec` on one user drop.
pub fn run_replication(spec: &ScenarioSpec, point: &GridPoint, rep: u32) -> Result<Vec<RawRecord>> {
    let area = spec.deployment(point)?;
    let seed = spec.seed(rep);
    let users = place_users(&area, point.users_per_cell as usize, seed);
    let grid = CarrierGrid::new(point.bandwidth_mhz)?;
    let mut input = FormationInput {
        area: &area,
        users: &users,
        tdd: tdd_config(spec.tdd[0])?,
        grid,
        radio: &spec.radio,
        policy: spec.policy,
    };
    let links = LinkTable::build(&input)?;
    let mut out = Vec::with_capacity(spec.tdd.len() * spec.algorithms.len());
    for &t in &spec.tdd {
        input.tdd = tdd_config(t)?;
        for &algo in &spec.algorithms {
            let cfg = run_formation_with_links(&input, &links, algo, false)?.config;
            ensure_valid(&cfg, &area, &users, &grid).map_err(|e| match e {
                Error::Validation(mut v) => {
                    v.insert(
                        0,
                        format!(
                            "scenario {} sweep {} rep {rep} seed {seed} tdd {t} {algo}",
                            spec.scenario, point.sweep_value
                        ),
                    );
                    Error::Validation(v)
                }
                other => other,
            })?;
            let m = simulate_delivery(&cfg, &input.tdd, &grid, &spec.radio, spec.content_bytes)?;
            out.push(RawRecord {
                scenario: spec.scenario,
                sweep_value: point.sweep_value,
                tdd: t,
                algo,
                rep,
                seed,
                adr_bps: m.adr,
                adr_b_bps: m.adr_b,
                adr_u_bps: m.adr_u,
                adr_d2d_bps: m.adr_d2d,
                avg_thr_bps: m.avg_throughput,
                delivery_time_s: m.delivery_time,
                used_d2d_rb_pct: m.used_d2d_rb_pct,
                n_areas: cfg.areas.len(),
                n_mbsfn_users: cfg.mbsfn_users.len(),
                n_unicast_users: cfg.unicast_users.len(),
                n_d2d_users: cfg.d2d_users.len(),
                n_relays: cfg.relays.len(),
            });
        }
    }
    Ok(out)
}

/// Runs the full sweep. Rows come out ordered by grid point, replication,
/// TDD configuration and algorithm regardless of scheduling.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<ScenarioResult> {
    spec.validate()?;
    let points = spec.points();
    let items: Vec<(GridPoint, u32)> = points
        .iter()
        .flat_map(|p| (0..spec.replications).map(move |r| (*p, r)))
        .collect();
    log::info!(
        "scenario {}: {} points x {} replications",
        spec.scenario,
        points.len(),
        spec.replications
    );
    let chunks = items
        .par_iter()
        .map(|(p, r)| run_replication(spec, p, *r))
        .collect::<Result<Vec<_>>>()?;
    let raw: Vec<RawRecord> = chunks.into_iter().flatten().collect();
    let summary = summarize(spec, &raw);
    Ok(ScenarioResult {
        spec: spec.clone(),
        raw,
        summary,
    })
}

/// Groups raw rows by grid point, TDD configuration and algorithm.
pub fn summarize(spec: &ScenarioSpec, raw: &[RawRecord]) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for &v in &spec.sweep_values {
        for &t in &spec.tdd {
            for &algo in &spec.algorithms {
                let rows: Vec<[f64; 12]> = raw
                    .iter()
                    .filter(|r| r.sweep_value == v && r.tdd == t && r.algo == algo)
                    .map(RawRecord::metrics)
                    .collect();
                if rows.is_empty() {
                    continue;
                }
                let stats = (0..METRICS.len())
                    .map(|i| MetricStats::from_samples(rows.iter().map(|m| m[i])))
                    .collect();
                out.push(SummaryRow {
                    scenario: spec.scenario,
                    sweep_value: v,
                    tdd: t,
                    algo,
                    stats,
                });
            }
        }
    }
    out
}

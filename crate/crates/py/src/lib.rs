//! Python bindings: build a deployment, form MBSFN areas, simulate delivery
//! and run scenario sweeps.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use mbsfn_core::delivery::{simulate_delivery, DEFAULT_CONTENT_BYTES};
use mbsfn_core::formation::{run_formation, validate, Algorithm, FormationConfiguration, FormationInput};
use mbsfn_core::frame::{rb_count as core_rb_count, tdd_config, CarrierGrid, TddConfiguration};
use mbsfn_core::harness::{emit_results, run_scenario as core_run_scenario, ScenarioSpec, METRICS};
use mbsfn_core::radio::{pathloss_db as core_pathloss_db, RadioModel};
use mbsfn_core::topology::{build_hex_grid, place_users, SynchronizationArea, UserTerminal};
use mbsfn_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidArgument(_) | Error::Config(_) | Error::Validation(_) => PyValueError::new_err(e.to_string()),
        Error::Io { .. } | Error::Csv { .. } | Error::Chart { .. } => PyOSError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn parse_algorithm(name: &str) -> PyResult<Algorithm> {
    name.parse().map_err(py_err)
}

/// Hexagonal grid of cells with users dropped uniformly in each cell.
#[pyclass(module = "mbsfn", frozen)]
struct Deployment {
    area: Arc<SynchronizationArea>,
    users: Arc<Vec<UserTerminal>>,
}

#[pymethods]
impl Deployment {
    #[new]
    #[pyo3(signature = (cells=10, users_per_cell=300, seed=1, interferers=true, isd_m=500.0))]
    fn new(cells: usize, users_per_cell: usize, seed: u64, interferers: bool, isd_m: f64) -> PyResult<Self> {
        let mut area = build_hex_grid(cells, isd_m).map_err(py_err)?;
        if interferers {
            area = area.with_interferer_ring();
        }
        let users = place_users(&area, users_per_cell, seed);
        Ok(Self {
            area: Arc::new(area),
            users: Arc::new(users),
        })
    }

    #[getter]
    fn n_cells(&self) -> usize {
        self.area.len()
    }

    #[getter]
    fn n_users(&self) -> usize {
        self.users.len()
    }

    /// `(user, home cell, x, y)` for every user.
    fn users(&self) -> Vec<(u32, u32, f64, f64)> {
        self.users
            .iter()
            .map(|u| (u.id.0, u.home_cell.0, u.position.x, u.position.y))
            .collect()
    }

    /// Runs one formation algorithm ("d2d-maf" or "scf").
    #[pyo3(signature = (tdd=5, bw_mhz=50, algorithm="d2d-maf"))]
    fn form(&self, tdd: u8, bw_mhz: u32, algorithm: &str) -> PyResult<Formation> {
        let algo = parse_algorithm(algorithm)?;
        let radio = RadioModel::default();
        let input = FormationInput {
            area: &self.area,
            users: &self.users,
            tdd: tdd_config(tdd).map_err(py_err)?,
            grid: CarrierGrid::new(bw_mhz).map_err(py_err)?,
            radio: &radio,
            policy: Default::default(),
        };
        let run = run_formation(&input, algo, false).map_err(py_err)?;
        Ok(Formation {
            area: Arc::clone(&self.area),
            users: Arc::clone(&self.users),
            tdd: input.tdd,
            grid: input.grid,
            radio,
            algorithm: algo,
            accepted_adr: run.accepted_adr,
            config: run.config,
        })
    }
}

/// Result of a formation run.
#[pyclass(module = "mbsfn", frozen)]
struct Formation {
    area: Arc<SynchronizationArea>,
    users: Arc<Vec<UserTerminal>>,
    tdd: TddConfiguration,
    grid: CarrierGrid,
    radio: RadioModel,
    algorithm: Algorithm,
    accepted_adr: Vec<f64>,
    config: FormationConfiguration,
}

#[pymethods]
impl Formation {
    #[getter]
    fn algorithm(&self) -> &'static str {
        self.algorithm.name()
    }

    /// Aggregate data rate in bit/s.
    #[getter]
    fn adr(&self) -> f64 {
        self.config.adr.total
    }

    /// `{"total", "mbsfn", "unicast", "d2d"}` in bit/s.
    fn adr_breakdown(&self) -> BTreeMap<&'static str, f64> {
        let a = &self.config.adr;
        BTreeMap::from([
            ("total", a.total),
            ("mbsfn", a.mbsfn),
            ("unicast", a.unicast),
            ("d2d", a.d2d),
        ])
    }

    /// ADR of each accepted configuration, the basic one first.
    #[getter]
    fn accepted_adr(&self) -> Vec<f64> {
        self.accepted_adr.clone()
    }

    fn areas<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.config
            .areas
            .iter()
            .map(|a| {
                let d = PyDict::new(py);
                d.set_item("id", a.id)?;
                d.set_item("cells", a.member_cells.iter().map(|c| c.0).collect::<Vec<_>>())?;
                d.set_item("mcs", a.mcs)?;
                d.set_item("rb_b", a.rb_b)?;
                d.set_item("d2d_mcs", a.d2d_mcs)?;
                d.set_item("rb_d2d", a.rb_d2d)?;
                Ok(d)
            })
            .collect()
    }

    /// user -> MBSFN area
    fn mbsfn_users(&self) -> BTreeMap<u32, u32> {
        self.config.mbsfn_users.iter().map(|(u, m)| (u.0, m.area)).collect()
    }

    /// user -> allocated RBs
    fn unicast_users(&self) -> BTreeMap<u32, u32> {
        self.config.unicast_users.iter().map(|(u, g)| (u.0, g.rbs)).collect()
    }

    /// user -> relay
    fn d2d_users(&self) -> BTreeMap<u32, u32> {
        self.config.d2d_users.iter().map(|(u, l)| (u.0, l.relay.0)).collect()
    }

    fn relays(&self) -> Vec<u32> {
        self.config.relays.iter().map(|r| r.0).collect()
    }

    /// Constraint violations; empty when the configuration is valid.
    fn validate(&self) -> Vec<String> {
        validate(&self.config, &self.area, &self.users, &self.grid)
            .iter()
            .map(ToString::to_string)
            .collect()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.config).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    /// Delivers `content_bytes` and returns the per-run metrics.
    #[pyo3(signature = (content_bytes=DEFAULT_CONTENT_BYTES))]
    fn simulate(&self, content_bytes: u64) -> PyResult<BTreeMap<&'static str, f64>> {
        let m = simulate_delivery(&self.config, &self.tdd, &self.grid, &self.radio, content_bytes).map_err(py_err)?;
        Ok(BTreeMap::from([
            ("adr_bps", m.adr),
            ("adr_b_bps", m.adr_b),
            ("adr_u_bps", m.adr_u),
            ("adr_d2d_bps", m.adr_d2d),
            ("avg_thr_bps", m.avg_throughput),
            ("delivery_time_s", m.delivery_time),
            ("used_d2d_rb_pct", m.used_d2d_rb_pct),
        ]))
    }

    fn __repr__(&self) -> String {
        format!(
            "Formation({}, areas={}, mbsfn={}, unicast={}, d2d={}, adr={:.4e})",
            self.algorithm,
            self.config.areas.len(),
            self.config.mbsfn_users.len(),
            self.config.unicast_users.len(),
            self.config.d2d_users.len(),
            self.config.adr.total
        )
    }
}

/// Runs a scenario sweep and returns its summary rows; writes CSV and SVG files when `out` is set.
#[pyfunction]
#[pyo3(signature = (scenario, reps=None, tdd=None, algorithms=None, sweep=None, seed=None, out=None))]
#[allow(clippy::too_many_arguments)]
fn run_scenario<'py>(
    py: Python<'py>,
    scenario: u8,
    reps: Option<u32>,
    tdd: Option<Vec<u8>>,
    algorithms: Option<Vec<String>>,
    sweep: Option<Vec<u32>>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mut spec = ScenarioSpec::new(scenario).map_err(py_err)?;
    if let Some(r) = reps {
        spec.replications = r;
    }
    if let Some(t) = tdd {
        spec.tdd = t;
    }
    if let Some(a) = algorithms {
        spec.algorithms = a.iter().map(|s| parse_algorithm(s)).collect::<PyResult<_>>()?;
    }
    if let Some(v) = sweep {
        spec.sweep_values = v;
    }
    if let Some(s) = seed {
        spec.base_seed = s;
    }
    let result = py.detach(|| core_run_scenario(&spec)).map_err(py_err)?;
    if let Some(dir) = out {
        emit_results(&result, &dir).map_err(py_err)?;
    }
    result
        .summary
        .iter()
        .map(|row| {
            let d = PyDict::new(py);
            d.set_item("scenario", row.scenario)?;
            d.set_item("sweep_value", row.sweep_value)?;
            d.set_item("tdd", row.tdd)?;
            d.set_item("algo", row.algo.name())?;
            for (m, s) in METRICS.iter().zip(&row.stats) {
                d.set_item(format!("{m}_mean"), s.mean)?;
                d.set_item(format!("{m}_ci95"), s.ci95)?;
            }
            Ok(d)
        })
        .collect()
}

/// Path loss in dB at `distance_km`.
#[pyfunction]
fn pathloss_db(distance_km: f64) -> f64 {
    core_pathloss_db(distance_km)
}

/// Resource blocks of a supported carrier bandwidth.
#[pyfunction]
fn rb_count(bandwidth_mhz: u32) -> PyResult<u32> {
    core_rb_count(bandwidth_mhz).map_err(py_err)
}

/// Subframe letters of a TDD configuration, e.g. "DSUDDDDDDD".
#[pyfunction]
fn tdd_pattern(index: u8) -> PyResult<String> {
    let cfg = tdd_config(index).map_err(py_err)?;
    Ok(cfg.pattern.iter().map(|k| k.letter()).collect())
}

#[pymodule]
fn mbsfn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Deployment>()?;
    m.add_class::<Formation>()?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(pathloss_db, m)?)?;
    m.add_function(wrap_pyfunction!(rb_count, m)?)?;
    m.add_function(wrap_pyfunction!(tdd_pattern, m)?)?;
    m.add("DEFAULT_CONTENT_BYTES", DEFAULT_CONTENT_BYTES)?;
    Ok(())
}

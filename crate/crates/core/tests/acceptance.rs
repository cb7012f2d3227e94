//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails that is not a recorded deviation.

mod common;

use std::time::Instant;

use mbsfn_core::formation::{run_formation, validate, Algorithm};
use mbsfn_core::frame::{rb_count, tdd_config, TDD_CONFIG_COUNT};
use mbsfn_core::harness::{run_replication, run_scenario, summarize, GridPoint, ScenarioResult, ScenarioSpec};
use mbsfn_core::radio::pathloss_db;

struct Outcome {
    id: u8,
    name: &'static str,
    pass: bool,
    /// A failure analysed in the project notes; it is still reported as FAIL
    /// but does not fail the run.
    recorded: bool,
    detail: String,
}

fn outcome(id: u8, name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome {
        id,
        name,
        pass,
        recorded: false,
        detail,
    }
}

fn constraint_suite() -> Outcome {
    let t = Instant::now();
    let mut problems = Vec::new();
    let mut states = 0usize;
    for seed in 0..1000u64 {
        let inst = common::random_instance(seed, 10, 100);
        for algo in Algorithm::ALL {
            let run = match run_formation(&inst.input(), algo, true) {
                Ok(r) => r,
                Err(e) => {
                    problems.push(format!("seed {seed} {algo}: {e}"));
                    continue;
                }
            };
            for (i, cfg) in run.states.iter().chain([&run.config]).enumerate() {
                let v = validate(cfg, &inst.area, &inst.users, &inst.grid);
                if !v.is_empty() {
                    problems.push(format!("seed {seed} {algo} state {i}: {v:?}"));
                }
            }
            states += run.states.len();
            if run.accepted_adr.windows(2).any(|w| w[1] < w[0]) {
                problems.push(format!("seed {seed} {algo}: ADR decreased {:?}", run.accepted_adr));
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = problems.is_empty() && secs < 120.0;
    let mut detail = format!("1000 instances, {states} accepted states validated in {secs:.1} s");
    if let Some(p) = problems.first() {
        detail += &format!("; {} problems, first: {p}", problems.len());
    }
    outcome(1, "constraint suite", pass, detail)
}

fn oracle_equivalence() -> Outcome {
    let mut enumerated = 0;
    let mut failure = None;
    for seed in 1000..1100u64 {
        let inst = common::small_instance(seed, 4, 12);
        match common::check_oracle(&inst) {
            Ok(n) => enumerated += n,
            Err(e) => {
                failure = Some(format!("seed {seed}: {e}"));
                break;
            }
        }
    }
    match failure {
        None => outcome(
            2,
            "oracle equivalence",
            true,
            format!("100 instances match the reference; {enumerated} enumerated states"),
        ),
        Some(e) => outcome(2, "oracle equivalence", false, e),
    }
}

fn unit_anchors() -> Outcome {
    // rows of the TDD frame configuration table
    let table = [
        "DSUUUDSUUU",
        "DSUUDDSUUD",
        "DSUDDDSUDD",
        "DSUUUDDDDD",
        "DSUUDDDDDD",
        "DSUDDDDDDD",
        "DSUUUDSUUD",
    ];
    let mut bad = Vec::new();
    if pathloss_db(1.0) != 128.1 {
        bad.push(format!("pathloss(1 km) = {}", pathloss_db(1.0)));
    }
    if pathloss_db(0.1) != 90.5 {
        bad.push(format!("pathloss(0.1 km) = {}", pathloss_db(0.1)));
    }
    match rb_count(50) {
        Ok(270) => {}
        other => bad.push(format!("rb_count(50) = {other:?}")),
    }
    for (i, row) in table.iter().enumerate() {
        let got = tdd_config(i as u8).map(|c| c.pattern.iter().map(|k| k.letter()).collect::<String>());
        if got.as_deref().ok() != Some(*row) {
            bad.push(format!("tdd {i} = {got:?}"));
        }
    }
    let pass = bad.is_empty();
    let detail = if pass {
        "pathloss 128.1/90.5 dB, 270 RBs, 7 TDD rows".to_string()
    } else {
        bad.join("; ")
    };
    outcome(3, "unit anchors", pass, detail)
}

fn mean(r: &ScenarioResult, v: u32, tdd: u8, algo: Algorithm, metric: &str) -> f64 {
    r.row(v, tdd, algo).map_or(f64::NAN, |row| row.mean(metric))
}

fn dominance(r: &ScenarioResult, secs: f64) -> Outcome {
    let mut parts = Vec::new();
    let mut pass = secs < 600.0;
    for t in 0..TDD_CONFIG_COUNT {
        let d = mean(r, 10, t, Algorithm::D2dMaf, "adr_bps");
        let s = mean(r, 10, t, Algorithm::Scf, "adr_bps");
        pass &= d >= s;
        parts.push(format!("tdd{t} {:.3e}/{:.3e}", d, s));
    }
    outcome(
        4,
        "baseline dominance",
        pass,
        format!("D2D-MAF/SCF mean ADR: {}; {secs:.0} s", parts.join(", ")),
    )
}

fn tdd_ordering(r: &ScenarioResult) -> Outcome {
    let adr: Vec<f64> = (0..TDD_CONFIG_COUNT)
        .map(|t| mean(r, 10, t, Algorithm::D2dMaf, "adr_bps"))
        .collect();
    let argmax = (0..adr.len()).max_by(|&a, &b| adr[a].total_cmp(&adr[b])).unwrap();
    let argmin = (0..adr.len()).min_by(|&a, &b| adr[a].total_cmp(&adr[b])).unwrap();
    let listing: Vec<String> = adr.iter().enumerate().map(|(t, a)| format!("tdd{t} {a:.3e}")).collect();
    Outcome {
        recorded: true,
        ..outcome(
            5,
            "TDD ordering",
            argmax == 5 && argmin == 0,
            format!("max at tdd{argmax}, min at tdd{argmin} ({})", listing.join(", ")),
        )
    }
}

/// Steps between consecutive sweep means that break `ok`, as (relative change, description).
fn monotone_breaks(r: &ScenarioResult, metric: &str, ok: impl Fn(f64, f64) -> bool) -> Vec<(f64, String)> {
    let mut out = Vec::new();
    for &t in &r.spec.tdd {
        for &algo in &r.spec.algorithms {
            let pts: Vec<(u32, f64)> = r
                .spec
                .sweep_values
                .iter()
                .map(|&v| (v, mean(r, v, t, algo, metric)))
                .collect();
            for w in pts.windows(2) {
                if !ok(w[0].1, w[1].1) {
                    let rel = (w[1].1 - w[0].1) / w[0].1.abs();
                    out.push((
                        rel,
                        format!("tdd{t} {algo} {}->{}: {:.6e} -> {:.6e}", w[0].0, w[1].0, w[0].1, w[1].1),
                    ));
                }
            }
        }
    }
    out
}

fn sweeps(cells: &ScenarioResult, bw: &ScenarioResult, users: &ScenarioResult) -> Outcome {
    let c = monotone_breaks(cells, "adr_bps", |a, b| b > a);
    let b = monotone_breaks(bw, "adr_bps", |a, b| b > a);
    let u = monotone_breaks(users, "avg_thr_bps", |a, b| b <= a);
    let pass = c.is_empty() && b.is_empty() && u.is_empty();
    let mut detail = format!(
        "breaks over 14 series: cells {}, bandwidth {}, users {}",
        c.len(),
        b.len(),
        u.len()
    );
    if let Some((_, first)) = c.iter().chain(&b).next() {
        detail += &format!("; first: {first}");
    }
    if let Some((rel, worst)) = u.iter().max_by(|x, y| x.0.total_cmp(&y.0)) {
        let noise = u.iter().filter(|x| x.0 <= 1e-12).count();
        detail += &format!(
            "; throughput rises with users by up to {rel:.2e} relative ({worst}), {noise} of the user breaks are below 1e-12"
        );
    }
    Outcome {
        // the user sweep is the recorded deviation; cell and bandwidth breaks are not
        recorded: c.is_empty() && b.is_empty(),
        ..outcome(6, "monotonic sweeps", pass, detail)
    }
}

fn utilization(r: &ScenarioResult) -> Outcome {
    let u0 = mean(r, 10, 0, Algorithm::D2dMaf, "used_d2d_rb_pct");
    let u5 = mean(r, 10, 5, Algorithm::D2dMaf, "used_d2d_rb_pct");
    outcome(
        7,
        "D2D utilization",
        u5 > u0,
        format!("used D2D RB tdd5 {u5:.2}% vs tdd0 {u0:.2}%"),
    )
}

fn decomposition(r: &ScenarioResult) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let mut warn = false;
    for t in 0..TDD_CONFIG_COUNT {
        let ours = mean(r, 10, t, Algorithm::D2dMaf, "adr_d2d_bps") + mean(r, 10, t, Algorithm::D2dMaf, "adr_u_bps");
        let base = mean(r, 10, t, Algorithm::Scf, "adr_u_bps");
        pass &= ours > base;
        let ratio = ours / base;
        warn |= ratio < 10.0;
        let ratio = if base == 0.0 {
            "unbounded".to_string()
        } else {
            format!("{ratio:.1}")
        };
        parts.push(format!("tdd{t} {ours:.3e}/{base:.3e} ratio {ratio}"));
    }
    let mut detail = format!("D2D-MAF (D2D+unicast) / SCF unicast: {}", parts.join(", "));
    if warn {
        detail += "; WARNING ratio below 10";
    }
    outcome(8, "ADR decomposition", pass, detail)
}

fn performance() -> Outcome {
    let spec = ScenarioSpec::new(2).unwrap();
    let point = GridPoint {
        sweep_value: 36,
        users_per_cell: 300,
        cells: 36,
        bandwidth_mhz: 50,
    };
    let t = Instant::now();
    let rows = run_replication(&spec, &point, 0);
    let secs = t.elapsed().as_secs_f64();
    match rows {
        Ok(rows) => outcome(
            9,
            "performance",
            secs < 60.0,
            format!(
                "36 cells x 300 users, {} formations and deliveries in {secs:.1} s",
                rows.len()
            ),
        ),
        Err(e) => outcome(9, "performance", false, e.to_string()),
    }
}

fn scenario(id: u8, sweep: Option<Vec<u32>>) -> ScenarioResult {
    let mut spec = ScenarioSpec::new(id).unwrap();
    if let Some(v) = sweep {
        spec.sweep_values = v;
    }
    run_scenario(&spec).unwrap_or_else(|e| panic!("scenario {id}: {e}"))
}

fn main() {
    let started = Instant::now();
    let mut results = vec![constraint_suite(), oracle_equivalence(), unit_anchors()];

    // scenario 2 defaults are the first point of the cell sweep
    let t = Instant::now();
    let base = scenario(2, Some(vec![10]));
    let base_secs = t.elapsed().as_secs_f64();
    let rest = scenario(2, Some((12..=36).step_by(2).collect()));
    let spec = ScenarioSpec::new(2).unwrap();
    let raw: Vec<_> = base.raw.iter().chain(&rest.raw).cloned().collect();
    let cells = ScenarioResult {
        summary: summarize(&spec, &raw),
        spec,
        raw,
    };
    let bw = scenario(3, None);
    let users = scenario(1, None);

    results.push(dominance(&cells, base_secs));
    results.push(tdd_ordering(&cells));
    results.push(sweeps(&cells, &bw, &users));
    results.push(utilization(&cells));
    results.push(decomposition(&cells));
    results.push(performance());
    results.sort_by_key(|o| o.id);

    let mut unexpected = 0;
    for o in &results {
        let tag = match (o.pass, o.recorded) {
            (true, _) => "PASS",
            (false, true) => "FAIL (recorded deviation)",
            (false, false) => {
                unexpected += 1;
                "FAIL"
            }
        };
        println!("criterion {} [{}] {}: {}", o.id, tag, o.name, o.detail);
    }
    let passed = results.iter().filter(|o| o.pass).count();
    println!(
        "acceptance: {passed}/{} passed in {:.0} s",
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if unexpected > 0 {
        std::process::exit(1);
    }
}

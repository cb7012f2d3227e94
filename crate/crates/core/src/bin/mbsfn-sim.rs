use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use mbsfn_core::formation::{run_formation, validate, Algorithm, FormationInput};
use mbsfn_core::frame::{tdd_config, CarrierGrid};
use mbsfn_core::harness::{emit_results, run_scenario, ScenarioConfig, SweepParameter};
use mbsfn_core::topology::{build_hex_grid, place_users};

#[derive(Parser)]
#[command(name = "mbsfn-sim", version, about = "MBSFN area formation and delivery simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario sweep and write CSV and SVG results.
    Run(RunArgs),
    /// Form one configuration and print it as JSON.
    Form(FormArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    scenario: Option<u8>,
    /// Comma-separated TDD configuration indices.
    #[arg(long, value_delimiter = ',')]
    tdd: Option<Vec<u8>>,
    #[arg(long, value_delimiter = ',')]
    algo: Option<Vec<Algorithm>>,
    #[arg(long)]
    reps: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// `A..B:step`, a comma list, or one value.
    #[arg(long)]
    users_per_cell: Option<String>,
    #[arg(long)]
    cells: Option<String>,
    #[arg(long)]
    bw_mhz: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(clap::Args)]
struct FormArgs {
    #[arg(long, default_value_t = 10)]
    cells: u32,
    #[arg(long, default_value_t = 300)]
    users_per_cell: u32,
    #[arg(long, default_value_t = 50)]
    bw_mhz: u32,
    #[arg(long, default_value_t = 5)]
    tdd: u8,
    #[arg(long, default_value_t = Algorithm::D2dMaf)]
    algo: Algorithm,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Leave out the ring of interfering cells around the grid.
    #[arg(long)]
    no_interferers: bool,
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `A..B:step` (inclusive), `A,B,C` or `A`.
fn parse_values(s: &str) -> Result<Vec<u32>> {
    if let Some((range, step)) = s.split_once(':') {
        let (a, b) = range.split_once("..").context("range must look like A..B:step")?;
        let (a, b, step): (u32, u32, usize) = (a.trim().parse()?, b.trim().parse()?, step.trim().parse()?);
        if step == 0 || a > b {
            bail!("empty range {s}");
        }
        return Ok((a..=b).step_by(step).collect());
    }
    s.split(',')
        .map(|v| v.trim().parse::<u32>().with_context(|| format!("bad value {v:?}")))
        .collect()
}

fn single(values: Vec<u32>, flag: &str) -> Result<u32> {
    match values[..] {
        [v] => Ok(v),
        _ => bail!("--{flag} takes one value unless it is the swept parameter"),
    }
}

fn run(args: RunArgs) -> Result<()> {
    let file = match &args.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    let mut spec = file.into_spec(args.scenario)?;
    let sweep = spec.sweep();
    if let Some(t) = args.tdd {
        spec.tdd = t;
    }
    if let Some(a) = args.algo {
        spec.algorithms = a;
    }
    if let Some(r) = args.reps {
        spec.replications = r;
    }
    if let Some(s) = args.seed {
        spec.base_seed = s;
    }
    for (flag, value, param) in [
        ("users-per-cell", &args.users_per_cell, SweepParameter::UsersPerCell),
        ("cells", &args.cells, SweepParameter::Cells),
        ("bw-mhz", &args.bw_mhz, SweepParameter::BandwidthMhz),
    ] {
        let Some(text) = value else { continue };
        let values = parse_values(text)?;
        if param == sweep {
            spec.sweep_values = values;
        } else {
            let v = single(values, flag)?;
            match param {
                SweepParameter::UsersPerCell => spec.users_per_cell = v,
                SweepParameter::Cells => spec.cells = v,
                SweepParameter::BandwidthMhz => spec.bandwidth_mhz = v,
            }
        }
    }
    let result = run_scenario(&spec)?;
    let files = emit_results(&result, &args.out)?;
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

fn form(args: FormArgs) -> Result<()> {
    let mut area = build_hex_grid(args.cells as usize, 500.0)?;
    if !args.no_interferers {
        area = area.with_interferer_ring();
    }
    let users = place_users(&area, args.users_per_cell as usize, args.seed);
    let radio = Default::default();
    let input = FormationInput {
        area: &area,
        users: &users,
        tdd: tdd_config(args.tdd)?,
        grid: CarrierGrid::new(args.bw_mhz)?,
        radio: &radio,
        policy: Default::default(),
    };
    let run = run_formation(&input, args.algo, false)?;
    let violations = validate(&run.config, &area, &users, &input.grid);
    if !violations.is_empty() {
        bail!("formed configuration is invalid: {violations:?}");
    }
    let json = serde_json::to_string_pretty(&run.config)?;
    match args.out {
        Some(p) => std::fs::write(&p, json).with_context(|| format!("writing {}", p.display()))?,
        None => writeln!(std::io::stdout(), "{json}")?,
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::init();
    match Cli::parse().command {
        Command::Run(a) => run(a),
        Command::Form(a) => form(a),
    }
}

use std::fs;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use super::{RawRecord, ScenarioResult, SummaryRow, METRICS};
use crate::error::{Error, Result};

pub const RAW_COLUMNS: [&str; 18] = [
    "scenario",
    "sweep_value",
    "tdd",
    "algo",
    "rep",
    "seed",
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

/// Key columns of `summary.csv`; each metric then contributes `_mean` and `_ci95`.
pub const SUMMARY_COLUMNS: [&str; 4] = ["scenario", "sweep_value", "tdd", "algo"];

/// (file stem, metric column, axis label)
const CHARTS: [(&str, &str, &str); 7] = [
    ("adr", "adr_bps", "ADR [bit/s]"),
    ("adr_b", "adr_b_bps", "MBSFN ADR [bit/s]"),
    ("adr_u", "adr_u_bps", "unicast ADR [bit/s]"),
    ("adr_d2d", "adr_d2d_bps", "D2D ADR [bit/s]"),
    ("avg_thr", "avg_thr_bps", "average throughput [bit/s]"),
    ("delivery_time", "delivery_time_s", "delivery time [s]"),
    ("used_d2d_rb_pct", "used_d2d_rb_pct", "used RB for D2D [%]"),
];

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn write_raw(path: &Path, raw: &[RawRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_err(path))?;
    w.write_record(RAW_COLUMNS).map_err(csv_err(path))?;
    for r in raw {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_summary(path: &Path, summary: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let mut header: Vec<String> = SUMMARY_COLUMNS.iter().map(|s| s.to_string()).collect();
    for m in METRICS {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_ci95"));
    }
    w.write_record(&header).map_err(csv_err(path))?;
    for row in summary {
        let mut rec = vec![
            row.scenario.to_string(),
            row.sweep_value.to_string(),
            row.tdd.to_string(),
            row.algo.to_string(),
        ];
        for s in &row.stats {
            rec.push(s.mean.to_string());
            rec.push(s.ci95.to_string());
        }
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

type Series = (String, Vec<(f64, f64)>);

fn draw_chart(path: &Path, title: &str, x_label: &str, y_label: &str, series: &[Series]) -> Result<()> {
    let fail = |e: &dyn std::fmt::Display| Error::Chart {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let pts = series.iter().flat_map(|s| s.1.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let pad = if y1 > y0 {
        0.05 * (y1 - y0)
    } else {
        y0.abs().max(1.0) * 0.05
    };
    let (y0, y1) = (y0 - pad, y1 + pad);

    let root = SVGBackend::new(path, (960, 620)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| fail(&e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(15)
        .x_label_area_size(45)
        .y_label_area_size(90)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(|e| fail(&e))?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc(y_label)
        .y_label_formatter(&|v| format!("{v:.3e}"))
        .draw()
        .map_err(|e| fail(&e))?;
    for (i, (name, points)) in series.iter().enumerate() {
        let color = Palette99::pick(i);
        chart
            .draw_series(LineSeries::new(points.iter().copied(), color.stroke_width(2)))
            .map_err(|e| fail(&e))?
            .label(name)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], Palette99::pick(i).stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .position(SeriesLabelPosition::UpperLeft)
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .draw()
        .map_err(|e| fail(&e))?;
    root.present().map_err(|e| fail(&e))
}

/// Writes `raw.csv`, `summary.csv` and one chart per metric into `out_dir`.
///
/// Returns the paths written. An empty result yields header-only CSVs and no charts.
pub fn emit_results(result: &ScenarioResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let raw_path = out_dir.join("raw.csv");
    write_raw(&raw_path, &result.raw)?;
    let summary_path = out_dir.join("summary.csv");
    write_summary(&summary_path, &result.summary)?;
    let mut written = vec![raw_path, summary_path];
    if result.summary.is_empty() {
        return Ok(written);
    }

    let sweep = result.spec.sweep();
    let mut keys: Vec<(u8, _)> = Vec::new();
    for r in &result.summary {
        if !keys.contains(&(r.tdd, r.algo)) {
            keys.push((r.tdd, r.algo));
        }
    }
    for (stem, column, label) in CHARTS {
        let series: Vec<Series> = keys
            .iter()
            .map(|&(tdd, algo)| {
                let pts = result
                    .summary
                    .iter()
                    .filter(|r| r.tdd == tdd && r.algo == algo)
                    .map(|r| (f64::from(r.sweep_value), r.mean(column)))
                    .collect();
                (format!("TDD {tdd} {algo}"), pts)
            })
            .collect();
        let path = out_dir.join(format!("{stem}_vs_{}.svg", sweep.axis()));
        let title = format!("Scenario {}: {label} vs {}", result.spec.scenario, sweep.label());
        draw_chart(&path, &title, sweep.label(), label, &series)?;
        written.push(path);
    }
    Ok(written)
}

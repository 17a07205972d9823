//! SVG curves plus the plotted data tables.

use std::fs;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use super::metrics::{read_metrics, write_csv};
use super::SimError;
use super::experiments::ScaleRow;

#[derive(serde::Serialize)]
struct Point {
    x: f64,
    y: f64,
}

fn plot_err<E: std::fmt::Display>(e: E) -> SimError {
    SimError::Plot(e.to_string())
}

fn line_chart(path: &Path, points: &[(f64, f64)], x_desc: &str, y_desc: &str) -> Result<(), SimError> {
    let (x0, x1) = points.iter().fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (y0, y1) = points.iter().fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let pad = |lo: f64, hi: f64| if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let ((x0, x1), (y0, y1)) = (pad(x0, x1), pad(y0, y1));
    let root = SVGBackend::new(path, (720, 420)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .margin(16)
        .x_label_area_size(36)
        .y_label_area_size(56)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc(x_desc).y_desc(y_desc).draw().map_err(plot_err)?;
    chart.draw_series(LineSeries::new(points.iter().copied(), &BLUE)).map_err(plot_err)?;
    root.present().map_err(plot_err)
}

fn emit(out_dir: &Path, stem: &str, points: &[(f64, f64)], x: &str, y: &str) -> Result<Vec<PathBuf>, SimError> {
    let svg = out_dir.join(format!("{stem}.svg"));
    let table = out_dir.join(format!("{stem}.csv"));
    line_chart(&svg, points, x, y)?;
    write_csv(&table, &points.iter().map(|p| Point { x: p.0, y: p.1 }).collect::<Vec<_>>())?;
    Ok(vec![svg, table])
}

/// Renders curves from a metrics CSV (accuracy and block time per round) or
/// a scaling CSV (block time per node count) into `out_dir`.
pub fn emit_plots(input: &Path, out_dir: &Path) -> Result<Vec<PathBuf>, SimError> {
    if !input.is_file() {
        return Err(SimError::NotFound(input.to_path_buf()));
    }
    let text = fs::read_to_string(input).map_err(|e| SimError::Io(e.to_string()))?;
    if text.lines().nth(1).is_none() {
        return Err(SimError::EmptyInput(input.to_path_buf()));
    }
    fs::create_dir_all(out_dir).map_err(|e| SimError::Io(e.to_string()))?;
    if text.starts_with("nodes,") {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let rows: Vec<ScaleRow> = r.deserialize().collect::<Result<_, _>>().map_err(|e| SimError::Io(e.to_string()))?;
        let pts: Vec<_> = rows.iter().map(|r| (r.nodes as f64, r.mean_block_generation_s)).collect();
        return emit(out_dir, "time_vs_nodes", &pts, "nodes", "block generation (s)");
    }
    let rows = read_metrics(input)?;
    let acc: Vec<_> = rows.iter().map(|r| (r.round as f64, r.global_accuracy)).collect();
    let time: Vec<_> = rows.iter().map(|r| (r.round as f64, r.block_generation_s)).collect();
    let mut out = emit(out_dir, "accuracy", &acc, "round", "global accuracy")?;
    out.extend(emit(out_dir, "block_time", &time, "round", "block generation (s)")?);
    Ok(out)
}

//! Files written for a finished mission.
//!
//! - `metrics.json`: per-mission summary
//! - `trace_robot_<id>.csv`: `step,x,y,realized_cost,reading`
//! - `truth.pgm`, `reconstruction.pgm`: P2 heatmaps scaled by the truth's min/max
//! - `paths.svg`: robot paths over the truth heatmap

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coordination::{Method, MissionResult, RobotStatus};
use crate::environment::{GridSpec, ScalarField};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotSummary {
    pub id: usize,
    pub status: RobotStatus,
    pub steps: usize,
    pub realized_cost: f64,
    pub remaining_budget: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MissionMetrics {
    pub method: Method,
    pub seed: u64,
    pub mse: f64,
    pub mean_remaining_budget: f64,
    pub samples: usize,
    pub rounds: usize,
    pub robots: Vec<RobotSummary>,
}

impl MissionMetrics {
    pub fn from_result(result: &MissionResult) -> Self {
        MissionMetrics {
            method: result.method,
            seed: result.seed,
            mse: result.mse,
            mean_remaining_budget: result.mean_remaining_budget(),
            samples: result.model.len(),
            rounds: result.rounds,
            robots: result
                .robots
                .iter()
                .map(|r| RobotSummary {
                    id: r.id,
                    status: r.status,
                    steps: r.steps.len(),
                    realized_cost: r.realized_cost(),
                    remaining_budget: r.remaining_budget,
                })
                .collect(),
        }
    }
}

fn write(path: PathBuf, contents: &str) -> Result<PathBuf> {
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn trace_csv(result: &MissionResult, robot: usize) -> String {
    let mut out = String::from("step,x,y,realized_cost,reading\n");
    for s in &result.robots[robot].steps {
        let _ = writeln!(out, "{},{},{},{},{}", s.step, s.loc.x, s.loc.y, s.realized_cost, s.reading);
    }
    out
}

/// ASCII graymap of `values` (row-major over `grid`), mapping `[lo, hi]` to
/// 0..=255 and clamping outside it.
pub fn pgm(grid: GridSpec, values: &[f64], lo: f64, hi: f64) -> String {
    let span = hi - lo;
    let mut out = format!("P2\n{} {}\n255\n", grid.width(), grid.height());
    for row in values.chunks(grid.width() as usize) {
        let line: Vec<String> = row
            .iter()
            .map(|&v| {
                let t = if span > 0.0 { (v - lo) / span } else { 0.0 };
                ((t.clamp(0.0, 1.0) * 255.0).round() as u8).to_string()
            })
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

const PALETTE: [&str; 6] = ["#e41a1c", "#377eb8", "#4daf4a", "#984ea3", "#ff7f00", "#a65628"];
const CELL: u32 = 20;

pub fn paths_svg(result: &MissionResult, truth: &[f64], lo: f64, hi: f64) -> String {
    let grid = result.grid;
    let (w, h) = (grid.width() * CELL, grid.height() * CELL);
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    );
    let span = hi - lo;
    for (i, &v) in truth.iter().enumerate() {
        let loc = grid.location(i);
        let t = if span > 0.0 { ((v - lo) / span).clamp(0.0, 1.0) } else { 0.0 };
        let g = (t * 255.0).round() as u8;
        let _ = writeln!(
            out,
            "<rect x=\"{}\" y=\"{}\" width=\"{CELL}\" height=\"{CELL}\" fill=\"rgb({g},{g},{g})\"/>",
            loc.x * CELL,
            loc.y * CELL
        );
    }
    let center = |c: u32| c * CELL + CELL / 2;
    for r in &result.robots {
        let color = PALETTE[r.id % PALETTE.len()];
        let points: Vec<String> = std::iter::once(r.start)
            .chain(r.sampled())
            .map(|l| format!("{},{}", center(l.x), center(l.y)))
            .collect();
        let _ = writeln!(
            out,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"3\" points=\"{}\"/>",
            points.join(" ")
        );
        for l in r.sampled() {
            let _ = writeln!(
                out,
                "<circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"{color}\"/>",
                center(l.x),
                center(l.y)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Writes every artifact for `result` into `outdir`, creating it if needed.
pub fn emit_artifacts(result: &MissionResult, field: &ScalarField, outdir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(outdir).map_err(|e| Error::io(outdir, e))?;
    let mut written = Vec::new();

    let metrics = serde_json::to_string_pretty(&MissionMetrics::from_result(result))
        .expect("metrics serialize");
    written.push(write(outdir.join("metrics.json"), &(metrics + "\n"))?);

    for r in &result.robots {
        written.push(write(
            outdir.join(format!("trace_robot_{}.csv", r.id)),
            &trace_csv(result, r.id),
        )?);
    }

    let truth = field.dense();
    let lo = truth.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = truth.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    written.push(write(outdir.join("truth.pgm"), &pgm(result.grid, &truth, lo, hi))?);
    written.push(write(
        outdir.join("reconstruction.pgm"),
        &pgm(result.grid, &result.estimate, lo, hi),
    )?);
    written.push(write(outdir.join("paths.svg"), &paths_svg(result, &truth, lo, hi))?);
    Ok(written)
}

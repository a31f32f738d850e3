//! Experiment harness: JSON configs, seeded batches, method comparisons and
//! on-disk artifacts.

mod artifacts;
mod batch;
mod config;

pub use artifacts::{emit_artifacts, paths_svg, pgm, trace_csv, MissionMetrics, RobotSummary};
pub use batch::{compare_methods, instance, run_batch, run_batch_with, BatchResult, MetricsReport, MetricsRow};
pub use config::{
    parse_config, parse_config_str, ExperimentConfig, FieldSpec, RawConfig, ResampleSpec, RobotsSpec, TeamSpec,
};

use std::path::Path;

use crate::error::{Error, Result};

/// Writes `metrics.json` and `timing.json` for a set of batches, plus the
/// per-mission artifacts under `<method>/seed_<seed>/`.
///
/// Timing lives in its own file so that `metrics.json` is a pure function of
/// the config and seed.
pub fn write_report(cfg: &ExperimentConfig, batches: &[BatchResult], outdir: &Path) -> Result<()> {
    std::fs::create_dir_all(outdir).map_err(|e| Error::io(outdir, e))?;
    let report = MetricsReport {
        base_seed: cfg.base_seed,
        rows: batches.iter().map(|b| b.row.clone()).collect(),
    };
    let path = outdir.join("metrics.json");
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;

    let timing: Vec<serde_json::Value> = batches
        .iter()
        .map(|b| {
            serde_json::json!({
                "method": b.row.method,
                "wall_clock_seconds": b.wall_clock_seconds,
            })
        })
        .collect();
    let path = outdir.join("timing.json");
    let text = serde_json::to_string_pretty(&timing).expect("timing serializes") + "\n";
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;

    for b in batches {
        let method_dir = outdir.join(b.row.method.name().to_ascii_lowercase());
        for m in &b.missions {
            let (field, _) = instance(cfg, m.seed)?;
            emit_artifacts(m, &field, &method_dir.join(format!("seed_{}", m.seed)))?;
        }
    }
    Ok(())
}

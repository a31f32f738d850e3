use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coordination::{run_mission, Method, MissionResult};
use crate::environment::{initial_locations, LocationSet, MixtureField, ScalarField};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, FieldSpec};
use crate::rng::{mission_stream, run_seed, Purpose};

/// Aggregate over one batch of missions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub method: Method,
    pub budget: f64,
    pub team_size: usize,
    pub runs: usize,
    pub mean_mse: f64,
    /// Mean over runs of the per-robot mean remaining budget.
    pub mean_remaining_budget: f64,
    /// Stranded robots summed over all runs.
    pub stranded: usize,
}

#[derive(Clone, Debug)]
pub struct BatchResult {
    pub row: MetricsRow,
    pub missions: Vec<MissionResult>,
    pub wall_clock_seconds: f64,
}

/// Ground truth and initial candidate pool for the run with `seed`.
pub fn instance(cfg: &ExperimentConfig, seed: u64) -> Result<(ScalarField, LocationSet)> {
    let field = match (&cfg.field, &cfg.raster) {
        (_, Some(raster)) => ScalarField::Grid(raster.clone()),
        (FieldSpec::Mixture { components }, None) => {
            ScalarField::Mixture(MixtureField::new(cfg.grid, components.clone())?)
        }
        (FieldSpec::RandomMixture, None) => ScalarField::Mixture(MixtureField::random(
            cfg.grid,
            &mut mission_stream(seed, Purpose::Field),
        )),
        (FieldSpec::Raster { .. }, None) => {
            return Err(Error::config("field", "raster was not loaded"));
        }
    };
    let pool = initial_locations(cfg.grid, cfg.n_locations, &mut mission_stream(seed, Purpose::Locations))?;
    Ok((field, pool))
}

/// Runs `cfg.runs` missions with `method`, seeds `base_seed`, `base_seed + 1`, ...
pub fn run_batch_with(cfg: &ExperimentConfig, method: Method) -> Result<BatchResult> {
    let started = Instant::now();
    let mission_cfg = cfg.mission(method);
    let missions = (0..cfg.runs as u64)
        .into_par_iter()
        .map(|i| {
            let seed = run_seed(cfg.base_seed, i);
            let wrap = |e: Error| Error::Run {
                seed,
                source: Box::new(e),
            };
            let (field, pool) = instance(cfg, seed).map_err(wrap)?;
            run_mission(&mission_cfg, &field, &pool, seed).map_err(wrap)
        })
        .collect::<Result<Vec<_>>>()?;

    let n = missions.len() as f64;
    let row = MetricsRow {
        method,
        budget: cfg.budget,
        team_size: cfg.robots.len(),
        runs: missions.len(),
        mean_mse: missions.iter().map(|m| m.mse).sum::<f64>() / n,
        mean_remaining_budget: missions.iter().map(|m| m.mean_remaining_budget()).sum::<f64>() / n,
        stranded: missions.iter().map(|m| m.stranded()).sum(),
    };
    Ok(BatchResult {
        row,
        missions,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    })
}

pub fn run_batch(cfg: &ExperimentConfig) -> Result<BatchResult> {
    run_batch_with(cfg, cfg.method)
}

/// One batch per method over the same seeds, so fields, pools and robot
/// streams are paired across methods.
pub fn compare_methods(cfg: &ExperimentConfig, methods: &[Method]) -> Result<Vec<BatchResult>> {
    if methods.is_empty() {
        return Err(Error::config("methods", "at least one method required"));
    }
    methods.iter().map(|&m| run_batch_with(cfg, m)).collect()
}

/// Metrics file contents: one row per method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub base_seed: u64,
    pub rows: Vec<MetricsRow>,
}

//! Experiment configuration (JSON).
//!
//! Only `field`, `robots` and `budget` are required. Everything else
//! defaults to the standard synthetic setup: a 30x30 grid, 100 candidate
//! locations, branching 30, exploration 3, discount 1, 1000 tree nodes per
//! step, move cost `0.5·d + U[0, 1]`, Matérn length scale 1, and a 30-cell
//! resample every second step.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coordination::{Method, MissionConfig, RobotSpec};
use crate::environment::{load_grid_field, GridField, GridSpec, Location, MixtureComponent, MixtureField};
use crate::error::{Error, Result};
use crate::gp::KernelParams;
use crate::planner::{CostParams, PlannerParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    /// A fresh random Gaussian mixture for every run.
    RandomMixture,
    /// A fixed mixture.
    Mixture { components: Vec<MixtureComponent> },
    /// A raster CSV; relative paths resolve against the config file.
    Raster {
        path: PathBuf,
        #[serde(default)]
        standardize: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RobotsSpec {
    List(Vec<RobotSpec>),
    Team(TeamSpec),
}

/// `count` robots sharing a start and a final location. Omitted locations
/// default to the upper-left and lower-right corners.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeamSpec {
    pub count: usize,
    #[serde(default)]
    pub start: Option<Location>,
    #[serde(default, rename = "final")]
    pub final_loc: Option<Location>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResampleSpec {
    pub size: usize,
    pub period: usize,
}

impl Default for ResampleSpec {
    fn default() -> Self {
        ResampleSpec { size: 30, period: 2 }
    }
}

/// The on-disk form, before validation.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub field: FieldSpec,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default = "default_n_locations")]
    pub n_locations: usize,
    pub robots: RobotsSpec,
    pub budget: f64,
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default)]
    pub planner: PlannerParams,
    #[serde(default)]
    pub cost: CostParams,
    #[serde(default)]
    pub gp: KernelParams,
    #[serde(default)]
    pub resample: ResampleSpec,
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default = "default_true")]
    pub share_readings: bool,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub base_seed: u64,
}

fn default_n_locations() -> usize {
    100
}

fn default_method() -> String {
    "rmcts".into()
}

fn default_true() -> bool {
    true
}

fn default_runs() -> usize {
    100
}

/// A validated experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub field: FieldSpec,
    /// Loaded raster, when `field` names one.
    pub raster: Option<GridField>,
    pub grid: GridSpec,
    pub n_locations: usize,
    pub robots: Vec<RobotSpec>,
    pub budget: f64,
    pub method: Method,
    pub planner: PlannerParams,
    pub cost: CostParams,
    pub gp: KernelParams,
    pub resample: ResampleSpec,
    pub noise_sd: f64,
    pub share_readings: bool,
    pub runs: usize,
    pub base_seed: u64,
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text, path.parent())
}

/// Parses and validates config text. `base_dir` anchors relative raster paths.
pub fn parse_config_str(text: &str, base_dir: Option<&Path>) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        Error::config(if key == "." { "<root>".into() } else { key }, e.inner().to_string())
    })?;
    raw.validate(base_dir)
}

fn ensure(cond: bool, key: &str, msg: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::config(key, msg))
    }
}

impl RawConfig {
    pub fn validate(self, base_dir: Option<&Path>) -> Result<ExperimentConfig> {
        let method: Method = self.method.parse()?;

        let raster = match &self.field {
            FieldSpec::Raster { path, standardize } => {
                let full = match base_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                let field = load_grid_field(&full).map_err(|e| match e {
                    Error::Io { .. } | Error::Format { .. } => Error::config("field.path", e.to_string()),
                    other => other,
                })?;
                Some(if *standardize { field.standardized() } else { field })
            }
            FieldSpec::Mixture { components } => {
                ensure(!components.is_empty(), "field.components", "at least one component required")?;
                None
            }
            FieldSpec::RandomMixture => None,
        };

        let grid = match (&raster, self.grid) {
            (Some(r), Some(g)) => {
                ensure(
                    r.grid() == g,
                    "grid",
                    format!(
                        "raster is {}x{} but grid says {}x{}",
                        r.grid().width(),
                        r.grid().height(),
                        g.width(),
                        g.height()
                    ),
                )?;
                g
            }
            (Some(r), None) => r.grid(),
            (None, Some(g)) => g,
            (None, None) => GridSpec::new(30, 30)?,
        };
        if let FieldSpec::Mixture { components } = &self.field {
            MixtureField::new(grid, components.clone()).map_err(|e| Error::config("field.components", e.to_string()))?;
        }

        let robots = match self.robots {
            RobotsSpec::List(list) => list,
            RobotsSpec::Team(team) => {
                ensure(team.count >= 1, "robots.count", "must be >= 1")?;
                let spec = RobotSpec {
                    start: team.start.unwrap_or(Location::new(0, 0)),
                    final_loc: team.final_loc.unwrap_or(grid.lower_right()),
                };
                vec![spec; team.count]
            }
        };
        ensure(!robots.is_empty(), "robots", "at least one robot required")?;
        for (i, r) in robots.iter().enumerate() {
            ensure(
                grid.contains(r.start) && grid.contains(r.final_loc),
                &format!("robots[{i}]"),
                "start and final must lie inside the grid",
            )?;
        }

        ensure(self.budget.is_finite() && self.budget > 0.0, "budget", "must be > 0")?;
        ensure(self.n_locations >= 1, "n_locations", "must be >= 1")?;
        ensure(
            self.n_locations <= grid.cell_count(),
            "n_locations",
            format!("exceeds the {} grid cells", grid.cell_count()),
        )?;
        ensure(self.runs >= 1, "runs", "must be >= 1")?;
        ensure(
            self.planner.branching >= 2 && self.planner.branching.is_multiple_of(2),
            "planner.branching",
            format!("must be an even number >= 2, got {}", self.planner.branching),
        )?;
        ensure(self.planner.iterations >= 1, "planner.iterations", "must be >= 1")?;
        ensure(
            self.planner.exploration.is_finite() && self.planner.exploration >= 0.0,
            "planner.exploration",
            "must be >= 0",
        )?;
        ensure(
            (0.0..=1.0).contains(&self.planner.discount),
            "planner.discount",
            "must lie in [0, 1]",
        )?;
        ensure(self.cost.alpha.is_finite() && self.cost.alpha > 0.0, "cost.alpha", "must be > 0")?;
        ensure(
            self.cost.lambda_max.is_finite() && self.cost.lambda_max >= 0.0,
            "cost.lambda_max",
            "must be >= 0",
        )?;
        ensure(
            self.gp.length_scale.is_finite() && self.gp.length_scale > 0.0,
            "gp.length_scale",
            "must be > 0",
        )?;
        ensure(
            self.gp.signal_variance.is_finite() && self.gp.signal_variance > 0.0,
            "gp.signal_variance",
            "must be > 0",
        )?;
        ensure(self.gp.jitter.is_finite() && self.gp.jitter >= 0.0, "gp.jitter", "must be >= 0")?;
        ensure(self.resample.size >= 1, "resample.size", "must be >= 1")?;
        ensure(self.resample.period >= 1, "resample.period", "must be >= 1")?;
        ensure(self.noise_sd.is_finite() && self.noise_sd >= 0.0, "noise_sd", "must be >= 0")?;

        for (i, r) in robots.iter().enumerate() {
            let worst = self.cost.worst_cost(r.start, r.final_loc);
            ensure(
                r.start == r.final_loc || worst <= self.budget,
                "budget",
                format!(
                    "robot {i} may need {worst} to travel from {} to {}, more than the budget {}",
                    r.start, r.final_loc, self.budget
                ),
            )?;
        }

        Ok(ExperimentConfig {
            field: self.field,
            raster,
            grid,
            n_locations: self.n_locations,
            robots,
            budget: self.budget,
            method,
            planner: self.planner,
            cost: self.cost,
            gp: self.gp,
            resample: self.resample,
            noise_sd: self.noise_sd,
            share_readings: self.share_readings,
            runs: self.runs,
            base_seed: self.base_seed,
        })
    }
}

impl ExperimentConfig {
    pub fn mission(&self, method: Method) -> MissionConfig {
        MissionConfig {
            grid: self.grid,
            robots: self.robots.clone(),
            budget: self.budget,
            method,
            planner: self.planner,
            cost: self.cost,
            kernel: self.gp,
            resample_size: self.resample.size,
            resample_period: self.resample.period,
            noise_sd: self.noise_sd,
            share_readings: self.share_readings,
        }
    }

    /// The synthetic setup with `team` robots from the upper-left to the
    /// lower-right corner.
    pub fn synthetic(team: usize, budget: f64, method: Method) -> Self {
        let grid = GridSpec::new(30, 30).expect("valid grid");
        ExperimentConfig {
            field: FieldSpec::RandomMixture,
            raster: None,
            grid,
            n_locations: 100,
            robots: vec![
                RobotSpec {
                    start: Location::new(0, 0),
                    final_loc: grid.lower_right(),
                };
                team
            ],
            budget,
            method,
            planner: PlannerParams::default(),
            cost: CostParams::default(),
            gp: KernelParams::default(),
            resample: ResampleSpec::default(),
            noise_sd: 0.0,
            share_readings: true,
            runs: 100,
            base_seed: 0,
        }
    }
}

//! Multi-robot informative path planning under travel budgets.
//!
//! Robots estimate an unknown scalar field over a grid by visiting sample
//! locations. Each robot plans its next location online with a budget-aware
//! Monte Carlo tree search whose rewards come from the posterior variance of
//! a Gaussian-process model, announces visited locations so that teammates
//! avoid them, and periodically redraws its candidate pool in proportion to
//! the remaining uncertainty.
//!
//! - [`environment`]: grid, ground-truth fields, distances, scoring
//! - [`gp`]: Matérn 3/2 Gaussian-process regression
//! - [`planner`]: the single-robot tree search
//! - [`coordination`]: broadcast board, resampling, mission loop
//! - [`harness`]: experiment configs, seeded batches, artifacts

pub mod coordination;
pub mod environment;
pub mod error;
pub mod gp;
pub mod harness;
pub mod planner;
pub mod rng;

pub use coordination::{run_mission, Method, MissionConfig, MissionResult, RobotSpec, RobotStatus};
pub use environment::{GridSpec, Location, LocationSet, ScalarField};
pub use error::{Error, Result};
pub use gp::{GpModel, KernelParams, Observation};
pub use planner::{plan_next, CostParams, PlannerParams, PlanningContext};

//! Multi-robot missions: per-robot planning steps, the broadcast board of
//! visited locations, variance-proportional resampling of candidate pools,
//! and the round-robin mission loop.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::environment::{mse, sample_measurement, GridSpec, Location, LocationSet, ScalarField};
use crate::error::{Error, Result};
use crate::gp::{GpModel, KernelParams, Observation};
use crate::planner::{gen_cost, plan_next, CostParams, PlannerParams, PlanningContext};
use crate::rng::{robot_stream, Purpose, SimRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Communication and resampling.
    Rmcts,
    /// Communication, fixed candidate pool.
    Mcts,
    /// Resampling, no communication.
    Ncmcts,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModeFlags {
    pub communication: bool,
    pub resampling: bool,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Rmcts, Method::Mcts, Method::Ncmcts];

    pub fn flags(self) -> ModeFlags {
        match self {
            Method::Rmcts => ModeFlags {
                communication: true,
                resampling: true,
            },
            Method::Mcts => ModeFlags {
                communication: true,
                resampling: false,
            },
            Method::Ncmcts => ModeFlags {
                communication: false,
                resampling: true,
            },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Rmcts => "RMCTS",
            Method::Mcts => "MCTS",
            Method::Ncmcts => "NCMCTS",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rmcts" => Ok(Method::Rmcts),
            "mcts" => Ok(Method::Mcts),
            "ncmcts" => Ok(Method::Ncmcts),
            other => Err(Error::config(
                "method",
                format!("unknown method `{other}`; supported: rmcts, mcts, ncmcts"),
            )),
        }
    }
}

/// Communication and resampling switches for a method name.
pub fn mode_flags(method: &str) -> Result<ModeFlags> {
    method.parse::<Method>().map(Method::flags)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RobotStatus {
    Active,
    Finished,
    Stranded,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub loc: Location,
    pub realized_cost: f64,
    pub reading: f64,
}

#[derive(Clone, Debug)]
pub struct RobotState {
    pub id: usize,
    pub current: Location,
    pub final_loc: Location,
    pub initial_budget: f64,
    pub budget_remaining: f64,
    /// Visited set, seeded with the start location.
    pub visited: LocationSet,
    pub observations: Vec<Observation>,
    pub status: RobotStatus,
    pub step_count: usize,
    pub trace: Vec<TraceStep>,
}

impl RobotState {
    pub fn new(id: usize, start: Location, final_loc: Location, budget: f64) -> Self {
        let mut visited = LocationSet::new();
        visited.insert(start);
        RobotState {
            id,
            current: start,
            final_loc,
            initial_budget: budget,
            budget_remaining: budget,
            visited,
            observations: Vec::new(),
            status: if start == final_loc {
                RobotStatus::Finished
            } else {
                RobotStatus::Active
            },
            step_count: 0,
            trace: Vec::new(),
        }
    }
}

/// Locations each robot has announced as visited. Claims only grow.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BroadcastBoard {
    claims: BTreeMap<usize, LocationSet>,
}

impl BroadcastBoard {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn post(&mut self, robot: usize, loc: Location) {
        self.claims.entry(robot).or_default().insert(loc);
    }

    pub fn claims_of(&self, robot: usize) -> Option<&LocationSet> {
        self.claims.get(&robot)
    }

    pub fn claimed_by_other(&self, robot: usize, loc: &Location) -> bool {
        self.claims
            .iter()
            .any(|(&id, set)| id != robot && set.contains(loc))
    }

    pub fn robots(&self) -> impl Iterator<Item = usize> + '_ {
        self.claims.keys().copied()
    }
}

/// Per-robot candidate pools and the resampling cadence.
#[derive(Clone, Debug)]
pub struct SamplingPool {
    pub pools: Vec<LocationSet>,
    pub resample_size: usize,
    pub resample_period: usize,
}

impl SamplingPool {
    pub fn new(initial: &LocationSet, robots: usize, resample_size: usize, resample_period: usize) -> Self {
        SamplingPool {
            pools: vec![initial.clone(); robots],
            resample_size,
            resample_period,
        }
    }

    pub fn due(&self, step_count: usize) -> bool {
        self.resample_period > 0 && step_count > 0 && step_count.is_multiple_of(self.resample_period)
    }
}

/// The pool minus the robot's own visits and, when a board is given, minus
/// every location another robot has claimed.
pub fn candidate_filter(
    pool: &LocationSet,
    own: &LocationSet,
    board: Option<&BroadcastBoard>,
    robot: usize,
) -> LocationSet {
    pool.iter()
        .copied()
        .filter(|l| !own.contains(l))
        .filter(|l| board.is_none_or(|b| !b.claimed_by_other(robot, l)))
        .collect()
}

/// Draws `k` distinct eligible cells with probability proportional to
/// posterior variance, sequentially without replacement. Eligible cells are
/// those not visited by the robot and not claimed by others on `board`.
/// When no eligible cell has positive variance left, draws are uniform.
pub fn resample_locations<R: Rng + ?Sized>(
    model: &GpModel,
    grid: GridSpec,
    own: &LocationSet,
    board: Option<&BroadcastBoard>,
    robot: usize,
    k: usize,
    rng: &mut R,
) -> LocationSet {
    let eligible: Vec<Location> = grid
        .cells()
        .filter(|l| !own.contains(l))
        .filter(|l| board.is_none_or(|b| !b.claimed_by_other(robot, l)))
        .collect();
    let weights: Vec<f64> = eligible
        .iter()
        .map(|&l| model.predict_one(l).variance)
        .collect();
    draw_weighted(&eligible, weights, k, rng)
}

pub(crate) fn draw_weighted<R: Rng + ?Sized>(
    items: &[Location],
    mut weights: Vec<f64>,
    k: usize,
    rng: &mut R,
) -> LocationSet {
    let mut taken = vec![false; items.len()];
    let mut out = LocationSet::new();
    let k = k.min(items.len());
    while out.len() < k {
        let total: f64 = weights.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = None;
            for (i, &w) in weights.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                if target < w {
                    chosen = Some(i);
                    break;
                }
                target -= w;
                chosen = Some(i);
            }
            chosen.expect("positive total implies a positive weight")
        } else {
            let open: Vec<usize> = (0..items.len()).filter(|&i| !taken[i]).collect();
            open[rng.random_range(0..open.len())]
        };
        taken[idx] = true;
        weights[idx] = 0.0;
        out.insert(items[idx]);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobotSpec {
    pub start: Location,
    #[serde(rename = "final")]
    pub final_loc: Location,
}

/// Everything a mission needs besides the field, the initial pool and the seed.
#[derive(Clone, Debug, PartialEq)]
pub struct MissionConfig {
    pub grid: GridSpec,
    pub robots: Vec<RobotSpec>,
    pub budget: f64,
    pub method: Method,
    pub planner: PlannerParams,
    pub cost: CostParams,
    pub kernel: KernelParams,
    pub resample_size: usize,
    pub resample_period: usize,
    pub noise_sd: f64,
    /// With communication on, plan from one GP fed by every robot's
    /// readings. When false, robots share locations only and each plans
    /// from its own readings.
    pub share_readings: bool,
}

impl MissionConfig {
    pub fn new(grid: GridSpec, robots: Vec<RobotSpec>, budget: f64, method: Method) -> Self {
        MissionConfig {
            grid,
            robots,
            budget,
            method,
            planner: PlannerParams::default(),
            cost: CostParams::default(),
            kernel: KernelParams::default(),
            resample_size: 30,
            resample_period: 2,
            noise_sd: 0.0,
            share_readings: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.robots.is_empty() {
            return Err(Error::param("mission needs at least one robot"));
        }
        for (i, r) in self.robots.iter().enumerate() {
            if !self.grid.contains(r.start) || !self.grid.contains(r.final_loc) {
                return Err(Error::param(format!("robot {i}: start or final outside the grid")));
            }
        }
        if !(self.budget >= 0.0 && self.budget.is_finite()) {
            return Err(Error::param(format!("budget must be >= 0, got {}", self.budget)));
        }
        if self.resample_size == 0 || self.resample_period == 0 {
            return Err(Error::param("resample size and period must be >= 1"));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::param("noise_sd must be >= 0"));
        }
        self.planner.validate()?;
        self.cost.validate()?;
        self.kernel.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotTrace {
    pub id: usize,
    pub start: Location,
    #[serde(rename = "final")]
    pub final_loc: Location,
    pub initial_budget: f64,
    pub remaining_budget: f64,
    pub status: RobotStatus,
    pub steps: Vec<TraceStep>,
}

impl RobotTrace {
    pub fn realized_cost(&self) -> f64 {
        self.steps.iter().map(|s| s.realized_cost).sum()
    }

    /// Visited locations other than the start.
    pub fn sampled(&self) -> impl Iterator<Item = Location> + '_ {
        self.steps.iter().map(|s| s.loc)
    }
}

#[derive(Clone, Debug)]
pub struct MissionResult {
    pub method: Method,
    pub seed: u64,
    pub grid: GridSpec,
    pub robots: Vec<RobotTrace>,
    /// Posterior from the union of all readings, one per location.
    pub model: GpModel,
    /// Posterior mean at every cell, row-major.
    pub estimate: Vec<f64>,
    pub mse: f64,
    pub board: BroadcastBoard,
    pub rounds: usize,
}

impl MissionResult {
    pub fn stranded(&self) -> usize {
        self.robots
            .iter()
            .filter(|r| r.status == RobotStatus::Stranded)
            .count()
    }

    pub fn mean_remaining_budget(&self) -> f64 {
        self.robots.iter().map(|r| r.remaining_budget).sum::<f64>() / self.robots.len() as f64
    }
}

struct RobotStreams {
    planning: SimRng,
    cost: SimRng,
    resampling: SimRng,
    measurement: SimRng,
}

/// A mission in progress. [`run_mission`] drives one to completion.
pub struct Mission<'a> {
    config: &'a MissionConfig,
    field: &'a ScalarField,
    flags: ModeFlags,
    robots: Vec<RobotState>,
    board: BroadcastBoard,
    pool: SamplingPool,
    streams: Vec<RobotStreams>,
    /// One reading per location, in collection order.
    union: Vec<Observation>,
    union_locs: HashSet<Location>,
    shared_model: GpModel,
    private_models: Vec<GpModel>,
    rounds: usize,
}

impl<'a> Mission<'a> {
    pub fn new(config: &'a MissionConfig, field: &'a ScalarField, initial: &LocationSet, seed: u64) -> Result<Self> {
        config.validate()?;
        if field.grid() != config.grid {
            return Err(Error::param("field grid does not match mission grid"));
        }
        let n = config.robots.len();
        let robots = config
            .robots
            .iter()
            .enumerate()
            .map(|(i, r)| RobotState::new(i, r.start, r.final_loc, config.budget))
            .collect();
        let streams = (0..n)
            .map(|i| RobotStreams {
                planning: robot_stream(seed, i, Purpose::Planning),
                cost: robot_stream(seed, i, Purpose::CostRealization),
                resampling: robot_stream(seed, i, Purpose::Resampling),
                measurement: robot_stream(seed, i, Purpose::Measurement),
            })
            .collect();
        let empty = GpModel::empty(config.kernel)?;
        Ok(Mission {
            config,
            field,
            flags: config.method.flags(),
            robots,
            board: BroadcastBoard::new(),
            pool: SamplingPool::new(initial, n, config.resample_size, config.resample_period),
            streams,
            union: Vec::new(),
            union_locs: HashSet::new(),
            shared_model: empty.clone(),
            private_models: vec![empty; n],
            rounds: 0,
        })
    }

    pub fn robots(&self) -> &[RobotState] {
        &self.robots
    }

    pub fn board(&self) -> &BroadcastBoard {
        &self.board
    }

    /// Robot `i`'s current candidate pool, before filtering.
    pub fn pool(&self, i: usize) -> &LocationSet {
        &self.pool.pools[i]
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    fn uses_shared_model(&self) -> bool {
        self.flags.communication && self.config.share_readings
    }

    fn planning_model(&self, robot: usize) -> &GpModel {
        if self.uses_shared_model() {
            &self.shared_model
        } else {
            &self.private_models[robot]
        }
    }

    fn planning_board(&self) -> Option<&BroadcastBoard> {
        self.flags.communication.then_some(&self.board)
    }

    pub fn is_done(&self) -> bool {
        self.robots.iter().all(|r| r.status != RobotStatus::Active)
    }

    /// One planning step and move for robot `i`. Returns the realized move,
    /// or `None` if the robot was not active.
    pub fn step(&mut self, i: usize) -> Result<Option<TraceStep>> {
        if self.robots[i].status != RobotStatus::Active {
            return Ok(None);
        }
        let robot = &self.robots[i];
        let candidates = candidate_filter(
            &self.pool.pools[i],
            &robot.visited,
            self.planning_board(),
            i,
        );
        let variances = self.planning_model(i).variance_map(&candidates);
        let ctx = PlanningContext {
            current: robot.current,
            remaining_budget: robot.budget_remaining,
            final_loc: robot.final_loc,
            candidates,
            variances,
            cost: self.config.cost,
            params: self.config.planner,
        };
        let target = plan_next(&ctx, &mut self.streams[i].planning);
        let realized = gen_cost(robot.current, target, &self.config.cost, &mut self.streams[i].cost);

        if realized > robot.budget_remaining {
            let robot = &mut self.robots[i];
            robot.status = RobotStatus::Stranded;
            robot.budget_remaining = 0.0;
            return Ok(None);
        }

        let reading = sample_measurement(
            self.field,
            target,
            self.config.noise_sd,
            &mut self.streams[i].measurement,
        )?;
        let obs = Observation::new(target, reading);

        let robot = &mut self.robots[i];
        robot.budget_remaining -= realized;
        robot.visited.insert(target);
        robot.current = target;
        robot.step_count += 1;
        robot.observations.push(obs);
        let step = TraceStep {
            step: robot.step_count,
            loc: target,
            realized_cost: realized,
            reading,
        };
        robot.trace.push(step);
        if target == robot.final_loc {
            robot.status = RobotStatus::Finished;
        }

        if self.union_locs.insert(target) {
            self.union.push(obs);
            if self.uses_shared_model() {
                self.shared_model = GpModel::fit(self.union.clone(), self.config.kernel)?;
            }
        }
        if !self.uses_shared_model() {
            let own = self.robots[i].observations.clone();
            self.private_models[i] = GpModel::fit(own, self.config.kernel)?;
        }
        self.board.post(i, target);

        let robot = &self.robots[i];
        if self.flags.resampling && robot.status == RobotStatus::Active && self.pool.due(robot.step_count) {
            let model = if self.uses_shared_model() {
                &self.shared_model
            } else {
                &self.private_models[i]
            };
            let board = self.flags.communication.then_some(&self.board);
            let fresh = resample_locations(
                model,
                self.config.grid,
                &robot.visited,
                board,
                i,
                self.pool.resample_size,
                &mut self.streams[i].resampling,
            );
            self.pool.pools[i] = fresh;
        }
        Ok(Some(step))
    }

    /// Every active robot takes one step, in id order.
    pub fn round(&mut self) -> Result<()> {
        for i in 0..self.robots.len() {
            self.step(i)?;
        }
        self.rounds += 1;
        Ok(())
    }

    pub fn finish(self, seed: u64) -> Result<MissionResult> {
        let model = GpModel::fit(self.union, self.config.kernel)?;
        let estimate = model.posterior_grid(self.config.grid);
        let mse = mse(&estimate, self.field)?;
        let robots = self
            .robots
            .into_iter()
            .zip(&self.config.robots)
            .map(|(r, spec)| RobotTrace {
                id: r.id,
                start: spec.start,
                final_loc: r.final_loc,
                initial_budget: r.initial_budget,
                remaining_budget: r.budget_remaining,
                status: r.status,
                steps: r.trace,
            })
            .collect();
        Ok(MissionResult {
            method: self.config.method,
            seed,
            grid: self.config.grid,
            robots,
            model,
            estimate,
            mse,
            board: self.board,
            rounds: self.rounds,
        })
    }
}

/// Runs a mission until no robot is active.
pub fn run_mission(
    config: &MissionConfig,
    field: &ScalarField,
    initial: &LocationSet,
    seed: u64,
) -> Result<MissionResult> {
    let mut mission = Mission::new(config, field, initial, seed)?;
    let max_rounds = config.grid.cell_count() + 1;
    while !mission.is_done() {
        if mission.rounds >= max_rounds {
            return Err(Error::Numerical(format!(
                "mission did not terminate within {max_rounds} rounds"
            )));
        }
        mission.round()?;
    }
    mission.finish(seed)
}

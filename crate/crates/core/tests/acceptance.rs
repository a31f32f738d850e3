//! End-to-end acceptance checks, one test per criterion. Each test writes a
//! single `criterion N: PASS|FAIL ...` line to stderr before asserting.

use std::collections::{BTreeMap, HashSet};
use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ipp_core::coordination::{resample_locations, Mission};
use ipp_core::environment::{initial_locations, manhattan_distance, MixtureField};
use ipp_core::gp::matern32;
use ipp_core::harness::{instance, run_batch_with, BatchResult, ExperimentConfig};
use ipp_core::planner::{gen_cost, plan_with_tree};
use ipp_core::{
    CostParams, GpModel, GridSpec, KernelParams, Location, LocationSet, Method, MissionResult, Observation,
    PlannerParams, PlanningContext, RobotStatus, ScalarField,
};

const GP_TOL: f64 = 1e-8;
const GP_TIME_LIMIT_S: f64 = 1.0;
const KERNEL_TOL: f64 = 1e-12;
const PLAN_CALLS: usize = 1000;
const SAFETY_RUNS: usize = 100;
const ORDERING_RUNS: usize = 50;
const SIGN_TEST_ALPHA: f64 = 0.01;
const CI_ITERATIONS: usize = 200;
const RESAMPLE_DRAWS: usize = 10_000;
const RESAMPLE_TOL: f64 = 0.02;
const COST_DRAWS: usize = 10_000;
const COST_MEAN_TOL: f64 = 0.02;
const PLANNING_LIMIT_S: f64 = 60.0;
const BUDGET_EPS: f64 = 1e-9;

fn report(criterion: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {criterion}: {verdict} {detail}");
}

fn batch(team: usize, budget: f64, method: Method, runs: usize, iterations: usize) -> BatchResult {
    let mut cfg = ExperimentConfig::synthetic(team, budget, method);
    cfg.runs = runs;
    cfg.planner.iterations = iterations;
    run_batch_with(&cfg, method).expect("batch runs")
}

fn rmcts_b100() -> &'static BatchResult {
    static CELL: OnceLock<BatchResult> = OnceLock::new();
    CELL.get_or_init(|| batch(3, 100.0, Method::Rmcts, SAFETY_RUNS, 1000))
}

fn mcts_b100() -> &'static BatchResult {
    static CELL: OnceLock<BatchResult> = OnceLock::new();
    CELL.get_or_init(|| batch(3, 100.0, Method::Mcts, ORDERING_RUNS, 1000))
}

fn ncmcts_b100() -> &'static BatchResult {
    static CELL: OnceLock<BatchResult> = OnceLock::new();
    CELL.get_or_init(|| batch(3, 100.0, Method::Ncmcts, ORDERING_RUNS, 1000))
}

fn mse_by_seed(missions: &[MissionResult], n: usize) -> Vec<f64> {
    missions.iter().take(n).map(|m| m.mse).collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// One-sided exact sign test that `a` tends to be below `b`; ties dropped.
fn sign_test(a: &[f64], b: &[f64]) -> (usize, usize, f64) {
    let wins = a.iter().zip(b).filter(|(x, y)| x < y).count();
    let losses = a.iter().zip(b).filter(|(x, y)| x > y).count();
    let m = wins + losses;
    let mut p = 0.0;
    let mut comb = 1.0_f64;
    for i in 0..=m {
        if i >= wins {
            p += comb;
        }
        comb = comb * (m - i) as f64 / (i + 1) as f64;
    }
    (wins, m, p / 2f64.powi(m as i32))
}

#[test]
fn criterion_01_gp_matches_dense_inverse() {
    let grid = GridSpec::new(30, 30).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let field = ScalarField::Mixture(MixtureField::random(grid, &mut rng));
    let params = KernelParams {
        length_scale: 1.0,
        signal_variance: 1.0,
        jitter: 1e-8,
    };
    let train = initial_locations(grid, 25, &mut rng).unwrap();
    let query: Vec<Location> = (0..100)
        .map(|_| Location::new(rng.random_range(0..30), rng.random_range(0..30)))
        .collect();
    let obs: Vec<Observation> = train
        .iter()
        .map(|&l| Observation::new(l, field.eval(l).unwrap()))
        .collect();

    let started = Instant::now();
    let model = GpModel::fit(obs.clone(), params).unwrap();
    let preds = model.predict(&query);
    let elapsed = started.elapsed().as_secs_f64();

    let k = |a: Location, b: Location| {
        let dx = a.x as f64 - b.x as f64;
        let dy = a.y as f64 - b.y as f64;
        let s = 3f64.sqrt() * (dx * dx + dy * dy).sqrt();
        (1.0 + s) * (-s).exp()
    };
    let n = obs.len();
    let kmat = DMatrix::from_fn(n, n, |i, j| {
        k(obs[i].loc, obs[j].loc) + if i == j { model.jitter() } else { 0.0 }
    });
    let kinv = kmat.try_inverse().expect("invertible");
    let y = DVector::from_iterator(n, obs.iter().map(|o| o.value));
    let mut worst: f64 = 0.0;
    for (q, p) in query.iter().zip(&preds) {
        let ks = DVector::from_iterator(n, obs.iter().map(|o| k(o.loc, *q)));
        let m = ks.dot(&(&kinv * &y));
        let v = (1.0 - ks.dot(&(&kinv * &ks))).max(0.0);
        worst = worst.max((m - p.mean).abs()).max((v - p.variance).abs());
    }
    let pass = worst <= GP_TOL && elapsed < GP_TIME_LIMIT_S;
    report(1, pass, &format!("max abs diff {worst:.3e} (tol {GP_TOL:e}), {elapsed:.4} s"));
    assert!(pass);
}

#[test]
fn criterion_02_kernel_spot_values() {
    let unit = KernelParams::default();
    let at_zero = matern32(0.0, &unit).unwrap();
    let mut pass = at_zero == 1.0;
    let mut worst: f64 = 0.0;
    for ell in [1.0, 2.5, 7.0] {
        let p = KernelParams {
            length_scale: ell,
            ..unit
        };
        let v = matern32(ell / 3f64.sqrt(), &p).unwrap() * std::f64::consts::E;
        worst = worst.max((v - 2.0).abs());
    }
    pass &= worst <= KERNEL_TOL;
    let rs = [0.0, 0.5, 1.0, 2.0, 5.0, 10.0];
    let vals: Vec<f64> = rs.iter().map(|&r| matern32(r, &unit).unwrap()).collect();
    let monotone = vals.windows(2).all(|w| w[1] < w[0]);
    pass &= monotone;
    report(
        2,
        pass,
        &format!("k(0)={at_zero}, |k(l/sqrt3)*e-2| max {worst:.1e}, strictly decreasing {monotone}"),
    );
    assert!(pass);
}

#[test]
fn criterion_03_untried_children_first() {
    let grid = GridSpec::new(30, 30).unwrap();
    let final_loc = grid.lower_right();
    let cost = CostParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut violations = 0;
    let mut premature = 0;
    for _ in 0..PLAN_CALLS {
        let current = Location::new(rng.random_range(0..20), rng.random_range(0..20));
        let n = rng.random_range(30..=100);
        let mut candidates = initial_locations(grid, n, &mut rng).unwrap();
        candidates.retain(|l| *l != current);
        let variances = candidates.iter().map(|&l| (l, rng.random_range(0.05..1.0))).collect();
        let floor = cost.worst_cost(current, final_loc);
        let ctx = PlanningContext {
            current,
            remaining_budget: floor + rng.random_range(0.0..60.0),
            final_loc,
            candidates,
            variances,
            cost,
            params: PlannerParams::default(),
        };
        let (_, tree) = plan_with_tree(&ctx, &mut rng);
        violations += tree.stats().exploration_violations;
        premature += tree.count_premature_descents();
    }
    let pass = violations == 0 && premature == 0;
    report(
        3,
        pass,
        &format!("{PLAN_CALLS} plan calls, {violations} instrumented violations, {premature} post-hoc"),
    );
    assert!(pass);
}

#[test]
fn criterion_04_budget_safety() {
    let b = rmcts_b100();
    let mut worst_spend: f64 = 0.0;
    let mut stranded = 0;
    for m in &b.missions {
        for r in &m.robots {
            worst_spend = worst_spend.max(r.realized_cost());
            stranded += (r.status == RobotStatus::Stranded) as usize;
        }
    }
    let pass = b.missions.len() == SAFETY_RUNS && worst_spend <= 100.0 + BUDGET_EPS && stranded == 0;
    report(
        4,
        pass,
        &format!(
            "{} missions, max robot spend {worst_spend:.4} of 100, {stranded} stranded",
            b.missions.len()
        ),
    );
    assert!(pass);
}

fn duplicate_samples(m: &MissionResult) -> usize {
    let mut owner: BTreeMap<Location, usize> = BTreeMap::new();
    let mut dup = 0;
    for r in &m.robots {
        for loc in r.sampled().filter(|l| *l != r.final_loc) {
            if let Some(&o) = owner.get(&loc) {
                dup += (o != r.id) as usize;
            } else {
                owner.insert(loc, r.id);
            }
        }
    }
    let locs: HashSet<Location> = m.model.observations().iter().map(|o| o.loc).collect();
    dup + (m.model.len() - locs.len())
}

#[test]
fn criterion_05_no_duplicate_sampling() {
    let rm = rmcts_b100();
    let mc = mcts_b100();
    let dups: usize = rm.missions.iter().chain(&mc.missions).map(duplicate_samples).sum();
    let pass = dups == 0;
    report(
        5,
        pass,
        &format!(
            "{} rmcts + {} mcts missions, {dups} cells sampled by two robots",
            rm.missions.len(),
            mc.missions.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_06_method_ordering() {
    let rm = mse_by_seed(&rmcts_b100().missions, ORDERING_RUNS);
    let mc = mse_by_seed(&mcts_b100().missions, ORDERING_RUNS);
    let nc = mse_by_seed(&ncmcts_b100().missions, ORDERING_RUNS);
    let (wins, m, p) = sign_test(&rm, &nc);
    let below_nc = mean(&rm) < mean(&nc);
    let not_above_mc = mean(&rm) <= mean(&mc);

    let rm_ci = mse_by_seed(&batch(3, 100.0, Method::Rmcts, ORDERING_RUNS, CI_ITERATIONS).missions, ORDERING_RUNS);
    let nc_ci = mse_by_seed(&batch(3, 100.0, Method::Ncmcts, ORDERING_RUNS, CI_ITERATIONS).missions, ORDERING_RUNS);
    let ci_ordered = mean(&rm_ci) < mean(&nc_ci);

    let pass = below_nc && p < SIGN_TEST_ALPHA && not_above_mc && ci_ordered;
    report(
        6,
        pass,
        &format!(
            "{ORDERING_RUNS} seeds: mean MSE rmcts {:.4} mcts {:.4} ncmcts {:.4}; sign test rmcts<ncmcts {wins}/{m} p={p:.3} (need < {SIGN_TEST_ALPHA}); {CI_ITERATIONS}-iteration profile rmcts {:.4} ncmcts {:.4}",
            mean(&rm),
            mean(&mc),
            mean(&nc),
            mean(&rm_ci),
            mean(&nc_ci)
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_07_budget_scaling() {
    let low = mse_by_seed(&rmcts_b100().missions, ORDERING_RUNS);
    let high = mse_by_seed(&batch(3, 200.0, Method::Rmcts, ORDERING_RUNS, 1000).missions, ORDERING_RUNS);
    let pass = mean(&high) <= mean(&low);
    report(
        7,
        pass,
        &format!(
            "rmcts, 3 robots, {ORDERING_RUNS} seeds: mean MSE B=200 {:.4} vs B=100 {:.4}",
            mean(&high),
            mean(&low)
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_resampling_distribution() {
    let (model, grid, own, hi) = three_to_one();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let hits = (0..RESAMPLE_DRAWS)
        .filter(|_| {
            let drawn = resample_locations(model, *grid, own, None, 0, 1, &mut rng);
            drawn.contains(hi)
        })
        .count();
    let freq = hits as f64 / RESAMPLE_DRAWS as f64;
    let freq_ok = (freq - 0.75).abs() <= RESAMPLE_TOL;

    let (events, bad) = pool_sizes_after_resampling();
    let pass = freq_ok && events > 0 && bad == 0;
    report(
        8,
        pass,
        &format!("high-variance frequency {freq:.4} (0.75 +/- {RESAMPLE_TOL}); {events} resampling events, {bad} with |V| != 30"),
    );
    assert!(pass);
}

/// A one-observation model and a visited set leaving exactly two eligible
/// cells whose posterior variances are in ratio 3:1. Returns the
/// high-variance cell last.
fn three_to_one() -> &'static (GpModel, GridSpec, LocationSet, Location) {
    static CELL: OnceLock<(GpModel, GridSpec, LocationSet, Location)> = OnceLock::new();
    CELL.get_or_init(|| {
        let grid = GridSpec::new(4, 2).unwrap();
        let hi = Location::new(0, 0);
        let lo = Location::new(3, 0);
        let observed = Location::new(3, 1);
        let fit = |ell: f64| {
            let p = KernelParams {
                length_scale: ell,
                signal_variance: 1.0,
                jitter: 1e-12,
            };
            GpModel::fit(vec![Observation::new(observed, 0.0)], p).unwrap()
        };
        let ratio = |ell: f64| {
            let m = fit(ell);
            m.predict_one(hi).variance / m.predict_one(lo).variance
        };
        let (mut a, mut b) = (0.1_f64, 100.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if ratio(mid) < 3.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        let model = fit(0.5 * (a + b));
        assert!((ratio(0.5 * (a + b)) - 3.0).abs() < 1e-9);
        let own: LocationSet = grid.cells().filter(|l| *l != hi && *l != lo).collect();
        (model, grid, own, hi)
    })
}

fn pool_sizes_after_resampling() -> (usize, usize) {
    let mut cfg = ExperimentConfig::synthetic(3, 100.0, Method::Rmcts);
    cfg.planner.iterations = CI_ITERATIONS;
    let mission_cfg = cfg.mission(Method::Rmcts);
    let (mut events, mut bad) = (0, 0);
    for seed in 0..10 {
        let (field, pool) = instance(&cfg, seed).unwrap();
        let mut mission = Mission::new(&mission_cfg, &field, &pool, seed).unwrap();
        while !mission.is_done() {
            for i in 0..mission.robots().len() {
                if mission.step(i).unwrap().is_none() {
                    continue;
                }
                let r = &mission.robots()[i];
                if r.status == RobotStatus::Active && r.step_count % cfg.resample.period == 0 {
                    events += 1;
                    bad += (mission.pool(i).len() != cfg.resample.size) as usize;
                }
            }
        }
    }
    (events, bad)
}

fn files_under(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

#[test]
fn criterion_09_cli_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("config.json");
    std::fs::write(
        &config,
        r#"{"field": {"type": "random_mixture"}, "robots": {"count": 3}, "budget": 100, "runs": 2, "base_seed": 7}"#,
    )
    .unwrap();
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_ipp"))
            .args(["compare", "--config"])
            .arg(&config)
            .args(["--methods", "rmcts,mcts,ncmcts", "--out"])
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        files_under(&out)
    };
    let (a, b) = (run("a"), run("b"));
    let compared: Vec<&String> = a
        .keys()
        .filter(|k| k.ends_with("metrics.json") || k.ends_with(".csv"))
        .collect();
    let differing = compared.iter().filter(|k| a.get(**k) != b.get(**k)).count();
    let pass = a.keys().eq(b.keys()) && !compared.is_empty() && differing == 0;
    report(
        9,
        pass,
        &format!("{} metrics/trace files compared, {differing} differ", compared.len()),
    );
    assert!(pass);
}

#[test]
fn criterion_10_cost_statistics() {
    let cost = CostParams::default();
    let a = Location::new(0, 0);
    let b = Location::new(4, 6);
    assert_eq!(manhattan_distance(a, b), 10);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let draws: Vec<f64> = (0..COST_DRAWS).map(|_| gen_cost(a, b, &cost, &mut rng)).collect();
    let m = mean(&draws);
    let lo = draws.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = draws.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pass = (m - 5.5).abs() <= COST_MEAN_TOL && lo >= 5.0 && hi <= 6.0;
    report(10, pass, &format!("mean {m:.4} (5.5 +/- {COST_MEAN_TOL}), range [{lo:.4}, {hi:.4}]"));
    assert!(pass);
}

#[test]
fn criterion_11_single_robot_planning_time() {
    let mut cfg = ExperimentConfig::synthetic(1, 100.0, Method::Rmcts);
    cfg.runs = 1;
    let started = Instant::now();
    let b = run_batch_with(&cfg, Method::Rmcts).unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    let steps = b.missions[0].robots[0].steps.len();
    let pass = elapsed < PLANNING_LIMIT_S;
    report(
        11,
        pass,
        &format!("single robot, B=100, 1000 iterations: {steps} steps in {elapsed:.2} s (limit {PLANNING_LIMIT_S} s)"),
    );
    assert!(pass);
}

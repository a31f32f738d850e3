use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::sample::subsequence;
use proptest::strategy::ValueTree;

use ipp_core::{GpModel, GridSpec, KernelParams, Location, Observation};

fn params(length_scale: f64, jitter: f64) -> KernelParams {
    KernelParams {
        length_scale,
        signal_variance: 1.0,
        jitter,
    }
}

fn kernel(a: Location, b: Location, p: &KernelParams) -> f64 {
    let dx = a.x as f64 - b.x as f64;
    let dy = a.y as f64 - b.y as f64;
    let s = 3f64.sqrt() * (dx * dx + dy * dy).sqrt() / p.length_scale;
    p.signal_variance * (1.0 + s) * (-s).exp()
}

fn all_cells(w: u32, h: u32) -> Vec<Location> {
    GridSpec::new(w, h).unwrap().cells().collect()
}

/// Distinct cells of a 30x30 grid, with readings.
fn arb_observations(max: usize) -> impl Strategy<Value = Vec<Observation>> {
    subsequence(all_cells(30, 30), 1..=max)
        .prop_shuffle()
        .prop_flat_map(|locs| {
            let n = locs.len();
            (Just(locs), prop::collection::vec(-3.0..3.0f64, n))
        })
        .prop_map(|(locs, vals)| locs.into_iter().zip(vals).map(|(l, v)| Observation::new(l, v)).collect())
}

fn arb_query() -> impl Strategy<Value = Location> {
    (0u32..30, 0u32..30).prop_map(|(x, y)| Location::new(x, y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cholesky_path_matches_dense_inverse(
        obs in arb_observations(25),
        queries in prop::collection::vec(arb_query(), 1..20),
    ) {
        let p = params(1.0, 1e-8);
        let model = GpModel::fit(obs.clone(), p).unwrap();
        let n = obs.len();
        let k = DMatrix::from_fn(n, n, |i, j| {
            kernel(obs[i].loc, obs[j].loc, &p) + if i == j { model.jitter() } else { 0.0 }
        });
        let kinv = k.try_inverse().unwrap();
        let y = DVector::from_iterator(n, obs.iter().map(|o| o.value));
        let alpha = &kinv * &y;
        for q in queries {
            let ks = DVector::from_iterator(n, obs.iter().map(|o| kernel(o.loc, q, &p)));
            let mean = ks.dot(&alpha);
            let var = (1.0 - ks.dot(&(&kinv * &ks))).max(0.0);
            let got = model.predict_one(q);
            prop_assert!((got.mean - mean).abs() <= 1e-8, "mean {} vs {}", got.mean, mean);
            prop_assert!((got.variance - var).abs() <= 1e-8, "var {} vs {}", got.variance, var);
        }
    }

    #[test]
    fn adding_an_observation_never_raises_variance(
        obs in arb_observations(20),
        queries in prop::collection::vec(arb_query(), 1..30),
    ) {
        let p = params(1.5, 1e-8);
        let before = GpModel::fit(obs[..obs.len() - 1].to_vec(), p).unwrap();
        let after = GpModel::fit(obs, p).unwrap();
        for q in queries {
            prop_assert!(after.predict_one(q).variance <= before.predict_one(q).variance + 1e-9);
        }
    }

    #[test]
    fn training_values_are_reproduced(obs in arb_observations(25)) {
        let model = GpModel::fit(obs.clone(), params(1.0, 1e-10)).unwrap();
        for o in &obs {
            prop_assert!((model.predict_one(o.loc).mean - o.value).abs() <= 1e-4);
        }
    }
}

#[test]
fn kernel_matrix_factorizes_without_escalation() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let strategy = subsequence(all_cells(30, 30), 2..=60);
    for _ in 0..1000 {
        let locs = strategy.new_tree(&mut runner).unwrap().current();
        let obs: Vec<Observation> = locs.into_iter().map(|l| Observation::new(l, 0.0)).collect();
        let model = GpModel::fit(obs, params(1.0, 1e-8)).unwrap();
        assert_eq!(model.jitter(), 1e-8);
    }
}

#[test]
fn posterior_grid_examples() {
    let grid = GridSpec::new(30, 30).unwrap();
    let empty = GpModel::empty(params(1.0, 1e-8)).unwrap();
    let mean = empty.posterior_grid(grid);
    assert_eq!(mean.len(), 900);
    assert!(mean.iter().all(|&m| m == 0.0));

    let c = Location::new(12, 7);
    let one = GpModel::fit(vec![Observation::new(c, 2.5)], params(1.0, 1e-10)).unwrap();
    let mean = one.posterior_grid(grid);
    assert!((mean[grid.index(c).unwrap()] - 2.5).abs() < 1e-3);
    assert!(one.variance_grid(grid).iter().all(|v| (0.0..=1.0).contains(v)));
}

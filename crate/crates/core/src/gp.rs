//! Exact Gaussian-process regression with a Matérn 3/2 kernel.
//!
//! The posterior is computed from a Cholesky factor of `K + jitter·I`, where
//! `K` is built from Euclidean distances between cell coordinates. The prior
//! mean is zero. Readings are treated as noise-free: `jitter` is the only
//! diagonal term.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::environment::{euclidean_distance, GridSpec, Location, LocationSet};
use crate::error::{Error, Result};

const SQRT_3: f64 = 1.732_050_807_568_877_2;
const MIN_JITTER: f64 = 1e-8;
const MAX_JITTER: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelParams {
    pub length_scale: f64,
    pub signal_variance: f64,
    pub jitter: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        KernelParams {
            length_scale: 1.0,
            signal_variance: 1.0,
            jitter: MIN_JITTER,
        }
    }
}

impl KernelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.length_scale > 0.0 && self.length_scale.is_finite()) {
            return Err(Error::param(format!(
                "length_scale must be > 0, got {}",
                self.length_scale
            )));
        }
        if !(self.signal_variance > 0.0 && self.signal_variance.is_finite()) {
            return Err(Error::param(format!(
                "signal_variance must be > 0, got {}",
                self.signal_variance
            )));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(Error::param(format!("jitter must be >= 0, got {}", self.jitter)));
        }
        Ok(())
    }

    #[inline]
    fn cov(&self, r: f64) -> f64 {
        let s = SQRT_3 * r / self.length_scale;
        self.signal_variance * (1.0 + s) * (-s).exp()
    }

    fn cov_between(&self, a: Location, b: Location) -> f64 {
        self.cov(euclidean_distance(a, b))
    }
}

/// Matérn covariance with smoothness 3/2 at distance `r`.
pub fn matern32(r: f64, params: &KernelParams) -> Result<f64> {
    if r.is_nan() || r < 0.0 {
        return Err(Error::param(format!("distance must be >= 0, got {r}")));
    }
    Ok(params.cov(r))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub loc: Location,
    pub value: f64,
}

impl Observation {
    pub fn new(loc: Location, value: f64) -> Self {
        Observation { loc, value }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

/// Frozen posterior variances keyed by location.
pub type VarianceMap = HashMap<Location, f64>;

/// A fitted posterior. Immutable once built.
#[derive(Clone, Debug)]
pub struct GpModel {
    params: KernelParams,
    observations: Vec<Observation>,
    /// Row-major lower-triangular factor, n×n.
    chol: Vec<f64>,
    alpha: Vec<f64>,
    jitter: f64,
}

/// In-place Cholesky of a row-major SPD matrix; the upper triangle is zeroed.
fn cholesky_in_place(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !d.is_finite() || d <= 0.0 {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
        for k in (j + 1)..n {
            a[j * n + k] = 0.0;
        }
    }
    true
}

/// Solves `L·x = b` in place.
fn forward_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        let s: f64 = row.iter().zip(&b[..i]).map(|(a, x)| a * x).sum();
        b[i] = (b[i] - s) / l[i * n + i];
    }
}

/// Solves `Lᵀ·x = b` in place.
fn backward_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

impl GpModel {
    /// The prior: no observations.
    pub fn empty(params: KernelParams) -> Result<Self> {
        Self::fit(Vec::new(), params)
    }

    /// Factorizes `K + jitter·I`, escalating the jitter tenfold (up to 1e-2)
    /// if the factorization fails.
    pub fn fit(observations: Vec<Observation>, params: KernelParams) -> Result<Self> {
        params.validate()?;
        let mut seen = HashSet::with_capacity(observations.len());
        for o in &observations {
            if !seen.insert(o.loc) {
                return Err(Error::param(format!("duplicate observation at {}", o.loc)));
            }
            if !o.value.is_finite() {
                return Err(Error::param(format!("non-finite reading at {}", o.loc)));
            }
        }

        let n = observations.len();
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let c = params.cov_between(observations[i].loc, observations[j].loc);
                k[i * n + j] = c;
                k[j * n + i] = c;
            }
        }

        let mut jitter = params.jitter;
        let chol = loop {
            let mut a = k.clone();
            for i in 0..n {
                a[i * n + i] += jitter;
            }
            if cholesky_in_place(&mut a, n) {
                break a;
            }
            jitter = (jitter * 10.0).max(MIN_JITTER);
            if jitter > MAX_JITTER * (1.0 + 1e-9) {
                return Err(Error::Numerical(format!(
                    "Cholesky failed for {n} observations even with jitter {MAX_JITTER}"
                )));
            }
        };

        let mut alpha: Vec<f64> = observations.iter().map(|o| o.value).collect();
        forward_solve(&chol, n, &mut alpha);
        backward_solve(&chol, n, &mut alpha);

        Ok(GpModel {
            params,
            observations,
            chol,
            alpha,
            jitter,
        })
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Diagonal term actually used, after any escalation.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Lower-triangular Cholesky factor, row-major.
    pub fn cholesky_factor(&self) -> &[f64] {
        &self.chol
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn predict_one(&self, q: Location) -> Prediction {
        let n = self.observations.len();
        let prior = self.params.signal_variance;
        if n == 0 {
            return Prediction {
                mean: 0.0,
                variance: prior,
            };
        }
        let mut kstar: Vec<f64> = self
            .observations
            .iter()
            .map(|o| self.params.cov_between(o.loc, q))
            .collect();
        let mean = kstar.iter().zip(&self.alpha).map(|(k, a)| k * a).sum();
        forward_solve(&self.chol, n, &mut kstar);
        let reduction: f64 = kstar.iter().map(|v| v * v).sum();
        Prediction {
            mean,
            variance: (prior - reduction).max(0.0),
        }
    }

    pub fn predict(&self, query: &[Location]) -> Vec<Prediction> {
        query.iter().map(|&q| self.predict_one(q)).collect()
    }

    pub fn variance_map(&self, candidates: &LocationSet) -> VarianceMap {
        candidates
            .iter()
            .map(|&c| (c, self.predict_one(c).variance))
            .collect()
    }

    /// Posterior mean at every cell, row-major.
    pub fn posterior_grid(&self, grid: GridSpec) -> Vec<f64> {
        grid.cells().map(|c| self.predict_one(c).mean).collect()
    }

    /// Posterior variance at every cell, row-major.
    pub fn variance_grid(&self, grid: GridSpec) -> Vec<f64> {
        grid.cells().map(|c| self.predict_one(c).variance).collect()
    }
}

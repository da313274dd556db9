//! Gaussian-process model of the reward landscape over joint space, and the
//! Monte Carlo choice of a replacement action after a collision.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::arm::{ArmModel, JointConfig};
use crate::env::{Action, ACTION_SCALE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpHyper {
    pub signal_var: f64,
    pub lengthscale: f64,
    pub noise_var: f64,
    /// Candidate configurations drawn per replacement action.
    pub n_samples: usize,
}

impl Default for GpHyper {
    fn default() -> Self {
        GpHyper {
            signal_var: 1.0,
            lengthscale: 0.5,
            noise_var: 1e-2,
            n_samples: 64,
        }
    }
}

impl GpHyper {
    pub fn validate(&self) -> Result<()> {
        let ok = self.signal_var > 0.0
            && self.lengthscale > 0.0
            && self.noise_var >= 0.0
            && self.signal_var.is_finite()
            && self.lengthscale.is_finite()
            && self.noise_var.is_finite()
            && self.n_samples >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid GP hyperparameters {self:?}")))
        }
    }

    /// Matérn 5/2 covariance at distance `r`.
    pub fn kernel(&self, r: f64) -> f64 {
        let z = 5.0_f64.sqrt() * r / self.lengthscale;
        self.signal_var * (1.0 + z + z * z / 3.0) * (-z).exp()
    }

    pub fn covariance(&self, a: &[f64], b: &[f64]) -> f64 {
        let r = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        self.kernel(r)
    }
}

/// Gram matrix `K[i][j] = k(x_i, x_j)` in row-major order.
pub fn gram(hyper: &GpHyper, xs: &[Vec<f64>]) -> Vec<f64> {
    let n = xs.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = hyper.covariance(&xs[i], &xs[j]);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

const JITTERS: [f64; 6] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Lower Cholesky factor of a symmetric `n x n` matrix, or `None` if it is
/// not numerically positive definite.
fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    Some(l)
}

fn solve_lower(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

fn solve_upper_transposed(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Zero-mean GP posterior conditioned on `(x, y)` observations.
#[derive(Debug, Clone)]
pub struct GpModel {
    hyper: GpHyper,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    chol: Vec<f64>,
    alpha: Vec<f64>,
    jitter: f64,
}

impl GpModel {
    /// Factorizes `K + noise * I` (escalating diagonal jitter up to `1e-6` if
    /// needed) and solves for the posterior weights.
    pub fn fit(x: Vec<Vec<f64>>, y: Vec<f64>, hyper: GpHyper) -> Result<Self> {
        hyper.validate()?;
        let n = x.len();
        if n == 0 {
            return Err(Error::EmptyDataset("GP needs at least one observation"));
        }
        if y.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: y.len(),
            });
        }
        let dim = x[0].len();
        if x.iter().any(|r| r.len() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                got: x.iter().map(Vec::len).find(|&l| l != dim).unwrap_or(0),
            });
        }
        if x.iter().flatten().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite GP training data".into()));
        }
        let mut k = gram(&hyper, &x);
        for i in 0..n {
            k[i * n + i] += hyper.noise_var;
        }
        let mut factored = None;
        for jitter in JITTERS {
            let mut kj = k.clone();
            for i in 0..n {
                kj[i * n + i] += jitter;
            }
            if let Some(l) = cholesky(&kj, n) {
                factored = Some((l, jitter));
                break;
            }
        }
        let (chol, jitter) = factored.ok_or_else(|| {
            Error::Numerical(format!("GP covariance of {n} points is not positive definite"))
        })?;
        let mut alpha = y.clone();
        solve_lower(&chol, n, &mut alpha);
        solve_upper_transposed(&chol, n, &mut alpha);
        Ok(GpModel {
            hyper,
            x,
            y,
            chol,
            alpha,
            jitter,
        })
    }

    pub fn hyper(&self) -> &GpHyper {
        &self.hyper
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn observations(&self) -> (&[Vec<f64>], &[f64]) {
        (&self.x, &self.y)
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn predict_mean(&self, x: &[f64]) -> f64 {
        self.x
            .iter()
            .zip(&self.alpha)
            .map(|(xi, a)| self.hyper.covariance(xi, x) * a)
            .sum()
    }

    /// Posterior mean and variance at `x`. Variance is clamped at zero.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let n = self.x.len();
        let kx: Vec<f64> = self.x.iter().map(|xi| self.hyper.covariance(xi, x)).collect();
        let mean = kx.iter().zip(&self.alpha).map(|(k, a)| k * a).sum();
        let mut v = kx;
        solve_lower(&self.chol, n, &mut v);
        let var = self.hyper.signal_var - v.iter().map(|t| t * t).sum::<f64>();
        debug_assert!(var > -1e-9, "negative posterior variance {var}");
        (mean, var.max(0.0))
    }

    /// Writes `q1,q2,mean,variance` over a grid of the first two joints, the
    /// remaining joints held at `fixed`.
    pub fn write_landscape_csv<W: Write>(
        &self,
        out: W,
        q1: (f64, f64),
        q2: (f64, f64),
        resolution: usize,
        fixed: &[f64],
    ) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["q1", "q2", "mean", "variance"])?;
        let res = resolution.max(2);
        for i in 0..res {
            for j in 0..res {
                let a = q1.0 + (q1.1 - q1.0) * i as f64 / (res - 1) as f64;
                let b = q2.0 + (q2.1 - q2.0) * j as f64 / (res - 1) as f64;
                let mut x = vec![a, b];
                x.extend_from_slice(fixed);
                let (m, v) = self.predict(&x);
                w.write_record([a, b, m, v].map(|v| v.to_string()))?;
            }
        }
        w.flush().map_err(|e| Error::io("<landscape>", e))?;
        Ok(())
    }
}

/// Min-max scales predicted rewards to `[0, 1]` and normalizes them to sum to
/// one. Falls back to uniform when all predictions are equal.
pub fn selection_probabilities(means: &[f64]) -> Vec<f64> {
    let n = means.len();
    if n == 0 {
        return Vec::new();
    }
    let lo = means.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if !(span > 0.0) || !span.is_finite() {
        return vec![1.0 / n as f64; n];
    }
    let scaled: Vec<f64> = means.iter().map(|m| (m - lo) / span).collect();
    let total: f64 = scaled.iter().sum();
    scaled.into_iter().map(|s| s / total).collect()
}

/// Draws an index from a discrete distribution.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > 0.0 {
            last_positive = i;
        }
        acc += p;
        if u < acc && *p > 0.0 {
            return i;
        }
    }
    last_positive
}

/// Replacement action chosen by sampling one-step reachable configurations,
/// predicting their reward and drawing one with probability proportional to
/// its scaled prediction.
pub fn guided_action<R: Rng + ?Sized>(
    model: &GpModel,
    arm: &ArmModel,
    q_current: &JointConfig,
    rng: &mut R,
    n_samples: usize,
) -> Action {
    let n = q_current.len();
    let mut actions = Vec::with_capacity(n_samples.max(1));
    let mut means = Vec::with_capacity(n_samples.max(1));
    for _ in 0..n_samples.max(1) {
        let u = Action::random(n, rng);
        let mut q: Vec<f64> = q_current
            .angles()
            .iter()
            .zip(u.values())
            .map(|(q, a)| q + ACTION_SCALE * a)
            .collect();
        arm.clip(&mut q);
        means.push(model.predict_mean(&q));
        actions.push(u);
    }
    let probs = selection_probabilities(&means);
    actions.swap_remove(sample_index(&probs, rng))
}

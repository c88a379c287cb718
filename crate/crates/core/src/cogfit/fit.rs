//! Maximum a posteriori fits with a Laplace summary of uncertainty.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::optim::{halton, NelderMead};
use super::{CogfitError, Model};
use crate::engine::TrialRecord;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;
const HESSIAN_STEP: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct FitOptions {
    /// Number of optimiser starts; the first is the prior mode.
    pub n_starts: usize,
    /// Offset into the Halton sequence, so separate runs can use disjoint starts.
    pub halton_offset: u64,
    /// A parameter is flagged weakly identified when its Laplace posterior sd
    /// on the unbounded scale exceeds this fraction of the prior sd.
    pub weak_sd_ratio: f64,
    pub optimizer: NelderMead,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { n_starts: 8, halton_offset: 1, weak_sd_ratio: 0.5, optimizer: NelderMead::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: Model,
    pub param_names: Vec<String>,
    pub estimate: Vec<f64>,
    pub estimate_unbounded: Vec<f64>,
    pub log_posterior: f64,
    pub log_likelihood: f64,
    pub n_sessions: usize,
    pub converged: bool,
    /// Laplace standard deviations on the unbounded scale.
    pub sd_unbounded: Vec<f64>,
    /// Laplace 95% intervals mapped back to the parameter scale.
    pub interval95: Vec<(f64, f64)>,
    /// Negative second derivative of the log-likelihood per unbounded coordinate.
    pub loglik_curvature: Vec<f64>,
    pub weakly_identified: Vec<bool>,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.param_names.iter().position(|n| n == name).map(|i| self.estimate[i])
    }
}

/// Fits `model` to one or more sessions with default options.
pub fn fit_map(model: Model, sessions: &[Vec<TrialRecord>]) -> Result<FitResult, CogfitError> {
    fit_map_with(model, sessions, &FitOptions::default())
}

pub fn fit_map_with(
    model: Model,
    sessions: &[Vec<TrialRecord>],
    options: &FitOptions,
) -> Result<FitResult, CogfitError> {
    if sessions.iter().all(|s| s.is_empty()) {
        return Err(CogfitError::Degenerate("no trials to fit".into()));
    }
    // Surface schema and task errors before optimising.
    model.log_posterior_z(&vec![0.0; model.dim()], sessions)?;

    let dim = model.dim();
    let objective = |z: &[f64]| match model.log_posterior_z(z, sessions) {
        Ok(v) => -v,
        Err(_) => f64::INFINITY,
    };
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut starts = vec![vec![0.0; dim]];
    for i in 0..options.n_starts.saturating_sub(1) {
        let u = halton(options.halton_offset + i as u64, dim);
        starts.push(u.iter().map(|p| std_normal.inverse_cdf(p.clamp(1e-6, 1.0 - 1e-6))).collect());
    }

    let mut best = None::<super::optim::Minimum>;
    for start in &starts {
        let m = options.optimizer.minimize(objective, start);
        if best.as_ref().is_none_or(|b| m.fx < b.fx) {
            best = Some(m);
        }
    }
    let first = best.ok_or_else(|| CogfitError::Fit("no starting points".into()))?;
    // Polish from the best point with a fresh, small simplex.
    let polish = NelderMead { initial_step: 0.05, ..options.optimizer };
    let polished = polish.minimize(objective, &first.x);
    let best = if polished.fx <= first.fx { polished } else { first };
    if !best.fx.is_finite() {
        return Err(CogfitError::Fit("log-posterior is not finite at any start".into()));
    }

    let z = best.x.clone();
    let theta = model.from_unbounded(&z);
    let log_likelihood = model.loglik_sessions(&theta, sessions)?;
    let precision = neg_hessian(&|v: &[f64]| -objective(v), &z);
    let sd = laplace_sd(&precision);
    let interval95 = model
        .params()
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            if sd[i].is_finite() {
                (spec.bound.from_unbounded(z[i] - Z95 * sd[i]), spec.bound.from_unbounded(z[i] + Z95 * sd[i]))
            } else {
                (spec.bound.from_unbounded(f64::NEG_INFINITY), spec.bound.from_unbounded(f64::INFINITY))
            }
        })
        .collect();
    // The standard-normal prior contributes exactly 1 to each diagonal entry.
    let loglik_curvature: Vec<f64> = (0..dim).map(|i| precision[(i, i)] - 1.0).collect();
    let weakly_identified = sd.iter().map(|s| *s > options.weak_sd_ratio).collect();

    Ok(FitResult {
        model,
        param_names: model.param_names().iter().map(|s| s.to_string()).collect(),
        estimate: theta,
        estimate_unbounded: z,
        log_posterior: -best.fx,
        log_likelihood,
        n_sessions: sessions.len(),
        converged: best.converged,
        sd_unbounded: sd,
        interval95,
        loglik_curvature,
        weakly_identified,
    })
}

/// Negative Hessian of `f` at `x` by central differences.
pub fn neg_hessian(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let h = HESSIAN_STEP;
    let at = |di: usize, si: f64, dj: usize, sj: f64| {
        let mut v = x.to_vec();
        v[di] += si * h;
        v[dj] += sj * h;
        f(&v)
    };
    let f0 = f(x);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut v = x.to_vec();
        v[i] += h;
        let up = f(&v);
        v[i] -= 2.0 * h;
        let down = f(&v);
        m[(i, i)] = -(up - 2.0 * f0 + down) / (h * h);
        for j in 0..i {
            let d =
                (at(i, 1.0, j, 1.0) - at(i, 1.0, j, -1.0) - at(i, -1.0, j, 1.0) + at(i, -1.0, j, -1.0)) / (4.0 * h * h);
            m[(i, j)] = -d;
            m[(j, i)] = -d;
        }
    }
    m
}

/// Marginal standard deviations from a precision matrix. Falls back to the
/// diagonal when the matrix is not positive definite.
fn laplace_sd(precision: &DMatrix<f64>) -> Vec<f64> {
    let n = precision.nrows();
    if let Some(chol) = precision.clone().cholesky() {
        let cov = chol.inverse();
        return (0..n).map(|i| cov[(i, i)].sqrt()).collect();
    }
    (0..n)
        .map(|i| {
            let p = precision[(i, i)];
            if p > 0.0 {
                1.0 / p.sqrt()
            } else {
                f64::INFINITY
            }
        })
        .collect()
}

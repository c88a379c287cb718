//! Parameter recovery: simulate subjects at known parameters, refit, correlate.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit_map_with, FitOptions};
use super::{simulate, Bound, CogfitError, Model};
use crate::engine::TaskConfig;
use crate::rng::{derive_seed, split};
use crate::stats::linreg;

/// Range used to draw true values of unbounded-above parameters.
pub const POSITIVE_DRAW_RANGE: (f64, f64) = (0.0, 3.0);

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub model: Model,
    pub param_names: Vec<String>,
    pub truth: Vec<Vec<f64>>,
    pub estimates: Vec<Vec<f64>>,
    /// Pearson correlation between true and fitted values, per parameter.
    pub correlations: Vec<f64>,
}

/// Draws one parameter vector uniformly within the model's bounds.
pub fn draw_params<R: Rng>(model: Model, rng: &mut R) -> Vec<f64> {
    model
        .params()
        .iter()
        .map(|s| {
            let (lo, hi) = match s.bound {
                Bound::Interval { lo, hi } => (lo, hi),
                Bound::Positive => POSITIVE_DRAW_RANGE,
            };
            rng.gen_range(lo..=hi)
        })
        .collect()
}

pub fn recovery_study(model: Model, n_subjects: usize, seed: u64) -> Result<RecoveryReport, CogfitError> {
    let config = TaskConfig::default_for(model.task());
    let mut rng = split(seed, 0);
    let truth: Vec<Vec<f64>> = (0..n_subjects).map(|_| draw_params(model, &mut rng)).collect();
    let estimates: Vec<Vec<f64>> = truth
        .par_iter()
        .enumerate()
        .map(|(i, theta)| {
            let trials = simulate(model, theta, &config, derive_seed(seed, i as u64 + 1))?;
            Ok(fit_map_with(model, &[trials], &FitOptions::default())?.estimate)
        })
        .collect::<Result<_, CogfitError>>()?;
    let correlations = (0..model.dim())
        .map(|j| {
            let x: Vec<f64> = truth.iter().map(|t| t[j]).collect();
            let y: Vec<f64> = estimates.iter().map(|e| e[j]).collect();
            linreg(&x, &y).map(|f| f.r).unwrap_or(0.0)
        })
        .collect();
    Ok(RecoveryReport {
        model,
        param_names: model.param_names().iter().map(|s| s.to_string()).collect(),
        truth,
        estimates,
        correlations,
    })
}

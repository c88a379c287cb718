//! Cognitive models of the three tasks: choice kernels, trial log-likelihoods,
//! simulators, MAP fitting and posterior sampling.
//!
//! Every model is fitted on an unbounded scale. Parameters bounded on `[lo, hi]`
//! use a scaled logit, positive ones a log; the prior is standard normal on
//! that scale.

pub mod cumulative;
pub mod fit;
pub mod mcmc;
pub mod optim;
pub mod pvl;
pub mod recovery;
pub mod slm;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{play, Agent};
use crate::engine::{Engine, EngineError, Task, TaskConfig, TrialRecord};
use crate::rng::split;

pub use cumulative::{CumulativeAgent, CumulativeParams};
pub use fit::{fit_map, fit_map_with, FitOptions, FitResult};
pub use mcmc::{rhat, sample_posterior, McmcOptions, PosteriorChains};
pub use pvl::{PvlAgent, PvlParams};
pub use slm::{SlmAgent, SlmParams};

/// Floor applied to every trial probability inside a log-likelihood.
pub const PROB_FLOOR: f64 = 1e-6;

pub(crate) fn floored_ln(logp: f64) -> f64 {
    logp.max(PROB_FLOOR.ln())
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CogfitError {
    #[error("model expects {expected} trials, found {found}")]
    TaskMismatch { expected: Task, found: Task },
    #[error("malformed trial log: {0}")]
    Schema(String),
    #[error("non-finite value: {0}")]
    Numerical(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("sampler failed: {0}")]
    Sampler(String),
    #[error("engine: {0}")]
    Engine(#[from] EngineError),
}

/// Support of one parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Bound {
    Interval { lo: f64, hi: f64 },
    Positive,
}

impl Bound {
    pub fn contains(self, x: f64) -> bool {
        match self {
            Bound::Interval { lo, hi } => x >= lo && x <= hi,
            Bound::Positive => x >= 0.0 && x.is_finite(),
        }
    }

    pub fn to_unbounded(self, x: f64) -> f64 {
        match self {
            Bound::Interval { lo, hi } => {
                let u = ((x - lo) / (hi - lo)).clamp(1e-12, 1.0 - 1e-12);
                (u / (1.0 - u)).ln()
            }
            Bound::Positive => x.max(1e-300).ln(),
        }
    }

    pub fn from_unbounded(self, z: f64) -> f64 {
        match self {
            Bound::Interval { lo, hi } => {
                let u = if z >= 0.0 { 1.0 / (1.0 + (-z).exp()) } else { z.exp() / (1.0 + z.exp()) };
                lo + (hi - lo) * u
            }
            Bound::Positive => z.exp(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: &'static str,
    pub bound: Bound,
}

const fn interval(name: &'static str, lo: f64, hi: f64) -> ParamSpec {
    ParamSpec { name, bound: Bound::Interval { lo, hi } }
}

const fn positive(name: &'static str) -> ParamSpec {
    ParamSpec { name, bound: Bound::Positive }
}

const PVL_SPECS: [ParamSpec; 4] =
    [interval("A", 0.0, 1.0), interval("c", 0.0, 5.0), interval("alpha", 0.0, 2.0), interval("lambda", 0.0, 10.0)];
const CUMULATIVE_SPECS: [ParamSpec; 4] =
    [interval("c", 0.0, 1.0), interval("alpha", 0.0, 5.0), positive("rho"), positive("gamma")];
const SLM_SPECS: [ParamSpec; 3] = [interval("r", 0.0, 1.0), interval("p", 0.0, 1.0), interval("d", 0.0, 5.0)];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    PvlDecay,
    Cumulative,
    Slm,
}

impl Model {
    pub const ALL: [Model; 3] = [Model::PvlDecay, Model::Cumulative, Model::Slm];

    pub fn name(self) -> &'static str {
        match self {
            Model::PvlDecay => "pvl_decay",
            Model::Cumulative => "cumulative",
            Model::Slm => "slm",
        }
    }

    pub fn task(self) -> Task {
        match self {
            Model::PvlDecay => Task::Igt,
            Model::Cumulative => Task::Cgt,
            Model::Slm => Task::Wcst,
        }
    }

    pub fn for_task(task: Task) -> Model {
        match task {
            Task::Igt => Model::PvlDecay,
            Task::Cgt => Model::Cumulative,
            Task::Wcst => Model::Slm,
        }
    }

    pub fn params(self) -> &'static [ParamSpec] {
        match self {
            Model::PvlDecay => &PVL_SPECS,
            Model::Cumulative => &CUMULATIVE_SPECS,
            Model::Slm => &SLM_SPECS,
        }
    }

    pub fn dim(self) -> usize {
        self.params().len()
    }

    pub fn param_names(self) -> Vec<&'static str> {
        self.params().iter().map(|p| p.name).collect()
    }

    pub fn check(self, theta: &[f64]) -> Result<(), CogfitError> {
        if theta.len() != self.dim() {
            return Err(CogfitError::Params(format!(
                "{} takes {} parameters, got {}",
                self.name(),
                self.dim(),
                theta.len()
            )));
        }
        for (spec, v) in self.params().iter().zip(theta) {
            if !spec.bound.contains(*v) {
                return Err(CogfitError::Params(format!("{} = {v} is out of range", spec.name)));
            }
        }
        Ok(())
    }

    pub fn to_unbounded(self, theta: &[f64]) -> Vec<f64> {
        self.params().iter().zip(theta).map(|(s, v)| s.bound.to_unbounded(*v)).collect()
    }

    pub fn from_unbounded(self, z: &[f64]) -> Vec<f64> {
        self.params().iter().zip(z).map(|(s, v)| s.bound.from_unbounded(*v)).collect()
    }

    /// Trial log-likelihood of a single session, forfeited trials excluded.
    pub fn loglik(self, theta: &[f64], trials: &[TrialRecord]) -> Result<f64, CogfitError> {
        self.check(theta)?;
        match self {
            Model::PvlDecay => pvl::pvl_loglik(&PvlParams::from_slice(theta), trials),
            Model::Cumulative => cumulative::cumulative_loglik(&CumulativeParams::from_slice(theta), trials),
            Model::Slm => slm::slm_loglik(&SlmParams::from_slice(theta), trials),
        }
    }

    /// Sum of per-session log-likelihoods.
    pub fn loglik_sessions(self, theta: &[f64], sessions: &[Vec<TrialRecord>]) -> Result<f64, CogfitError> {
        sessions.iter().map(|s| self.loglik(theta, s)).sum()
    }

    /// Log-likelihood plus the standard-normal log prior, on the unbounded scale.
    pub fn log_posterior_z(self, z: &[f64], sessions: &[Vec<TrialRecord>]) -> Result<f64, CogfitError> {
        let theta = self.from_unbounded(z);
        let ll = self.loglik_sessions(&theta, sessions)?;
        Ok(ll + log_prior_z(z))
    }

    pub fn agent(self, theta: &[f64]) -> Result<Box<dyn Agent>, CogfitError> {
        self.check(theta)?;
        Ok(match self {
            Model::PvlDecay => Box::new(PvlAgent::new(PvlParams::from_slice(theta))),
            Model::Cumulative => Box::new(CumulativeAgent::new(CumulativeParams::from_slice(theta))),
            Model::Slm => Box::new(SlmAgent::new(SlmParams::from_slice(theta))),
        })
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pvl_decay" | "pvl" => Ok(Model::PvlDecay),
            "cumulative" => Ok(Model::Cumulative),
            "slm" => Ok(Model::Slm),
            other => Err(format!("unknown model '{other}' (expected pvl_decay, cumulative or slm)")),
        }
    }
}

/// Standard-normal log density summed over the unbounded coordinates.
pub fn log_prior_z(z: &[f64]) -> f64 {
    let half_ln_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    z.iter().map(|v| -0.5 * v * v - half_ln_2pi).sum()
}

pub(crate) fn check_task(trials: &[TrialRecord], task: Task) -> Result<(), CogfitError> {
    match trials.iter().find(|t| t.task != task) {
        Some(t) => Err(CogfitError::TaskMismatch { expected: task, found: t.task }),
        None => Ok(()),
    }
}

pub(crate) fn finite(v: f64, what: &str) -> Result<f64, CogfitError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CogfitError::Numerical(format!("{what} evaluated to {v}")))
    }
}

/// Numerically stable `ln Σ exp(x)`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Softmax with max-subtraction.
pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(xs);
    xs.iter().map(|x| (x - lse).exp()).collect()
}

/// Draws an index from a probability vector by inversion.
pub fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(probs.len() - 1)
}

/// Generates a session from `model` at `theta`: the engine supplies outcomes,
/// the model's choice rule supplies choices.
pub fn simulate(model: Model, theta: &[f64], config: &TaskConfig, seed: u64) -> Result<Vec<TrialRecord>, CogfitError> {
    if config.task() != model.task() {
        return Err(CogfitError::TaskMismatch { expected: model.task(), found: config.task() });
    }
    let mut engine = Engine::new(config, seed)?;
    let mut agent = model.agent(theta)?;
    let mut rng = split(seed, 1);
    play(&mut engine, agent.as_mut(), &mut rng).map_err(|(_, e)| CogfitError::Fit(e.to_string()))
}

//! Prospect-valence learning with decay, for the IGT.

use rand::Rng;

use super::{check_task, finite, floored_ln, log_sum_exp, sample_index, softmax, CogfitError};
use crate::agents::{Agent, AgentError, Decision};
use crate::engine::{Choice, Observation, OptionId, Task, TrialRecord};
use crate::rng::SessionRng;

/// Outcomes are divided by this before entering the utility function.
pub const PAYOFF_SCALE: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PvlParams {
    /// Decay of every expectancy per trial.
    pub decay: f64,
    /// Choice consistency; sensitivity is `3^c - 1`.
    pub consistency: f64,
    /// Utility curvature.
    pub shape: f64,
    /// Loss aversion.
    pub loss_aversion: f64,
}

impl PvlParams {
    pub fn from_slice(v: &[f64]) -> Self {
        PvlParams { decay: v[0], consistency: v[1], shape: v[2], loss_aversion: v[3] }
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.decay, self.consistency, self.shape, self.loss_aversion]
    }

    pub fn sensitivity(&self) -> f64 {
        3f64.powf(self.consistency) - 1.0
    }
}

/// Subjective value of a scaled net outcome.
pub fn pvl_utility(x: f64, p: &PvlParams) -> f64 {
    if x > 0.0 {
        x.powf(p.shape)
    } else if x < 0.0 {
        -p.loss_aversion * (-x).powf(p.shape)
    } else {
        0.0
    }
}

/// Decays every expectancy and adds the utility of `net` to the chosen deck.
pub fn pvl_update(e: &mut [f64; 4], deck: OptionId, net: i64, p: &PvlParams) {
    let u = pvl_utility(net as f64 / PAYOFF_SCALE, p);
    for (j, ej) in e.iter_mut().enumerate() {
        *ej *= p.decay;
        if j == deck.index() {
            *ej += u;
        }
    }
}

pub fn pvl_log_probs(e: &[f64; 4], p: &PvlParams) -> [f64; 4] {
    let theta = p.sensitivity();
    let v = e.map(|x| theta * x);
    let lse = log_sum_exp(&v);
    v.map(|x| x - lse)
}

pub fn pvl_choice_probs(e: &[f64; 4], p: &PvlParams) -> [f64; 4] {
    let theta = p.sensitivity();
    let s = softmax(&e.map(|x| theta * x));
    [s[0], s[1], s[2], s[3]]
}

fn deck_and_net(t: &TrialRecord) -> Result<(OptionId, i64), CogfitError> {
    let deck = t.choice.option().ok_or_else(|| CogfitError::Schema(format!("round {}: not a deck choice", t.round)))?;
    let net = t.outcome.net().ok_or_else(|| CogfitError::Schema(format!("round {}: no payoff", t.round)))?;
    Ok((deck, net))
}

pub fn pvl_loglik(p: &PvlParams, trials: &[TrialRecord]) -> Result<f64, CogfitError> {
    check_task(trials, Task::Igt)?;
    let mut e = [0.0; 4];
    let mut ll = 0.0;
    for t in trials {
        let (deck, net) = deck_and_net(t)?;
        if !t.forfeit {
            ll += floored_ln(pvl_log_probs(&e, p)[deck.index()]);
        }
        pvl_update(&mut e, deck, net, p);
    }
    finite(ll, "PVL log-likelihood")
}

/// Plays the IGT by sampling from the model's choice rule.
#[derive(Clone, Debug)]
pub struct PvlAgent {
    params: PvlParams,
    expectancy: [f64; 4],
    seen: usize,
}

impl PvlAgent {
    pub fn new(params: PvlParams) -> Self {
        PvlAgent { params, expectancy: [0.0; 4], seen: 0 }
    }

    pub fn expectancy(&self) -> [f64; 4] {
        self.expectancy
    }

    fn catch_up(&mut self, history: &[TrialRecord]) -> Result<(), CogfitError> {
        if history.len() < self.seen {
            *self = PvlAgent::new(self.params);
        }
        for t in &history[self.seen..] {
            let (deck, net) = deck_and_net(t)?;
            pvl_update(&mut self.expectancy, deck, net, &self.params);
        }
        self.seen = history.len();
        Ok(())
    }
}

impl Agent for PvlAgent {
    fn id(&self) -> String {
        "pvl_decay".into()
    }

    fn decide(
        &mut self,
        obs: &Observation,
        history: &[TrialRecord],
        rng: &mut SessionRng,
    ) -> Result<Decision, AgentError> {
        if obs.task() != Task::Igt {
            return Err(AgentError::Unsupported { agent: self.id(), task: obs.task() });
        }
        self.catch_up(history).map_err(|e| AgentError::Backend(e.to_string()))?;
        let probs = pvl_choice_probs(&self.expectancy, &self.params);
        let k = sample_index(&probs, rng.gen());
        Ok(Choice::Option(OptionId::ALL[k]).into())
    }
}

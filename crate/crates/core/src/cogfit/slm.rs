//! Attention-shifting model of the WCST. Attention is a distribution over the
//! three sorting rules; feedback pulls it toward the rules consistent with it.

use rand::Rng;

use super::{check_task, finite, floored_ln, log_sum_exp, sample_index, CogfitError};
use crate::agents::{Agent, AgentError, Decision};
use crate::engine::{Choice, Feedback, Item, Observation, OptionId, Stimulus, Task, TrialRecord};
use crate::rng::SessionRng;

/// Added to every attention weight when an update would divide by zero.
pub const ATTENTION_SMOOTHING: f64 = 1e-9;

pub type MatchMatrix = [[bool; 3]; 4];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlmParams {
    /// Learning rate after a reward.
    pub reward_rate: f64,
    /// Learning rate after a punishment.
    pub punish_rate: f64,
    /// Decision consistency, the exponent on attention.
    pub focus: f64,
}

impl SlmParams {
    pub fn from_slice(v: &[f64]) -> Self {
        SlmParams { reward_rate: v[0], punish_rate: v[1], focus: v[2] }
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.reward_rate, self.punish_rate, self.focus]
    }
}

pub fn uniform_attention() -> [f64; 3] {
    [1.0 / 3.0; 3]
}

fn weighted_ln(a: f64, d: f64) -> f64 {
    if d == 0.0 {
        0.0
    } else if a <= 0.0 {
        f64::NEG_INFINITY
    } else {
        d * a.ln()
    }
}

/// Log choice probabilities for the four reference cards.
pub fn slm_log_probs(m: &MatchMatrix, a: &[f64; 3], d: f64) -> Result<[f64; 4], CogfitError> {
    let scores: Vec<f64> = m
        .iter()
        .map(|row| {
            let terms: Vec<f64> = (0..3).filter(|&i| row[i]).map(|i| weighted_ln(a[i], d)).collect();
            log_sum_exp(&terms)
        })
        .collect();
    let total = log_sum_exp(&scores);
    if total == f64::NEG_INFINITY {
        return Err(CogfitError::Degenerate("no card has positive weight".into()));
    }
    Ok([scores[0] - total, scores[1] - total, scores[2] - total, scores[3] - total])
}

pub fn slm_choice_probs(m: &MatchMatrix, a: &[f64; 3], d: f64) -> Result<[f64; 4], CogfitError> {
    Ok(slm_log_probs(m, a, d)?.map(f64::exp))
}

fn signal(row: &[bool; 3], a: &[f64; 3], fb: Feedback) -> Option<[f64; 3]> {
    let w = |i: usize| match fb {
        Feedback::Correct => f64::from(u8::from(row[i])),
        Feedback::Incorrect => f64::from(u8::from(!row[i])),
    };
    let denom: f64 = (0..3).map(|i| w(i) * a[i]).sum();
    (denom > 0.0).then(|| [w(0) * a[0] / denom, w(1) * a[1] / denom, w(2) * a[2] / denom])
}

/// Attention after choosing a card matching the item on the rules in `row`.
pub fn slm_update(a: &[f64; 3], row: &[bool; 3], fb: Feedback, p: &SlmParams) -> Result<[f64; 3], CogfitError> {
    let rate = match fb {
        Feedback::Correct => p.reward_rate,
        Feedback::Incorrect => p.punish_rate,
    };
    let (base, s) = match signal(row, a, fb) {
        Some(s) => (*a, s),
        None => {
            let z = 1.0 + 3.0 * ATTENTION_SMOOTHING;
            let smoothed = a.map(|v| (v + ATTENTION_SMOOTHING) / z);
            let s = signal(row, &smoothed, fb)
                .ok_or_else(|| CogfitError::Degenerate(format!("{fb:?} feedback is impossible for this card")))?;
            (smoothed, s)
        }
    };
    let next = [0, 1, 2].map(|i| (1.0 - rate) * base[i] + rate * s[i]);
    let sum: f64 = next.iter().sum();
    Ok(next.map(|v| v / sum))
}

fn trial_parts(t: &TrialRecord) -> Result<(Item, OptionId, Feedback), CogfitError> {
    let Stimulus::Wcst { item, .. } = t.stimulus else {
        return Err(CogfitError::Schema(format!("round {}: missing WCST stimulus", t.round)));
    };
    let card = t.choice.option().ok_or_else(|| CogfitError::Schema(format!("round {}: not a card", t.round)))?;
    let fb = t.outcome.feedback().ok_or_else(|| CogfitError::Schema(format!("round {}: no feedback", t.round)))?;
    Ok((item, card, fb))
}

pub fn slm_loglik(p: &SlmParams, trials: &[TrialRecord]) -> Result<f64, CogfitError> {
    check_task(trials, Task::Wcst)?;
    let mut a = uniform_attention();
    let mut ll = 0.0;
    for t in trials {
        let (item, card, fb) = trial_parts(t)?;
        let m = item.match_matrix();
        if !t.forfeit {
            ll += floored_ln(slm_log_probs(&m, &a, p.focus)?[card.index()]);
        }
        a = slm_update(&a, &m[card.index()], fb, p)?;
    }
    finite(ll, "SLM log-likelihood")
}

/// Plays the WCST by sampling cards from the model's attention.
#[derive(Clone, Debug)]
pub struct SlmAgent {
    params: SlmParams,
    attention: [f64; 3],
    seen: usize,
}

impl SlmAgent {
    pub fn new(params: SlmParams) -> Self {
        SlmAgent { params, attention: uniform_attention(), seen: 0 }
    }

    pub fn attention(&self) -> [f64; 3] {
        self.attention
    }

    fn catch_up(&mut self, history: &[TrialRecord]) -> Result<(), CogfitError> {
        if history.len() < self.seen {
            *self = SlmAgent::new(self.params);
        }
        for t in &history[self.seen..] {
            let (item, card, fb) = trial_parts(t)?;
            self.attention = slm_update(&self.attention, &item.match_matrix()[card.index()], fb, &self.params)?;
        }
        self.seen = history.len();
        Ok(())
    }
}

impl Agent for SlmAgent {
    fn id(&self) -> String {
        "slm".into()
    }

    fn decide(
        &mut self,
        obs: &Observation,
        history: &[TrialRecord],
        rng: &mut SessionRng,
    ) -> Result<Decision, AgentError> {
        let Observation::Wcst { item, .. } = obs else {
            return Err(AgentError::Unsupported { agent: self.id(), task: obs.task() });
        };
        let backend = |e: CogfitError| AgentError::Backend(e.to_string());
        self.catch_up(history).map_err(backend)?;
        let probs = slm_choice_probs(&item.match_matrix(), &self.attention, self.params.focus).map_err(backend)?;
        let k = sample_index(&probs, rng.gen());
        Ok(Choice::Option(OptionId::ALL[k]).into())
    }
}

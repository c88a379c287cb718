//! Cumulative model of the CGT: a distorted probability of the chosen side,
//! then a softmax over log-utility bets.

use rand::Rng;

use super::{check_task, finite, floored_ln, log_sum_exp, sample_index, softmax, CogfitError};
use crate::agents::{Agent, AgentError, Decision};
use crate::engine::{BetChoice, BetLevel, CgtConfig, Choice, Observation, Side, Stimulus, Task, TrialRecord};
use crate::rng::SessionRng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CumulativeParams {
    /// Bias toward red.
    pub color_bias: f64,
    /// Probability distortion.
    pub distortion: f64,
    /// Weight on the points kept when the bet is lost.
    pub risk_aversion: f64,
    /// Bet inverse temperature.
    pub bet_consistency: f64,
}

impl CumulativeParams {
    pub fn from_slice(v: &[f64]) -> Self {
        CumulativeParams { color_bias: v[0], distortion: v[1], risk_aversion: v[2], bet_consistency: v[3] }
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.color_bias, self.distortion, self.risk_aversion, self.bet_consistency]
    }
}

/// Red fractions are clamped this far inside (0, 1).
pub const RATIO_CLAMP: f64 = 1e-6;

/// Probability of choosing red given the red fraction `r`.
pub fn prob_red(r: f64, p: &CumulativeParams) -> Result<f64, CogfitError> {
    let r = r.clamp(RATIO_CLAMP, 1.0 - RATIO_CLAMP);
    let red = p.color_bias * r.powf(p.distortion);
    let blue = (1.0 - p.color_bias) * (1.0 - r).powf(p.distortion);
    let denom = red + blue;
    if denom <= 0.0 || !denom.is_finite() {
        return Err(CogfitError::Degenerate(format!("side probability undefined at r = {r}")));
    }
    Ok(red / denom)
}

/// Expected log-utility of each bet fraction for a side believed with
/// probability `p_side`, staking from `points`.
pub fn bet_utilities(p_side: f64, points: f64, levels: &[f64], p: &CumulativeParams) -> Vec<f64> {
    levels
        .iter()
        .map(|b| {
            let win = (1.0 + points * (1.0 + b)).ln();
            let lose = (1.0 + p.risk_aversion * points * (1.0 - b)).ln();
            p_side * win + (1.0 - p_side) * lose
        })
        .collect()
}

pub fn bet_log_probs(p_side: f64, points: f64, levels: &[f64], p: &CumulativeParams) -> Vec<f64> {
    let v: Vec<f64> = bet_utilities(p_side, points, levels, p).iter().map(|u| p.bet_consistency * u).collect();
    let lse = log_sum_exp(&v);
    v.iter().map(|x| x - lse).collect()
}

pub fn bet_probs(p_side: f64, points: f64, levels: &[f64], p: &CumulativeParams) -> Vec<f64> {
    let v: Vec<f64> = bet_utilities(p_side, points, levels, p).iter().map(|u| p.bet_consistency * u).collect();
    softmax(&v)
}

pub fn default_levels() -> Vec<f64> {
    CgtConfig::default().bet_levels
}

/// Log-probability of one trial's side and bet.
pub fn trial_loglik(
    r: f64,
    points: f64,
    choice: BetChoice,
    levels: &[f64],
    p: &CumulativeParams,
) -> Result<f64, CogfitError> {
    let pr = prob_red(r, p)?;
    let p_side = if choice.side == Side::Red { pr } else { 1.0 - pr };
    let idx = levels
        .iter()
        .position(|b| BetLevel::from_fraction(*b) == Some(choice.bet))
        .ok_or_else(|| CogfitError::Schema(format!("bet {} is not an offered level", choice.bet.fraction())))?;
    let lp = bet_log_probs(p_side, points.max(0.0), levels, p)[idx];
    Ok(floored_ln(p_side.ln()) + floored_ln(lp))
}

pub fn cumulative_loglik(p: &CumulativeParams, trials: &[TrialRecord]) -> Result<f64, CogfitError> {
    cumulative_loglik_with_levels(p, trials, &default_levels())
}

pub fn cumulative_loglik_with_levels(
    p: &CumulativeParams,
    trials: &[TrialRecord],
    levels: &[f64],
) -> Result<f64, CogfitError> {
    check_task(trials, Task::Cgt)?;
    let mut ll = 0.0;
    for t in trials.iter().filter(|t| !t.forfeit) {
        let Stimulus::Cgt { red, blue, phase_points, .. } = t.stimulus else {
            return Err(CogfitError::Schema(format!("round {}: missing CGT stimulus", t.round)));
        };
        let choice = t.choice.bet().ok_or_else(|| CogfitError::Schema(format!("round {}: not a bet", t.round)))?;
        let r = f64::from(red) / f64::from(red + blue);
        ll += trial_loglik(r, phase_points as f64, choice, levels, p)?;
    }
    finite(ll, "cumulative log-likelihood")
}

/// Plays the CGT by sampling a side, then a bet, from the model.
#[derive(Clone, Debug)]
pub struct CumulativeAgent {
    params: CumulativeParams,
}

impl CumulativeAgent {
    pub fn new(params: CumulativeParams) -> Self {
        CumulativeAgent { params }
    }
}

impl Agent for CumulativeAgent {
    fn id(&self) -> String {
        "cumulative".into()
    }

    fn decide(
        &mut self,
        obs: &Observation,
        _history: &[TrialRecord],
        rng: &mut SessionRng,
    ) -> Result<Decision, AgentError> {
        let Observation::Cgt { red, blue, phase_points, bet_levels, .. } = obs else {
            return Err(AgentError::Unsupported { agent: self.id(), task: obs.task() });
        };
        let r = f64::from(*red) / f64::from(red + blue);
        let pr = prob_red(r, &self.params).map_err(|e| AgentError::Backend(e.to_string()))?;
        let side = if rng.gen::<f64>() < pr { Side::Red } else { Side::Blue };
        let p_side = if side == Side::Red { pr } else { 1.0 - pr };
        let levels: Vec<f64> = bet_levels.iter().map(|b| b.fraction()).collect();
        let probs = bet_probs(p_side, (*phase_points).max(0) as f64, &levels, &self.params);
        let bet = bet_levels[sample_index(&probs, rng.gen())];
        Ok(Choice::Bet(BetChoice { side, bet }).into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(c: f64, a: f64, rho: f64, g: f64) -> CumulativeParams {
        CumulativeParams { color_bias: c, distortion: a, risk_aversion: rho, bet_consistency: g }
    }

    #[test]
    fn distorted_red_probability() {
        let p = prob_red(0.8, &params(0.5, 2.0, 1.0, 1.0)).unwrap();
        assert!((p - 16.0 / 17.0).abs() < 1e-12);
    }

    #[test]
    fn stake_utilities() {
        let u = bet_utilities(1.0, 100.0, &[0.95], &params(0.5, 1.0, 1.0, 1.0));
        assert!((u[0] - 196f64.ln()).abs() < 1e-12);
        let u = bet_utilities(0.0, 100.0, &[0.95], &params(0.5, 1.0, 1.0, 1.0));
        assert!((u[0] - 6f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_consistency_is_uniform() {
        let probs = bet_probs(0.7, 300.0, &default_levels(), &params(0.5, 1.0, 0.4, 0.0));
        assert!(probs.iter().all(|q| (q - 0.2).abs() < 1e-15));
    }
}

//! The two IGT bandit benchmarks: UCB1 and ε-greedy over per-deck mean net outcome.

use rand::Rng;

use crate::engine::{Deck, OptionId, TrialRecord};
use crate::rng::SessionRng;

use super::AgentError;

/// Exploration constant of the UCB1 bonus.
pub const UCB_C: f64 = std::f64::consts::SQRT_2;
pub const DEFAULT_EPSILON: f64 = 0.1;

/// Per-deck (mean net outcome, pick count). Unplayed decks have mean 0.
pub fn deck_stats(history: &[TrialRecord]) -> ([f64; 4], [u32; 4]) {
    let mut sums = [0.0; 4];
    let mut counts = [0u32; 4];
    for t in history {
        if let (Some(d), Some(net)) = (t.choice.option(), t.outcome.net()) {
            sums[d.index()] += net as f64;
            counts[d.index()] += 1;
        }
    }
    let mut means = [0.0; 4];
    for j in 0..4 {
        if counts[j] > 0 {
            means[j] = sums[j] / f64::from(counts[j]);
        }
    }
    (means, counts)
}

/// Index of the first maximum; ties go to the lowest deck.
fn argmax(values: &[f64; 4]) -> Deck {
    let mut best = 0;
    for j in 1..4 {
        if values[j] > values[best] {
            best = j;
        }
    }
    OptionId::ALL[best]
}

/// UCB1 choice for round `t` (1-based): every unplayed deck first, in index
/// order, then `argmax mean + C·sqrt(ln t / n)`.
pub fn ucb_choose(history: &[TrialRecord], t: u32) -> Deck {
    let (means, counts) = deck_stats(history);
    if let Some(j) = counts.iter().position(|&n| n == 0) {
        return OptionId::ALL[j];
    }
    let ln_t = f64::from(t.max(1)).ln();
    let mut scores = [0.0; 4];
    for j in 0..4 {
        scores[j] = means[j] + UCB_C * (ln_t / f64::from(counts[j])).sqrt();
    }
    argmax(&scores)
}

/// ε-greedy: explore uniformly with probability ε (always on an empty history),
/// otherwise the deck with the best mean net outcome.
pub fn epsilon_greedy_choose(history: &[TrialRecord], epsilon: f64, rng: &mut SessionRng) -> Result<Deck, AgentError> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(AgentError::Config(format!("epsilon {epsilon} is outside [0, 1]")));
    }
    let explore = rng.gen::<f64>() < epsilon;
    if history.is_empty() || explore {
        return Ok(OptionId::ALL[rng.gen_range(0..4)]);
    }
    Ok(argmax(&deck_stats(history).0))
}

//! Behavioral scores computed from trial logs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Feedback, OptionId, Rule, Stimulus, Task, TrialRecord};
use crate::stats::{linreg, StatsError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("expected {expected} trials, found {found}")]
    TaskMismatch { expected: Task, found: Task },
    #[error("malformed trial log: {0}")]
    Schema(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("invalid input: {0}")]
    Input(String),
}

impl From<StatsError> for MetricsError {
    fn from(e: StatsError) -> Self {
        match e {
            StatsError::Degenerate(m) => MetricsError::Degenerate(m),
            StatsError::Input(m) => MetricsError::Input(m),
        }
    }
}

fn check_task(trials: &[TrialRecord], task: Task) -> Result<(), MetricsError> {
    if trials.is_empty() {
        return Err(MetricsError::Input("no trials".into()));
    }
    match trials.iter().find(|t| t.task != task) {
        Some(t) => Err(MetricsError::TaskMismatch { expected: task, found: t.task }),
        None => Ok(()),
    }
}

/// Decks C and D.
pub fn is_advantageous(deck: OptionId) -> bool {
    matches!(deck, OptionId::C | OptionId::D)
}

pub const IGT_BLOCK: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IgtSummary {
    pub n_trials: usize,
    /// Share of advantageous picks minus share of disadvantageous picks.
    pub net_score: f64,
    /// Per-deck share of all picks, A..D.
    pub proportions: [f64; 4],
    /// Per-deck share of the final 10 picks.
    pub last10: [f64; 4],
    /// Advantageous share per block of [`IGT_BLOCK`] trials (last block may be short).
    pub learning_curve: Vec<f64>,
    pub final_points: i64,
}

fn deck_shares(trials: &[TrialRecord]) -> Result<[f64; 4], MetricsError> {
    let mut counts = [0usize; 4];
    for t in trials {
        let d = t.choice.option().ok_or_else(|| MetricsError::Schema("IGT trial without a deck".into()))?;
        counts[d.index()] += 1;
    }
    let n = trials.len().max(1) as f64;
    Ok(counts.map(|c| c as f64 / n))
}

fn advantageous_share(trials: &[TrialRecord]) -> f64 {
    let adv = trials.iter().filter(|t| t.choice.option().is_some_and(is_advantageous)).count();
    adv as f64 / trials.len() as f64
}

pub fn igt_summary(trials: &[TrialRecord]) -> Result<IgtSummary, MetricsError> {
    igt_summary_blocks(trials, IGT_BLOCK)
}

pub fn igt_summary_blocks(trials: &[TrialRecord], block: usize) -> Result<IgtSummary, MetricsError> {
    check_task(trials, Task::Igt)?;
    if block == 0 {
        return Err(MetricsError::Input("block size must be positive".into()));
    }
    let proportions = deck_shares(trials)?;
    let last10 = deck_shares(&trials[trials.len().saturating_sub(10)..])?;
    let net_score = proportions[2] + proportions[3] - proportions[0] - proportions[1];
    let learning_curve = trials.chunks(block).map(advantageous_share).collect();
    Ok(IgtSummary {
        n_trials: trials.len(),
        net_score,
        proportions,
        last10,
        learning_curve,
        final_points: trials.last().map(|t| t.cumulative).unwrap_or(0),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningSlope {
    /// Percentage points per block.
    pub slope: f64,
    pub intercept: f64,
    pub r: f64,
    pub p: f64,
    pub n_blocks: usize,
}

/// Per-block advantageous percentage, averaged over sessions that reach the block.
pub fn igt_block_percentages(sessions: &[Vec<TrialRecord>], block: usize) -> Result<Vec<f64>, MetricsError> {
    if block == 0 {
        return Err(MetricsError::Input("block size must be positive".into()));
    }
    let mut sums: Vec<(f64, usize)> = Vec::new();
    for s in sessions {
        check_task(s, Task::Igt)?;
        for (b, chunk) in s.chunks(block).enumerate() {
            if sums.len() <= b {
                sums.push((0.0, 0));
            }
            sums[b].0 += 100.0 * advantageous_share(chunk);
            sums[b].1 += 1;
        }
    }
    Ok(sums.into_iter().map(|(s, n)| s / n as f64).collect())
}

/// OLS of the advantageous percentage against the 1-based block index.
pub fn igt_learning_slope(sessions: &[Vec<TrialRecord>], block: usize) -> Result<LearningSlope, MetricsError> {
    let y = igt_block_percentages(sessions, block)?;
    slope_of_curve(&y)
}

pub fn slope_of_curve(y: &[f64]) -> Result<LearningSlope, MetricsError> {
    let n = y.len();
    if n < 2 {
        return Err(MetricsError::Input(format!("need at least 2 blocks, got {n}")));
    }
    if y.iter().all(|v| *v == y[0]) {
        return Err(MetricsError::Degenerate("advantageous share is constant; r is undefined".into()));
    }
    let x: Vec<f64> = (1..=n).map(|i| i as f64).collect();
    if n == 2 {
        let slope = y[1] - y[0];
        return Ok(LearningSlope { slope, intercept: y[0] - slope, r: slope.signum(), p: 1.0, n_blocks: 2 });
    }
    let f = linreg(&x, y)?;
    Ok(LearningSlope { slope: f.slope, intercept: f.intercept, r: f.r, p: f.p, n_blocks: n })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CgtSummary {
    pub n_trials: usize,
    /// Sum of the phase totals at each phase end.
    pub total_score: i64,
    /// Share of all rounds where the majority colour was chosen.
    pub overall_quality: f64,
    /// Majority size (6..=9) → share of rounds choosing the majority colour.
    pub decision_quality: BTreeMap<u8, f64>,
    /// Majority size → mean bet fraction on rounds where the majority colour was chosen.
    pub risk_adjustment: BTreeMap<u8, Option<f64>>,
}

pub fn cgt_summary(trials: &[TrialRecord]) -> Result<CgtSummary, MetricsError> {
    check_task(trials, Task::Cgt)?;
    let mut total = 0i64;
    let mut per: BTreeMap<u8, (usize, usize, f64)> = BTreeMap::new();
    let mut majority_total = 0usize;
    for (i, t) in trials.iter().enumerate() {
        let Stimulus::Cgt { red, blue, round_in_phase, .. } = t.stimulus else {
            return Err(MetricsError::Schema(format!("round {} lacks a CGT stimulus", t.round)));
        };
        let bet = t.choice.bet().ok_or_else(|| MetricsError::Schema("CGT trial without a bet".into()))?;
        let majority_side = if red > blue { crate::engine::Side::Red } else { crate::engine::Side::Blue };
        let entry = per.entry(red.max(blue)).or_insert((0, 0, 0.0));
        entry.0 += 1;
        if bet.side == majority_side {
            entry.1 += 1;
            entry.2 += bet.bet.fraction();
            majority_total += 1;
        }
        let phase_ends = match trials.get(i + 1) {
            Some(next) => match next.stimulus {
                Stimulus::Cgt { round_in_phase: r, .. } => r <= round_in_phase,
                _ => true,
            },
            None => true,
        };
        if phase_ends {
            total += t.cumulative;
        }
    }
    let decision_quality = per.iter().map(|(k, (n, m, _))| (*k, *m as f64 / *n as f64)).collect();
    let risk_adjustment = per.iter().map(|(k, (_, m, s))| (*k, (*m > 0).then(|| s / *m as f64))).collect();
    Ok(CgtSummary {
        n_trials: trials.len(),
        total_score: total,
        overall_quality: majority_total as f64 / trials.len() as f64,
        decision_quality,
        risk_adjustment,
    })
}

/// Run length of consecutive correct answers at which an error counts as a failure to maintain set.
pub const FSET_RUN: u32 = 5;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WcstSummary {
    pub n_trials: usize,
    pub correct_total: u32,
    pub errors: u32,
    pub perseverative_errors: u32,
    pub nonperseverative_errors: u32,
    /// 1-based trial that completed the first set, if one was completed.
    pub trset1: Option<u32>,
    pub fset: u32,
    pub completed_sets: u32,
}

/// Scores a WCST log. `set_length` is the run of correct answers that completes a set.
pub fn wcst_summary(trials: &[TrialRecord], set_length: u32) -> Result<WcstSummary, MetricsError> {
    check_task(trials, Task::Wcst)?;
    if set_length == 0 {
        return Err(MetricsError::Input("set_length must be positive".into()));
    }
    let mut s = WcstSummary {
        n_trials: trials.len(),
        correct_total: 0,
        errors: 0,
        perseverative_errors: 0,
        nonperseverative_errors: 0,
        trset1: None,
        fset: 0,
        completed_sets: 0,
    };
    let mut run = 0u32;
    let mut current: Option<Rule> = None;
    let mut previous: Option<Rule> = None;
    for (i, t) in trials.iter().enumerate() {
        let Stimulus::Wcst { item, rule_at_time } = t.stimulus else {
            return Err(MetricsError::Schema(format!("round {} lacks a WCST stimulus", t.round)));
        };
        let rule =
            rule_at_time.ok_or_else(|| MetricsError::Schema(format!("round {} has no rule_at_time", t.round)))?;
        if current.is_some_and(|c| c != rule) {
            previous = current;
        }
        current = Some(rule);
        let card = t.choice.option().ok_or_else(|| MetricsError::Schema("WCST trial without a card".into()))?;
        let feedback =
            t.outcome.feedback().ok_or_else(|| MetricsError::Schema("WCST trial without feedback".into()))?;
        match feedback {
            Feedback::Correct => {
                s.correct_total += 1;
                run += 1;
                if run >= set_length {
                    s.completed_sets += 1;
                    if s.trset1.is_none() {
                        s.trset1 = Some(i as u32 + 1);
                    }
                    run = 0;
                }
            }
            Feedback::Incorrect => {
                s.errors += 1;
                if previous.is_some_and(|p| item.matches(card, p)) {
                    s.perseverative_errors += 1;
                } else {
                    s.nonperseverative_errors += 1;
                }
                if run >= FSET_RUN {
                    s.fset += 1;
                }
                run = 0;
            }
        }
    }
    Ok(s)
}

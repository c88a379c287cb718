//! Seedable state machines for the three decision tasks.
//!
//! Every engine is a pure function of `(config, seed, choice sequence)`: the
//! same inputs always produce the same [`TrialRecord`] stream. Engines expose
//! the same observe → step loop; [`Engine`] wraps any of them behind one type.

pub mod cgt;
pub mod igt;
pub mod record;
pub mod wcst;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cgt::{CgtConfig, CgtState, Ratio};
pub use igt::{DeckOutcome, IgtConfig, IgtState};
pub use record::{
    BetChoice, BetLevel, Card, Choice, Deck, Feedback, Item, OptionId, Outcome, Rule, Side, Stimulus, Task, TrialRecord,
};
pub use wcst::{WcstConfig, WcstState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid task configuration: {0}")]
    Config(String),
    #[error("the session has already completed every round")]
    SessionComplete,
    #[error("invalid choice: {0}")]
    InvalidChoice(String),
}

/// What a player sees before choosing. Never includes hidden state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task")]
pub enum Observation {
    #[serde(rename = "IGT")]
    Igt { round: u32, cumulative: i64 },
    #[serde(rename = "CGT")]
    Cgt {
        round: u32,
        red: u8,
        blue: u8,
        phase: u32,
        round_in_phase: u32,
        phase_points: i64,
        total_banked: i64,
        bet_levels: Vec<BetLevel>,
    },
    #[serde(rename = "WCST")]
    Wcst { round: u32, item: Item, correct_so_far: u32 },
}

impl Observation {
    pub fn round(&self) -> u32 {
        match self {
            Observation::Igt { round, .. } | Observation::Cgt { round, .. } | Observation::Wcst { round, .. } => *round,
        }
    }

    pub fn task(&self) -> Task {
        match self {
            Observation::Igt { .. } => Task::Igt,
            Observation::Cgt { .. } => Task::Cgt,
            Observation::Wcst { .. } => Task::Wcst,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "lowercase")]
pub enum TaskConfig {
    Igt(IgtConfig),
    Cgt(CgtConfig),
    Wcst(WcstConfig),
}

impl TaskConfig {
    pub fn default_for(task: Task) -> TaskConfig {
        match task {
            Task::Igt => TaskConfig::Igt(IgtConfig::default()),
            Task::Cgt => TaskConfig::Cgt(CgtConfig::default()),
            Task::Wcst => TaskConfig::Wcst(WcstConfig::default()),
        }
    }

    pub fn task(&self) -> Task {
        match self {
            TaskConfig::Igt(_) => Task::Igt,
            TaskConfig::Cgt(_) => Task::Cgt,
            TaskConfig::Wcst(_) => Task::Wcst,
        }
    }

    pub fn n_rounds(&self) -> u32 {
        match self {
            TaskConfig::Igt(c) => c.n_rounds,
            TaskConfig::Cgt(c) => c.n_rounds,
            TaskConfig::Wcst(c) => c.n_rounds,
        }
    }
}

/// Any of the three engines.
#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum Engine {
    Igt(IgtState),
    Cgt(CgtState),
    Wcst(WcstState),
}

impl Engine {
    pub fn new(config: &TaskConfig, seed: u64) -> Result<Engine, EngineError> {
        Ok(match config {
            TaskConfig::Igt(c) => Engine::Igt(IgtState::new(c.clone(), seed)?),
            TaskConfig::Cgt(c) => Engine::Cgt(CgtState::new(c.clone(), seed)?),
            TaskConfig::Wcst(c) => Engine::Wcst(WcstState::new(c.clone(), seed)?),
        })
    }

    pub fn task(&self) -> Task {
        match self {
            Engine::Igt(_) => Task::Igt,
            Engine::Cgt(_) => Task::Cgt,
            Engine::Wcst(_) => Task::Wcst,
        }
    }

    pub fn config(&self) -> TaskConfig {
        match self {
            Engine::Igt(s) => TaskConfig::Igt(s.config().clone()),
            Engine::Cgt(s) => TaskConfig::Cgt(s.config().clone()),
            Engine::Wcst(s) => TaskConfig::Wcst(s.config().clone()),
        }
    }

    pub fn observe(&self) -> Observation {
        match self {
            Engine::Igt(s) => s.observe(),
            Engine::Cgt(s) => s.observe(),
            Engine::Wcst(s) => s.observe(),
        }
    }

    pub fn step(&mut self, choice: &Choice) -> Result<TrialRecord, EngineError> {
        match self {
            Engine::Igt(s) => s.step_choice(choice),
            Engine::Cgt(s) => s.step_choice(choice),
            Engine::Wcst(s) => s.step_choice(choice),
        }
    }

    pub fn round(&self) -> u32 {
        match self {
            Engine::Igt(s) => s.round(),
            Engine::Cgt(s) => s.round(),
            Engine::Wcst(s) => s.round(),
        }
    }

    pub fn n_rounds(&self) -> u32 {
        self.config().n_rounds()
    }

    pub fn is_done(&self) -> bool {
        match self {
            Engine::Igt(s) => s.is_done(),
            Engine::Cgt(s) => s.is_done(),
            Engine::Wcst(s) => s.is_done(),
        }
    }

    pub fn history(&self) -> &[TrialRecord] {
        match self {
            Engine::Igt(s) => s.history(),
            Engine::Cgt(s) => s.history(),
            Engine::Wcst(s) => s.history(),
        }
    }

    /// Points (IGT), phase points (CGT) or correct count (WCST) as currently displayed.
    pub fn cumulative(&self) -> i64 {
        match self {
            Engine::Igt(s) => s.cumulative_points(),
            Engine::Cgt(s) => s.phase_points(),
            Engine::Wcst(s) => i64::from(s.correct_total()),
        }
    }

    /// Session score: final IGT points, CGT banked total, WCST correct count.
    pub fn final_score(&self) -> i64 {
        match self {
            Engine::Igt(s) => s.cumulative_points(),
            Engine::Cgt(s) => s.total_banked(),
            Engine::Wcst(s) => i64::from(s.correct_total()),
        }
    }
}

use serde::{Deserialize, Serialize};

use super::record::{identity_order, Choice, Deck, Outcome, Stimulus, Task, TrialRecord};
use super::{EngineError, Observation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeckOutcome {
    pub reward: i64,
    /// Zero or negative.
    pub penalty: i64,
}

impl DeckOutcome {
    pub const fn new(reward: i64, penalty: i64) -> Self {
        DeckOutcome { reward, penalty }
    }

    pub fn net(&self) -> i64 {
        self.reward + self.penalty
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IgtConfig {
    pub n_rounds: u32,
    pub loan: i64,
    /// One cyclic outcome schedule per deck, A through D.
    pub deck_schedules: Vec<Vec<DeckOutcome>>,
}

const fn o(reward: i64, penalty: i64) -> DeckOutcome {
    DeckOutcome::new(reward, penalty)
}

impl IgtConfig {
    /// Classic four-deck payoffs: A and B pay 100 per pick and lose 250 net per
    /// ten picks; C and D pay 50 and gain 250 net per ten. A and C spread their
    /// losses over five penalties, B and D over one.
    pub fn default_schedules() -> Vec<Vec<DeckOutcome>> {
        vec![
            vec![
                o(100, 0),
                o(100, 0),
                o(100, -150),
                o(100, 0),
                o(100, -300),
                o(100, 0),
                o(100, -200),
                o(100, 0),
                o(100, -250),
                o(100, -350),
            ],
            vec![
                o(100, 0),
                o(100, 0),
                o(100, 0),
                o(100, 0),
                o(100, 0),
                o(100, 0),
                o(100, 0),
                o(100, 0),
                o(100, -1250),
                o(100, 0),
            ],
            vec![
                o(50, 0),
                o(50, 0),
                o(50, -50),
                o(50, 0),
                o(50, -50),
                o(50, 0),
                o(50, -50),
                o(50, 0),
                o(50, -50),
                o(50, -50),
            ],
            vec![o(50, 0), o(50, 0), o(50, 0), o(50, 0), o(50, 0), o(50, 0), o(50, 0), o(50, 0), o(50, 0), o(50, -250)],
        ]
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.n_rounds == 0 {
            return Err(EngineError::Config("n_rounds must be positive".into()));
        }
        if self.deck_schedules.len() != 4 {
            return Err(EngineError::Config(format!("expected 4 deck schedules, got {}", self.deck_schedules.len())));
        }
        for (i, s) in self.deck_schedules.iter().enumerate() {
            if s.is_empty() {
                return Err(EngineError::Config(format!("deck {i} has an empty schedule")));
            }
            if s.iter().any(|e| e.penalty > 0) {
                return Err(EngineError::Config(format!("deck {i} has a positive penalty")));
            }
        }
        Ok(())
    }
}

impl Default for IgtConfig {
    fn default() -> Self {
        IgtConfig { n_rounds: 80, loan: 2000, deck_schedules: Self::default_schedules() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IgtState {
    config: IgtConfig,
    seed: u64,
    pick_counts: [u32; 4],
    cumulative: i64,
    history: Vec<TrialRecord>,
}

impl IgtState {
    pub fn new(config: IgtConfig, seed: u64) -> Result<Self, EngineError> {
        config.validate()?;
        let cumulative = config.loan;
        Ok(IgtState { config, seed, pick_counts: [0; 4], cumulative, history: Vec::new() })
    }

    pub fn config(&self) -> &IgtConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Completed rounds.
    pub fn round(&self) -> u32 {
        self.history.len() as u32
    }

    pub fn pick_counts(&self) -> [u32; 4] {
        self.pick_counts
    }

    pub fn cumulative_points(&self) -> i64 {
        self.cumulative
    }

    pub fn history(&self) -> &[TrialRecord] {
        &self.history
    }

    pub fn is_done(&self) -> bool {
        self.round() >= self.config.n_rounds
    }

    pub fn observe(&self) -> Observation {
        Observation::Igt { round: self.round() + 1, cumulative: self.cumulative }
    }

    /// Outcome of the k-th (0-based) pick of `deck`.
    pub fn scheduled(&self, deck: Deck, k: u32) -> DeckOutcome {
        let s = &self.config.deck_schedules[deck.index()];
        s[k as usize % s.len()]
    }

    pub fn step(&mut self, deck: Deck) -> Result<TrialRecord, EngineError> {
        if self.is_done() {
            return Err(EngineError::SessionComplete);
        }
        let k = self.pick_counts[deck.index()];
        let out = self.scheduled(deck, k);
        self.pick_counts[deck.index()] += 1;
        self.cumulative += out.net();
        let record = TrialRecord {
            task: Task::Igt,
            round: self.round() + 1,
            stimulus: Stimulus::Igt {},
            options_order: identity_order(Task::Igt),
            choice: Choice::Option(deck),
            outcome: Outcome::Points { reward: out.reward, penalty: out.penalty, net: out.net(), coin_side: None },
            cumulative: self.cumulative,
            wall_time: None,
            reasoning: None,
            forfeit: false,
        };
        self.history.push(record.clone());
        Ok(record)
    }

    pub fn step_choice(&mut self, choice: &Choice) -> Result<TrialRecord, EngineError> {
        match choice {
            Choice::Option(d) => self.step(*d),
            other => Err(EngineError::InvalidChoice(format!("IGT expects a deck, got {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::record::OptionId;

    #[test]
    fn fresh_state() {
        let s = IgtState::new(IgtConfig::default(), 42).unwrap();
        assert_eq!(s.cumulative_points(), 2000);
        assert_eq!(s.round(), 0);
        assert_eq!(s.pick_counts(), [0; 4]);
    }

    #[test]
    fn first_pick_of_a_high_reward_deck() {
        let mut s = IgtState::new(IgtConfig::default(), 42).unwrap();
        let r = s.step(OptionId::A).unwrap();
        assert_eq!(r.outcome.net(), Some(100));
        assert_eq!(r.cumulative, 2100);
    }

    #[test]
    fn reward_offset_by_equal_penalty_leaves_total_unchanged() {
        let mut s = IgtState::new(IgtConfig::default(), 0).unwrap();
        s.step(OptionId::C).unwrap();
        s.step(OptionId::C).unwrap();
        let before = s.cumulative_points();
        let r = s.step(OptionId::C).unwrap();
        assert_eq!(r.outcome, Outcome::Points { reward: 50, penalty: -50, net: 0, coin_side: None });
        assert_eq!(s.cumulative_points(), before);
    }

    #[test]
    fn ten_pick_sums() {
        // Hand sums: A = 1000 - (150+300+200+250+350) = -250; C = 500 - 5*50 = +250.
        for (deck, expected) in [(OptionId::A, -250), (OptionId::B, -250), (OptionId::C, 250), (OptionId::D, 250)] {
            let mut s = IgtState::new(IgtConfig::default(), 1).unwrap();
            let total: i64 = (0..10).map(|_| s.step(deck).unwrap().outcome.net().unwrap()).sum();
            assert_eq!(total, expected, "deck {deck:?}");
        }
    }

    #[test]
    fn default_penalty_counts() {
        let counts: Vec<usize> =
            IgtConfig::default_schedules().iter().map(|s| s.iter().filter(|e| e.penalty < 0).count()).collect();
        assert_eq!(counts, vec![5, 1, 5, 1]);
    }

    #[test]
    fn three_decks_rejected() {
        let mut c = IgtConfig::default();
        c.deck_schedules.pop();
        assert!(matches!(IgtState::new(c, 0), Err(EngineError::Config(_))));
        let mut c = IgtConfig::default();
        c.deck_schedules[2].clear();
        assert!(matches!(IgtState::new(c, 0), Err(EngineError::Config(_))));
    }

    #[test]
    fn step_after_end() {
        let mut s = IgtState::new(IgtConfig { n_rounds: 1, ..IgtConfig::default() }, 0).unwrap();
        s.step(OptionId::D).unwrap();
        assert!(matches!(s.step(OptionId::D), Err(EngineError::SessionComplete)));
    }
}

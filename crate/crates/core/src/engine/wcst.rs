use rand::Rng;
use serde::{Deserialize, Serialize};

use super::record::{
    identity_order, Card, Choice, Feedback, Item, OptionId, Outcome, Rule, Stimulus, Task, TrialRecord,
};
use super::{EngineError, Observation};
use crate::rng::{seeded, SessionRng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WcstConfig {
    pub n_rounds: u32,
    pub n_cards: u32,
    /// Attribute value names. Reference card `k` carries value `k` of each list.
    pub colors: Vec<String>,
    pub shapes: Vec<String>,
    pub numbers: Vec<u32>,
    /// Consecutive correct matches that complete a set and trigger a silent rule change.
    pub set_length: u32,
}

impl Default for WcstConfig {
    fn default() -> Self {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect();
        WcstConfig {
            n_rounds: 64,
            n_cards: 4,
            colors: s(&["red", "green", "blue", "yellow"]),
            shapes: s(&["triangle", "star", "heart", "flower"]),
            numbers: vec![1, 2, 3, 4],
            set_length: 8,
        }
    }
}

fn all_distinct<T: PartialEq>(v: &[T]) -> bool {
    v.iter().enumerate().all(|(i, a)| v[..i].iter().all(|b| b != a))
}

impl WcstConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let err = |m: String| Err(EngineError::Config(m));
        if self.n_rounds == 0 || self.set_length == 0 {
            return err("n_rounds and set_length must be positive".into());
        }
        if self.n_cards != 4 {
            return err(format!("the task uses 4 reference cards, got {}", self.n_cards));
        }
        let n = self.n_cards as usize;
        for (name, len) in
            [("colors", self.colors.len()), ("shapes", self.shapes.len()), ("numbers", self.numbers.len())]
        {
            if len < n {
                return err(format!("{name} has {len} values; {n} cards need distinct values"));
            }
        }
        if !all_distinct(&self.colors) || !all_distinct(&self.shapes) || !all_distinct(&self.numbers) {
            return err("attribute values must be distinct".into());
        }
        Ok(())
    }

    pub fn color(&self, i: u8) -> &str {
        &self.colors[usize::from(i)]
    }

    pub fn shape(&self, i: u8) -> &str {
        &self.shapes[usize::from(i)]
    }

    pub fn number(&self, i: u8) -> u32 {
        self.numbers[usize::from(i)]
    }
}

/// Draws an unambiguous item: color, shape and number each point at a different card.
pub fn next_item(rng: &mut SessionRng) -> Item {
    let mut cards: Vec<u8> = vec![0, 1, 2, 3];
    let color = cards.remove(rng.gen_range(0..4));
    let shape = cards.remove(rng.gen_range(0..3));
    let number = cards.remove(rng.gen_range(0..2));
    Item { color, shape, number }
}

#[derive(Clone, Debug)]
pub struct WcstState {
    config: WcstConfig,
    seed: u64,
    rng: SessionRng,
    active_rule: Rule,
    consecutive_correct: u32,
    completed_sets: u32,
    correct_total: u32,
    current_item: Item,
    history: Vec<TrialRecord>,
}

impl WcstState {
    pub fn new(config: WcstConfig, seed: u64) -> Result<Self, EngineError> {
        config.validate()?;
        let mut rng = seeded(seed);
        let active_rule = Rule::ALL[rng.gen_range(0..3)];
        let current_item = next_item(&mut rng);
        Ok(WcstState {
            config,
            seed,
            rng,
            active_rule,
            consecutive_correct: 0,
            completed_sets: 0,
            correct_total: 0,
            current_item,
            history: Vec::new(),
        })
    }

    pub fn config(&self) -> &WcstConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn round(&self) -> u32 {
        self.history.len() as u32
    }

    pub fn is_done(&self) -> bool {
        self.round() >= self.config.n_rounds
    }

    pub fn current_item(&self) -> Item {
        self.current_item
    }

    /// Hidden state, exposed for scoring checks and oracles only.
    pub fn active_rule(&self) -> Rule {
        self.active_rule
    }

    pub fn consecutive_correct(&self) -> u32 {
        self.consecutive_correct
    }

    pub fn completed_sets(&self) -> u32 {
        self.completed_sets
    }

    pub fn correct_total(&self) -> u32 {
        self.correct_total
    }

    pub fn history(&self) -> &[TrialRecord] {
        &self.history
    }

    pub fn observe(&self) -> Observation {
        Observation::Wcst { round: self.round() + 1, item: self.current_item, correct_so_far: self.correct_total }
    }

    pub fn step(&mut self, card: Card) -> Result<TrialRecord, EngineError> {
        if self.is_done() {
            return Err(EngineError::SessionComplete);
        }
        let item = self.current_item;
        let rule = self.active_rule;
        let feedback = if item.matches(card, rule) { Feedback::Correct } else { Feedback::Incorrect };
        match feedback {
            Feedback::Correct => {
                self.correct_total += 1;
                self.consecutive_correct += 1;
                if self.consecutive_correct >= self.config.set_length {
                    self.completed_sets += 1;
                    self.consecutive_correct = 0;
                    let others: Vec<Rule> = Rule::ALL.into_iter().filter(|r| *r != rule).collect();
                    self.active_rule = others[self.rng.gen_range(0..others.len())];
                }
            }
            Feedback::Incorrect => self.consecutive_correct = 0,
        }
        let record = TrialRecord {
            task: Task::Wcst,
            round: self.round() + 1,
            stimulus: Stimulus::Wcst { item, rule_at_time: Some(rule) },
            options_order: identity_order(Task::Wcst),
            choice: Choice::Option(card),
            outcome: Outcome::Feedback { feedback },
            cumulative: i64::from(self.correct_total),
            wall_time: None,
            reasoning: None,
            forfeit: false,
        };
        self.history.push(record.clone());
        self.current_item = next_item(&mut self.rng);
        Ok(record)
    }

    pub fn step_choice(&mut self, choice: &Choice) -> Result<TrialRecord, EngineError> {
        match choice {
            Choice::Option(c) => self.step(*c),
            other => Err(EngineError::InvalidChoice(format!("WCST expects a card, got {other:?}"))),
        }
    }

    /// The card matching the current item under the hidden rule.
    pub fn correct_card(&self) -> Card {
        self.current_item.target(self.active_rule).unwrap_or(OptionId::A)
    }
}

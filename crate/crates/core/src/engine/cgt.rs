use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::record::{identity_order, BetChoice, BetLevel, Choice, Outcome, Side, Stimulus, Task, TrialRecord};
use super::{EngineError, Observation};
use crate::rng::{seeded, SessionRng};

/// Red:blue split over ten boxes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Ratio {
    pub red: u8,
    pub blue: u8,
}

impl Ratio {
    pub const fn new(red: u8, blue: u8) -> Self {
        Ratio { red, blue }
    }

    pub fn majority_side(self) -> Side {
        if self.red > self.blue {
            Side::Red
        } else {
            Side::Blue
        }
    }

    /// Size of the larger box group (6..=9 for the standard ratios).
    pub fn majority(self) -> u8 {
        self.red.max(self.blue)
    }

    pub fn count(self, side: Side) -> u8 {
        match side {
            Side::Red => self.red,
            Side::Blue => self.blue,
        }
    }

    pub fn red_fraction(self) -> f64 {
        f64::from(self.red) / f64::from(self.red + self.blue)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CgtConfig {
    pub n_rounds: u32,
    pub phase_len: u32,
    pub phase_start: i64,
    pub ratios: Vec<Ratio>,
    /// Fractions of current phase points.
    pub bet_levels: Vec<f64>,
}

impl Default for CgtConfig {
    fn default() -> Self {
        CgtConfig {
            n_rounds: 64,
            phase_len: 8,
            phase_start: 100,
            ratios: [1u8, 2, 3, 4, 6, 7, 8, 9].iter().map(|&r| Ratio::new(r, 10 - r)).collect(),
            bet_levels: vec![0.05, 0.25, 0.50, 0.75, 0.95],
        }
    }
}

impl CgtConfig {
    pub fn validate(&self) -> Result<Vec<BetLevel>, EngineError> {
        let err = |m: String| Err(EngineError::Config(m));
        if self.n_rounds == 0 || self.phase_len == 0 {
            return err("n_rounds and phase_len must be positive".into());
        }
        if !self.n_rounds.is_multiple_of(self.phase_len) {
            return err(format!("n_rounds {} is not divisible by phase_len {}", self.n_rounds, self.phase_len));
        }
        if self.ratios.is_empty() {
            return err("no box ratios".into());
        }
        for r in &self.ratios {
            if u32::from(r.red) + u32::from(r.blue) != 10 {
                return err(format!("ratio {}:{} does not cover 10 boxes", r.red, r.blue));
            }
            if r.red == r.blue {
                return err("5:5 has no majority and is not allowed".into());
            }
        }
        if !(self.phase_len as usize).is_multiple_of(self.ratios.len()) {
            return err(format!(
                "phase_len {} cannot hold every one of {} ratios equally often",
                self.phase_len,
                self.ratios.len()
            ));
        }
        if self.phase_start < 0 {
            return err("phase_start must be non-negative".into());
        }
        if self.bet_levels.is_empty() {
            return err("no bet levels".into());
        }
        self.bet_levels
            .iter()
            .map(|&f| {
                BetLevel::from_fraction(f)
                    .filter(|b| b.percent() > 0 && b.percent() <= 100)
                    .ok_or_else(|| EngineError::Config(format!("bad bet level {f}")))
            })
            .collect()
    }
}

/// `round(pct * points / 100)` with halves rounded away from zero, in exact integer arithmetic.
pub fn stake(bet: BetLevel, points: i64) -> i64 {
    let num = i64::from(bet.percent()) * points;
    let twice = 2 * num.abs() + 100;
    num.signum() * (twice / 200)
}

#[derive(Clone, Debug)]
pub struct CgtState {
    config: CgtConfig,
    bet_levels: Vec<BetLevel>,
    seed: u64,
    schedule: Vec<(Ratio, Side)>,
    phase_points: i64,
    total_banked: i64,
    history: Vec<TrialRecord>,
}

impl CgtState {
    pub fn new(config: CgtConfig, seed: u64) -> Result<Self, EngineError> {
        let bet_levels = config.validate()?;
        let mut rng: SessionRng = seeded(seed);
        let n_phases = config.n_rounds / config.phase_len;
        let reps = config.phase_len as usize / config.ratios.len();
        let mut schedule = Vec::with_capacity(config.n_rounds as usize);
        for _ in 0..n_phases {
            let mut phase: Vec<Ratio> = config.ratios.iter().flat_map(|r| std::iter::repeat_n(*r, reps)).collect();
            phase.shuffle(&mut rng);
            for ratio in phase {
                // The coin sits in one of ten boxes uniformly at random.
                let bx: u8 = rng.gen_range(0..10);
                let side = if bx < ratio.red { Side::Red } else { Side::Blue };
                schedule.push((ratio, side));
            }
        }
        let phase_points = config.phase_start;
        Ok(CgtState { config, bet_levels, seed, schedule, phase_points, total_banked: 0, history: Vec::new() })
    }

    pub fn config(&self) -> &CgtConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn bet_levels(&self) -> &[BetLevel] {
        &self.bet_levels
    }

    pub fn round(&self) -> u32 {
        self.history.len() as u32
    }

    pub fn phase(&self) -> u32 {
        self.round() / self.config.phase_len
    }

    pub fn phase_points(&self) -> i64 {
        self.phase_points
    }

    pub fn total_banked(&self) -> i64 {
        self.total_banked
    }

    pub fn history(&self) -> &[TrialRecord] {
        &self.history
    }

    pub fn is_done(&self) -> bool {
        self.round() >= self.config.n_rounds
    }

    pub fn current_ratio(&self) -> Option<Ratio> {
        self.schedule.get(self.round() as usize).map(|(r, _)| *r)
    }

    /// The full hidden schedule. Agents never see this; it exists for replay checks.
    pub fn ratio_schedule(&self) -> Vec<Ratio> {
        self.schedule.iter().map(|(r, _)| *r).collect()
    }

    pub fn coin_sides(&self) -> Vec<Side> {
        self.schedule.iter().map(|(_, s)| *s).collect()
    }

    pub fn observe(&self) -> Observation {
        let ratio = self.current_ratio().unwrap_or(Ratio::new(0, 0));
        Observation::Cgt {
            round: self.round() + 1,
            red: ratio.red,
            blue: ratio.blue,
            phase: self.phase(),
            round_in_phase: self.round() % self.config.phase_len,
            phase_points: self.phase_points,
            total_banked: self.total_banked,
            bet_levels: self.bet_levels.clone(),
        }
    }

    pub fn step(&mut self, choice: BetChoice) -> Result<TrialRecord, EngineError> {
        if self.is_done() {
            return Err(EngineError::SessionComplete);
        }
        if !self.bet_levels.contains(&choice.bet) {
            return Err(EngineError::InvalidChoice(format!("bet {}% is not an offered level", choice.bet.percent())));
        }
        let round = self.round();
        let (ratio, coin) = self.schedule[round as usize];
        let before = self.phase_points;
        let s = stake(choice.bet, before);
        let (reward, penalty) = if choice.side == coin { (s, 0) } else { (0, -s) };
        self.phase_points += reward + penalty;
        let record = TrialRecord {
            task: Task::Cgt,
            round: round + 1,
            stimulus: Stimulus::Cgt {
                red: ratio.red,
                blue: ratio.blue,
                phase: round / self.config.phase_len,
                round_in_phase: round % self.config.phase_len,
                phase_points: before,
            },
            options_order: identity_order(Task::Cgt),
            choice: Choice::Bet(choice),
            outcome: Outcome::Points { reward, penalty, net: reward + penalty, coin_side: Some(coin) },
            cumulative: self.phase_points,
            wall_time: None,
            reasoning: None,
            forfeit: false,
        };
        self.history.push(record.clone());
        if self.round().is_multiple_of(self.config.phase_len) {
            self.total_banked += self.phase_points;
            self.phase_points = self.config.phase_start;
        }
        Ok(record)
    }

    pub fn step_choice(&mut self, choice: &Choice) -> Result<TrialRecord, EngineError> {
        match choice {
            Choice::Bet(b) => self.step(*b),
            other => Err(EngineError::InvalidChoice(format!("CGT expects side and bet, got {other:?}"))),
        }
    }
}

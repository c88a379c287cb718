//! The trial log unit shared by every task, plus the small value types that
//! appear inside it.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "IGT")]
    Igt,
    #[serde(rename = "CGT")]
    Cgt,
    #[serde(rename = "WCST")]
    Wcst,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Igt, Task::Cgt, Task::Wcst];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Igt => "igt",
            Task::Cgt => "cgt",
            Task::Wcst => "wcst",
        }
    }

    /// Number of distinct canonical options offered each round.
    pub fn n_options(self) -> usize {
        match self {
            Task::Igt | Task::Wcst => 4,
            Task::Cgt => 10,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "igt" => Ok(Task::Igt),
            "cgt" => Ok(Task::Cgt),
            "wcst" => Ok(Task::Wcst),
            other => Err(format!("unknown task '{other}' (expected igt, cgt or wcst)")),
        }
    }
}

/// One of the four labelled options: a deck in the IGT, a reference card in the WCST.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OptionId {
    A,
    B,
    C,
    D,
}

pub type Deck = OptionId;
pub type Card = OptionId;

impl OptionId {
    pub const ALL: [OptionId; 4] = [OptionId::A, OptionId::B, OptionId::C, OptionId::D];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<OptionId> {
        Self::ALL.get(i).copied()
    }

    pub fn letter(self) -> char {
        (b'A' + self as u8) as char
    }
}

impl FromStr for OptionId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "A" | "a" => Ok(OptionId::A),
            "B" | "b" => Ok(OptionId::B),
            "C" | "c" => Ok(OptionId::C),
            "D" | "d" => Ok(OptionId::D),
            other => Err(format!("unknown option '{other}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Side {
    Red,
    Blue,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Red => Side::Blue,
            Side::Blue => Side::Red,
        }
    }
}

/// A CGT bet level, held as an integer percentage so stake arithmetic is exact.
/// On the wire it is the fraction (`0.05`, `0.25`, ...).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BetLevel(u8);

impl BetLevel {
    pub fn from_percent(pct: u8) -> Option<BetLevel> {
        (pct <= 100).then_some(BetLevel(pct))
    }

    pub fn from_fraction(f: f64) -> Option<BetLevel> {
        if !f.is_finite() {
            return None;
        }
        let pct = (f * 100.0).round();
        if (f * 100.0 - pct).abs() > 1e-6 || !(0.0..=100.0).contains(&pct) {
            return None;
        }
        Some(BetLevel(pct as u8))
    }

    pub fn percent(self) -> u8 {
        self.0
    }

    pub fn fraction(self) -> f64 {
        f64::from(self.0) / 100.0
    }
}

impl Serialize for BetLevel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.fraction())
    }
}

impl<'de> Deserialize<'de> for BetLevel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let f = f64::deserialize(d)?;
        BetLevel::from_fraction(f)
            .ok_or_else(|| serde::de::Error::custom(format!("{f} is not a whole-percent bet level")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BetChoice {
    pub side: Side,
    pub bet: BetLevel,
}

/// A canonical (unpermuted) choice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Choice {
    Option(OptionId),
    Bet(BetChoice),
}

impl Choice {
    pub fn option(self) -> Option<OptionId> {
        match self {
            Choice::Option(o) => Some(o),
            Choice::Bet(_) => None,
        }
    }

    pub fn bet(self) -> Option<BetChoice> {
        match self {
            Choice::Bet(b) => Some(b),
            Choice::Option(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Color,
    Shape,
    Number,
}

impl Rule {
    pub const ALL: [Rule; 3] = [Rule::Color, Rule::Shape, Rule::Number];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// A WCST stimulus item; each field is a value index into the configured attribute list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Item {
    pub color: u8,
    pub shape: u8,
    pub number: u8,
}

impl Item {
    pub fn value(&self, rule: Rule) -> u8 {
        match rule {
            Rule::Color => self.color,
            Rule::Shape => self.shape,
            Rule::Number => self.number,
        }
    }

    /// Reference card `k` carries value index `k` on every attribute.
    pub fn matches(&self, card: Card, rule: Rule) -> bool {
        usize::from(self.value(rule)) == card.index()
    }

    /// Row k, column i: does card k match the item on rule i.
    pub fn match_matrix(&self) -> [[bool; 3]; 4] {
        let mut m = [[false; 3]; 4];
        for card in OptionId::ALL {
            for rule in Rule::ALL {
                m[card.index()][rule.index()] = self.matches(card, rule);
            }
        }
        m
    }

    /// The card that matches under `rule`, if any.
    pub fn target(&self, rule: Rule) -> Option<Card> {
        OptionId::from_index(usize::from(self.value(rule)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feedback {
    Correct,
    Incorrect,
}

/// Task-specific snapshot of what the player saw before choosing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Stimulus {
    Igt {},
    Cgt {
        red: u8,
        blue: u8,
        phase: u32,
        round_in_phase: u32,
        /// Phase points before this round's bet.
        phase_points: i64,
    },
    Wcst {
        item: Item,
        #[serde(default)]
        rule_at_time: Option<Rule>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Outcome {
    Points {
        reward: i64,
        penalty: i64,
        net: i64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coin_side: Option<Side>,
    },
    Feedback {
        feedback: Feedback,
    },
}

impl Outcome {
    pub fn net(&self) -> Option<i64> {
        match self {
            Outcome::Points { net, .. } => Some(*net),
            Outcome::Feedback { .. } => None,
        }
    }

    pub fn feedback(&self) -> Option<Feedback> {
        match self {
            Outcome::Feedback { feedback } => Some(*feedback),
            Outcome::Points { .. } => None,
        }
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub task: Task,
    /// 1-based round number.
    pub round: u32,
    pub stimulus: Stimulus,
    /// `options_order[presented_position]` is the canonical option index shown there.
    pub options_order: Vec<u8>,
    pub choice: Choice,
    pub outcome: Outcome,
    /// Points after this round (IGT total, CGT phase points) or WCST correct count.
    pub cumulative: i64,
    pub wall_time: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning: Option<String>,
    /// The choice was filled in after the respondent failed to produce a parseable answer.
    #[serde(default, skip_serializing_if = "is_false")]
    pub forfeit: bool,
}

pub fn identity_order(task: Task) -> Vec<u8> {
    (0..task.n_options() as u8).collect()
}

/// Parse one-record-per-line JSONL.
pub fn read_jsonl(text: &str) -> Result<Vec<TrialRecord>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

pub fn write_jsonl(trials: &[TrialRecord]) -> String {
    let mut out = String::new();
    for t in trials {
        out.push_str(&serde_json::to_string(t).expect("trial records always serialize"));
        out.push('\n');
    }
    out
}

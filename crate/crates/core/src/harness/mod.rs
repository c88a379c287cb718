//! Experiment orchestration: configuration, session records, storage, batch
//! runs, reports and the HTTP session service.

pub mod batch;
pub mod report;
pub mod service;
pub mod storage;

use std::collections::BTreeMap;
use std::path::PathBuf;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agents::{AgentError, AgentSpec};
use crate::engine::{Engine, EngineError, Task, TaskConfig, TrialRecord};
use crate::llm::LlmError;
use crate::metrics::MetricsError;
use crate::rng::derive_seed;
use crate::stats::StatsError;

pub use batch::{run_batch, BatchOptions, BatchOutcome};
pub use report::{build_report, write_report, Report};
pub use storage::{load_sessions, RunStore};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("storage: {0}")]
    Storage(String),
    #[error("expected {expected} sessions, found {found}")]
    TaskMismatch { expected: Task, found: Task },
    #[error("invalid session record: {0}")]
    Validation(String),
    #[error("service startup: {0}")]
    Startup(String),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Storage(e.to_string())
    }
}

impl Serialize for AgentSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for AgentSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Chat endpoint settings stored with an LLM run. The key always comes from the environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LlmSettings {
    pub base_url: Option<String>,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub max_in_flight: usize,
}

impl Default for LlmSettings {
    fn default() -> Self {
        LlmSettings { base_url: None, timeout_secs: 60.0, max_retries: 4, max_in_flight: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task_config: TaskConfig,
    pub agent: AgentSpec,
    pub n_sessions: u32,
    pub master_seed: u64,
    /// Variant id for LLM runs; `None` is the baseline.
    #[serde(default)]
    pub variant: Option<String>,
    #[serde(default)]
    pub llm: LlmSettings,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(task: Task, agent: AgentSpec, n_sessions: u32, master_seed: u64, out_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            task_config: TaskConfig::default_for(task),
            agent,
            n_sessions,
            master_seed,
            variant: None,
            llm: LlmSettings::default(),
            out_dir: out_dir.into(),
        }
    }

    pub fn task(&self) -> Task {
        self.task_config.task()
    }

    pub fn session_seed(&self, index: u64) -> u64 {
        derive_seed(self.master_seed, index)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// First 12 hex digits of the SHA-256 of everything except the output directory.
    pub fn run_id(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("out_dir");
        }
        let digest = Sha256::digest(v.to_string().as_bytes());
        digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.n_sessions == 0 {
            return Err(HarnessError::Config("n_sessions must be positive".into()));
        }
        if !self.agent.supports(self.task()) {
            return Err(HarnessError::Config(format!("agent '{}' cannot play {}", self.agent, self.task())));
        }
        if matches!(self.agent, AgentSpec::Human) {
            return Err(HarnessError::Config("human sessions run through the service, not a batch".into()));
        }
        if self.variant.is_some() && !matches!(self.agent, AgentSpec::Llm(_)) {
            return Err(HarnessError::Config("variants apply to llm agents only".into()));
        }
        Engine::new(&self.task_config, 0)?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubjectKind {
    Human,
    Llm,
    Scripted,
}

impl SubjectKind {
    pub fn of(agent: &AgentSpec) -> SubjectKind {
        match agent {
            AgentSpec::Human => SubjectKind::Human,
            AgentSpec::Llm(_) => SubjectKind::Llm,
            _ => SubjectKind::Scripted,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SubjectKind::Human => "human",
            SubjectKind::Llm => "llm",
            SubjectKind::Scripted => "scripted",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Demographics {
    pub age: Option<u32>,
    pub gender: Option<String>,
    pub education: Option<String>,
    pub major: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub other: BTreeMap<String, String>,
}

pub const SURVEY_ITEMS: u8 = 12;

/// One Likert answer: 2 strongly agree, 0 not sure, -2 strongly disagree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyAnswer {
    /// Statement number, 1..=12.
    pub item: u8,
    pub response: i8,
}

/// Exactly one answer per statement, each on the five-point scale.
pub fn validate_survey(answers: &[SurveyAnswer]) -> Result<(), HarnessError> {
    if answers.len() != usize::from(SURVEY_ITEMS) {
        return Err(HarnessError::Validation(format!("survey needs {SURVEY_ITEMS} answers, got {}", answers.len())));
    }
    let mut seen = [false; SURVEY_ITEMS as usize];
    for a in answers {
        if !(1..=SURVEY_ITEMS).contains(&a.item) {
            return Err(HarnessError::Validation(format!("no survey item {}", a.item)));
        }
        if !(-2..=2).contains(&a.response) {
            return Err(HarnessError::Validation(format!("item {}: response {} is outside -2..2", a.item, a.response)));
        }
        if std::mem::replace(&mut seen[usize::from(a.item - 1)], true) {
            return Err(HarnessError::Validation(format!("item {} answered twice", a.item)));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub session_index: Option<u64>,
    pub seed: u64,
    pub subject_kind: SubjectKind,
    pub agent: String,
    pub variant: Option<String>,
    pub config: TaskConfig,
    pub trials: Vec<TrialRecord>,
    pub final_score: i64,
    /// False when the session stopped before its last round.
    pub complete: bool,
    pub error: Option<String>,
    pub forfeits: u32,
    pub demographics: Option<Demographics>,
    pub survey: Option<Vec<SurveyAnswer>>,
    pub started_at: DateTime<Utc>,
    pub finished_at: Option<DateTime<Utc>>,
}

impl SessionRecord {
    pub fn task(&self) -> Task {
        self.config.task()
    }

    /// Checks round numbering, task, and that replaying the logged choices on a
    /// fresh engine with the logged seed reproduces every outcome and the final score.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Validation(format!("{}: {m}", self.session_id)));
        let mut engine = Engine::new(&self.config, self.seed)?;
        for (i, t) in self.trials.iter().enumerate() {
            if t.round as usize != i + 1 {
                return bad(format!("trial {i} has round {}", t.round));
            }
            if t.task != self.task() {
                return bad(format!("round {} is a {} trial", t.round, t.task));
            }
            let replay = engine.step(&t.choice)?;
            if replay.stimulus != t.stimulus || replay.outcome != t.outcome || replay.cumulative != t.cumulative {
                return bad(format!("round {} does not replay", t.round));
            }
        }
        if self.complete != engine.is_done() {
            return bad(format!(
                "complete flag {} but {} of {} rounds logged",
                self.complete,
                self.trials.len(),
                engine.n_rounds()
            ));
        }
        if self.final_score != engine.final_score() {
            return bad(format!("final score {} but the replay gives {}", self.final_score, engine.final_score()));
        }
        if self.forfeits as usize != self.trials.iter().filter(|t| t.forfeit).count() {
            return bad("forfeit count does not match the trials".into());
        }
        if let Some(s) = &self.survey {
            validate_survey(s)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips() {
        let mut c = ExperimentConfig::new(Task::Cgt, AgentSpec::EGreedy(0.2), 5, 9, "out");
        c.agent = AgentSpec::EuMax;
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
        let moved = ExperimentConfig { out_dir: "elsewhere".into(), ..c.clone() };
        assert_eq!(moved.run_id(), c.run_id());
        assert_eq!(c.run_id().len(), 12);
        assert_ne!(ExperimentConfig { master_seed: 10, ..c.clone() }.run_id(), c.run_id());
    }

    #[test]
    fn survey_rules() {
        let all: Vec<SurveyAnswer> = (1..=12).map(|i| SurveyAnswer { item: i, response: 0 }).collect();
        assert!(validate_survey(&all).is_ok());
        assert!(validate_survey(&all[..11]).is_err());
        let mut dup = all.clone();
        dup[11].item = 1;
        assert!(validate_survey(&dup).is_err());
        let mut out = all.clone();
        out[0].response = 3;
        assert!(validate_survey(&out).is_err());
    }
}

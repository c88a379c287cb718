//! Scripted players and the session loop that drives any player against an engine.

pub mod bandit;
pub mod eumax;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::engine::{
    BetChoice, BetLevel, Choice, Engine, EngineError, Observation, OptionId, Ratio, Side, Task, TrialRecord,
};
use crate::rng::SessionRng;

pub use bandit::{deck_stats, epsilon_greedy_choose, ucb_choose, DEFAULT_EPSILON, UCB_C};
pub use eumax::{cgt_eumax_choose, wcst_eumax_choose, WcstRuleTracker};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("agent configuration: {0}")]
    Config(String),
    #[error("agent '{agent}' cannot play {task}")]
    Unsupported { agent: String, task: Task },
    #[error("replay log ran out at round {round}")]
    ReplayExhausted { round: u32 },
    #[error("engine: {0}")]
    Engine(#[from] EngineError),
    #[error("{0}")]
    Backend(String),
}

/// One round's decision plus what the harness should log alongside it.
#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub choice: Choice,
    /// Presentation order used for this round, when it differs from identity.
    pub options_order: Option<Vec<u8>>,
    pub reasoning: Option<String>,
    pub forfeit: bool,
}

impl From<Choice> for Decision {
    fn from(choice: Choice) -> Self {
        Decision { choice, options_order: None, reasoning: None, forfeit: false }
    }
}

pub trait Agent: Send {
    fn id(&self) -> String;

    /// Chooses for the round described by `obs`. `history` holds every earlier
    /// trial of this session, in order.
    fn decide(
        &mut self,
        obs: &Observation,
        history: &[TrialRecord],
        rng: &mut SessionRng,
    ) -> Result<Decision, AgentError>;
}

/// Agent selector as written on the command line.
#[derive(Clone, Debug, PartialEq)]
pub enum AgentSpec {
    Ucb,
    EGreedy(f64),
    EuMax,
    Random,
    Replay(PathBuf),
    /// Chat-completions backed player; the optional part names the model.
    Llm(Option<String>),
    Human,
}

impl AgentSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            AgentSpec::Llm(_) => "llm",
            AgentSpec::Human => "human",
            _ => "scripted",
        }
    }

    /// Whether the agent can play `task` at all.
    pub fn supports(&self, task: Task) -> bool {
        match self {
            AgentSpec::Ucb | AgentSpec::EGreedy(_) => task == Task::Igt,
            AgentSpec::EuMax => task != Task::Igt,
            _ => true,
        }
    }
}

impl fmt::Display for AgentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentSpec::Ucb => write!(f, "ucb"),
            AgentSpec::EGreedy(e) => write!(f, "egreedy:{e}"),
            AgentSpec::EuMax => write!(f, "eumax"),
            AgentSpec::Random => write!(f, "random"),
            AgentSpec::Replay(p) => write!(f, "replay:{}", p.display()),
            AgentSpec::Llm(None) => write!(f, "llm"),
            AgentSpec::Llm(Some(m)) => write!(f, "llm:{m}"),
            AgentSpec::Human => write!(f, "human"),
        }
    }
}

impl FromStr for AgentSpec {
    type Err = AgentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let spec = match (head, arg) {
            ("ucb", None) => AgentSpec::Ucb,
            ("egreedy", None) => AgentSpec::EGreedy(DEFAULT_EPSILON),
            ("egreedy", Some(e)) => {
                let eps: f64 = e.parse().map_err(|_| AgentError::Config(format!("bad epsilon '{e}'")))?;
                if !(0.0..=1.0).contains(&eps) {
                    return Err(AgentError::Config(format!("epsilon {eps} is outside [0, 1]")));
                }
                AgentSpec::EGreedy(eps)
            }
            ("eumax", None) => AgentSpec::EuMax,
            ("random", None) => AgentSpec::Random,
            ("replay", Some(p)) if !p.is_empty() => AgentSpec::Replay(PathBuf::from(p)),
            ("llm", None) => AgentSpec::Llm(None),
            ("llm", Some(m)) if !m.is_empty() => AgentSpec::Llm(Some(m.to_string())),
            ("human", None) => AgentSpec::Human,
            _ => return Err(AgentError::Config(format!("unknown agent '{s}'"))),
        };
        Ok(spec)
    }
}

/// Builds a scripted agent. LLM and human players are assembled by the harness.
pub fn build_scripted(spec: &AgentSpec, task: Task) -> Result<Box<dyn Agent>, AgentError> {
    if !spec.supports(task) {
        return Err(AgentError::Unsupported { agent: spec.to_string(), task });
    }
    Ok(match spec {
        AgentSpec::Ucb => Box::new(UcbAgent),
        AgentSpec::EGreedy(e) => Box::new(EpsilonGreedyAgent::new(*e)?),
        AgentSpec::EuMax => Box::new(EuMaxAgent::default()),
        AgentSpec::Random => Box::new(RandomAgent),
        AgentSpec::Replay(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| AgentError::Config(format!("reading {}: {e}", path.display())))?;
            let trials = crate::engine::record::read_jsonl(&text)
                .map_err(|e| AgentError::Config(format!("parsing {}: {e}", path.display())))?;
            Box::new(ReplayAgent::new(trials))
        }
        AgentSpec::Llm(_) | AgentSpec::Human => {
            return Err(AgentError::Config(format!("'{spec}' is not a scripted agent")))
        }
    })
}

fn unsupported(agent: &str, obs: &Observation) -> AgentError {
    AgentError::Unsupported { agent: agent.to_string(), task: obs.task() }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct UcbAgent;

impl Agent for UcbAgent {
    fn id(&self) -> String {
        "ucb".into()
    }

    fn decide(
        &mut self,
        obs: &Observation,
        history: &[TrialRecord],
        _rng: &mut SessionRng,
    ) -> Result<Decision, AgentError> {
        match obs {
            Observation::Igt { round, .. } => Ok(Choice::Option(ucb_choose(history, *round)).into()),
            _ => Err(unsupported("ucb", obs)),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EpsilonGreedyAgent {
    epsilon: f64,
}

impl EpsilonGreedyAgent {
    pub fn new(epsilon: f64) -> Result<Self, AgentError> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(AgentError::Config(format!("epsilon {epsilon} is outside [0, 1]")));
        }
        Ok(EpsilonGreedyAgent { epsilon })
    }
}

impl Agent for EpsilonGreedyAgent {
    fn id(&self) -> String {
        format!("egreedy:{}", self.epsilon)
    }

    fn decide(
        &mut self,
        obs: &Observation,
        history: &[TrialRecord],
        rng: &mut SessionRng,
    ) -> Result<Decision, AgentError> {
        match obs {
            Observation::Igt { .. } => Ok(Choice::Option(epsilon_greedy_choose(history, self.epsilon, rng)?).into()),
            _ => Err(unsupported("egreedy", obs)),
        }
    }
}

/// CGT: majority colour at the top bet. WCST: candidate-rule elimination.
#[derive(Clone, Debug, Default)]
pub struct EuMaxAgent {
    tracker: WcstRuleTracker,
    seen: usize,
}

impl Agent for EuMaxAgent {
    fn id(&self) -> String {
        "eumax".into()
    }

    fn decide(
        &mut self,
        obs: &Observation,
        history: &[TrialRecord],
        _rng: &mut SessionRng,
    ) -> Result<Decision, AgentError> {
        match obs {
            Observation::Cgt { red, blue, bet_levels, .. } => {
                Ok(Choice::Bet(cgt_eumax_choose(Ratio::new(*red, *blue), bet_levels)).into())
            }
            Observation::Wcst { item, .. } => {
                if history.len() < self.seen {
                    *self = EuMaxAgent::default();
                }
                for r in &history[self.seen..] {
                    self.tracker.observe_record(r);
                }
                self.seen = history.len();
                Ok(Choice::Option(self.tracker.choose(*item)).into())
            }
            Observation::Igt { .. } => Err(unsupported("eumax", obs)),
        }
    }
}

/// Uniform over the legal choices of the round.
#[derive(Clone, Copy, Debug, Default)]
pub struct RandomAgent;

pub fn random_choice(obs: &Observation, rng: &mut SessionRng) -> Choice {
    match obs {
        Observation::Cgt { bet_levels, .. } => {
            let side = if rng.gen::<bool>() { Side::Red } else { Side::Blue };
            let bet = if bet_levels.is_empty() {
                BetLevel::from_percent(50).expect("valid percentage")
            } else {
                bet_levels[rng.gen_range(0..bet_levels.len())]
            };
            Choice::Bet(BetChoice { side, bet })
        }
        _ => Choice::Option(OptionId::ALL[rng.gen_range(0..4)]),
    }
}

impl Agent for RandomAgent {
    fn id(&self) -> String {
        "random".into()
    }

    fn decide(
        &mut self,
        obs: &Observation,
        _history: &[TrialRecord],
        rng: &mut SessionRng,
    ) -> Result<Decision, AgentError> {
        Ok(random_choice(obs, rng).into())
    }
}

/// Re-emits the canonical choices of a logged session, round by round.
#[derive(Clone, Debug)]
pub struct ReplayAgent {
    choices: Vec<Choice>,
}

impl ReplayAgent {
    pub fn new(trials: Vec<TrialRecord>) -> Self {
        ReplayAgent { choices: trials.into_iter().map(|t| t.choice).collect() }
    }

    pub fn from_choices(choices: Vec<Choice>) -> Self {
        ReplayAgent { choices }
    }
}

impl Agent for ReplayAgent {
    fn id(&self) -> String {
        "replay".into()
    }

    fn decide(
        &mut self,
        obs: &Observation,
        _history: &[TrialRecord],
        _rng: &mut SessionRng,
    ) -> Result<Decision, AgentError> {
        let round = obs.round();
        self.choices.get(round as usize - 1).map(|c| Decision::from(*c)).ok_or(AgentError::ReplayExhausted { round })
    }
}

/// Plays `agent` against `engine` until the session ends. Trials carry the
/// agent's presentation order, reasoning and forfeit flag. On failure the
/// trials played so far are returned with the error.
pub fn play(
    engine: &mut Engine,
    agent: &mut dyn Agent,
    rng: &mut SessionRng,
) -> Result<Vec<TrialRecord>, (Vec<TrialRecord>, AgentError)> {
    let mut trials: Vec<TrialRecord> = Vec::with_capacity(engine.n_rounds() as usize);
    while !engine.is_done() {
        let obs = engine.observe();
        let decision = match agent.decide(&obs, &trials, rng) {
            Ok(d) => d,
            Err(e) => return Err((trials, e)),
        };
        let mut record = match engine.step(&decision.choice) {
            Ok(r) => r,
            Err(e) => return Err((trials, e.into())),
        };
        if let Some(order) = decision.options_order {
            record.options_order = order;
        }
        record.reasoning = decision.reasoning;
        record.forfeit = decision.forfeit;
        trials.push(record);
    }
    Ok(trials)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::TaskConfig;
    use crate::rng::seeded;

    #[test]
    fn parses_agent_ids() {
        assert_eq!("ucb".parse::<AgentSpec>().unwrap(), AgentSpec::Ucb);
        assert_eq!("egreedy".parse::<AgentSpec>().unwrap(), AgentSpec::EGreedy(0.1));
        assert_eq!("egreedy:0.3".parse::<AgentSpec>().unwrap(), AgentSpec::EGreedy(0.3));
        assert_eq!("replay:logs/a.jsonl".parse::<AgentSpec>().unwrap(), AgentSpec::Replay("logs/a.jsonl".into()));
        assert!("egreedy:2".parse::<AgentSpec>().is_err());
        assert!("foo".parse::<AgentSpec>().is_err());
        for s in ["ucb", "egreedy:0.25", "eumax", "random", "llm", "llm:gpt", "human"] {
            assert_eq!(s.parse::<AgentSpec>().unwrap().to_string(), s);
        }
    }

    #[test]
    fn task_support() {
        assert!(build_scripted(&AgentSpec::EuMax, Task::Igt).is_err());
        assert!(build_scripted(&AgentSpec::Ucb, Task::Cgt).is_err());
        assert!(build_scripted(&AgentSpec::Random, Task::Wcst).is_ok());
    }

    #[test]
    fn replay_runs_out() {
        let cfg = TaskConfig::default_for(Task::Igt);
        let mut engine = Engine::new(&cfg, 1).unwrap();
        let mut agent = ReplayAgent::from_choices(vec![Choice::Option(OptionId::A); 5]);
        let (done, err) = play(&mut engine, &mut agent, &mut seeded(0)).unwrap_err();
        assert_eq!(done.len(), 5);
        assert!(matches!(err, AgentError::ReplayExhausted { round: 6 }));
    }
}

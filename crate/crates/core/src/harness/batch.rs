//! Parallel execution of an experiment's sessions.

use std::path::PathBuf;
use std::sync::Arc;

use chrono::Utc;
use rayon::prelude::*;

use super::storage::RunStore;
use super::{ExperimentConfig, HarnessError, SessionRecord, SubjectKind};
use crate::agents::{build_scripted, play, Agent, AgentSpec};
use crate::engine::{Engine, TaskConfig};
use crate::llm::variants::find_variant;
use crate::llm::{permute_options, ChatBackend, ChatClient, ChatEndpointConfig, LlmAgent, VariantSpec};
use crate::rng::split;

#[derive(Clone, Default)]
pub struct BatchOptions {
    /// Worker threads; `None` uses one per core.
    pub workers: Option<usize>,
    /// Chat backend for LLM runs; `None` builds an HTTP client from the config and environment.
    pub backend: Option<Arc<dyn ChatBackend>>,
}

#[derive(Debug)]
pub struct BatchOutcome {
    pub run_dir: PathBuf,
    pub records: Vec<SessionRecord>,
}

/// Number of presented options, which sets the permutation size.
pub fn option_count(config: &TaskConfig) -> usize {
    match config {
        TaskConfig::Cgt(c) => 2 * c.bet_levels.len(),
        other => other.task().n_options(),
    }
}

fn llm_backend(config: &ExperimentConfig, model: &Option<String>) -> Result<Arc<dyn ChatBackend>, HarnessError> {
    let model = model.clone().unwrap_or_else(|| "gpt-4o".to_string());
    let mut endpoint = ChatEndpointConfig::from_env(model);
    if let Some(base) = &config.llm.base_url {
        endpoint.base_url = base.clone();
    }
    endpoint.timeout_secs = config.llm.timeout_secs;
    endpoint.max_retries = config.llm.max_retries;
    endpoint.max_in_flight = config.llm.max_in_flight;
    Ok(Arc::new(ChatClient::new(endpoint)?))
}

fn variant_spec(config: &ExperimentConfig) -> Result<VariantSpec, HarnessError> {
    match &config.variant {
        None => Ok(VariantSpec::baseline()),
        Some(id) => find_variant(config.task(), id)
            .ok_or_else(|| HarnessError::Config(format!("no variant '{id}' for {}", config.task()))),
    }
}

/// Plays session `index` of `config`. Agent failures end up in the record, not in the error.
pub fn run_session(
    config: &ExperimentConfig,
    index: u64,
    backend: Option<&Arc<dyn ChatBackend>>,
) -> Result<SessionRecord, HarnessError> {
    let seed = config.session_seed(index);
    let started_at = Utc::now();
    let mut engine = Engine::new(&config.task_config, seed)?;
    let mut agent: Box<dyn Agent> = match &config.agent {
        AgentSpec::Llm(_) => {
            let backend = backend.ok_or_else(|| HarnessError::Config("llm run without a chat backend".into()))?;
            let perm = permute_options(index, option_count(&config.task_config));
            Box::new(LlmAgent::new(backend.clone(), config.task_config.clone(), variant_spec(config)?, perm)?)
        }
        spec => build_scripted(spec, config.task())?,
    };
    let mut rng = split(seed, 1);
    let (trials, error) = match play(&mut engine, agent.as_mut(), &mut rng) {
        Ok(t) => (t, None),
        Err((t, e)) => {
            log::warn!("session {index}: {e}");
            (t, Some(e.to_string()))
        }
    };
    Ok(SessionRecord {
        session_id: format!("{}-{index:05}", config.task()),
        session_index: Some(index),
        seed,
        subject_kind: SubjectKind::of(&config.agent),
        agent: config.agent.to_string(),
        variant: config.variant.clone(),
        config: config.task_config.clone(),
        forfeits: trials.iter().filter(|t| t.forfeit).count() as u32,
        final_score: engine.final_score(),
        complete: engine.is_done(),
        trials,
        error,
        demographics: None,
        survey: None,
        started_at,
        finished_at: Some(Utc::now()),
    })
}

/// Runs every session, writing each as it finishes and the index at the end.
pub fn run_batch(config: &ExperimentConfig, options: &BatchOptions) -> Result<BatchOutcome, HarnessError> {
    config.validate()?;
    let backend = match (&config.agent, &options.backend) {
        (AgentSpec::Llm(_), Some(b)) => Some(b.clone()),
        (AgentSpec::Llm(model), None) => Some(llm_backend(config, model)?),
        _ => None,
    };
    let store = RunStore::create(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers.unwrap_or(0))
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let records: Vec<SessionRecord> = pool.install(|| {
        (0..u64::from(config.n_sessions))
            .into_par_iter()
            .map(|i| {
                let record = run_session(config, i, backend.as_ref())?;
                store.write_session(&record)?;
                Ok(record)
            })
            .collect::<Result<_, HarnessError>>()
    })?;
    store.rebuild_index()?;
    Ok(BatchOutcome { run_dir: store.dir().to_path_buf(), records })
}

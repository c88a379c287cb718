//! HTTP session service for live participants.
//!
//! Every live session owns one engine behind its own lock. A choice request
//! that finds the lock taken, names a round other than the open one, or
//! arrives after the last round is answered with 409.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, TryLockError};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use serde::Deserialize;
use serde_json::{json, Value};

use super::storage::RunStore;
use super::{validate_survey, Demographics, HarnessError, SessionRecord, SubjectKind, SurveyAnswer};
use crate::engine::{Choice, Engine, EngineError, Task, TaskConfig};

/// Service sessions are stored as one run in `<root>/run-service/`.
pub const SERVICE_RUN_DIR: &str = "run-service";

struct Live {
    engine: Engine,
    record: SessionRecord,
}

pub struct ServiceState {
    store: RunStore,
    sessions: Mutex<HashMap<String, Arc<Mutex<Live>>>>,
}

impl ServiceState {
    pub fn new(root: impl Into<PathBuf>) -> Result<Arc<Self>, HarnessError> {
        let store = RunStore::open(root.into().join(SERVICE_RUN_DIR))?;
        Ok(Arc::new(ServiceState { store, sessions: Mutex::new(HashMap::new()) }))
    }

    pub fn store(&self) -> &RunStore {
        &self.store
    }

    fn get(&self, id: &str) -> Option<Arc<Mutex<Live>>> {
        self.sessions.lock().unwrap_or_else(|e| e.into_inner()).get(id).cloned()
    }

    fn persist(&self, record: &SessionRecord) -> Result<(), HarnessError> {
        self.store.write_session(record)?;
        self.store.rebuild_index()
    }
}

type Shared = Arc<ServiceState>;

fn error(status: StatusCode, msg: impl std::fmt::Display) -> Response {
    (status, Json(json!({ "error": msg.to_string() }))).into_response()
}

fn not_found(id: &str) -> Response {
    error(StatusCode::NOT_FOUND, format!("no session {id}"))
}

fn internal(e: HarnessError) -> Response {
    error(StatusCode::INTERNAL_SERVER_ERROR, e)
}

#[derive(Deserialize)]
struct CreateBody {
    task: String,
    config: Option<TaskConfig>,
    seed: Option<u64>,
    subject_kind: Option<SubjectKind>,
    agent: Option<String>,
}

async fn create(State(state): State<Shared>, Json(body): Json<CreateBody>) -> Response {
    let task: Task = match body.task.parse() {
        Ok(t) => t,
        Err(e) => return error(StatusCode::UNPROCESSABLE_ENTITY, e),
    };
    let config = body.config.unwrap_or_else(|| TaskConfig::default_for(task));
    if config.task() != task {
        return error(StatusCode::UNPROCESSABLE_ENTITY, format!("config is for {}, not {task}", config.task()));
    }
    let seed = body.seed.unwrap_or_else(rand::random);
    let engine = match Engine::new(&config, seed) {
        Ok(e) => e,
        Err(e) => return error(StatusCode::UNPROCESSABLE_ENTITY, e),
    };
    let session_id = uuid::Uuid::new_v4().to_string();
    let subject_kind = body.subject_kind.unwrap_or(SubjectKind::Human);
    let record = SessionRecord {
        session_id: session_id.clone(),
        session_index: None,
        seed,
        subject_kind,
        agent: body.agent.unwrap_or_else(|| subject_kind.as_str().to_string()),
        variant: None,
        config,
        trials: Vec::new(),
        final_score: engine.final_score(),
        complete: false,
        error: None,
        forfeits: 0,
        demographics: None,
        survey: None,
        started_at: Utc::now(),
        finished_at: None,
    };
    let observation = engine.observe();
    let n_rounds = engine.n_rounds();
    state
        .sessions
        .lock()
        .unwrap_or_else(|e| e.into_inner())
        .insert(session_id.clone(), Arc::new(Mutex::new(Live { engine, record })));
    (StatusCode::CREATED, Json(json!({ "session_id": session_id, "observation": observation, "n_rounds": n_rounds })))
        .into_response()
}

fn snapshot(live: &Live) -> Value {
    let done = live.engine.is_done();
    json!({
        "session_id": live.record.session_id,
        "round": if done { live.engine.n_rounds() } else { live.engine.observe().round() },
        "n_rounds": live.engine.n_rounds(),
        "observation": if done { Value::Null } else { serde_json::to_value(live.engine.observe()).unwrap_or(Value::Null) },
        "cumulative": live.engine.cumulative(),
        "done": done,
    })
}

async fn status(State(state): State<Shared>, Path(id): Path<String>) -> Response {
    let Some(session) = state.get(&id) else { return not_found(&id) };
    let live = session.lock().unwrap_or_else(|e| e.into_inner());
    Json(snapshot(&live)).into_response()
}

#[derive(Deserialize)]
struct ChoiceBody {
    choice: Choice,
    /// The round the client believes is open; a mismatch is a conflict.
    round: Option<u32>,
}

async fn choose(State(state): State<Shared>, Path(id): Path<String>, Json(body): Json<ChoiceBody>) -> Response {
    let Some(session) = state.get(&id) else { return not_found(&id) };
    let mut live = match session.try_lock() {
        Ok(l) => l,
        Err(TryLockError::WouldBlock) => return error(StatusCode::CONFLICT, "a choice for this session is in flight"),
        Err(TryLockError::Poisoned(p)) => p.into_inner(),
    };
    if live.engine.is_done() {
        return error(StatusCode::CONFLICT, "session already complete");
    }
    let open = live.engine.observe().round();
    if let Some(r) = body.round {
        if r != open {
            return error(StatusCode::CONFLICT, format!("round {r} is closed; round {open} is open"));
        }
    }
    let mut trial = match live.engine.step(&body.choice) {
        Ok(t) => t,
        Err(e @ EngineError::InvalidChoice(_)) => return error(StatusCode::UNPROCESSABLE_ENTITY, e),
        Err(e) => return error(StatusCode::CONFLICT, e),
    };
    trial.wall_time = Some(Utc::now());
    let outcome = trial.outcome;
    let cumulative = trial.cumulative;
    live.record.trials.push(trial);
    let done = live.engine.is_done();
    if done {
        let score = live.engine.final_score();
        live.record.final_score = score;
        live.record.complete = true;
        live.record.finished_at = Some(Utc::now());
        if let Err(e) = state.persist(&live.record) {
            return internal(e);
        }
    }
    Json(json!({ "round": open, "outcome": outcome, "cumulative": cumulative, "done": done })).into_response()
}

fn update(state: &Shared, id: &str, f: impl FnOnce(&mut SessionRecord)) -> Response {
    let Some(session) = state.get(id) else { return not_found(id) };
    let mut live = session.lock().unwrap_or_else(|e| e.into_inner());
    f(&mut live.record);
    if live.record.complete {
        if let Err(e) = state.persist(&live.record) {
            return internal(e);
        }
    }
    Json(json!({ "ok": true })).into_response()
}

async fn demographics(State(state): State<Shared>, Path(id): Path<String>, Json(body): Json<Demographics>) -> Response {
    update(&state, &id, |r| r.demographics = Some(body))
}

#[derive(Deserialize)]
struct SurveyBody {
    answers: Vec<SurveyAnswer>,
}

async fn survey(State(state): State<Shared>, Path(id): Path<String>, Json(body): Json<SurveyBody>) -> Response {
    if let Err(e) = validate_survey(&body.answers) {
        return error(StatusCode::UNPROCESSABLE_ENTITY, e);
    }
    update(&state, &id, |r| r.survey = Some(body.answers))
}

async fn result(State(state): State<Shared>, Path(id): Path<String>) -> Response {
    let Some(session) = state.get(&id) else { return not_found(&id) };
    let live = session.lock().unwrap_or_else(|e| e.into_inner());
    if !live.record.complete {
        return error(StatusCode::CONFLICT, "session not complete");
    }
    let r = &live.record;
    Json(json!({
        "session_id": r.session_id,
        "task": r.task(),
        "final_score": r.final_score,
        "n_trials": r.trials.len(),
        "complete": r.complete,
        "demographics": r.demographics,
        "survey": r.survey,
    }))
    .into_response()
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/:id", get(status))
        .route("/sessions/:id/choice", post(choose))
        .route("/sessions/:id/demographics", post(demographics))
        .route("/sessions/:id/survey", post(survey))
        .route("/sessions/:id/result", get(result))
        .with_state(state)
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(addr: SocketAddr, root: PathBuf) -> Result<(), HarnessError> {
    let state = ServiceState::new(root)?;
    let listener =
        tokio::net::TcpListener::bind(addr).await.map_err(|e| HarnessError::Startup(format!("binding {addr}: {e}")))?;
    log::info!("listening on {addr}");
    axum::serve(listener, router(state)).await.map_err(|e| HarnessError::Startup(e.to_string()))
}

//! On-disk layout of a run:
//!
//! ```text
//! run-<id>/config.json
//! run-<id>/index.csv
//! run-<id>/sessions/<session_id>.jsonl   trial records, one per line
//! run-<id>/sessions/<session_id>.json    everything else, including `complete`
//! ```
//!
//! Files are written to a temporary name and renamed, trials before metadata,
//! so a crash leaves either no metadata file or a fully written one.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{ExperimentConfig, HarnessError, SessionRecord};
use crate::engine::record::{read_jsonl, write_jsonl};
use crate::engine::TrialRecord;

pub const SESSIONS_DIR: &str = "sessions";
pub const INDEX_FILE: &str = "index.csv";
pub const CONFIG_FILE: &str = "config.json";

fn storage_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Storage(format!("{}: {e}", path.display()))
}

/// Writes `contents` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), HarnessError> {
    let name = path.file_name().ok_or_else(|| storage_err(path, "no file name"))?.to_string_lossy();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, contents).map_err(|e| storage_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| storage_err(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexRow {
    session_id: String,
    session_index: Option<u64>,
    seed: u64,
    task: String,
    subject_kind: String,
    agent: String,
    variant: String,
    n_trials: usize,
    final_score: i64,
    complete: bool,
    forfeits: u32,
    error: String,
}

#[derive(Debug)]
pub struct RunStore {
    dir: PathBuf,
    index_lock: Mutex<()>,
}

impl RunStore {
    /// Opens (creating if needed) a run directory.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, HarnessError> {
        let dir = dir.into();
        let sessions = dir.join(SESSIONS_DIR);
        fs::create_dir_all(&sessions).map_err(|e| storage_err(&sessions, e))?;
        Ok(RunStore { dir, index_lock: Mutex::new(()) })
    }

    /// `<out_dir>/run-<run_id>/` with the config written alongside.
    pub fn create(config: &ExperimentConfig) -> Result<Self, HarnessError> {
        let store = Self::open(config.out_dir.join(format!("run-{}", config.run_id())))?;
        write_atomic(&store.dir.join(CONFIG_FILE), config.to_json().as_bytes())?;
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn trials_path(&self, session_id: &str) -> PathBuf {
        self.dir.join(SESSIONS_DIR).join(format!("{session_id}.jsonl"))
    }

    pub fn record_path(&self, session_id: &str) -> PathBuf {
        self.dir.join(SESSIONS_DIR).join(format!("{session_id}.json"))
    }

    pub fn write_session(&self, record: &SessionRecord) -> Result<(), HarnessError> {
        if record.session_id.is_empty() || record.session_id.contains(['/', '\\', '.']) {
            return Err(HarnessError::Storage(format!("unusable session id '{}'", record.session_id)));
        }
        write_atomic(&self.trials_path(&record.session_id), write_jsonl(&record.trials).as_bytes())?;
        let mut meta = serde_json::to_value(record).map_err(|e| HarnessError::Storage(e.to_string()))?;
        if let Some(obj) = meta.as_object_mut() {
            obj.remove("trials");
        }
        let text = serde_json::to_string_pretty(&meta).map_err(|e| HarnessError::Storage(e.to_string()))?;
        write_atomic(&self.record_path(&record.session_id), text.as_bytes())
    }

    /// Every session with a metadata file, ordered by index then id.
    pub fn load(&self) -> Result<Vec<SessionRecord>, HarnessError> {
        load_run(&self.dir)
    }

    /// Rewrites index.csv from the sessions on disk.
    pub fn rebuild_index(&self) -> Result<(), HarnessError> {
        let _guard = self.index_lock.lock().unwrap_or_else(|e| e.into_inner());
        let records = self.load()?;
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &records {
            w.serialize(IndexRow {
                session_id: r.session_id.clone(),
                session_index: r.session_index,
                seed: r.seed,
                task: r.task().to_string(),
                subject_kind: r.subject_kind.as_str().to_string(),
                agent: r.agent.clone(),
                variant: r.variant.clone().unwrap_or_default(),
                n_trials: r.trials.len(),
                final_score: r.final_score,
                complete: r.complete,
                forfeits: r.forfeits,
                error: r.error.clone().unwrap_or_default(),
            })
            .map_err(|e| HarnessError::Storage(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| HarnessError::Storage(e.to_string()))?;
        write_atomic(&self.dir.join(INDEX_FILE), &bytes)
    }
}

fn read_record(meta_path: &Path) -> Result<SessionRecord, HarnessError> {
    let text = fs::read_to_string(meta_path).map_err(|e| storage_err(meta_path, e))?;
    let mut meta: Value = serde_json::from_str(&text).map_err(|e| storage_err(meta_path, e))?;
    let trials_path = meta_path.with_extension("jsonl");
    let trials_text = fs::read_to_string(&trials_path).map_err(|e| storage_err(&trials_path, e))?;
    let trials = read_jsonl(&trials_text).map_err(|e| storage_err(&trials_path, e))?;
    meta["trials"] = serde_json::to_value(trials).map_err(|e| HarnessError::Storage(e.to_string()))?;
    serde_json::from_value(meta).map_err(|e| storage_err(meta_path, e))
}

/// Loads one run directory.
pub fn load_run(dir: &Path) -> Result<Vec<SessionRecord>, HarnessError> {
    let sessions = dir.join(SESSIONS_DIR);
    let mut out = Vec::new();
    for entry in fs::read_dir(&sessions).map_err(|e| storage_err(&sessions, e))? {
        let path = entry.map_err(|e| storage_err(&sessions, e))?.path();
        let is_meta = path.extension().is_some_and(|x| x == "json")
            && !path.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.'));
        if is_meta {
            out.push(read_record(&path)?);
        }
    }
    out.sort_by(|a, b| (a.session_index, &a.session_id).cmp(&(b.session_index, &b.session_id)));
    Ok(out)
}

/// Loads every run found at or below `root`, grouped per run directory.
pub fn load_sessions(root: &Path) -> Result<Vec<(PathBuf, Vec<SessionRecord>)>, HarnessError> {
    let pattern = format!("{}/**/{SESSIONS_DIR}", glob::Pattern::escape(&root.to_string_lossy()));
    let mut runs = Vec::new();
    for entry in glob::glob(&pattern).map_err(|e| HarnessError::Config(e.to_string()))? {
        let sessions = entry.map_err(|e| HarnessError::Storage(e.to_string()))?;
        if sessions.is_dir() {
            let run = sessions.parent().unwrap_or(root).to_path_buf();
            runs.push((run.clone(), load_run(&run)?));
        }
    }
    runs.sort_by(|a, b| a.0.cmp(&b.0));
    if runs.is_empty() {
        return Err(HarnessError::Storage(format!("no sessions under {}", root.display())));
    }
    Ok(runs)
}

/// Trial logs matching a glob such as `out/**/*.jsonl`.
pub fn load_trial_logs(pattern: &str) -> Result<Vec<(PathBuf, Vec<TrialRecord>)>, HarnessError> {
    let mut out = Vec::new();
    for entry in glob::glob(pattern).map_err(|e| HarnessError::Config(format!("bad pattern: {e}")))? {
        let path = entry.map_err(|e| HarnessError::Storage(e.to_string()))?;
        let text = fs::read_to_string(&path).map_err(|e| storage_err(&path, e))?;
        out.push((path.clone(), read_jsonl(&text).map_err(|e| storage_err(&path, e))?));
    }
    if out.is_empty() {
        return Err(HarnessError::Storage(format!("no files match {pattern}")));
    }
    Ok(out)
}

//! C ABI over the task engines, model likelihoods and rank statistics.
//!
//! Every fallible function returns a [`CghStatus`] and writes results through
//! out-pointers. On failure, [`cgh_last_error`] describes the most recent
//! error on the calling thread. Strings returned through out-pointers are
//! owned by the caller and must be released with [`cgh_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cogharness::cogfit::{rhat, Model};
use cogharness::engine::record::{read_jsonl, write_jsonl};
use cogharness::engine::{BetChoice, BetLevel, Choice, Engine, EngineError, OptionId, Side, Task, TaskConfig};
use cogharness::stats::mann_whitney_u;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CghStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    InvalidChoice = 4,
    SessionComplete = 5,
    Model = 6,
    Stats = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CghTask {
    Igt = 0,
    Cgt = 1,
    Wcst = 2,
}

impl From<CghTask> for Task {
    fn from(t: CghTask) -> Task {
        match t {
            CghTask::Igt => Task::Igt,
            CghTask::Cgt => Task::Cgt,
            CghTask::Wcst => Task::Wcst,
        }
    }
}

/// Opaque handle to one running session.
pub struct CghSession {
    engine: Engine,
}

struct Fail(CghStatus, String);

impl Fail {
    fn new(status: CghStatus, msg: impl ToString) -> Fail {
        Fail(status, msg.to_string())
    }
}

impl From<EngineError> for Fail {
    fn from(e: EngineError) -> Fail {
        let status = match e {
            EngineError::InvalidChoice(_) => CghStatus::InvalidChoice,
            EngineError::SessionComplete => CghStatus::SessionComplete,
            EngineError::Config(_) => CghStatus::InvalidArgument,
        };
        Fail::new(status, e)
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CghStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CghStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            CghStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::new(CghStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|e| Fail::new(CghStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::new(CghStatus::NullArgument, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::new(CghStatus::NullArgument, format!("{what} is null")));
    }
    out.write(value);
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String, what: &str) -> Result<(), Fail> {
    let c = CString::new(s).map_err(|e| Fail::new(CghStatus::InvalidArgument, e))?;
    if out.is_null() {
        return Err(Fail::new(CghStatus::NullArgument, format!("{what} is null")));
    }
    out.write(c.into_raw());
    Ok(())
}

unsafe fn session<'a>(s: *const CghSession) -> Result<&'a CghSession, Fail> {
    s.as_ref().ok_or_else(|| Fail::new(CghStatus::NullArgument, "session is null"))
}

unsafe fn session_mut<'a>(s: *mut CghSession) -> Result<&'a mut CghSession, Fail> {
    s.as_mut().ok_or_else(|| Fail::new(CghStatus::NullArgument, "session is null"))
}

fn json_err(e: serde_json::Error) -> Fail {
    Fail::new(CghStatus::InvalidArgument, e)
}

/// Description of the last failure on this thread, or null. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn cgh_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn cgh_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cgh_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

fn boxed(engine: Engine) -> *mut CghSession {
    Box::into_raw(Box::new(CghSession { engine }))
}

/// Starts a session with the default configuration for `task`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cgh_session_new(task: CghTask, seed: u64, out: *mut *mut CghSession) -> CghStatus {
    guard(|| {
        let engine = Engine::new(&TaskConfig::default_for(task.into()), seed)?;
        put(out, boxed(engine), "out")
    })
}

/// Starts a session from a JSON task configuration.
///
/// # Safety
/// `config_json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cgh_session_new_json(
    config_json: *const c_char,
    seed: u64,
    out: *mut *mut CghSession,
) -> CghStatus {
    guard(|| {
        let config: TaskConfig = serde_json::from_str(text(config_json, "config_json")?).map_err(json_err)?;
        let engine = Engine::new(&config, seed)?;
        put(out, boxed(engine), "out")
    })
}

/// # Safety
/// `s` must be null or a handle from `cgh_session_new*`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cgh_session_free(s: *mut CghSession) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Rounds completed so far.
///
/// # Safety
/// `s` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cgh_session_rounds_played(s: *const CghSession, out: *mut u32) -> CghStatus {
    guard(|| put(out, session(s)?.engine.round(), "out"))
}

/// # Safety
/// `s` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cgh_session_n_rounds(s: *const CghSession, out: *mut u32) -> CghStatus {
    guard(|| put(out, session(s)?.engine.n_rounds(), "out"))
}

/// # Safety
/// `s` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cgh_session_is_done(s: *const CghSession, out: *mut bool) -> CghStatus {
    guard(|| put(out, session(s)?.engine.is_done(), "out"))
}

/// Running points (IGT, CGT) or correct matches (WCST).
///
/// # Safety
/// `s` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cgh_session_cumulative(s: *const CghSession, out: *mut i64) -> CghStatus {
    guard(|| put(out, session(s)?.engine.cumulative(), "out"))
}

/// # Safety
/// `s` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cgh_session_final_score(s: *const CghSession, out: *mut i64) -> CghStatus {
    guard(|| put(out, session(s)?.engine.final_score(), "out"))
}

unsafe fn step(s: *mut CghSession, choice: Choice, out_cumulative: *mut i64) -> Result<(), Fail> {
    let trial = session_mut(s)?.engine.step(&choice)?;
    if !out_cumulative.is_null() {
        out_cumulative.write(trial.cumulative);
    }
    Ok(())
}

/// Plays option `index` (0 = A) in an IGT or WCST session.
/// `out_cumulative` may be null.
///
/// # Safety
/// `s` must be a live handle; `out_cumulative` null or valid.
#[no_mangle]
pub unsafe extern "C" fn cgh_session_choose(s: *mut CghSession, index: u32, out_cumulative: *mut i64) -> CghStatus {
    guard(|| {
        let option = OptionId::from_index(index as usize)
            .ok_or_else(|| Fail::new(CghStatus::InvalidChoice, format!("option index {index} out of range")))?;
        step(s, Choice::Option(option), out_cumulative)
    })
}

/// Places a CGT bet of `percent` on red (`red == true`) or blue.
/// `out_cumulative` may be null.
///
/// # Safety
/// `s` must be a live handle; `out_cumulative` null or valid.
#[no_mangle]
pub unsafe extern "C" fn cgh_session_bet(
    s: *mut CghSession,
    red: bool,
    percent: u8,
    out_cumulative: *mut i64,
) -> CghStatus {
    guard(|| {
        let bet = BetLevel::from_percent(percent)
            .ok_or_else(|| Fail::new(CghStatus::InvalidChoice, format!("bet {percent}% is not a level")))?;
        let side = if red { Side::Red } else { Side::Blue };
        step(s, Choice::Bet(BetChoice { side, bet }), out_cumulative)
    })
}

/// Applies a JSON choice and returns the trial record as JSON.
///
/// # Safety
/// `s` must be a live handle, `choice_json` nul-terminated, `out_trial_json` valid.
#[no_mangle]
pub unsafe extern "C" fn cgh_session_step_json(
    s: *mut CghSession,
    choice_json: *const c_char,
    out_trial_json: *mut *mut c_char,
) -> CghStatus {
    guard(|| {
        let choice: Choice = serde_json::from_str(text(choice_json, "choice_json")?).map_err(json_err)?;
        let trial = session_mut(s)?.engine.step(&choice)?;
        put_string(out_trial_json, serde_json::to_string(&trial).map_err(json_err)?, "out_trial_json")
    })
}

/// Current observation as JSON.
///
/// # Safety
/// `s` must be a live handle and `out_json` valid.
#[no_mangle]
pub unsafe extern "C" fn cgh_session_observation_json(s: *const CghSession, out_json: *mut *mut c_char) -> CghStatus {
    guard(|| {
        let engine = &session(s)?.engine;
        if engine.is_done() {
            return Err(Fail::from(EngineError::SessionComplete));
        }
        put_string(out_json, serde_json::to_string(&engine.observe()).map_err(json_err)?, "out_json")
    })
}

/// Trials so far as JSON Lines.
///
/// # Safety
/// `s` must be a live handle and `out_jsonl` valid.
#[no_mangle]
pub unsafe extern "C" fn cgh_session_history_jsonl(s: *const CghSession, out_jsonl: *mut *mut c_char) -> CghStatus {
    guard(|| put_string(out_jsonl, write_jsonl(session(s)?.engine.history()), "out_jsonl"))
}

/// Log-likelihood of a JSON Lines trial log under `model`
/// (`pvl_decay`, `cumulative` or `slm`) at the natural-scale `params`.
///
/// # Safety
/// `model` and `trials_jsonl` nul-terminated; `params` holds `n_params` values; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn cgh_loglik(
    model: *const c_char,
    params: *const f64,
    n_params: usize,
    trials_jsonl: *const c_char,
    out: *mut f64,
) -> CghStatus {
    guard(|| {
        let model: Model = text(model, "model")?.parse().map_err(|e| Fail::new(CghStatus::InvalidArgument, e))?;
        let theta = slice(params, n_params, "params")?;
        let trials = read_jsonl(text(trials_jsonl, "trials_jsonl")?).map_err(json_err)?;
        let ll = model.loglik(theta, &trials).map_err(|e| Fail::new(CghStatus::Model, e))?;
        put(out, ll, "out")
    })
}

/// Two-sided Mann-Whitney U test of `x` against `y`.
///
/// # Safety
/// `x` and `y` hold `nx` and `ny` values; `out_u` and `out_p` valid.
#[no_mangle]
pub unsafe extern "C" fn cgh_mann_whitney(
    x: *const f64,
    nx: usize,
    y: *const f64,
    ny: usize,
    out_u: *mut f64,
    out_p: *mut f64,
) -> CghStatus {
    guard(|| {
        let t = mann_whitney_u(slice(x, nx, "x")?, slice(y, ny, "y")?).map_err(|e| Fail::new(CghStatus::Stats, e))?;
        put(out_u, t.statistic, "out_u")?;
        put(out_p, t.p_value, "out_p")
    })
}

/// Split R-hat of `n_chains` chains of `n_draws` draws each, stored chain after chain.
///
/// # Safety
/// `draws` holds `n_chains * n_draws` values; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn cgh_rhat(draws: *const f64, n_chains: usize, n_draws: usize, out: *mut f64) -> CghStatus {
    guard(|| {
        let n = n_chains
            .checked_mul(n_draws)
            .ok_or_else(|| Fail::new(CghStatus::InvalidArgument, "n_chains * n_draws overflows"))?;
        let all = slice(draws, n, "draws")?;
        let chains: Vec<Vec<f64>> = all.chunks(n_draws.max(1)).map(<[f64]>::to_vec).collect();
        let r = rhat(&chains).map_err(|e| Fail::new(CghStatus::Model, e))?;
        put(out, r, "out")
    })
}

use std::fs;
use std::net::TcpListener;
use std::path::Path;
use std::sync::Arc;

use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

use cogharness::agents::{play, AgentSpec, ReplayAgent};
use cogharness::engine::{Choice, Engine, OptionId, Side, Stimulus, Task, TaskConfig, TrialRecord};
use cogharness::harness::batch::run_session;
use cogharness::harness::report::group_records;
use cogharness::harness::service::{router, ServiceState, SERVICE_RUN_DIR};
use cogharness::harness::storage::load_run;
use cogharness::harness::{
    build_report, load_sessions, run_batch, write_report, BatchOptions, ExperimentConfig, HarnessError, RunStore,
    SessionRecord, SubjectKind,
};
use cogharness::rng::seeded;

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir.join("sessions"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().to_string(), fs::read(&p).unwrap()))
        .collect();
    out.push(("index.csv".into(), fs::read(dir.join("index.csv")).unwrap()));
    out.sort();
    out
}

#[test]
fn scripted_batches_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let run = |dir: &Path| {
        let cfg = ExperimentConfig::new(Task::Igt, AgentSpec::Ucb, 10, 7, dir);
        run_batch(&cfg, &BatchOptions { workers: Some(3), backend: None }).unwrap()
    };
    let (ra, rb) = (run(a.path()), run(b.path()));
    assert_eq!(ra.run_dir.file_name(), rb.run_dir.file_name());
    assert_eq!(ra.records.len(), 10);
    let (fa, fb) = (files(&ra.run_dir), files(&rb.run_dir));
    assert_eq!(fa.len(), 11);
    assert_eq!(fa, fb);
    for r in &ra.records {
        assert!(r.complete);
        r.validate().unwrap();
    }
    let loaded = load_run(&ra.run_dir).unwrap();
    let strip = |rs: &[SessionRecord]| {
        rs.iter().map(|r| (r.session_id.clone(), r.trials.clone(), r.final_score)).collect::<Vec<_>>()
    };
    assert_eq!(strip(&loaded), strip(&ra.records));
    let cfg_text = fs::read_to_string(ra.run_dir.join("config.json")).unwrap();
    assert_eq!(ExperimentConfig::from_json(&cfg_text).unwrap().master_seed, 7);
}

#[test]
fn session_seeds_depend_only_on_master_seed_and_index() {
    let d = tempfile::tempdir().unwrap();
    let small = ExperimentConfig::new(Task::Wcst, AgentSpec::Random, 3, 11, d.path());
    let large = ExperimentConfig { n_sessions: 50, ..small.clone() };
    for i in 0..3 {
        let a = run_session(&small, i, None).unwrap();
        let b = run_session(&large, i, None).unwrap();
        assert_eq!(a.trials, b.trials);
    }
}

fn serve_mock(router: Router) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            axum::serve(tokio::net::TcpListener::from_std(listener).unwrap(), router).await.unwrap();
        });
    });
    format!("http://{addr}")
}

#[test]
fn llm_batch_against_a_mock_endpoint() {
    let base = serve_mock(Router::new().route(
        "/chat/completions",
        post(|Json(body): Json<Value>| async move {
            let n = body["messages"][1]["content"].as_str().unwrap_or("").len();
            Json(json!({ "choices": [{ "message": { "role": "assistant",
                "content": format!("<reasoning>fixed</reasoning><choice>{}</choice>", n % 4 + 1) } }] }))
        }),
    ));
    let d = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(Task::Igt, AgentSpec::Llm(Some("mock".into())), 4, 3, d.path());
    cfg.variant = Some("persona_elder".into());
    cfg.llm.base_url = Some(base);
    let out = run_batch(&cfg, &BatchOptions::default()).unwrap();
    for r in &out.records {
        assert!(r.complete, "{:?}", r.error);
        assert_eq!(r.forfeits, 0);
        assert_eq!(r.subject_kind, SubjectKind::Llm);
        assert_eq!(r.variant.as_deref(), Some("persona_elder"));
        assert!(r.trials.iter().all(|t| t.reasoning.as_deref() == Some("fixed")));
        r.validate().unwrap();
    }
    // Session i uses cyclic shift i.
    assert_eq!(out.records[1].trials[0].options_order, vec![3, 0, 1, 2]);
}

#[test]
fn llm_endpoint_failure_is_recorded_and_the_batch_continues() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let d = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(Task::Wcst, AgentSpec::Llm(None), 2, 3, d.path());
    cfg.llm.base_url = Some(format!("http://127.0.0.1:{port}"));
    cfg.llm.max_retries = 0;
    let out = run_batch(&cfg, &BatchOptions::default()).unwrap();
    assert_eq!(out.records.len(), 2);
    for r in &out.records {
        assert!(!r.complete);
        assert!(r.trials.is_empty());
        assert!(r.error.as_deref().unwrap().contains("transport"));
        r.validate().unwrap();
    }
    let index = fs::read_to_string(out.run_dir.join("index.csv")).unwrap();
    assert_eq!(index.lines().filter(|l| l.contains(",false,")).count(), 2);
}

/// Phase totals from the logged ratios and coin sides: bet 95% of the phase
/// points on the majority colour every round.
fn eumax_total_by_hand(trials: &[TrialRecord], phase_len: usize, start: i64) -> i64 {
    trials
        .chunks(phase_len)
        .map(|phase| {
            let mut p = start;
            for t in phase {
                let Stimulus::Cgt { red, blue, .. } = t.stimulus else { panic!("not cgt") };
                assert_ne!(red, blue);
                let majority = if red > blue { Side::Red } else { Side::Blue };
                let coin = match t.outcome {
                    cogharness::engine::Outcome::Points { coin_side, .. } => coin_side.unwrap(),
                    _ => panic!("no coin"),
                };
                let stake = (95 * p + 50) / 100;
                p += if coin == majority { stake } else { -stake };
            }
            p
        })
        .sum()
}

#[test]
fn cgt_eumax_total_matches_the_hand_rule() {
    let d = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::new(Task::Cgt, AgentSpec::EuMax, 1, 2024, d.path());
    let r = run_session(&cfg, 0, None).unwrap();
    assert_eq!(r.final_score, eumax_total_by_hand(&r.trials, 8, 100));
}

#[test]
fn validator_catches_tampering() {
    let d = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::new(Task::Igt, AgentSpec::Random, 1, 5, d.path());
    let r = run_session(&cfg, 0, None).unwrap();
    r.validate().unwrap();
    let mut bad = r.clone();
    bad.final_score += 1;
    assert!(matches!(bad.validate(), Err(HarnessError::Validation(_))));
    let mut bad = r.clone();
    bad.trials.remove(3);
    assert!(bad.validate().is_err());
    let mut bad = r.clone();
    bad.trials.truncate(40);
    assert!(bad.validate().is_err(), "a truncated log cannot claim to be complete");
    bad.complete = false;
    bad.final_score = {
        let mut e = Engine::new(&bad.config, bad.seed).unwrap();
        for t in &bad.trials {
            e.step(&t.choice).unwrap();
        }
        e.final_score()
    };
    bad.validate().unwrap();
}

#[test]
fn interrupted_sessions_are_marked_incomplete() {
    let d = tempfile::tempdir().unwrap();
    let store = RunStore::open(d.path().join("run-x")).unwrap();
    let cfg = ExperimentConfig::new(Task::Igt, AgentSpec::Random, 1, 5, d.path());
    let mut r = run_session(&cfg, 0, None).unwrap();
    store.write_session(&r).unwrap();
    // A second session whose metadata never got written.
    r.session_id = "igt-99999".into();
    fs::write(store.trials_path("igt-99999"), "").unwrap();
    // A crash between the temporary write and the rename.
    fs::write(store.dir().join("sessions").join(".igt-00002.json.tmp"), "{").unwrap();
    let loaded = store.load().unwrap();
    assert_eq!(loaded.len(), 1);
    assert!(loaded[0].complete);

    // An agent that fails mid-session.
    let mut engine = Engine::new(&cfg.task_config, 1).unwrap();
    let (partial, err) =
        play(&mut engine, &mut ReplayAgent::from_choices(vec![Choice::Option(OptionId::C); 30]), &mut seeded(1))
            .unwrap_err();
    let rec = SessionRecord {
        session_id: "igt-broken".into(),
        seed: 1,
        trials: partial,
        complete: engine.is_done(),
        final_score: engine.final_score(),
        error: Some(err.to_string()),
        ..loaded[0].clone()
    };
    rec.validate().unwrap();
    store.write_session(&rec).unwrap();
    store.rebuild_index().unwrap();
    let loaded = store.load().unwrap();
    let broken = loaded.iter().find(|r| r.session_id == "igt-broken").unwrap();
    assert!(!broken.complete);
    assert_eq!(broken.trials.len(), 30);
}

fn igt_record(group: &str, id: &str, choices: Vec<Choice>) -> SessionRecord {
    let cfg = TaskConfig::default_for(Task::Igt);
    let mut engine = Engine::new(&cfg, 1).unwrap();
    let trials = play(&mut engine, &mut ReplayAgent::from_choices(choices), &mut seeded(1)).unwrap();
    SessionRecord {
        session_id: id.into(),
        session_index: None,
        seed: 1,
        subject_kind: SubjectKind::Scripted,
        agent: group.into(),
        variant: None,
        config: cfg,
        final_score: engine.final_score(),
        complete: true,
        trials,
        error: None,
        forfeits: 0,
        demographics: None,
        survey: None,
        started_at: chrono::Utc::now(),
        finished_at: None,
    }
}

fn mix(n_good: usize) -> Vec<Choice> {
    (0..80).map(|i| Choice::Option(if i < n_good { OptionId::C } else { OptionId::A })).collect()
}

#[test]
fn report_medians_match_hand_values() {
    // Net scores: (good - bad) / 80.
    let g1 = vec![igt_record("g1", "a", mix(80)), igt_record("g1", "b", mix(60)), igt_record("g1", "c", mix(40))];
    let g2 = vec![igt_record("g2", "d", mix(0)), igt_record("g2", "e", mix(20))];
    let report = build_report(&group_records(g1.into_iter().chain(g2))).unwrap();
    let row = |g: &str| report.summary.iter().find(|r| r.group == g && r.metric == "net_score").unwrap().clone();
    assert_eq!(row("g1").median, 0.5);
    assert_eq!(row("g1").mean, 0.5);
    assert!((row("g1").sd - 0.5).abs() < 1e-12);
    assert_eq!(row("g2").median, -0.75);
    assert_eq!(report.tests.len(), 2);
    let t = report.tests.iter().find(|t| t.metric == "net_score").unwrap();
    assert_eq!(t.u, Some(6.0));
    let curve: Vec<f64> = report
        .curves
        .iter()
        .filter(|c| c.group == "g1" && c.curve == "advantageous_share_by_block")
        .map(|c| c.y)
        .collect();
    assert_eq!(curve, vec![1.0, 1.0, 2.0 / 3.0, 1.0 / 3.0]);

    let d = tempfile::tempdir().unwrap();
    write_report(&report, d.path()).unwrap();
    for f in ["sessions.csv", "summary.csv", "tests.csv", "curves.csv", "report.md"] {
        assert!(d.path().join(f).exists(), "{f}");
    }
    let sessions = fs::read_to_string(d.path().join("sessions.csv")).unwrap();
    assert!(sessions.starts_with("group,session_id,net_score,final_points\n"));
}

#[test]
fn single_group_has_no_tests() {
    let report = build_report(&group_records(vec![igt_record("g", "a", mix(10))])).unwrap();
    assert!(report.tests.is_empty());
    assert_eq!(report.summary.len(), 2);
}

#[test]
fn mixed_tasks_are_rejected() {
    let d = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::new(Task::Cgt, AgentSpec::Random, 1, 5, d.path());
    let cgt = run_session(&cfg, 0, None).unwrap();
    let err = build_report(&group_records(vec![igt_record("g", "a", mix(10)), cgt])).unwrap_err();
    assert!(matches!(err, HarnessError::TaskMismatch { .. }));
}

#[test]
fn eumax_beats_random_on_cgt_totals() {
    let d = tempfile::tempdir().unwrap();
    for agent in [AgentSpec::EuMax, AgentSpec::Random] {
        run_batch(&ExperimentConfig::new(Task::Cgt, agent, 30, 99, d.path()), &BatchOptions::default()).unwrap();
    }
    let runs = load_sessions(d.path()).unwrap();
    assert_eq!(runs.len(), 2);
    let report = build_report(&group_records(runs.into_iter().flat_map(|(_, r)| r))).unwrap();
    let t = report.tests.iter().find(|t| t.metric == "total_score").unwrap();
    assert!(t.p_value.unwrap() < 0.001, "{t:?}");
}

// ---- service ----

struct Service {
    base: String,
    root: tempfile::TempDir,
    http: reqwest::blocking::Client,
}

fn start_service() -> Service {
    let root = tempfile::tempdir().unwrap();
    let state = ServiceState::new(root.path()).unwrap();
    let base = serve_mock(router(state));
    Service { base, root, http: reqwest::blocking::Client::new() }
}

impl Service {
    fn post(&self, path: &str, body: Value) -> (u16, Value) {
        let r = self.http.post(format!("{}{path}", self.base)).json(&body).send().unwrap();
        (r.status().as_u16(), r.json().unwrap_or(Value::Null))
    }

    fn get(&self, path: &str) -> (u16, Value) {
        let r = self.http.get(format!("{}{path}", self.base)).send().unwrap();
        (r.status().as_u16(), r.json().unwrap_or(Value::Null))
    }
}

#[test]
fn session_creation_and_double_submit() {
    let s = start_service();
    let (code, body) = s.post("/sessions", json!({ "task": "igt", "seed": 3 }));
    assert_eq!(code, 201);
    assert_eq!(body["observation"], json!({ "task": "IGT", "round": 1, "cumulative": 2000 }));
    let id = body["session_id"].as_str().unwrap().to_string();

    let (code, first) = s.post(&format!("/sessions/{id}/choice"), json!({ "choice": "B", "round": 1 }));
    assert_eq!(code, 200);
    assert_eq!(first["cumulative"], 2100);
    let (code, _) = s.post(&format!("/sessions/{id}/choice"), json!({ "choice": "B", "round": 1 }));
    assert_eq!(code, 409);
    let (code, state) = s.get(&format!("/sessions/{id}"));
    assert_eq!(code, 200);
    assert_eq!(state["round"], 2);
    assert_eq!(state["cumulative"], 2100);

    let bet = json!({ "choice": { "side": "RED", "bet": 0.5 }, "round": 2 });
    assert_eq!(s.post(&format!("/sessions/{id}/choice"), bet).0, 422);
    assert_eq!(s.get("/sessions/nope").0, 404);
    assert_eq!(s.get(&format!("/sessions/{id}/result")).0, 409);
    assert_eq!(s.post("/sessions", json!({ "task": "chess" })).0, 422);
}

#[test]
fn cgt_anchor_through_the_service() {
    let s = start_service();
    // Find a seed whose first coin lands on red, then bet 5% on red.
    for seed in 0..50u64 {
        let engine = Engine::new(&TaskConfig::default_for(Task::Cgt), seed).unwrap();
        let mut probe = engine.clone();
        let t = probe
            .step(&Choice::Bet(cogharness::engine::BetChoice {
                side: Side::Red,
                bet: cogharness::engine::BetLevel::from_percent(5).unwrap(),
            }))
            .unwrap();
        if t.outcome.net().unwrap() > 0 {
            let (_, body) = s.post("/sessions", json!({ "task": "cgt", "seed": seed }));
            let id = body["session_id"].as_str().unwrap();
            let (_, r) = s.post(&format!("/sessions/{id}/choice"), json!({ "choice": { "side": "RED", "bet": 0.05 } }));
            assert_eq!(r["cumulative"], 105);
            return;
        }
    }
    panic!("no winning first round in 50 seeds");
}

#[test]
fn scripted_client_over_http_matches_the_batch_path() {
    let d = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::new(Task::Igt, AgentSpec::Ucb, 1, 42, d.path());
    let batch = run_session(&cfg, 0, None).unwrap();

    let s = start_service();
    let (_, body) =
        s.post("/sessions", json!({ "task": "igt", "seed": batch.seed, "subject_kind": "scripted", "agent": "ucb" }));
    let id = body["session_id"].as_str().unwrap().to_string();
    for t in &batch.trials {
        let (code, r) = s.post(&format!("/sessions/{id}/choice"), json!({ "choice": t.choice, "round": t.round }));
        assert_eq!(code, 200);
        assert_eq!(r["cumulative"], t.cumulative);
        assert_eq!(r["done"], t.round == 80);
    }
    let demo = json!({ "age": 30, "gender": "female", "education": "master", "major": "economics" });
    assert_eq!(s.post(&format!("/sessions/{id}/demographics"), demo).0, 200);
    let eleven: Vec<Value> = (1..=11).map(|i| json!({ "item": i, "response": 0 })).collect();
    assert_eq!(s.post(&format!("/sessions/{id}/survey"), json!({ "answers": eleven })).0, 422);
    let twelve: Vec<Value> = (1..=12).map(|i| json!({ "item": i, "response": (i % 5) - 2 })).collect();
    assert_eq!(s.post(&format!("/sessions/{id}/survey"), json!({ "answers": twelve })).0, 200);
    let (code, result) = s.get(&format!("/sessions/{id}/result"));
    assert_eq!(code, 200);
    assert_eq!(result["final_score"], batch.final_score);

    let stored = load_run(&s.root.path().join(SERVICE_RUN_DIR)).unwrap();
    assert_eq!(stored.len(), 1);
    let rec = &stored[0];
    rec.validate().unwrap();
    assert_eq!(rec.subject_kind, SubjectKind::Scripted);
    assert_eq!(rec.survey.as_ref().unwrap().len(), 12);
    assert_eq!(rec.demographics.as_ref().unwrap().age, Some(30));
    assert_eq!(rec.final_score, batch.final_score);
    let strip = |t: &TrialRecord| TrialRecord { wall_time: None, ..t.clone() };
    assert_eq!(rec.trials.iter().map(strip).collect::<Vec<_>>(), batch.trials);
    assert!(rec.trials.iter().all(|t| t.wall_time.is_some()));
    let index = fs::read_to_string(s.root.path().join(SERVICE_RUN_DIR).join("index.csv")).unwrap();
    assert_eq!(index.lines().count(), 2);
}

#[test]
fn busy_port_is_a_startup_error() {
    let held = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = held.local_addr().unwrap();
    let root = tempfile::tempdir().unwrap();
    let rt = tokio::runtime::Runtime::new().unwrap();
    let err = rt.block_on(cogharness::harness::service::serve(addr, root.path().to_path_buf())).unwrap_err();
    assert!(matches!(err, HarnessError::Startup(_)));
}

#[test]
fn concurrent_sessions_are_independent() {
    let s = Arc::new(start_service());
    let ids: Vec<String> = (0..6)
        .map(|i| {
            s.post("/sessions", json!({ "task": "wcst", "seed": i })).1["session_id"].as_str().unwrap().to_string()
        })
        .collect();
    std::thread::scope(|scope| {
        for id in &ids {
            let s = s.clone();
            scope.spawn(move || {
                for round in 1..=64 {
                    let (code, _) = s.post(&format!("/sessions/{id}/choice"), json!({ "choice": "A", "round": round }));
                    assert_eq!(code, 200);
                }
            });
        }
    });
    let stored = load_run(&s.root.path().join(SERVICE_RUN_DIR)).unwrap();
    assert_eq!(stored.len(), 6);
    for r in stored {
        assert!(r.complete);
        r.validate().unwrap();
    }
}

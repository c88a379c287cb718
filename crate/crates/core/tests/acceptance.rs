//! One PASS/FAIL line per acceptance criterion.
//!
//! Runs with `harness = false`. The process exits non-zero when a criterion fails
//! for a reason outside `KNOWN_FAILURES`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use cogharness::agents::{build_scripted, play, random_choice, Agent, AgentSpec, RandomAgent};
use cogharness::cogfit::cumulative::{bet_probs, default_levels, prob_red};
use cogharness::cogfit::pvl::{pvl_choice_probs, pvl_log_probs, pvl_update};
use cogharness::cogfit::recovery::recovery_study;
use cogharness::cogfit::slm::{slm_choice_probs, slm_log_probs, slm_update, uniform_attention};
use cogharness::cogfit::{
    rhat, sample_posterior, simulate, CumulativeAgent, CumulativeParams, McmcOptions, Model, PvlAgent, PvlParams,
    SlmAgent, SlmParams,
};
use cogharness::engine::record::{read_jsonl, write_jsonl};
use cogharness::engine::{
    BetChoice, BetLevel, Choice, Engine, Feedback, Item, Observation, OptionId, Outcome, Rule, Side, Stimulus, Task,
    TaskConfig, TrialRecord,
};
use cogharness::llm::parse::cgt_option;
use cogharness::llm::{
    generate_variants, parse_response, permute_options, ChatBackend, ChatClient, ChatEndpointConfig, LlmAgent,
    VariantSpec,
};
use cogharness::metrics::{igt_summary, wcst_summary};
use cogharness::rng::{derive_seed, seeded, split};
use cogharness::stats::{mann_whitney_u, mean, median, std_dev, two_proportion_z_props, wilcoxon_signed_rank};

const MASTER: u64 = 2026;

/// Criteria allowed to print FAIL without failing the run, with the sub-check that fails.
const KNOWN_FAILURES: &[(&str, &str)] =
    &[("cgt_eumax_expectation", "mean within 2%"), ("parameter_recovery", "pvl_decay alpha")];

enum Verdict {
    Pass(String),
    /// `known` is set when every failing sub-check is listed in `KNOWN_FAILURES`.
    Fail {
        detail: String,
        known: bool,
    },
}

fn verdict(name: &str, failures: Vec<String>, detail: String) -> Verdict {
    if failures.is_empty() {
        return Verdict::Pass(detail);
    }
    let known = failures.iter().all(|f| KNOWN_FAILURES.iter().any(|(n, sub)| *n == name && f.starts_with(sub)));
    Verdict::Fail { detail: format!("{}; {detail}", failures.join("; ")), known }
}

fn within(budget: Duration, start: Instant, failures: &mut Vec<String>) -> String {
    let took = start.elapsed();
    if took > budget {
        failures.push(format!("runtime {took:.1?} over {budget:?}"));
    }
    format!("{took:.1?}")
}

// ---- engines ----

fn fuzz_session(task: Task, seed: u64) -> Vec<TrialRecord> {
    let mut engine = Engine::new(&TaskConfig::default_for(task), seed).unwrap();
    let mut rng = split(seed, 7);
    if task == Task::Wcst && seed.is_multiple_of(2) {
        let mut agent = build_scripted(&AgentSpec::EuMax, task).unwrap();
        return play(&mut engine, agent.as_mut(), &mut rng).unwrap();
    }
    while !engine.is_done() {
        let choice = random_choice(&engine.observe(), &mut rng);
        engine.step(&choice).unwrap();
    }
    engine.history().to_vec()
}

fn igt_conserves(trials: &[TrialRecord]) -> bool {
    let mut total = 2000;
    trials.len() == 80
        && trials.iter().all(|t| {
            let Outcome::Points { reward, penalty, net, coin_side: None } = t.outcome else { return false };
            total += net;
            net == reward + penalty && penalty <= 0 && t.cumulative == total
        })
}

/// Banked total recomputed from the logged coins, or None when a logged value disagrees.
fn cgt_recompute(trials: &[TrialRecord]) -> Option<i64> {
    let mut banked = 0;
    for phase in trials.chunks(8) {
        let mut points = 100i64;
        for t in phase {
            let Stimulus::Cgt { phase_points, .. } = t.stimulus else { return None };
            let Outcome::Points { net, coin_side: Some(coin), .. } = t.outcome else { return None };
            let bet = t.choice.bet()?;
            let stake = (i64::from(bet.bet.percent()) * points * 2 + 100) / 200;
            let delta = if bet.side == coin { stake } else { -stake };
            if phase_points != points || net != delta || t.cumulative != points + delta {
                return None;
            }
            points += delta;
        }
        banked += points;
    }
    Some(banked)
}

fn wcst_shifts_silently(trials: &[TrialRecord]) -> bool {
    let (mut streak, mut correct, mut rule) = (0, 0, None::<Rule>);
    for t in trials {
        let Stimulus::Wcst { item, rule_at_time: Some(now) } = t.stimulus else { return false };
        if let Some(prev) = rule {
            let changed = now != prev;
            if changed != (streak == 8) {
                return false;
            }
            if streak == 8 {
                streak = 0;
            }
        }
        rule = Some(now);
        let Some(card) = t.choice.option() else { return false };
        let Some(fb) = t.outcome.feedback() else { return false };
        if (fb == Feedback::Correct) != item.matches(card, now)
            || serde_json::to_value(t.outcome).unwrap().as_object().map(|o| o.len()) != Some(1)
        {
            return false;
        }
        if fb == Feedback::Correct {
            streak += 1;
            correct += 1;
        } else {
            streak = 0;
        }
        if t.cumulative != correct {
            return false;
        }
    }
    true
}

fn engine_conservation() -> Verdict {
    let start = Instant::now();
    let mut failures = Vec::new();
    for task in Task::ALL {
        let mut bad = Vec::new();
        for i in 0..10_000u64 {
            let seed = derive_seed(u64::from(task as u8) + 100, i);
            let trials = fuzz_session(task, seed);
            let ok = match task {
                Task::Igt => igt_conserves(&trials),
                Task::Cgt => {
                    let mut e = Engine::new(&TaskConfig::default_for(task), seed).unwrap();
                    trials.iter().for_each(|t| drop(e.step(&t.choice).unwrap()));
                    cgt_recompute(&trials) == Some(e.final_score())
                }
                Task::Wcst => wcst_shifts_silently(&trials),
            };
            let mut e = Engine::new(&TaskConfig::default_for(task), seed).unwrap();
            let again: Vec<TrialRecord> = trials.iter().map(|t| e.step(&t.choice).unwrap()).collect();
            if !ok || write_jsonl(&again) != write_jsonl(&trials) {
                bad.push(seed);
            }
        }
        if !bad.is_empty() {
            failures.push(format!("{task}: {} sessions fail, first seed {}", bad.len(), bad[0]));
        }
    }
    let took = within(Duration::from_secs(60), start, &mut failures);
    verdict("engine_conservation", failures, format!("30000 sessions in {took}"))
}

fn anchors() -> Verdict {
    let mut failures = Vec::new();
    let mut igt = Engine::new(&TaskConfig::default_for(Task::Igt), MASTER).unwrap();
    let first = igt.step(&Choice::Option(OptionId::B)).unwrap().cumulative;
    if first != 2100 {
        failures.push(format!("IGT first deck-B pick gives {first}"));
    }
    // The coin is random, so look for the first seed whose first red 5% bet wins.
    let five = BetLevel::from_percent(5).unwrap();
    let win = (0..100).find_map(|seed| {
        let mut e = Engine::new(&TaskConfig::default_for(Task::Cgt), seed).unwrap();
        let t = e.step(&Choice::Bet(BetChoice { side: Side::Red, bet: five })).unwrap();
        matches!(t.outcome, Outcome::Points { coin_side: Some(Side::Red), .. }).then_some(t.cumulative)
    });
    if win != Some(105) {
        failures.push(format!("CGT 5% win gives {win:?}"));
    }
    verdict("anchors", failures, format!("IGT {first}, CGT {}", win.unwrap_or(-1)))
}

// ---- agents ----

fn run(spec: &AgentSpec, task: Task, seed: u64) -> (Vec<TrialRecord>, i64) {
    let mut engine = Engine::new(&TaskConfig::default_for(task), seed).unwrap();
    let mut agent = build_scripted(spec, task).unwrap();
    let trials = play(&mut engine, agent.as_mut(), &mut split(seed, 1)).unwrap();
    (trials, engine.final_score())
}

fn benchmark_sanity() -> Verdict {
    let start = Instant::now();
    let nets = |spec: &AgentSpec| -> Vec<f64> {
        (0..500).map(|i| igt_summary(&run(spec, Task::Igt, derive_seed(MASTER, i)).0).unwrap().net_score).collect()
    };
    let random = nets(&AgentSpec::Random);
    let mut failures = Vec::new();
    let mut cells = vec![format!("random median {:.2}", median(&random))];
    for spec in [AgentSpec::Ucb, AgentSpec::EGreedy(0.1)] {
        let scores = nets(&spec);
        let m = median(&scores);
        let p = mann_whitney_u(&scores, &random).unwrap().p_value;
        cells.push(format!("{spec} median {m:.2} p {p:.1e}"));
        if m < 0.5 || m <= median(&random) || p >= 0.001 {
            failures.push(format!("{spec}: median {m:.3}, p {p:.2e}"));
        }
    }
    let took = within(Duration::from_secs(60), start, &mut failures);
    verdict("benchmark_sanity", failures, format!("{} in {took}", cells.join(", ")))
}

/// Banked total for a player betting 95% on the majority colour, from the logged ratios and coins.
fn majority_bet_by_hand(trials: &[TrialRecord]) -> i64 {
    trials
        .chunks(8)
        .map(|phase| {
            phase.iter().fold(100i64, |points, t| {
                let Stimulus::Cgt { red, blue, .. } = t.stimulus else { panic!("cgt stimulus") };
                let Outcome::Points { coin_side: Some(coin), .. } = t.outcome else { panic!("cgt outcome") };
                let majority = if red > blue { Side::Red } else { Side::Blue };
                let stake = (95 * points + 50) / 100;
                if coin == majority {
                    points + stake
                } else {
                    points - stake
                }
            })
        })
        .sum()
}

fn cgt_eumax_expectation() -> Verdict {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut totals = Vec::new();
    let mut mismatched = 0;
    for i in 0..1000 {
        let (trials, score) = run(&AgentSpec::EuMax, Task::Cgt, derive_seed(MASTER, i));
        mismatched += usize::from(score != majority_bet_by_hand(&trials));
        totals.push(score as f64);
    }
    if mismatched > 0 {
        failures.push(format!("replay mismatch on {mismatched} seeds"));
    }
    let per_phase: f64 = [0.9, 0.8, 0.7, 0.6, 0.6, 0.7, 0.8, 0.9].iter().map(|q| 1.95 * q + 0.05 * (1.0 - q)).product();
    let expected = 8.0 * 100.0 * per_phase;
    let gap = mean(&totals) / expected - 1.0;
    let se = std_dev(&totals) / (totals.len() as f64).sqrt() / expected;
    if gap.abs() > 0.02 {
        failures.push(format!("mean within 2%: gap {:+.2}% (standard error {:.2}%)", 100.0 * gap, 100.0 * se));
    }
    let took = within(Duration::from_secs(60), start, &mut failures);
    let detail =
        format!("replay {}/1000 equal, mean {:.1} vs {expected:.1} in {took}", 1000 - mismatched, mean(&totals));
    verdict("cgt_eumax_expectation", failures, detail)
}

// ---- metrics ----

fn wcst_golden() -> Verdict {
    let mut failures = Vec::new();
    let mut cells = Vec::new();
    for (name, want) in [("wcst_20.jsonl", (2, 3, Some(9), 1)), ("wcst_64.jsonl", (6, 5, Some(10), 3))] {
        let path = format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
        let s = wcst_summary(&read_jsonl(&std::fs::read_to_string(path).unwrap()).unwrap(), 8).unwrap();
        let got = (s.perseverative_errors, s.nonperseverative_errors, s.trset1, s.fset);
        cells.push(format!("{name} {got:?}"));
        if got != want {
            failures.push(format!("{name}: {got:?} != {want:?}"));
        }
    }
    verdict("wcst_golden", failures, cells.join(", "))
}

// ---- model kernels ----

fn pvl(a: f64, c: f64, alpha: f64, lambda: f64) -> PvlParams {
    PvlParams { decay: a, consistency: c, shape: alpha, loss_aversion: lambda }
}

fn cum(c: f64, a: f64, rho: f64, g: f64) -> CumulativeParams {
    CumulativeParams { color_bias: c, distortion: a, risk_aversion: rho, bet_consistency: g }
}

fn slm(r: f64, p: f64, d: f64) -> SlmParams {
    SlmParams { reward_rate: r, punish_rate: p, focus: d }
}

fn random_item<R: Rng>(rng: &mut R) -> Item {
    let mut v = [0u8, 1, 2, 3];
    for i in (1..4).rev() {
        v.swap(i, rng.gen_range(0..=i));
    }
    Item { color: v[0], shape: v[1], number: v[2] }
}

fn random_session(task: Task, seed: u64) -> Vec<TrialRecord> {
    let mut engine = Engine::new(&TaskConfig::default_for(task), seed).unwrap();
    play(&mut engine, &mut RandomAgent, &mut seeded(seed ^ 0xabc)).unwrap()
}

fn normalization_failures() -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER);
    let ok = |p: &[f64]| p.iter().all(|q| q.is_finite() && *q >= 0.0) && (p.iter().sum::<f64>() - 1.0).abs() < 1e-9;
    let mut bad = 0;
    for _ in 0..10_000 {
        let e: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-200.0..200.0));
        let p = pvl(rng.gen(), rng.gen_range(0.0..=5.0), rng.gen_range(0.0..=2.0), rng.gen_range(0.0..=10.0));
        bad += usize::from(!ok(&pvl_choice_probs(&e, &p)));

        let cp = cum(rng.gen(), rng.gen_range(0.0..=5.0), rng.gen_range(0.0..10.0), rng.gen_range(0.0..50.0));
        let pr = prob_red(rng.gen_range(0.0..=1.0), &cp).unwrap();
        bad += usize::from(!ok(&[pr, 1.0 - pr]));
        bad += usize::from(!ok(&bet_probs(rng.gen(), rng.gen_range(0.0..5000.0), &default_levels(), &cp)));

        let w = [rng.gen::<f64>() + 1e-3, rng.gen::<f64>() + 1e-3, rng.gen::<f64>() + 1e-3];
        let s: f64 = w.iter().sum();
        let probs =
            slm_choice_probs(&random_item(&mut rng).match_matrix(), &w.map(|v| v / s), rng.gen_range(0.0..=5.0));
        bad += usize::from(!probs.is_ok_and(|p| ok(&p)));
    }
    bad
}

fn frequencies(
    agent: &mut dyn Agent,
    obs: &Observation,
    history: &[TrialRecord],
    index: impl Fn(Choice) -> usize,
    k: usize,
) -> Vec<f64> {
    let mut rng = seeded(MASTER);
    let mut counts = vec![0usize; k];
    for _ in 0..100_000 {
        counts[index(agent.decide(obs, history, &mut rng).unwrap().choice)] += 1;
    }
    counts.iter().map(|c| *c as f64 / 100_000.0).collect()
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Largest |simulated frequency - likelihood probability| over the three models.
fn frequency_gap() -> f64 {
    let p = pvl(0.7, 0.8, 0.9, 1.8);
    let history = random_session(Task::Igt, 31)[..25].to_vec();
    let freq = frequencies(
        &mut PvlAgent::new(p),
        &Observation::Igt { round: 26, cumulative: 0 },
        &history,
        |c| c.option().unwrap().index(),
        4,
    );
    let mut e = [0.0; 4];
    for t in &history {
        pvl_update(&mut e, t.choice.option().unwrap(), t.outcome.net().unwrap(), &p);
    }
    let want: Vec<f64> = pvl_log_probs(&e, &p).iter().map(|l| l.exp()).collect();
    let mut gap = max_gap(&freq, &want);

    let p = cum(0.6, 1.4, 0.8, 2.5);
    let levels: Vec<BetLevel> = default_levels().iter().map(|b| BetLevel::from_fraction(*b).unwrap()).collect();
    let obs = Observation::Cgt {
        round: 3,
        red: 7,
        blue: 3,
        phase: 1,
        round_in_phase: 3,
        phase_points: 140,
        total_banked: 0,
        bet_levels: levels.clone(),
    };
    let freq = frequencies(
        &mut CumulativeAgent::new(p),
        &obs,
        &[],
        |c| {
            let b = c.bet().unwrap();
            usize::from(b.side == Side::Blue) * 5 + levels.iter().position(|l| *l == b.bet).unwrap()
        },
        10,
    );
    let pr = prob_red(0.7, &p).unwrap();
    let want: Vec<f64> = [pr, 1.0 - pr]
        .into_iter()
        .flat_map(|ps| bet_probs(ps, 140.0, &default_levels(), &p).into_iter().map(move |q| ps * q))
        .collect();
    gap = gap.max(max_gap(&freq, &want));

    let p = slm(0.6, 0.3, 2.0);
    let history = random_session(Task::Wcst, 8)[..12].to_vec();
    let item = Item { color: 0, shape: 1, number: 2 };
    let obs = Observation::Wcst { round: 13, item, correct_so_far: 0 };
    let freq = frequencies(&mut SlmAgent::new(p), &obs, &history, |c| c.option().unwrap().index(), 4);
    let mut a = uniform_attention();
    for t in &history {
        let Stimulus::Wcst { item, .. } = t.stimulus else { unreachable!() };
        let row = item.match_matrix()[t.choice.option().unwrap().index()];
        a = slm_update(&a, &row, t.outcome.feedback().unwrap(), &p).unwrap();
    }
    let want: Vec<f64> = slm_log_probs(&item.match_matrix(), &a, p.focus).unwrap().iter().map(|l| l.exp()).collect();
    gap.max(max_gap(&freq, &want))
}

fn mean_loglik_gap(model: Model, truth: &[f64], other: &[f64]) -> f64 {
    let cfg = TaskConfig::default_for(model.task());
    let total: f64 = (0..200u64)
        .map(|seed| {
            let s = simulate(model, truth, &cfg, derive_seed(MASTER, seed)).unwrap();
            model.loglik(truth, &s).unwrap() - model.loglik(other, &s).unwrap()
        })
        .sum();
    total / 200.0
}

/// Largest departure from the local linear trend across a 1e-8 step on the unbounded scale.
fn largest_jump() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER);
    let mut worst: f64 = 0.0;
    for model in Model::ALL {
        for s in 0..10 {
            let session = random_session(model.task(), 100 + s);
            let z: Vec<f64> = (0..model.dim()).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let at = |zz: &[f64]| model.loglik(&model.from_unbounded(zz), &session).unwrap();
            let base = at(&z);
            for i in 0..model.dim() {
                let (mut up, mut down) = (z.clone(), z.clone());
                up[i] += 1e-8;
                down[i] -= 1e-8;
                worst = worst.max(((at(&up) - base) - (base - at(&down))).abs());
            }
        }
    }
    worst
}

fn model_kernels() -> Verdict {
    let start = Instant::now();
    let mut failures = Vec::new();
    let bad = normalization_failures();
    if bad > 0 {
        failures.push(format!("{bad} unnormalized distributions"));
    }
    let freq = frequency_gap();
    if freq > 0.01 {
        failures.push(format!("frequency gap {freq:.4}"));
    }
    let gaps = [
        mean_loglik_gap(Model::PvlDecay, &[0.8, 2.0, 0.7, 2.0], &[0.2, 2.0, 0.7, 2.0]),
        mean_loglik_gap(Model::Cumulative, &[0.5, 1.5, 0.5, 3.0], &[0.5, 1.5, 2.0, 3.0]),
        mean_loglik_gap(Model::Slm, &[0.8, 0.2, 3.0], &[0.2, 0.8, 3.0]),
    ];
    if gaps.iter().any(|g| *g <= 0.0) {
        failures.push(format!("dominance gaps {gaps:?}"));
    }
    let jump = largest_jump();
    if jump > 1e-6 {
        failures.push(format!("loglik jump {jump:.2e}"));
    }
    let took = within(Duration::from_secs(300), start, &mut failures);
    let detail = format!(
        "frequency gap {freq:.4}, dominance {:.2}/{:.2}/{:.2} nats, jump {jump:.1e} in {took}",
        gaps[0], gaps[1], gaps[2]
    );
    verdict("model_kernels", failures, detail)
}

fn threshold(model: Model, param: &str) -> Option<f64> {
    let t = match (model, param) {
        (Model::PvlDecay, "A") => 0.70,
        (Model::PvlDecay, "c") => 0.70,
        (Model::PvlDecay, "alpha") => 0.60,
        (Model::PvlDecay, "lambda") => 0.20,
        (Model::Cumulative, "c") => 0.85,
        (Model::Cumulative, "alpha") => 0.75,
        (Model::Cumulative, "gamma") => 0.60,
        (Model::Slm, "r") => 0.50,
        (Model::Slm, "p") => 0.75,
        (Model::Slm, "d") => 0.55,
        _ => return None,
    };
    Some(t)
}

fn parameter_recovery() -> Verdict {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut cells = Vec::new();
    for model in Model::ALL {
        let report = recovery_study(model, 50, MASTER).unwrap();
        for (name, r) in report.param_names.iter().zip(&report.correlations) {
            cells.push(format!("{model} {name} {r:.2}"));
            match threshold(model, name) {
                Some(t) if *r < t => failures.push(format!("{model} {name} {r:.3} < {t}")),
                None if !(model == Model::Cumulative && name == "rho") => {
                    failures.push(format!("{model} {name} has no threshold"))
                }
                _ => {}
            }
        }
    }
    let took = within(Duration::from_secs(600), start, &mut failures);
    verdict("parameter_recovery", failures, format!("{} in {took}", cells.join(", ")))
}

fn identified_data(model: Model) -> Vec<Vec<TrialRecord>> {
    let theta: &[f64] = match model {
        Model::PvlDecay => &[0.5, 1.0, 0.8, 1.5],
        Model::Cumulative => &[0.5, 1.5, 0.5, 3.0],
        Model::Slm => &[0.6, 0.3, 2.0],
    };
    let cfg = TaskConfig::default_for(model.task());
    (0..4).map(|s| simulate(model, theta, &cfg, 900 + s).unwrap()).collect()
}

fn mcmc_convergence() -> Verdict {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut cells = Vec::new();
    let mut planted = 0.0;
    for model in Model::ALL {
        let data = identified_data(model);
        let post = sample_posterior(model, &data, &McmcOptions { seed: MASTER, ..McmcOptions::default() }).unwrap();
        let worst = post.rhat.iter().cloned().fold(0.0, f64::max);
        cells.push(format!("{model} 4x2000 max {worst:.3}"));
        if worst >= 1.05 {
            failures.push(format!("{model} 4x2000 R-hat {:?}", post.rhat));
        }
        if model == Model::PvlDecay {
            // Shift one chain by three posterior standard deviations.
            let mut chains = post.param_chains(0);
            let sd = post.sd(0);
            chains[0].iter_mut().for_each(|v| *v += 3.0 * sd);
            planted = rhat(&chains).unwrap();
            if planted <= 1.1 {
                failures.push(format!("planted divergence R-hat {planted:.3}"));
            }
        }
        let long = McmcOptions { n_draws: 10_000, seed: MASTER + 1, ..McmcOptions::default() };
        let post = sample_posterior(model, &data, &long).unwrap();
        let worst = post.rhat.iter().cloned().fold(0.0, f64::max);
        cells.push(format!("4x10000 max {worst:.4}"));
        if worst >= 1.01 {
            failures.push(format!("{model} 4x10000 R-hat {:?}", post.rhat));
        }
    }
    let took = within(Duration::from_secs(900), start, &mut failures);
    verdict("mcmc_convergence", failures, format!("{}, planted {planted:.2} in {took}", cells.join(", ")))
}

// ---- statistics ----

fn statistics() -> Verdict {
    let mut failures = Vec::new();
    let mw = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
    if mw.statistic != 0.0 || (mw.p_value - 0.1).abs() > 1e-12 {
        failures.push(format!("Mann-Whitney U {} p {}", mw.statistic, mw.p_value));
    }
    let positive: Vec<f64> = (1..=10).map(f64::from).collect();
    let w = wilcoxon_signed_rank(&positive, 0.0).unwrap();
    if (w.p_value - 2.0 / 1024.0).abs() > 1e-12 {
        failures.push(format!("Wilcoxon p {}", w.p_value));
    }
    let z = two_proportion_z_props(388.0 / 1200.0, 120.0, 353.0 / 1200.0, 120.0).unwrap();
    let h = z.effect_size.unwrap_or(f64::NAN);
    if (z.statistic - 0.5).abs() >= 0.05 || (h - 0.063).abs() >= 0.0005 {
        failures.push(format!("deck preference Z {:.3} h {h:.4}", z.statistic));
    }
    let detail =
        format!("U {} p {:.3}; Wilcoxon p {:.5}; Z {:.2} h {h:.3}", mw.statistic, mw.p_value, w.p_value, z.statistic);
    verdict("statistics", failures, detail)
}

// ---- llm adapter ----

async fn legal_igt_reply(Json(body): Json<Value>) -> Response {
    let prompt = body["messages"][1]["content"].as_str().unwrap_or("");
    let k = prompt.len() % 4 + 1;
    let content = format!("<reasoning>prompt length {}</reasoning><choice>{k}</choice>", prompt.len());
    Json(json!({ "choices": [{ "index": 0, "message": { "role": "assistant", "content": content } }] })).into_response()
}

fn serve(router: Router) -> String {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(4).enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener).unwrap();
            axum::serve(listener, router).await.unwrap();
        });
    });
    format!("http://{addr}")
}

fn llm_adapter() -> Verdict {
    let mut failures = Vec::new();
    let base = serve(Router::new().route("/chat/completions", post(legal_igt_reply)));
    let client: Arc<dyn ChatBackend> = Arc::new(
        ChatClient::new(ChatEndpointConfig {
            max_in_flight: 16,
            backoff_ms: 5,
            timeout_secs: 5.0,
            ..ChatEndpointConfig::new(&base, "mock-model")
        })
        .unwrap(),
    );
    let cfg = TaskConfig::default_for(Task::Igt);
    let sessions: Vec<(usize, u32)> = (0..100u64)
        .into_par_iter()
        .map(|i| {
            let mut agent =
                LlmAgent::new(client.clone(), cfg.clone(), VariantSpec::baseline(), permute_options(i, 4)).unwrap();
            let mut engine = Engine::new(&cfg, derive_seed(MASTER, i)).unwrap();
            match play(&mut engine, &mut agent, &mut split(i, 1)) {
                Ok(trials) => (trials.iter().filter(|t| !t.forfeit).count(), agent.forfeits()),
                Err((trials, _)) => (trials.len(), u32::MAX),
            }
        })
        .collect();
    let complete = sessions.iter().filter(|(n, f)| *n == 80 && *f == 0).count();
    if complete != 100 {
        failures.push(format!("{complete}/100 sessions complete without forfeits"));
    }

    let levels: Vec<BetLevel> = [5, 25, 50, 75, 95].iter().map(|p| BetLevel::from_percent(*p).unwrap()).collect();
    let mut round_trips = 0;
    let mut broken = 0;
    for task in Task::ALL {
        let n = task.n_options();
        for shift in 0..2 * n as u64 {
            let perm = permute_options(shift, n);
            for k in 0..n {
                let position = perm.position_of(k);
                let label = if task == Task::Cgt { position } else { position + 1 };
                let text = format!("<reasoning>r</reasoning><choice>{label}</choice>");
                let want = match task {
                    Task::Cgt => Choice::Bet(cgt_option(k, &levels)),
                    _ => Choice::Option(OptionId::from_index(k).unwrap()),
                };
                round_trips += 1;
                broken += usize::from(parse_response(&text, task, &perm, &levels).map(|p| p.choice).ok() != Some(want));
            }
        }
    }
    if broken > 0 {
        failures.push(format!("{broken}/{round_trips} permutation round-trips broken"));
    }

    let grids: Vec<usize> = Task::ALL.iter().map(|t| generate_variants(*t).len()).collect();
    if grids != [19, 19, 15] {
        failures.push(format!("variant grids {grids:?}"));
    }
    let detail = format!(
        "{complete}/100 sessions without forfeits, {round_trips} round-trips, grids {}/{}/{}",
        grids[0], grids[1], grids[2]
    );
    verdict("llm_adapter", failures, detail)
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 10] = [
        ("engine_conservation", engine_conservation),
        ("anchors", anchors),
        ("benchmark_sanity", benchmark_sanity),
        ("cgt_eumax_expectation", cgt_eumax_expectation),
        ("wcst_golden", wcst_golden),
        ("model_kernels", model_kernels),
        ("parameter_recovery", parameter_recovery),
        ("mcmc_convergence", mcmc_convergence),
        ("statistics", statistics),
        ("llm_adapter", llm_adapter),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut unexpected = Vec::new();
    let (mut passed, mut failed) = (0, 0);
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let v = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| Verdict::Fail { detail: "panicked".into(), known: false });
        match v {
            Verdict::Pass(detail) => {
                passed += 1;
                println!("PASS {name}: {detail}");
            }
            Verdict::Fail { detail, known } => {
                failed += 1;
                let tag = if known { " [known]" } else { "" };
                println!("FAIL {name}{tag}: {detail}");
                if !known {
                    unexpected.push(name);
                }
            }
        }
    }
    println!("acceptance: {passed} passed, {failed} failed, {} unexpected", unexpected.len());
    if !unexpected.is_empty() {
        std::process::exit(1);
    }
}

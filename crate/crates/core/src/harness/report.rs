//! Per-group score summaries, pairwise rank tests and curve exports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::storage::write_atomic;
use super::{HarnessError, SessionRecord};
use crate::engine::{Outcome, Task, TaskConfig};
use crate::metrics::{cgt_summary, igt_summary, wcst_summary};
use crate::stats::{mann_whitney_u, mean, median, std_dev};

pub const WCST_BLOCK: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub group: String,
    pub session_id: String,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub group: String,
    pub metric: String,
    pub n: usize,
    pub median: f64,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestRow {
    pub group_a: String,
    pub group_b: String,
    pub metric: String,
    pub u: Option<f64>,
    pub p_value: Option<f64>,
    pub effect_size: Option<f64>,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub group: String,
    pub curve: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub task: Task,
    pub metric_names: Vec<String>,
    pub sessions: Vec<SessionMetrics>,
    pub summary: Vec<SummaryRow>,
    pub tests: Vec<TestRow>,
    pub curves: Vec<CurvePoint>,
    /// Sessions left out because they did not finish.
    pub incomplete: BTreeMap<String, usize>,
    pub forfeits: BTreeMap<String, u32>,
}

/// Group label: the agent id, plus the variant when there is one.
pub fn group_label(r: &SessionRecord) -> String {
    match &r.variant {
        Some(v) => format!("{}/{v}", r.agent),
        None => r.agent.clone(),
    }
}

/// Regroups records by [`group_label`].
pub fn group_records(records: impl IntoIterator<Item = SessionRecord>) -> Vec<(String, Vec<SessionRecord>)> {
    let mut groups: BTreeMap<String, Vec<SessionRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(group_label(&r)).or_default().push(r);
    }
    groups.into_iter().collect()
}

fn metric_names(task: Task) -> Vec<&'static str> {
    match task {
        Task::Igt => vec!["net_score", "final_points"],
        Task::Cgt => vec!["total_score", "overall_quality", "mean_bet"],
        Task::Wcst => {
            vec!["correct_total", "perseverative_errors", "nonperseverative_errors", "fset", "completed_sets"]
        }
    }
}

type Curves = Vec<(&'static str, f64, f64)>;

fn session_metrics(r: &SessionRecord) -> Result<(BTreeMap<String, f64>, Curves), HarnessError> {
    let mut m = BTreeMap::new();
    let mut curves = Vec::new();
    match &r.config {
        TaskConfig::Igt(_) => {
            let s = igt_summary(&r.trials)?;
            m.insert("net_score".into(), s.net_score);
            m.insert("final_points".into(), s.final_points as f64);
            for (i, y) in s.learning_curve.iter().enumerate() {
                curves.push(("advantageous_share_by_block", (i + 1) as f64, *y));
            }
        }
        TaskConfig::Cgt(_) => {
            let s = cgt_summary(&r.trials)?;
            m.insert("total_score".into(), s.total_score as f64);
            m.insert("overall_quality".into(), s.overall_quality);
            let bets: Vec<f64> = r.trials.iter().filter_map(|t| t.choice.bet()).map(|b| b.bet.fraction()).collect();
            m.insert("mean_bet".into(), mean(&bets));
            for (k, q) in &s.decision_quality {
                curves.push(("decision_quality_by_majority", f64::from(*k), *q));
            }
            for (k, b) in &s.risk_adjustment {
                if let Some(b) = b {
                    curves.push(("mean_bet_by_majority", f64::from(*k), *b));
                }
            }
        }
        TaskConfig::Wcst(c) => {
            let s = wcst_summary(&r.trials, c.set_length)?;
            m.insert("correct_total".into(), f64::from(s.correct_total));
            m.insert("perseverative_errors".into(), f64::from(s.perseverative_errors));
            m.insert("nonperseverative_errors".into(), f64::from(s.nonperseverative_errors));
            m.insert("fset".into(), f64::from(s.fset));
            m.insert("completed_sets".into(), f64::from(s.completed_sets));
            for (i, block) in r.trials.chunks(WCST_BLOCK).enumerate() {
                let correct = block
                    .iter()
                    .filter(|t| matches!(t.outcome, Outcome::Feedback { feedback: crate::engine::Feedback::Correct }))
                    .count();
                curves.push(("correct_share_by_block", (i + 1) as f64, correct as f64 / block.len() as f64));
            }
        }
    }
    Ok((m, curves))
}

/// Summarises complete sessions per group and compares every pair of groups.
pub fn build_report(groups: &[(String, Vec<SessionRecord>)]) -> Result<Report, HarnessError> {
    let task = groups
        .iter()
        .flat_map(|(_, rs)| rs.first())
        .map(SessionRecord::task)
        .next()
        .ok_or_else(|| HarnessError::Config("no sessions to report".into()))?;
    for (_, rs) in groups {
        if let Some(r) = rs.iter().find(|r| r.task() != task) {
            return Err(HarnessError::TaskMismatch { expected: task, found: r.task() });
        }
    }
    let names = metric_names(task);
    let mut sessions = Vec::new();
    let mut summary = Vec::new();
    let mut curves = Vec::new();
    let mut incomplete = BTreeMap::new();
    let mut forfeits = BTreeMap::new();
    let mut values: Vec<(String, BTreeMap<&str, Vec<f64>>)> = Vec::new();

    for (group, records) in groups {
        let done: Vec<&SessionRecord> = records.iter().filter(|r| r.complete).collect();
        if done.is_empty() {
            return Err(HarnessError::Config(format!("group '{group}' has no complete sessions")));
        }
        incomplete.insert(group.clone(), records.len() - done.len());
        forfeits.insert(group.clone(), records.iter().map(|r| r.forfeits).sum());
        let mut per_metric: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        let mut curve_acc: BTreeMap<(&str, i64), Vec<f64>> = BTreeMap::new();
        for r in &done {
            let (m, c) = session_metrics(r)?;
            for name in &names {
                per_metric.entry(name).or_default().push(m[*name]);
            }
            for (curve, x, y) in c {
                curve_acc.entry((curve, x as i64)).or_default().push(y);
            }
            sessions.push(SessionMetrics { group: group.clone(), session_id: r.session_id.clone(), metrics: m });
        }
        for name in &names {
            let v = &per_metric[name];
            summary.push(SummaryRow {
                group: group.clone(),
                metric: name.to_string(),
                n: v.len(),
                median: median(v),
                mean: mean(v),
                sd: if v.len() > 1 { std_dev(v) } else { f64::NAN },
            });
        }
        for ((curve, x), ys) in curve_acc {
            curves.push(CurvePoint { group: group.clone(), curve: curve.to_string(), x: x as f64, y: mean(&ys) });
        }
        values.push((group.clone(), per_metric));
    }

    let mut tests = Vec::new();
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            for name in &names {
                let (a, b) = (&values[i].1[name], &values[j].1[name]);
                let row = match mann_whitney_u(a, b) {
                    Ok(t) => TestRow {
                        group_a: values[i].0.clone(),
                        group_b: values[j].0.clone(),
                        metric: name.to_string(),
                        u: Some(t.statistic),
                        p_value: Some(t.p_value),
                        effect_size: t.effect_size,
                        note: format!("{:?}", t.method),
                    },
                    Err(e) => TestRow {
                        group_a: values[i].0.clone(),
                        group_b: values[j].0.clone(),
                        metric: name.to_string(),
                        u: None,
                        p_value: None,
                        effect_size: None,
                        note: e.to_string(),
                    },
                };
                tests.push(row);
            }
        }
    }

    Ok(Report {
        task,
        metric_names: names.iter().map(|s| s.to_string()).collect(),
        sessions,
        summary,
        tests,
        curves,
        incomplete,
        forfeits,
    })
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| HarnessError::Storage(e.to_string()))?;
    }
    w.into_inner().map_err(|e| HarnessError::Storage(e.to_string()))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

impl Report {
    /// One row per session: group, session id, then every metric.
    pub fn sessions_csv(&self) -> Result<Vec<u8>, HarnessError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["group".to_string(), "session_id".to_string()];
        header.extend(self.metric_names.iter().cloned());
        w.write_record(&header).map_err(|e| HarnessError::Storage(e.to_string()))?;
        for s in &self.sessions {
            let mut row = vec![s.group.clone(), s.session_id.clone()];
            row.extend(self.metric_names.iter().map(|m| s.metrics[m].to_string()));
            w.write_record(&row).map_err(|e| HarnessError::Storage(e.to_string()))?;
        }
        w.into_inner().map_err(|e| HarnessError::Storage(e.to_string()))
    }

    pub fn markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {} report\n", self.task.as_str().to_uppercase());
        let _ = writeln!(out, "| group | metric | n | median | mean | sd |");
        let _ = writeln!(out, "|---|---|---:|---:|---:|---:|");
        for r in &self.summary {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {:.4} | {:.4} | {:.4} |",
                r.group, r.metric, r.n, r.median, r.mean, r.sd
            );
        }
        if !self.tests.is_empty() {
            let _ = writeln!(out, "\n| group A | group B | metric | U | p | d | method |");
            let _ = writeln!(out, "|---|---|---|---:|---:|---:|---|");
            for t in &self.tests {
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} | {} | {} | {} |",
                    t.group_a,
                    t.group_b,
                    t.metric,
                    fmt_opt(t.u),
                    t.p_value.map_or_else(|| "-".to_string(), |p| format!("{p:.3e}")),
                    fmt_opt(t.effect_size),
                    t.note
                );
            }
        }
        let flagged: Vec<String> = self
            .incomplete
            .iter()
            .filter(|(_, n)| **n > 0)
            .map(|(g, n)| format!("{g}: {n} incomplete"))
            .chain(self.forfeits.iter().filter(|(_, n)| **n > 0).map(|(g, n)| format!("{g}: {n} forfeited rounds")))
            .collect();
        if !flagged.is_empty() {
            let _ = writeln!(out, "\nData quality: {}", flagged.join("; "));
        }
        out
    }
}

/// Writes sessions.csv, summary.csv, tests.csv, curves.csv and report.md into `dir`.
pub fn write_report(report: &Report, dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    write_atomic(&dir.join("sessions.csv"), &report.sessions_csv()?)?;
    write_atomic(&dir.join("summary.csv"), &csv_bytes(&report.summary)?)?;
    write_atomic(&dir.join("tests.csv"), &csv_bytes(&report.tests)?)?;
    write_atomic(&dir.join("curves.csv"), &csv_bytes(&report.curves)?)?;
    write_atomic(&dir.join("report.md"), report.markdown().as_bytes())
}

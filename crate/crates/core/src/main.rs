use std::fs;
use std::net::SocketAddr;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use cogharness::agents::AgentSpec;
use cogharness::cogfit::{fit_map, sample_posterior, McmcOptions, Model};
use cogharness::engine::Task;
use cogharness::harness::report::group_records;
use cogharness::harness::storage::load_trial_logs;
use cogharness::harness::{build_report, load_sessions, run_batch, write_report, BatchOptions, ExperimentConfig};
use cogharness::llm::generate_variants;
use cogharness::stats::{mann_whitney_u, median};

#[derive(Parser)]
#[command(name = "cogharness", version, about = "Decision-task harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Play a batch of sessions and store them under OUT/run-<id>/.
    Run {
        #[arg(long)]
        task: Task,
        /// ucb, egreedy[:eps], eumax, random, replay:<path> or llm[:model].
        #[arg(long)]
        agent: AgentSpec,
        #[arg(long, default_value_t = 1)]
        sessions: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Variant id for llm agents (see `variants list`).
        #[arg(long)]
        variant: Option<String>,
        /// Chat endpoint base URL; defaults to COGHARNESS_API_BASE.
        #[arg(long)]
        api_base: Option<String>,
        #[arg(long)]
        workers: Option<usize>,
        /// Full experiment config as JSON; other flags are ignored when given.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Fit a cognitive model to trial logs.
    Fit {
        #[arg(long)]
        model: Model,
        /// Glob of JSONL trial logs, one subject per file.
        #[arg(long)]
        input: String,
        /// Chains for the pooled posterior; 0 skips sampling.
        #[arg(long, default_value_t = 4)]
        chains: usize,
        #[arg(long, default_value_t = 2000)]
        draws: usize,
        #[arg(long, default_value_t = 1000)]
        warmup: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write fits as JSON here as well.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank statistics on CSV columns.
    Stats {
        #[command(subcommand)]
        command: StatsCommand,
    },
    /// Summaries, pairwise tests and curves for stored runs.
    Report {
        #[arg(long)]
        input: PathBuf,
        /// Defaults to INPUT/report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// HTTP session service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// LLM robustness variants.
    Variants {
        #[command(subcommand)]
        command: VariantsCommand,
    },
}

#[derive(Subcommand)]
enum StatsCommand {
    /// Mann-Whitney U between one column of two CSV files.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        column: String,
    },
}

#[derive(Subcommand)]
enum VariantsCommand {
    List {
        #[arg(long)]
        task: Task,
    },
}

fn read_column(path: &PathBuf, column: &str) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let idx = r
        .headers()?
        .iter()
        .position(|h| h == column)
        .with_context(|| format!("{} has no column '{column}'", path.display()))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let cell = rec.get(idx).unwrap_or("");
        out.push(cell.trim().parse().with_context(|| format!("{}: '{cell}' is not a number", path.display()))?);
    }
    Ok(out)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run { task, agent, sessions, seed, out, variant, api_base, workers, config } => {
            let config = match config {
                Some(path) => ExperimentConfig::from_json(&fs::read_to_string(&path)?)?,
                None => {
                    let mut c = ExperimentConfig::new(task, agent, sessions, seed, out);
                    c.variant = variant;
                    c.llm.base_url = api_base;
                    c
                }
            };
            let outcome = run_batch(&config, &BatchOptions { workers, backend: None })?;
            let failed = outcome.records.iter().filter(|r| !r.complete).count();
            let forfeits: u32 = outcome.records.iter().map(|r| r.forfeits).sum();
            println!("{}", outcome.run_dir.display());
            println!(
                "sessions: {} complete, {failed} incomplete, {forfeits} forfeited rounds",
                outcome.records.len() - failed
            );
        }
        Command::Fit { model, input, chains, draws, warmup, seed, out } => {
            let logs = load_trial_logs(&input)?;
            println!("file,{}", model.param_names().join(","));
            let mut fits = Vec::new();
            for (path, trials) in &logs {
                let fit = fit_map(model, std::slice::from_ref(trials))
                    .with_context(|| format!("fitting {}", path.display()))?;
                let est: Vec<String> = fit.estimate.iter().map(|v| format!("{v:.4}")).collect();
                println!("{},{}", path.display(), est.join(","));
                fits.push(fit);
            }
            let mut posterior = None;
            if chains > 0 {
                let sessions: Vec<_> = logs.iter().map(|(_, t)| t.clone()).collect();
                let opts =
                    McmcOptions { n_chains: chains, n_draws: draws, n_warmup: warmup, seed, ..Default::default() };
                let post = sample_posterior(model, &sessions, &opts)?;
                println!("\npooled posterior ({} subjects, {chains} x {draws} draws)", logs.len());
                println!("param,mean,sd,rhat");
                for (i, name) in post.param_names.iter().enumerate() {
                    println!("{name},{:.4},{:.4},{:.4}", post.mean(i), post.sd(i), post.rhat[i]);
                }
                posterior = Some(post);
            }
            if let Some(path) = out {
                let summary = serde_json::json!({
                    "map": fits,
                    "posterior": posterior.map(|p| serde_json::json!({
                        "param_names": p.param_names,
                        "mean": (0..p.param_names.len()).map(|i| p.mean(i)).collect::<Vec<_>>(),
                        "sd": (0..p.param_names.len()).map(|i| p.sd(i)).collect::<Vec<_>>(),
                        "rhat": p.rhat,
                        "acceptance": p.acceptance,
                    })),
                });
                fs::write(&path, serde_json::to_string_pretty(&summary)?)?;
            }
        }
        Command::Stats { command: StatsCommand::Compare { a, b, column } } => {
            let (x, y) = (read_column(&a, &column)?, read_column(&b, &column)?);
            let t = mann_whitney_u(&x, &y)?;
            println!("n_a={} n_b={} median_a={:.4} median_b={:.4}", x.len(), y.len(), median(&x), median(&y));
            println!("U={} p={:.6e} method={:?}", t.statistic, t.p_value, t.method);
            if let Some(d) = t.effect_size {
                println!("cohens_d={d:.4}");
            }
        }
        Command::Report { input, out } => {
            let runs = load_sessions(&input)?;
            let groups = group_records(runs.into_iter().flat_map(|(_, rs)| rs));
            let report = build_report(&groups)?;
            let dir = out.unwrap_or_else(|| input.join("report"));
            write_report(&report, &dir)?;
            print!("{}", report.markdown());
            println!("\nwritten to {}", dir.display());
        }
        Command::Serve { port, out, host } => {
            let addr: SocketAddr = format!("{host}:{port}").parse().context("bad host")?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(cogharness::harness::service::serve(addr, out))?;
        }
        Command::Variants { command: VariantsCommand::List { task } } => {
            let grid = generate_variants(task);
            if grid.is_empty() {
                bail!("no variants for {task}");
            }
            println!("id,temperature,scale,offset,context,persona");
            for v in grid {
                println!(
                    "{},{},{},{},{:?},{}",
                    v.id,
                    v.temperature,
                    v.score_transform.scale,
                    v.score_transform.offset,
                    v.context,
                    v.persona.map(|p| p.id).unwrap_or_default()
                );
            }
        }
    }
    Ok(())
}

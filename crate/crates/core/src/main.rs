use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use bco::bco::BcoRunRecord;
use bco::demos::{default_transition_cap, record_actionful_demos, scripted_expert, DemoSet};
use bco::harness::{self, ExperimentGrid, ResultRow, RunConfig};
use bco::model::Checkpoint;
use bco::policy::{evaluate_policy, Policy};
use bco::{env, rng_stream, Result};

#[derive(Parser)]
#[command(name = "bco", about = "Behavioral cloning from observation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single BCO run from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Seeded sweep over environments, demo counts and alphas.
    Grid {
        #[arg(long)]
        config: PathBuf,
        /// First seed of the sweep.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Record scripted-expert demonstrations.
    Demos {
        #[arg(long)]
        env: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Transitions kept per demonstration (defaults to the domain cap).
        #[arg(long)]
        cap: Option<usize>,
        /// Keep the expert's actions (for behavioral cloning).
        #[arg(long)]
        with_actions: bool,
    },
    /// Evaluate a saved policy checkpoint.
    Eval {
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        env: String,
        #[arg(long, default_value_t = 1000)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn iteration_rows(record: &BcoRunRecord, demos: usize, wall_ms: u64) -> Vec<ResultRow> {
    let cfg = &record.config;
    record
        .iterations
        .iter()
        .map(|it| ResultRow {
            env: cfg.env_name.clone(),
            alpha: cfg.alpha,
            demos,
            seed: cfg.seed.to_string(),
            iteration: it.iteration.to_string(),
            pre_interactions: it.pre_interactions,
            post_interactions_cum: Some(it.post_interactions_cum as f64),
            raw_return: Some(it.raw_return),
            scaled_return: Some(it.scaled_return),
            stderr: Some(it.probe_stderr),
            wall_ms,
        })
        .collect()
}

fn run(config: &Path, seed: Option<u64>, out_dir: &Path) -> Result<()> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let bco_cfg = cfg.bco_config()?;
    let demos = match &cfg.demo_path {
        Some(path) => DemoSet::load(path)?,
        None => harness::demos_for(&cfg.env_name, cfg.demos, cfg.seed)?,
    };
    let baselines = harness::env_baselines(&cfg.env_name, cfg.baseline_episodes, cfg.seed)?;
    let start = Instant::now();
    let outcome = harness::execute_run(&bco_cfg, &demos, &baselines, cfg.episodes_per_eval)?;
    let wall_ms = start.elapsed().as_millis() as u64;

    fs::create_dir_all(out_dir)?;
    write_json(&out_dir.join("record.json"), &outcome.record)?;
    write_json(
        &out_dir.join("policy.json"),
        &outcome.record.final_policy.to_checkpoint(),
    )?;
    write_json(
        &out_dir.join("model.json"),
        &outcome.record.final_model.to_checkpoint(),
    )?;
    let mut csv = csv::Writer::from_writer(File::create(out_dir.join("iterations.csv"))?);
    for row in iteration_rows(&outcome.record, demos.trajectories.len(), wall_ms) {
        csv.serialize(row)?;
    }
    csv.flush()?;

    println!(
        "{} alpha={} seed={}: {} iteration(s), {} post-demo interactions, return {:.3} (scaled {:.3})",
        cfg.env_name,
        cfg.alpha,
        cfg.seed,
        outcome.record.iterations.len(),
        outcome.record.post_interactions(),
        outcome.score.raw_mean,
        outcome.score.scaled
    );
    Ok(())
}

fn grid(config: &Path, seed: Option<u64>, out_dir: &Path) -> Result<()> {
    let mut grid = ExperimentGrid::load(config)?;
    if let Some(seed) = seed {
        grid.base_seed = seed;
    }
    fs::create_dir_all(out_dir)?;
    let out = BufWriter::new(File::create(out_dir.join("results.csv"))?);
    let report = harness::run_grid(&grid, out, Some(&out_dir.join("records")))?;
    for f in &report.failures {
        eprintln!(
            "run failed: env={} demos={} alpha={} seed={}: {}",
            f.env, f.demos, f.alpha, f.seed, f.message
        );
    }
    for row in report.rows.iter().filter(|r| r.is_aggregate()) {
        println!(
            "{} demos={} alpha={}: scaled {:.3} ± {:.3}",
            row.env,
            row.demos,
            row.alpha,
            row.scaled_return.unwrap_or(f64::NAN),
            row.stderr.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

fn demos(
    env_name: &str,
    n: usize,
    out: &Path,
    seed: u64,
    cap: Option<usize>,
    with_actions: bool,
) -> Result<()> {
    let env = env::make(env_name)?;
    let expert = scripted_expert(env_name)?;
    let cap = match cap {
        Some(c) => c,
        None => default_transition_cap(env_name)?,
    };
    let mut rng = rng_stream(seed, 0);
    let set = record_actionful_demos(&env, &expert, n, cap, &mut rng)?;
    if with_actions {
        set.save(out)
    } else {
        set.state_only().save(out)
    }
}

fn eval(policy: &Path, env_name: &str, episodes: usize, seed: u64) -> Result<()> {
    let ckpt: Checkpoint = serde_json::from_str(&fs::read_to_string(policy)?)?;
    let policy = Policy::from_checkpoint(&ckpt)?;
    let env = env::make(env_name)?;
    let stats = evaluate_policy(&env, &policy, episodes, &mut rng_stream(seed, 0))?;
    let baselines = harness::env_baselines(env_name, episodes, seed)?;
    println!(
        "mean return {:.3} ± {:.3} over {} episodes (scaled {:.3})",
        stats.mean_return,
        stats.stderr,
        stats.episodes,
        baselines.scale(stats.mean_return)
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run {
            config,
            seed,
            out_dir,
        } => run(config, *seed, out_dir),
        Command::Grid {
            config,
            seed,
            out_dir,
        } => grid(config, *seed, out_dir),
        Command::Demos {
            env,
            n,
            out,
            seed,
            cap,
            with_actions,
        } => demos(env, *n, out, *seed, *cap, *with_actions),
        Command::Eval {
            policy,
            env,
            episodes,
            seed,
        } => eval(policy, env, *episodes, *seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

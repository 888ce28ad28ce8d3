//! Score scaling, run/grid configuration, and seeded sweeps that emit CSV.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;
use std::{fs, io};

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bc::run_bc;
use crate::bco::{run_bco, streams, BcoConfig, BcoRunRecord};
use crate::demos::{
    default_transition_cap, record_demos, scripted_expert, ActionfulDemoSet, DemoSet,
};
use crate::env::{self, Actor, Environment, UniformRandom};
use crate::error::{Error, Result};
use crate::nn::HiddenLayer;
use crate::policy::{evaluate_actor, evaluate_policy, ActionMode, EvalStats, Policy};
use crate::rng_stream;
use crate::training::TrainConfig;

/// Mean returns of the uniform-random policy and the expert.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    pub random: f64,
    pub expert: f64,
}

impl Baselines {
    pub fn new(random: f64, expert: f64) -> Result<Self> {
        if !(random.is_finite() && expert.is_finite()) {
            return Err(Error::config("baselines must be finite"));
        }
        if expert <= random {
            return Err(Error::config(format!(
                "expert baseline {expert} does not exceed random baseline {random}"
            )));
        }
        Ok(Self { random, expert })
    }

    /// Affine map sending `random` to 0 and `expert` to 1.
    pub fn scale(&self, raw: f64) -> f64 {
        (raw - self.random) / (self.expert - self.random)
    }

    pub fn score(&self, raw_mean: f64) -> ScaledScore {
        ScaledScore {
            raw_mean,
            random_baseline: self.random,
            expert_baseline: self.expert,
            scaled: self.scale(raw_mean),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledScore {
    pub raw_mean: f64,
    pub random_baseline: f64,
    pub expert_baseline: f64,
    pub scaled: f64,
}

impl ScaledScore {
    pub fn new(raw_mean: f64, random_baseline: f64, expert_baseline: f64) -> Result<Self> {
        Ok(Baselines::new(random_baseline, expert_baseline)?.score(raw_mean))
    }
}

/// Mean returns of a uniform-random policy and `expert` over `n_episodes`
/// seeded episodes each.
pub fn compute_baselines(
    env: &Arc<dyn Environment>,
    expert: &dyn Actor,
    n_episodes: usize,
    rng: &mut dyn RngCore,
) -> Result<Baselines> {
    let random = UniformRandom(env.descriptor().action_space.clone());
    let r = evaluate_actor(env, &random, n_episodes, rng)?.mean_return;
    let e = evaluate_actor(env, expert, n_episodes, rng)?.mean_return;
    Baselines::new(r, e)
}

/// Baselines for a named environment using its scripted expert.
pub fn env_baselines(env_name: &str, n_episodes: usize, seed: u64) -> Result<Baselines> {
    let env = env::make(env_name)?;
    let expert = scripted_expert(env_name)?;
    compute_baselines(
        &env,
        &expert,
        n_episodes,
        &mut rng_stream(seed, streams::BASELINE),
    )
}

/// `n` state-only expert demonstrations at the domain's transition cap.
pub fn demos_for(env_name: &str, n: usize, seed: u64) -> Result<DemoSet> {
    let env = env::make(env_name)?;
    let expert = scripted_expert(env_name)?;
    let cap = default_transition_cap(env_name)?;
    record_demos(&env, &expert, n, cap, &mut rng_stream(seed, streams::DEMOS))
}

/// Optional replacements for the per-domain defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pre_interactions: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub improvement_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_episodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post_collection_mode: Option<ActionMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_hidden: Option<Vec<HiddenLayer>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy_hidden: Option<Vec<HiddenLayer>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_train: Option<TrainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy_train: Option<TrainConfig>,
}

impl Overrides {
    pub fn config_for(&self, env_name: &str, alpha: f64, seed: u64) -> Result<BcoConfig> {
        let mut cfg = BcoConfig::for_env(env_name)?;
        cfg.alpha = alpha;
        cfg.seed = seed;
        if let Some(v) = self.pre_interactions {
            cfg.pre_interactions = v;
        }
        if let Some(v) = self.max_iterations {
            cfg.max_iterations = v;
        }
        if let Some(v) = self.improvement_tolerance {
            cfg.improvement_tolerance = v;
        }
        if let Some(v) = self.probe_episodes {
            cfg.probe_episodes = v;
        }
        if let Some(v) = self.post_collection_mode {
            cfg.post_collection_mode = v;
        }
        if let Some(v) = &self.model_hidden {
            cfg.model_hidden = v.clone();
        }
        if let Some(v) = &self.policy_hidden {
            cfg.policy_hidden = v.clone();
        }
        if let Some(v) = &self.model_train {
            cfg.model_train = *v;
        }
        if let Some(v) = &self.policy_train {
            cfg.policy_train = *v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn default_demos() -> usize {
    10
}

fn default_episodes() -> usize {
    1000
}

/// A single BCO run as read from a JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub env_name: String,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default = "default_demos")]
    pub demos: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_episodes")]
    pub episodes_per_eval: usize,
    #[serde(default = "default_episodes")]
    pub baseline_episodes: usize,
    /// Load demonstrations from here instead of recording them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demo_path: Option<PathBuf>,
    #[serde(flatten)]
    pub overrides: Overrides,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn bco_config(&self) -> Result<BcoConfig> {
        self.overrides
            .config_for(&self.env_name, self.alpha, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub envs: Vec<String>,
    pub demo_counts: Vec<usize>,
    pub alphas: Vec<f64>,
    pub n_seeds: usize,
    #[serde(default = "default_episodes")]
    pub episodes_per_eval: usize,
    #[serde(default = "default_episodes")]
    pub baseline_episodes: usize,
    /// Runs use seeds `base_seed .. base_seed + n_seeds`.
    #[serde(default)]
    pub base_seed: u64,
    #[serde(flatten)]
    pub overrides: Overrides,
}

impl ExperimentGrid {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_seeds == 0 {
            return Err(Error::config("n_seeds must be >= 1"));
        }
        if self.envs.is_empty() || self.demo_counts.is_empty() || self.alphas.is_empty() {
            return Err(Error::config(
                "envs, demo_counts and alphas must be nonempty",
            ));
        }
        if self.episodes_per_eval == 0 || self.baseline_episodes == 0 {
            return Err(Error::config("episode counts must be >= 1"));
        }
        if self.demo_counts.contains(&0) {
            return Err(Error::config("demo counts must be >= 1"));
        }
        for name in &self.envs {
            for &alpha in &self.alphas {
                self.overrides.config_for(name, alpha, self.base_seed)?;
            }
        }
        Ok(())
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.n_seeds as u64).map(move |i| self.base_seed + i)
    }
}

/// A finished run: the driver's record plus the final evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub record: BcoRunRecord,
    pub eval: EvalStats,
    pub score: ScaledScore,
}

/// Runs BCO, then evaluates the final policy over `episodes_per_eval`
/// episodes drawn from the run's own evaluation stream.
pub fn execute_run(
    config: &BcoConfig,
    demos: &DemoSet,
    baselines: &Baselines,
    episodes_per_eval: usize,
) -> Result<RunOutcome> {
    let record = run_bco(config, demos, baselines)?;
    let env = env::make(&config.env_name)?;
    let mut rng = rng_stream(config.seed, streams::EVAL);
    let eval = evaluate_policy(&env, &record.final_policy, episodes_per_eval, &mut rng)?;
    let score = baselines.score(eval.mean_return);
    Ok(RunOutcome {
        record,
        eval,
        score,
    })
}

/// Behavioral cloning on `demos` with the domain's policy network, scored
/// like a BCO run.
pub fn execute_bc(
    demos: &ActionfulDemoSet,
    baselines: &Baselines,
    episodes_per_eval: usize,
    seed: u64,
) -> Result<(Policy, EvalStats, ScaledScore)> {
    let cfg = BcoConfig::for_env(&demos.env_name)?;
    let mut rng = rng_stream(seed, streams::FIT);
    let (policy, _) = run_bc(demos, &cfg.policy_hidden, &cfg.policy_train, &mut rng)?;
    let env = env::make(&demos.env_name)?;
    let eval = evaluate_policy(
        &env,
        &policy,
        episodes_per_eval,
        &mut rng_stream(seed, streams::EVAL),
    )?;
    let score = baselines.score(eval.mean_return);
    Ok((policy, eval, score))
}

/// Seed label used on aggregate rows.
pub const AGGREGATE_SEED: &str = "all";
/// Iteration label used on rows of failed runs.
pub const FAILED: &str = "failed";

/// One CSV line. Run rows carry the index of the final iteration (equal to
/// the number of post-demonstration phases); aggregate rows average the
/// successful runs of a cell and report the standard error of the scaled
/// return across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub env: String,
    pub alpha: f64,
    pub demos: usize,
    pub seed: String,
    pub iteration: String,
    pub pre_interactions: u64,
    pub post_interactions_cum: Option<f64>,
    pub raw_return: Option<f64>,
    pub scaled_return: Option<f64>,
    pub stderr: Option<f64>,
    pub wall_ms: u64,
}

impl ResultRow {
    pub fn is_aggregate(&self) -> bool {
        self.seed == AGGREGATE_SEED
    }

    pub fn is_failed(&self) -> bool {
        self.iteration == FAILED
    }
}

/// Mean and standard error across seeds of the successful run rows.
pub fn aggregate_row(runs: &[ResultRow]) -> Option<ResultRow> {
    let first = runs.first()?;
    let ok: Vec<&ResultRow> = runs.iter().filter(|r| !r.is_failed()).collect();
    let mean = |f: &dyn Fn(&ResultRow) -> Option<f64>| -> Option<f64> {
        if ok.is_empty() {
            return None;
        }
        Some(ok.iter().map(|r| f(r).unwrap_or(f64::NAN)).sum::<f64>() / ok.len() as f64)
    };
    let scaled_mean = mean(&|r| r.scaled_return);
    let stderr = scaled_mean.map(|m| {
        let n = ok.len() as f64;
        if ok.len() < 2 {
            return 0.0;
        }
        let var = ok
            .iter()
            .map(|r| (r.scaled_return.unwrap_or(f64::NAN) - m).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        (var / n).sqrt()
    });
    Some(ResultRow {
        env: first.env.clone(),
        alpha: first.alpha,
        demos: first.demos,
        seed: AGGREGATE_SEED.to_owned(),
        iteration: String::new(),
        pre_interactions: first.pre_interactions,
        post_interactions_cum: mean(&|r| r.post_interactions_cum),
        raw_return: mean(&|r| r.raw_return),
        scaled_return: scaled_mean,
        stderr,
        wall_ms: runs.iter().map(|r| r.wall_ms).sum(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub env: String,
    pub alpha: f64,
    pub demos: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct GridReport {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<RunFailure>,
}

fn record_file_name(env: &str, demos: usize, alpha: f64, seed: u64) -> String {
    format!("{env}_d{demos}_a{alpha}_s{seed}.json")
}

/// Runs every `(env, demos, alpha, seed)` cell of the grid. Seeds of a cell
/// run in parallel; each cell's rows and its aggregate row are appended and
/// flushed before the next cell starts. A failing run becomes a failed row
/// and the sweep carries on. When `records_dir` is given, each successful
/// run's record is written there as JSON.
pub fn run_grid<W: Write>(
    grid: &ExperimentGrid,
    out: W,
    records_dir: Option<&Path>,
) -> Result<GridReport> {
    grid.validate()?;
    if let Some(dir) = records_dir {
        fs::create_dir_all(dir)?;
    }
    let mut writer = csv::Writer::from_writer(out);
    let mut report = GridReport::default();
    let seeds: Vec<u64> = grid.seeds().collect();

    for env_name in &grid.envs {
        let baselines = env_baselines(env_name, grid.baseline_episodes, grid.base_seed)
            .map_err(|e| e.to_string());
        for &demos in &grid.demo_counts {
            for &alpha in &grid.alphas {
                let results: Vec<(u64, std::result::Result<RunOutcome, String>, u64)> = seeds
                    .par_iter()
                    .map(|&seed| {
                        let start = Instant::now();
                        let outcome = baselines.clone().and_then(|b| {
                            let run = || -> Result<RunOutcome> {
                                let cfg = grid.overrides.config_for(env_name, alpha, seed)?;
                                let demo_set = demos_for(env_name, demos, seed)?;
                                execute_run(&cfg, &demo_set, &b, grid.episodes_per_eval)
                            };
                            run().map_err(|e| e.to_string())
                        });
                        (seed, outcome, start.elapsed().as_millis() as u64)
                    })
                    .collect();

                let pre = grid
                    .overrides
                    .config_for(env_name, alpha, grid.base_seed)?
                    .pre_interactions;
                let mut rows = Vec::with_capacity(results.len());
                for (seed, outcome, wall_ms) in results {
                    let row = match outcome {
                        Ok(run) => {
                            if let Some(dir) = records_dir {
                                let path = dir.join(record_file_name(env_name, demos, alpha, seed));
                                fs::write(path, serde_json::to_string_pretty(&run.record)?)?;
                            }
                            ResultRow {
                                env: env_name.clone(),
                                alpha,
                                demos,
                                seed: seed.to_string(),
                                iteration: run.record.post_phases().to_string(),
                                pre_interactions: pre,
                                post_interactions_cum: Some(run.record.post_interactions() as f64),
                                raw_return: Some(run.score.raw_mean),
                                scaled_return: Some(run.score.scaled),
                                stderr: Some(
                                    run.eval.stderr
                                        / (run.score.expert_baseline - run.score.random_baseline),
                                ),
                                wall_ms,
                            }
                        }
                        Err(message) => {
                            report.failures.push(RunFailure {
                                env: env_name.clone(),
                                alpha,
                                demos,
                                seed,
                                message,
                            });
                            ResultRow {
                                env: env_name.clone(),
                                alpha,
                                demos,
                                seed: seed.to_string(),
                                iteration: FAILED.to_owned(),
                                pre_interactions: pre,
                                post_interactions_cum: None,
                                raw_return: None,
                                scaled_return: None,
                                stderr: None,
                                wall_ms,
                            }
                        }
                    };
                    writer.serialize(&row)?;
                    rows.push(row);
                }
                if let Some(agg) = aggregate_row(&rows) {
                    writer.serialize(&agg)?;
                    rows.push(agg);
                }
                writer.flush()?;
                report.rows.extend(rows);
            }
        }
    }
    Ok(report)
}

/// Reads rows written by [`run_grid`].
pub fn read_rows<R: io::Read>(input: R) -> Result<Vec<ResultRow>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaling_endpoints() {
        let b = Baselines::new(20.0, 200.0).unwrap();
        assert_eq!(b.scale(20.0), 0.0);
        assert_eq!(b.scale(200.0), 1.0);
        assert!((b.scale(110.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn inverted_baselines_are_config_errors() {
        assert!(matches!(Baselines::new(1.0, 1.0), Err(Error::Config(_))));
        assert!(matches!(
            ScaledScore::new(0.0, 2.0, 1.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn chainworld_baselines_are_ordered() {
        let b = env_baselines("chainworld", 200, 0).unwrap();
        assert_eq!(b.expert, -4.0);
        assert!(b.random < b.expert);
    }

    #[test]
    fn expert_scales_to_one_random_to_zero() {
        let env = env::make("cartpole").unwrap();
        let expert = scripted_expert("cartpole").unwrap();
        let b = compute_baselines(&env, &expert, 50, &mut rng_stream(1, 0)).unwrap();
        assert_eq!(b.scale(b.expert), 1.0);
        assert_eq!(b.scale(b.random), 0.0);
    }

    fn row(seed: u64, scaled: Option<f64>) -> ResultRow {
        ResultRow {
            env: "chainworld".into(),
            alpha: 0.0,
            demos: 1,
            seed: seed.to_string(),
            iteration: if scaled.is_some() {
                "0".into()
            } else {
                FAILED.into()
            },
            pre_interactions: 10,
            post_interactions_cum: scaled.map(|_| 0.0),
            raw_return: scaled,
            scaled_return: scaled,
            stderr: scaled.map(|_| 0.0),
            wall_ms: 1,
        }
    }

    #[test]
    fn aggregate_skips_failed_rows() {
        let agg = aggregate_row(&[row(0, Some(1.0)), row(1, None), row(2, Some(0.0))]).unwrap();
        assert_eq!(agg.scaled_return, Some(0.5));
        assert!((agg.stderr.unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(agg.wall_ms, 3);
        assert!(agg.is_aggregate());
        let none = aggregate_row(&[row(0, None)]).unwrap();
        assert_eq!(none.scaled_return, None);
    }

    #[test]
    fn grid_validation() {
        let mut grid = ExperimentGrid {
            envs: vec!["chainworld".into()],
            demo_counts: vec![1],
            alphas: vec![0.0],
            n_seeds: 1,
            episodes_per_eval: 10,
            baseline_episodes: 10,
            base_seed: 0,
            overrides: Overrides::default(),
        };
        grid.validate().unwrap();
        grid.n_seeds = 0;
        assert!(grid.validate().is_err());
        grid.n_seeds = 1;
        grid.envs.push("ant".into());
        assert!(grid.validate().is_err());
    }

    #[test]
    fn run_config_defaults_from_json() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"env_name": "mountaincar", "alpha": 0.01}"#).unwrap();
        assert_eq!(cfg.demos, 10);
        let bco = cfg.bco_config().unwrap();
        assert_eq!(bco.pre_interactions, 2000);
        assert_eq!(bco.post_budget(), 20);
        let cfg: RunConfig =
            serde_json::from_str(r#"{"env_name": "cartpole", "pre_interactions": 50}"#).unwrap();
        assert_eq!(cfg.bco_config().unwrap().pre_interactions, 50);
    }
}

//! The BCO(α) loop: learn an inverse model from the agent's own
//! interactions, label the demonstrations with it, clone a policy, and
//! optionally keep improving both with `round(α · |I_pre|)` extra
//! interactions per iteration.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::demos::DemoSet;
use crate::env::{self, Actor, EnvSession, Environment, UniformRandom};
use crate::error::{Error, Result};
use crate::harness::Baselines;
use crate::inverse::{
    collect_interactions, fit_inverse_model, infer_actions, InteractionBuffer, InverseModel,
};
use crate::nn::{HiddenLayer, MlpSpec};
use crate::policy::{cloning_examples, evaluate_policy, fit_policy, ActionMode, Policy};
use crate::rng_stream;
use crate::training::TrainConfig;

/// RNG stream ids; each concern draws from its own stream so that, e.g.,
/// changing α never perturbs the first iteration.
pub(crate) mod streams {
    pub const INIT: u64 = 1;
    pub const EXPLORE: u64 = 2;
    pub const FIT: u64 = 3;
    pub const PROBE: u64 = 4;
    pub const EVAL: u64 = 5;
    pub const DEMOS: u64 = 6;
    pub const BASELINE: u64 = 7;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcoConfig {
    pub env_name: String,
    pub alpha: f64,
    pub pre_interactions: u64,
    /// Cap on post-demonstration improvement iterations.
    pub max_iterations: usize,
    pub improvement_tolerance: f64,
    pub seed: u64,
    pub model_hidden: Vec<HiddenLayer>,
    pub policy_hidden: Vec<HiddenLayer>,
    pub model_train: TrainConfig,
    pub policy_train: TrainConfig,
    /// Episodes in the scaled-return probe that drives the stopping rule.
    pub probe_episodes: usize,
    /// How the cloned policy picks actions while collecting post-demo data.
    pub post_collection_mode: ActionMode,
}

impl BcoConfig {
    /// Per-domain defaults: linear models on CartPole, 2×8 LReLU on
    /// MountainCar, 2×100 / 2×32 LReLU on the reacher.
    pub fn for_env(env_name: &str) -> Result<Self> {
        let lrelu = |w, d| MlpSpec::lrelu(1, w, d, 1).hidden_layers;
        let (pre, model_hidden, policy_hidden, model_lr, policy_lr) = match env_name {
            "cartpole" => (1000, Vec::new(), Vec::new(), 1e-3, 1e-3),
            "mountaincar" => (2000, lrelu(8, 2), lrelu(8, 2), 1e-3, 1e-3),
            "reacher2d" => (5000, lrelu(100, 2), lrelu(32, 2), 1e-3, 1e-3),
            "chainworld" => (500, lrelu(16, 1), lrelu(16, 1), 1e-3, 1e-3),
            other => return Err(Error::config(format!("unknown environment {other:?}"))),
        };
        let train = |lr| TrainConfig {
            adam: crate::nn::AdamConfig {
                learning_rate: lr,
                ..Default::default()
            },
            ..TrainConfig::default()
        };
        Ok(Self {
            env_name: env_name.to_owned(),
            alpha: 0.0,
            pre_interactions: pre,
            max_iterations: 50,
            improvement_tolerance: 0.01,
            seed: 0,
            model_hidden,
            policy_hidden,
            model_train: train(model_lr),
            policy_train: train(policy_lr),
            probe_episodes: 100,
            post_collection_mode: ActionMode::Sample,
        })
    }

    /// Post-demonstration interactions per improvement iteration.
    pub fn post_budget(&self) -> u64 {
        post_budget(self.alpha, self.pre_interactions)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::config("alpha must be a finite value >= 0"));
        }
        if self.pre_interactions == 0 {
            return Err(Error::config("pre_interactions must be >= 1"));
        }
        if self.probe_episodes == 0 {
            return Err(Error::config("probe_episodes must be >= 1"));
        }
        self.model_train.validate()?;
        self.policy_train.validate()?;
        env::make(&self.env_name).map(|_| ())
    }
}

/// `round(α · |I_pre|)`.
pub fn post_budget(alpha: f64, pre_interactions: u64) -> u64 {
    (alpha * pre_interactions as f64).round() as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub pre_interactions: u64,
    pub post_interactions_cum: u64,
    pub model_validation_loss: f64,
    pub policy_validation_loss: f64,
    pub raw_return: f64,
    pub scaled_return: f64,
    pub probe_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcoRunRecord {
    pub config: BcoConfig,
    pub iterations: Vec<IterationRecord>,
    /// Iteration whose policy had the best probe score; its policy and
    /// model are the final ones.
    pub best_iteration: usize,
    /// Environment steps taken by the driver after the demonstrations
    /// became available, counted by the session itself.
    pub env_steps_after_demos: u64,
    pub final_policy: Policy,
    pub final_model: InverseModel,
}

impl BcoRunRecord {
    pub fn post_interactions(&self) -> u64 {
        self.iterations
            .last()
            .map_or(0, |r| r.post_interactions_cum)
    }

    /// Completed post-demonstration collection phases.
    pub fn post_phases(&self) -> usize {
        self.iterations.len().saturating_sub(1)
    }
}

/// Continue while the latest probe score beats every earlier one by more
/// than `tolerance` and fewer than `max_iterations` improvement
/// iterations have run. A lone first iteration always continues.
pub fn improvement_criterion(
    iterations: &[IterationRecord],
    tolerance: f64,
    max_iterations: usize,
) -> bool {
    let Some((latest, prior)) = iterations.split_last() else {
        return false;
    };
    if prior.len() >= max_iterations {
        return false;
    }
    let best_prior = prior
        .iter()
        .map(|r| r.scaled_return)
        .fold(f64::NEG_INFINITY, f64::max);
    latest.scaled_return > best_prior + tolerance
}

/// Runs BCO(α) on `demos`. `baselines` fixes the random/expert returns used
/// to scale the probe scores that drive the stopping rule.
pub fn run_bco(config: &BcoConfig, demos: &DemoSet, baselines: &Baselines) -> Result<BcoRunRecord> {
    run_bco_on(env::make(&config.env_name)?, config, demos, baselines)
}

/// [`run_bco`] with the learner's interactions going through `env`. Probe
/// rollouts use a separate instance and never touch `env`.
pub fn run_bco_on(
    env: Arc<dyn Environment>,
    config: &BcoConfig,
    demos: &DemoSet,
    baselines: &Baselines,
) -> Result<BcoRunRecord> {
    config.validate()?;
    if env.descriptor().name != config.env_name {
        return Err(Error::config(format!(
            "environment {:?} given for a {:?} run",
            env.descriptor().name,
            config.env_name
        )));
    }
    let probe_env = env::make(&config.env_name)?;
    if demos.env_name != config.env_name {
        return Err(Error::config(format!(
            "demonstrations are from {:?} but the run targets {:?}",
            demos.env_name, config.env_name
        )));
    }
    let desc = env.descriptor().clone();
    demos.validate(desc.state_dim)?;

    let mut init_rng = rng_stream(config.seed, streams::INIT);
    let mut explore_rng = rng_stream(config.seed, streams::EXPLORE);
    let mut fit_rng = rng_stream(config.seed, streams::FIT);
    let mut probe_rng = rng_stream(config.seed, streams::PROBE);

    let mut model = InverseModel::new(&desc, &config.model_hidden, &mut init_rng)?;
    let mut policy = Policy::new(&desc, &config.policy_hidden, &mut init_rng)?;
    let random = UniformRandom(desc.action_space.clone());

    let mut session = EnvSession::new(env.clone());
    let mut buffer = InteractionBuffer::new();
    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut best: Option<(usize, f64, Policy, InverseModel)> = None;
    let post_budget = config.post_budget();
    let mut steps_at_demos = 0;

    loop {
        let iteration = iterations.len();
        if iteration == 0 {
            collect_interactions(
                &mut session,
                &random,
                config.pre_interactions,
                &mut buffer,
                &mut explore_rng,
            )?;
            steps_at_demos = session.total_steps();
        } else {
            let actor = policy.actor(config.post_collection_mode);
            collect_interactions(
                &mut session,
                &actor as &dyn Actor,
                post_budget,
                &mut buffer,
                &mut explore_rng,
            )?;
        }

        let model_report =
            fit_inverse_model(&buffer, &mut model, &config.model_train, &mut fit_rng)?;
        let labels = infer_actions(&model, demos, env.as_ref())?;
        let examples = cloning_examples(demos, &labels)?;
        let policy_report = fit_policy(examples, &mut policy, &config.policy_train, &mut fit_rng)?;

        let probe = evaluate_policy(&probe_env, &policy, config.probe_episodes, &mut probe_rng)?;
        let scaled = baselines.scale(probe.mean_return);
        iterations.push(IterationRecord {
            iteration,
            pre_interactions: config.pre_interactions,
            post_interactions_cum: buffer.interaction_count - config.pre_interactions,
            model_validation_loss: model_report.best_validation_loss,
            policy_validation_loss: policy_report.best_validation_loss,
            raw_return: probe.mean_return,
            scaled_return: scaled,
            probe_stderr: probe.stderr,
        });
        if best.as_ref().is_none_or(|(_, s, _, _)| scaled > *s) {
            best = Some((iteration, scaled, policy.clone(), model.clone()));
        }

        if post_budget == 0
            || !improvement_criterion(
                &iterations,
                config.improvement_tolerance,
                config.max_iterations,
            )
        {
            break;
        }
    }

    let (best_iteration, _, final_policy, final_model) = best.expect("at least one iteration ran");
    Ok(BcoRunRecord {
        config: config.clone(),
        iterations,
        best_iteration,
        env_steps_after_demos: session.total_steps() - steps_at_demos,
        final_policy,
        final_model,
    })
}

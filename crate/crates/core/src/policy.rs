//! The imitation policy `π(a | s)` over the full state, its cloning fit,
//! and evaluation rollouts.

use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demos::DemoSet;
use crate::env::{run_episode, Action, Actor, EnvDescriptor, Environment};
use crate::error::{Error, Result};
use crate::model::{Checkpoint, ConditionalModel};
use crate::nn::HiddenLayer;
use crate::training::{early_stop_train, split_70_30, Examples, TrainConfig, TrainReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ActionMode {
    /// Argmax for discrete heads, clipped mean for Gaussian heads.
    #[default]
    Mode,
    /// Draw from the head distribution.
    Sample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub model: ConditionalModel,
    pub state_dim: usize,
}

impl Policy {
    pub fn new(
        desc: &EnvDescriptor,
        hidden: &[HiddenLayer],
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        Ok(Self {
            model: ConditionalModel::init(desc.state_dim, hidden, &desc.action_space, rng)?,
            state_dim: desc.state_dim,
        })
    }

    pub fn act(&self, state: &[f64], mode: ActionMode, rng: &mut dyn RngCore) -> Result<Action> {
        if state.len() != self.state_dim {
            return Err(Error::input(format!(
                "policy expects states of length {}, got {}",
                self.state_dim,
                state.len()
            )));
        }
        match mode {
            ActionMode::Mode => self.model.mode(state),
            ActionMode::Sample => self.model.sample(state, rng),
        }
    }

    /// Borrowed view that acts with a fixed selection mode.
    pub fn actor(&self, mode: ActionMode) -> PolicyActor<'_> {
        PolicyActor { policy: self, mode }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        self.model.to_checkpoint("policy")
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let model = ConditionalModel::from_checkpoint(ckpt)?;
        Ok(Self {
            state_dim: model.input_dim(),
            model,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PolicyActor<'a> {
    pub policy: &'a Policy,
    pub mode: ActionMode,
}

impl Actor for PolicyActor<'_> {
    fn act(&self, state: &[f64], rng: &mut dyn RngCore) -> Result<Action> {
        self.policy.act(state, self.mode, rng)
    }
}

/// Cloning pairs `(s_i, a_i)`: the first N states of each trajectory with
/// its N actions. Both behavioral cloning and its observation-only variant
/// build their training set here.
pub fn cloning_examples(demos: &DemoSet, actions: &[Vec<Action>]) -> Result<Examples> {
    if demos.trajectories.len() != actions.len() {
        return Err(Error::input("one action list per trajectory is required"));
    }
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for (traj, acts) in demos.trajectories.iter().zip(actions) {
        if acts.len() != traj.num_transitions() {
            return Err(Error::input(
                "each trajectory needs one action per transition",
            ));
        }
        inputs.extend(traj.states.iter().take(acts.len()).cloned());
        targets.extend(acts.iter().cloned());
    }
    Examples::new(inputs, targets)
}

/// Maximum-likelihood cloning of `(state, action)` pairs with the 70/30
/// early-stopping protocol; warm-starts from the current parameters.
pub fn fit_policy(
    examples: Examples,
    policy: &mut Policy,
    config: &TrainConfig,
    rng: &mut dyn RngCore,
) -> Result<TrainReport> {
    if examples.is_empty() {
        return Err(Error::input("no state-action pairs to clone"));
    }
    if let Some(bad) = examples.inputs.iter().find(|s| s.len() != policy.state_dim) {
        return Err(Error::input(format!(
            "state of length {} given to a policy over {} features",
            bad.len(),
            policy.state_dim
        )));
    }
    let examples = if examples.len() == 1 {
        // A single pair cannot be split; let it sit on both sides.
        Examples::new(
            vec![examples.inputs[0].clone(); 2],
            vec![examples.targets[0].clone(); 2],
        )?
    } else {
        examples
    };
    let data = split_70_30(examples, rng)?;
    early_stop_train(&mut policy.model, &data, config, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    pub mean_return: f64,
    /// Standard error of the mean over episodes.
    pub stderr: f64,
    pub episodes: usize,
}

impl EvalStats {
    pub fn from_returns(returns: &[f64]) -> Self {
        let n = returns.len() as f64;
        let mean = returns.iter().sum::<f64>() / n;
        let stderr = if returns.len() > 1 {
            let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Self {
            mean_return: mean,
            stderr,
            episodes: returns.len(),
        }
    }
}

/// Mean undiscounted return of `actor` over `n_episodes` full episodes.
/// Episodes run in parallel on independent environment instances, each
/// seeded from `rng` up front so results do not depend on scheduling.
pub fn evaluate_actor(
    env: &Arc<dyn Environment>,
    actor: &dyn Actor,
    n_episodes: usize,
    rng: &mut dyn RngCore,
) -> Result<EvalStats> {
    if n_episodes == 0 {
        return Err(Error::input("n_episodes must be >= 1"));
    }
    let seeds: Vec<u64> = (0..n_episodes).map(|_| rng.next_u64()).collect();
    let returns = seeds
        .par_iter()
        .map(|&seed| run_episode(env, actor, &mut ChaCha8Rng::seed_from_u64(seed)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(EvalStats::from_returns(&returns))
}

/// Evaluates a policy with mode action selection.
pub fn evaluate_policy(
    env: &Arc<dyn Environment>,
    policy: &Policy,
    n_episodes: usize,
    rng: &mut dyn RngCore,
) -> Result<EvalStats> {
    evaluate_actor(env, &policy.actor(ActionMode::Mode), n_episodes, rng)
}

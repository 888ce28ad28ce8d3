//! Agent-specific inverse dynamics: `p(a | s^a_t, s^a_{t+1})`, learned by
//! maximum likelihood from the agent's own interactions and used to label
//! state-only demonstrations.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::demos::DemoSet;
use crate::env::{Action, Actor, EnvDescriptor, EnvSession, Environment};
use crate::error::{Error, Result};
use crate::model::{Checkpoint, ConditionalModel};
use crate::nn::HiddenLayer;
use crate::training::{early_stop_train, split_70_30, Examples, TrainConfig, TrainReport};

/// Agent-specific transition pairs with the actions that produced them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InteractionBuffer {
    pub pairs: Vec<(Vec<f64>, Vec<f64>)>,
    pub actions: Vec<Action>,
    /// Environment steps consumed so far; resets are free.
    pub interaction_count: u64,
}

impl InteractionBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Inputs `(s^a_t ‖ s^a_{t+1})` and action targets.
    pub fn examples(&self) -> Examples {
        Examples {
            inputs: self.pairs.iter().map(|(s, n)| concat(s, n)).collect(),
            targets: self.actions.clone(),
        }
    }
}

pub(crate) fn concat(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(a.len() + b.len());
    v.extend_from_slice(a);
    v.extend_from_slice(b);
    v
}

/// Runs `actor` for exactly `n_steps` environment steps, continuing the
/// session's current episode and resetting whenever one ends. Each step
/// appends its agent-specific `(s, s')` pair and action; no pair spans a
/// reset.
pub fn collect_interactions(
    session: &mut EnvSession,
    actor: &dyn Actor,
    n_steps: u64,
    buffer: &mut InteractionBuffer,
    rng: &mut dyn RngCore,
) -> Result<()> {
    if n_steps == 0 {
        return Err(Error::input("n_steps must be >= 1"));
    }
    let env = session.env().clone();
    for _ in 0..n_steps {
        let state = match session.live_state() {
            Some(s) => s.to_vec(),
            None => session.reset(rng),
        };
        let action = actor.act(&state, rng)?;
        let step = session.step(&action)?;
        buffer
            .pairs
            .push((env.agent_state(&state), env.agent_state(&step.next_state)));
        buffer.actions.push(action);
    }
    buffer.interaction_count += n_steps;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseModel {
    pub model: ConditionalModel,
    pub agent_state_dim: usize,
    pub trained: bool,
}

impl InverseModel {
    pub fn new(
        desc: &EnvDescriptor,
        hidden: &[HiddenLayer],
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        let agent_state_dim = desc.agent_state_dim();
        Ok(Self {
            model: ConditionalModel::init(2 * agent_state_dim, hidden, &desc.action_space, rng)?,
            agent_state_dim,
            trained: false,
        })
    }

    fn input(&self, s: &[f64], next: &[f64]) -> Result<Vec<f64>> {
        if s.len() != self.agent_state_dim || next.len() != self.agent_state_dim {
            return Err(Error::input(format!(
                "agent states must have length {}",
                self.agent_state_dim
            )));
        }
        Ok(concat(s, next))
    }

    /// Action probabilities for a discrete model.
    pub fn action_probabilities(&self, s: &[f64], next: &[f64]) -> Result<Vec<f64>> {
        self.model.probabilities(&self.input(s, next)?)
    }

    /// The maximum-likelihood action for one transition.
    pub fn most_likely_action(&self, s: &[f64], next: &[f64]) -> Result<Action> {
        self.model.mode(&self.input(s, next)?)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        self.model.to_checkpoint("inverse_model")
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let model = ConditionalModel::from_checkpoint(ckpt)?;
        let input_dim = model.input_dim();
        if input_dim % 2 != 0 {
            return Err(Error::config("inverse model input width must be even"));
        }
        Ok(Self {
            model,
            agent_state_dim: input_dim / 2,
            trained: true,
        })
    }
}

/// Maximum-likelihood fit of the inverse model on the whole buffer with
/// the 70/30 early-stopping protocol. Warm-starts from the current
/// parameters.
pub fn fit_inverse_model(
    buffer: &InteractionBuffer,
    model: &mut InverseModel,
    config: &TrainConfig,
    rng: &mut dyn RngCore,
) -> Result<TrainReport> {
    if buffer.is_empty() {
        return Err(Error::input("interaction buffer is empty"));
    }
    let data = split_70_30(buffer.examples(), rng)?;
    let report = early_stop_train(&mut model.model, &data, config, rng)?;
    model.trained = true;
    Ok(report)
}

/// Labels every consecutive demonstrated pair with the model's most likely
/// action; one action per transition, per trajectory.
pub fn infer_actions(
    model: &InverseModel,
    demos: &DemoSet,
    env: &dyn Environment,
) -> Result<Vec<Vec<Action>>> {
    if !model.trained {
        return Err(Error::state("inverse model has not been trained"));
    }
    demos.validate(env.descriptor().state_dim)?;
    demos
        .trajectories
        .iter()
        .map(|traj| {
            let agent: Vec<Vec<f64>> = traj.states.iter().map(|s| env.agent_state(s)).collect();
            agent
                .windows(2)
                .map(|w| model.most_likely_action(&w[0], &w[1]))
                .collect()
        })
        .collect()
}

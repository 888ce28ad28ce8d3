//! Deterministic classic-control environments.
//!
//! An [`Environment`] is a pure description: an initial-state distribution
//! and a deterministic transition function. Episode bookkeeping (current
//! state, horizon, step counting) lives in [`EnvSession`].

pub mod cartpole;
pub mod chain_world;
pub mod mountain_car;
pub mod reacher;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cartpole::CartPole;
pub use chain_world::ChainWorld;
pub use mountain_car::MountainCar;
pub use reacher::Reacher2D;

pub const ENV_NAMES: [&str; 4] = ["cartpole", "mountaincar", "reacher2d", "chainworld"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Action {
    Discrete(usize),
    Continuous(Vec<f64>),
}

impl Action {
    pub fn as_discrete(&self) -> Option<usize> {
        match self {
            Action::Discrete(a) => Some(*a),
            Action::Continuous(_) => None,
        }
    }

    pub fn as_continuous(&self) -> Option<&[f64]> {
        match self {
            Action::Discrete(_) => None,
            Action::Continuous(a) => Some(a),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionSpace {
    Discrete { n: usize },
    Continuous { low: Vec<f64>, high: Vec<f64> },
}

impl ActionSpace {
    pub fn contains(&self, action: &Action) -> bool {
        match (self, action) {
            (ActionSpace::Discrete { n }, Action::Discrete(a)) => a < n,
            (ActionSpace::Continuous { low, high }, Action::Continuous(a)) => {
                a.len() == low.len()
                    && a.iter()
                        .zip(low.iter().zip(high))
                        .all(|(x, (lo, hi))| x.is_finite() && lo <= x && x <= hi)
            }
            _ => false,
        }
    }

    pub fn check(&self, action: &Action) -> Result<()> {
        if self.contains(action) {
            Ok(())
        } else {
            Err(Error::input(format!(
                "action {action:?} is outside {self:?}"
            )))
        }
    }

    /// Uniform over discrete actions, or uniform in the bounded box.
    pub fn sample_uniform(&self, rng: &mut dyn RngCore) -> Action {
        match self {
            ActionSpace::Discrete { n } => Action::Discrete(rng.random_range(0..*n)),
            ActionSpace::Continuous { low, high } => Action::Continuous(
                low.iter()
                    .zip(high)
                    .map(|(&lo, &hi)| lo + (hi - lo) * rng.random::<f64>())
                    .collect(),
            ),
        }
    }

    pub fn clip(&self, values: &[f64]) -> Vec<f64> {
        match self {
            ActionSpace::Continuous { low, high } => values
                .iter()
                .zip(low.iter().zip(high))
                .map(|(&v, (&lo, &hi))| v.clamp(lo, hi))
                .collect(),
            ActionSpace::Discrete { .. } => values.to_vec(),
        }
    }

    /// Number of logits (discrete) or action dimensions (continuous).
    pub fn head_width(&self) -> usize {
        match self {
            ActionSpace::Discrete { n } => *n,
            ActionSpace::Continuous { low, .. } => low.len(),
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, ActionSpace::Discrete { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvDescriptor {
    pub name: String,
    pub state_dim: usize,
    /// Indices of the agent-specific part of the state, in order.
    pub agent_state_indices: Vec<usize>,
    pub action_space: ActionSpace,
    pub max_episode_steps: usize,
}

impl EnvDescriptor {
    pub fn agent_state_dim(&self) -> usize {
        self.agent_state_indices.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.agent_state_indices.is_empty()
            || self
                .agent_state_indices
                .iter()
                .any(|&i| i >= self.state_dim)
        {
            return Err(Error::config(format!(
                "{}: agent state indices must be a nonempty subset of 0..{}",
                self.name, self.state_dim
            )));
        }
        Ok(())
    }
}

/// Result of one deterministic transition, before horizon bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_state: Vec<f64>,
    pub reward: f64,
    /// Terminal state reached or horizon hit.
    pub done: bool,
}

/// One recorded environment step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Action,
    pub next_state: Vec<f64>,
    pub episode_id: u64,
}

pub trait Environment: Send + Sync + std::fmt::Debug {
    fn descriptor(&self) -> &EnvDescriptor;

    fn initial_state(&self, rng: &mut dyn RngCore) -> Vec<f64>;

    /// Deterministic dynamics. Fails on an action outside the action space.
    fn transition(&self, state: &[f64], action: &Action) -> Result<Outcome>;

    /// Order-preserving projection onto the agent-specific indices.
    fn agent_state(&self, state: &[f64]) -> Vec<f64> {
        self.descriptor()
            .agent_state_indices
            .iter()
            .map(|&i| state[i])
            .collect()
    }
}

/// Builds an environment by its config name.
pub fn make(name: &str) -> Result<Arc<dyn Environment>> {
    let env: Arc<dyn Environment> = match name {
        "cartpole" => Arc::new(CartPole::new()),
        "mountaincar" => Arc::new(MountainCar::new()),
        "reacher2d" => Arc::new(Reacher2D::new()),
        "chainworld" => Arc::new(ChainWorld::new()),
        other => {
            return Err(Error::config(format!(
                "unknown environment {other:?}; expected one of {ENV_NAMES:?}"
            )))
        }
    };
    Ok(env)
}

/// Passes everything through to the wrapped environment and counts
/// transitions.
#[derive(Debug)]
pub struct StepCounter {
    inner: Arc<dyn Environment>,
    steps: AtomicU64,
}

impl StepCounter {
    pub fn new(inner: Arc<dyn Environment>) -> Arc<Self> {
        Arc::new(Self {
            inner,
            steps: AtomicU64::new(0),
        })
    }

    pub fn steps(&self) -> u64 {
        self.steps.load(Ordering::SeqCst)
    }
}

impl Environment for StepCounter {
    fn descriptor(&self) -> &EnvDescriptor {
        self.inner.descriptor()
    }

    fn initial_state(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.inner.initial_state(rng)
    }

    fn transition(&self, state: &[f64], action: &Action) -> Result<Outcome> {
        self.steps.fetch_add(1, Ordering::SeqCst);
        self.inner.transition(state, action)
    }

    fn agent_state(&self, state: &[f64]) -> Vec<f64> {
        self.inner.agent_state(state)
    }
}

pub(crate) fn check_state(desc: &EnvDescriptor, state: &[f64]) -> Result<()> {
    if state.len() != desc.state_dim {
        return Err(Error::input(format!(
            "{} state has length {}, expected {}",
            desc.name,
            state.len(),
            desc.state_dim
        )));
    }
    Ok(())
}

/// Episode bookkeeping around an environment: current state, horizon,
/// and a running count of every step taken (resets are not counted).
#[derive(Debug, Clone)]
pub struct EnvSession {
    env: Arc<dyn Environment>,
    state: Option<Vec<f64>>,
    elapsed: usize,
    done: bool,
    episode_id: u64,
    total_steps: u64,
}

impl EnvSession {
    pub fn new(env: Arc<dyn Environment>) -> Self {
        Self {
            env,
            state: None,
            elapsed: 0,
            done: true,
            episode_id: 0,
            total_steps: 0,
        }
    }

    pub fn env(&self) -> &Arc<dyn Environment> {
        &self.env
    }

    pub fn descriptor(&self) -> &EnvDescriptor {
        self.env.descriptor()
    }

    pub fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        let s = self.env.initial_state(rng);
        if self.state.is_some() {
            self.episode_id += 1;
        }
        self.state = Some(s.clone());
        self.elapsed = 0;
        self.done = false;
        s
    }

    pub fn step(&mut self, action: &Action) -> Result<StepResult> {
        if self.done {
            return Err(Error::state("episode is finished; reset before stepping"));
        }
        let state = self.state.as_ref().expect("live episode has a state");
        let outcome = self.env.transition(state, action)?;
        self.total_steps += 1;
        self.elapsed += 1;
        self.done = outcome.terminal || self.elapsed >= self.descriptor().max_episode_steps;
        self.state = Some(outcome.next_state.clone());
        Ok(StepResult {
            next_state: outcome.next_state,
            reward: outcome.reward,
            done: self.done,
        })
    }

    /// Current state, or `None` when the episode has ended.
    pub fn live_state(&self) -> Option<&[f64]> {
        if self.done {
            None
        } else {
            self.state.as_deref()
        }
    }

    pub fn episode_id(&self) -> u64 {
        self.episode_id
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }
}

/// Anything that maps a state to an action.
pub trait Actor: Sync {
    fn act(&self, state: &[f64], rng: &mut dyn RngCore) -> Result<Action>;
}

/// The uniform random policy over an action space.
#[derive(Debug, Clone)]
pub struct UniformRandom(pub ActionSpace);

impl Actor for UniformRandom {
    fn act(&self, _state: &[f64], rng: &mut dyn RngCore) -> Result<Action> {
        Ok(self.0.sample_uniform(rng))
    }
}

/// Runs one full episode and returns its undiscounted return.
pub fn run_episode(
    env: &Arc<dyn Environment>,
    actor: &dyn Actor,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    let mut session = EnvSession::new(env.clone());
    let mut state = session.reset(rng);
    let mut total = 0.0;
    loop {
        let action = actor.act(&state, rng)?;
        let step = session.step(&action)?;
        total += step.reward;
        if step.done {
            return Ok(total);
        }
        state = step.next_state;
    }
}

//! Scripted experts and demonstration recording.
//!
//! State-only demonstrations ([`DemoSet`]) cannot carry actions: the type has
//! no field for them and the JSON reader rejects unknown fields.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::env::reacher::{jacobian, ArmState};
use crate::env::{Action, Actor, EnvSession, Environment};
use crate::error::{Error, Result};

/// Ordered states `s_0 … s_N` of one demonstration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateTrajectory {
    pub states: Vec<Vec<f64>>,
}

impl StateTrajectory {
    pub fn num_transitions(&self) -> usize {
        self.states.len().saturating_sub(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoSet {
    pub env_name: String,
    pub trajectories: Vec<StateTrajectory>,
}

impl DemoSet {
    pub fn validate(&self, state_dim: usize) -> Result<()> {
        if self.trajectories.is_empty() {
            return Err(Error::input("demonstration set is empty"));
        }
        for (i, t) in self.trajectories.iter().enumerate() {
            if t.states.len() < 2 {
                return Err(Error::input(format!(
                    "trajectory {i} has fewer than 2 states"
                )));
            }
            if t.states.iter().any(|s| s.len() != state_dim) {
                return Err(Error::input(format!(
                    "trajectory {i} has states of the wrong dimension (expected {state_dim})"
                )));
            }
        }
        Ok(())
    }

    pub fn num_transitions(&self) -> usize {
        self.trajectories
            .iter()
            .map(StateTrajectory::num_transitions)
            .sum()
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Demonstrations with the expert's actions kept alongside the states;
/// `actions[i].len() == trajectories[i].states.len() - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionfulDemoSet {
    pub env_name: String,
    pub trajectories: Vec<StateTrajectory>,
    pub actions: Vec<Vec<Action>>,
}

impl ActionfulDemoSet {
    pub fn validate(&self) -> Result<()> {
        if self.trajectories.is_empty() {
            return Err(Error::input("demonstration set is empty"));
        }
        if self.actions.len() != self.trajectories.len() {
            return Err(Error::input("actions and trajectories differ in count"));
        }
        for (t, a) in self.trajectories.iter().zip(&self.actions) {
            if t.num_transitions() != a.len() || a.is_empty() {
                return Err(Error::input(
                    "each trajectory needs one action per transition",
                ));
            }
        }
        Ok(())
    }

    /// Drops the actions.
    pub fn state_only(&self) -> DemoSet {
        DemoSet {
            env_name: self.env_name.clone(),
            trajectories: self.trajectories.clone(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Per-domain cap on recorded transitions per demonstration.
pub fn default_transition_cap(env_name: &str) -> Result<usize> {
    match env_name {
        "cartpole" => Ok(5),
        "mountaincar" | "reacher2d" => Ok(50),
        "chainworld" => Ok(4),
        other => Err(Error::config(format!("unknown environment {other:?}"))),
    }
}

/// Hand-written controllers standing in for trained experts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScriptedExpert {
    /// Push toward the side the pole is falling: right iff `θ + θ̇ > 0`.
    CartPole,
    /// Pump energy: accelerate in the direction of motion.
    MountainCar,
    /// Jacobian-transpose PD control of the fingertip toward the target.
    Reacher,
    /// Always step right.
    ChainWorld,
}

const REACHER_KP: f64 = 60.0;
const REACHER_KD: f64 = 0.6;

pub fn scripted_expert(env_name: &str) -> Result<ScriptedExpert> {
    match env_name {
        "cartpole" => Ok(ScriptedExpert::CartPole),
        "mountaincar" => Ok(ScriptedExpert::MountainCar),
        "reacher2d" => Ok(ScriptedExpert::Reacher),
        "chainworld" => Ok(ScriptedExpert::ChainWorld),
        other => Err(Error::config(format!("no scripted expert for {other:?}"))),
    }
}

impl ScriptedExpert {
    pub fn action(&self, state: &[f64]) -> Action {
        match self {
            ScriptedExpert::CartPole => Action::Discrete(usize::from(state[2] + state[3] > 0.0)),
            ScriptedExpert::MountainCar => Action::Discrete(if state[1] < 0.0 { 0 } else { 2 }),
            ScriptedExpert::ChainWorld => Action::Discrete(crate::env::chain_world::RIGHT),
            ScriptedExpert::Reacher => {
                let arm = ArmState::from_state(state);
                let err = [-state[8], -state[9]];
                let jac = jacobian(arm.q);
                let torque = (0..2)
                    .map(|j| {
                        let pull = jac[0][j] * err[0] + jac[1][j] * err[1];
                        (REACHER_KP * pull - REACHER_KD * arm.dq[j]).clamp(-1.0, 1.0)
                    })
                    .collect();
                Action::Continuous(torque)
            }
        }
    }
}

impl Actor for ScriptedExpert {
    fn act(&self, state: &[f64], _rng: &mut dyn RngCore) -> Result<Action> {
        Ok(self.action(state))
    }
}

/// Records `n_trajectories` expert episodes, each truncated to its first
/// `transition_cap` transitions, keeping the actions.
pub fn record_actionful_demos(
    env: &Arc<dyn Environment>,
    expert: &dyn Actor,
    n_trajectories: usize,
    transition_cap: usize,
    rng: &mut dyn RngCore,
) -> Result<ActionfulDemoSet> {
    if n_trajectories == 0 || transition_cap == 0 {
        return Err(Error::input(
            "need at least one trajectory of at least one transition",
        ));
    }
    let mut trajectories = Vec::with_capacity(n_trajectories);
    let mut actions = Vec::with_capacity(n_trajectories);
    for _ in 0..n_trajectories {
        let mut session = EnvSession::new(env.clone());
        let mut states = vec![session.reset(rng)];
        let mut acts = Vec::new();
        while acts.len() < transition_cap {
            let state = states.last().expect("nonempty");
            let action = expert.act(state, rng)?;
            let step = session.step(&action)?;
            acts.push(action);
            states.push(step.next_state);
            if step.done {
                break;
            }
        }
        trajectories.push(StateTrajectory { states });
        actions.push(acts);
    }
    Ok(ActionfulDemoSet {
        env_name: env.descriptor().name.clone(),
        trajectories,
        actions,
    })
}

/// State-only demonstrations: the expert's actions are discarded.
pub fn record_demos(
    env: &Arc<dyn Environment>,
    expert: &dyn Actor,
    n_trajectories: usize,
    transition_cap: usize,
    rng: &mut dyn RngCore,
) -> Result<DemoSet> {
    record_actionful_demos(env, expert, n_trajectories, transition_cap, rng).map(|d| d.state_only())
}

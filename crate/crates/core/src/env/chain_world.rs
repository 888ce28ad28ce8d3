//! A five-state deterministic chain; its dynamics are exactly invertible
//! on every moving transition.

use rand::RngCore;

use super::{check_state, Action, ActionSpace, EnvDescriptor, Environment, Outcome};
use crate::error::{Error, Result};

pub const NUM_STATES: usize = 5;
pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

/// State: `[k]` with `k` in `0..5`; reaching `4` ends the episode.
#[derive(Debug, Clone)]
pub struct ChainWorld {
    descriptor: EnvDescriptor,
}

impl ChainWorld {
    pub fn new() -> Self {
        Self {
            descriptor: EnvDescriptor {
                name: "chainworld".into(),
                state_dim: 1,
                agent_state_indices: vec![0],
                action_space: ActionSpace::Discrete { n: 2 },
                max_episode_steps: 20,
            },
        }
    }

    pub fn index(state: &[f64]) -> Result<usize> {
        let k = state[0];
        if k.fract() != 0.0 || !(0.0..NUM_STATES as f64).contains(&k) {
            return Err(Error::input(format!("{k} is not a chain state")));
        }
        Ok(k as usize)
    }
}

impl Default for ChainWorld {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for ChainWorld {
    fn descriptor(&self) -> &EnvDescriptor {
        &self.descriptor
    }

    fn initial_state(&self, _rng: &mut dyn RngCore) -> Vec<f64> {
        vec![0.0]
    }

    fn transition(&self, state: &[f64], action: &Action) -> Result<Outcome> {
        check_state(&self.descriptor, state)?;
        self.descriptor.action_space.check(action)?;
        let k = Self::index(state)?;
        let next = match action.as_discrete() {
            Some(RIGHT) => (k + 1).min(NUM_STATES - 1),
            _ => k.saturating_sub(1),
        };
        Ok(Outcome {
            next_state: vec![next as f64],
            reward: -1.0,
            terminal: next == NUM_STATES - 1,
        })
    }
}

//! Under-powered car in a valley; actions 0 (push left), 1 (no-op), 2 (push right).

use rand::{Rng, RngCore};

use super::{check_state, Action, ActionSpace, EnvDescriptor, Environment, Outcome};
use crate::error::Result;

pub const MIN_POSITION: f64 = -1.2;
pub const MAX_POSITION: f64 = 0.6;
pub const MAX_SPEED: f64 = 0.07;
pub const GOAL_POSITION: f64 = 0.5;
pub const FORCE: f64 = 0.001;
pub const GRAVITY: f64 = 0.0025;

/// State: `[position, velocity]`.
#[derive(Debug, Clone)]
pub struct MountainCar {
    descriptor: EnvDescriptor,
}

impl MountainCar {
    pub fn new() -> Self {
        Self {
            descriptor: EnvDescriptor {
                name: "mountaincar".into(),
                state_dim: 2,
                agent_state_indices: vec![0, 1],
                action_space: ActionSpace::Discrete { n: 3 },
                max_episode_steps: 200,
            },
        }
    }
}

impl Default for MountainCar {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for MountainCar {
    fn descriptor(&self) -> &EnvDescriptor {
        &self.descriptor
    }

    fn initial_state(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        vec![rng.random_range(-0.6..-0.4), 0.0]
    }

    fn transition(&self, state: &[f64], action: &Action) -> Result<Outcome> {
        check_state(&self.descriptor, state)?;
        self.descriptor.action_space.check(action)?;
        let a = action.as_discrete().expect("checked discrete") as f64;
        let (mut position, mut velocity) = (state[0], state[1]);
        velocity += (a - 1.0) * FORCE - (3.0 * position).cos() * GRAVITY;
        velocity = velocity.clamp(-MAX_SPEED, MAX_SPEED);
        position += velocity;
        position = position.clamp(MIN_POSITION, MAX_POSITION);
        if position == MIN_POSITION && velocity < 0.0 {
            velocity = 0.0;
        }
        Ok(Outcome {
            next_state: vec![position, velocity],
            reward: -1.0,
            terminal: position >= GOAL_POSITION && velocity >= 0.0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reset_distribution() {
        let env = MountainCar::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let s = env.initial_state(&mut rng);
            assert!((-0.6..=-0.4).contains(&s[0]));
            assert_eq!(s[1], 0.0);
        }
    }

    #[test]
    fn goal_terminates_otherwise_minus_one() {
        let env = MountainCar::new();
        let out = env.transition(&[0.49, 0.02], &Action::Discrete(2)).unwrap();
        assert!(out.next_state[0] >= GOAL_POSITION);
        assert!(out.terminal);
        let out = env.transition(&[-0.5, 0.0], &Action::Discrete(1)).unwrap();
        assert!(!out.terminal);
        assert_eq!(out.reward, -1.0);
    }

    #[test]
    fn left_wall_zeroes_velocity() {
        let env = MountainCar::new();
        let out = env
            .transition(&[-1.19, -0.05], &Action::Discrete(0))
            .unwrap();
        assert_eq!(out.next_state, vec![MIN_POSITION, 0.0]);
    }

    #[test]
    fn actions_shift_velocity_by_force() {
        let env = MountainCar::new();
        let s = [-0.5, 0.01];
        let v: Vec<f64> = (0..3)
            .map(|a| env.transition(&s, &Action::Discrete(a)).unwrap().next_state[1])
            .collect();
        assert!(((v[2] - v[1]) - FORCE).abs() < 1e-15);
        assert!(((v[1] - v[0]) - FORCE).abs() < 1e-15);
    }
}

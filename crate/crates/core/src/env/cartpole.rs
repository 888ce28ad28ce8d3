//! Cart-pole balancing with the classic Euler-integrated dynamics.

use rand::{Rng, RngCore};

use super::{check_state, Action, ActionSpace, EnvDescriptor, Environment, Outcome};
use crate::error::Result;

const GRAVITY: f64 = 9.8;
const MASS_CART: f64 = 1.0;
const MASS_POLE: f64 = 0.1;
const TOTAL_MASS: f64 = MASS_CART + MASS_POLE;
const HALF_POLE_LENGTH: f64 = 0.5;
const POLE_MASS_LENGTH: f64 = MASS_POLE * HALF_POLE_LENGTH;
const FORCE_MAG: f64 = 10.0;
const TAU: f64 = 0.02;
pub const THETA_THRESHOLD: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;
pub const X_THRESHOLD: f64 = 2.4;

/// State: `[x, x_dot, theta, theta_dot]`. Actions: 0 pushes left, 1 right.
#[derive(Debug, Clone)]
pub struct CartPole {
    descriptor: EnvDescriptor,
}

impl CartPole {
    pub fn new() -> Self {
        Self {
            descriptor: EnvDescriptor {
                name: "cartpole".into(),
                state_dim: 4,
                agent_state_indices: (0..4).collect(),
                action_space: ActionSpace::Discrete { n: 2 },
                max_episode_steps: 200,
            },
        }
    }
}

impl Default for CartPole {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for CartPole {
    fn descriptor(&self) -> &EnvDescriptor {
        &self.descriptor
    }

    fn initial_state(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        (0..4).map(|_| rng.random_range(-0.05..0.05)).collect()
    }

    fn transition(&self, state: &[f64], action: &Action) -> Result<Outcome> {
        check_state(&self.descriptor, state)?;
        self.descriptor.action_space.check(action)?;
        let (x, x_dot, theta, theta_dot) = (state[0], state[1], state[2], state[3]);
        let force = if action.as_discrete() == Some(1) {
            FORCE_MAG
        } else {
            -FORCE_MAG
        };
        let (sin, cos) = theta.sin_cos();
        let temp = (force + POLE_MASS_LENGTH * theta_dot * theta_dot * sin) / TOTAL_MASS;
        let theta_acc = (GRAVITY * sin - cos * temp)
            / (HALF_POLE_LENGTH * (4.0 / 3.0 - MASS_POLE * cos * cos / TOTAL_MASS));
        let x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos / TOTAL_MASS;

        let next = vec![
            x + TAU * x_dot,
            x_dot + TAU * x_acc,
            theta + TAU * theta_dot,
            theta_dot + TAU * theta_acc,
        ];
        let terminal = next[0].abs() > X_THRESHOLD || next[2].abs() > THETA_THRESHOLD;
        Ok(Outcome {
            next_state: next,
            reward: 1.0,
            terminal,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reset_components_within_005() {
        let env = CartPole::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..2000 {
            let s = env.initial_state(&mut rng);
            assert_eq!(s.len(), 4);
            assert!(s.iter().all(|v| v.abs() <= 0.05));
        }
    }

    #[test]
    fn terminates_on_angle_or_position() {
        let env = CartPole::new();
        let tilted = [0.0, 0.0, THETA_THRESHOLD + 0.01, 0.5];
        assert!(
            env.transition(&tilted, &Action::Discrete(1))
                .unwrap()
                .terminal
        );
        let far = [2.45, 1.0, 0.0, 0.0];
        assert!(env.transition(&far, &Action::Discrete(0)).unwrap().terminal);
        let upright = [0.0, 0.0, 0.0, 0.0];
        let out = env.transition(&upright, &Action::Discrete(0)).unwrap();
        assert!(!out.terminal);
        assert_eq!(out.reward, 1.0);
    }

    #[test]
    fn push_direction_changes_cart_velocity() {
        let env = CartPole::new();
        let s = [0.0, 0.0, 0.0, 0.0];
        let left = env.transition(&s, &Action::Discrete(0)).unwrap();
        let right = env.transition(&s, &Action::Discrete(1)).unwrap();
        assert!(left.next_state[1] < 0.0 && right.next_state[1] > 0.0);
        // Upright, at rest: x_acc = F / M_total * (1 - m_p l / (M_total l (4/3 - m_p/M_total)))
        let denom = HALF_POLE_LENGTH * (4.0 / 3.0 - MASS_POLE / TOTAL_MASS);
        let theta_acc = -(FORCE_MAG / TOTAL_MASS) / denom;
        let x_acc = FORCE_MAG / TOTAL_MASS - POLE_MASS_LENGTH * theta_acc / TOTAL_MASS;
        assert!((right.next_state[1] - TAU * x_acc).abs() < 1e-15);
        assert!((right.next_state[3] - TAU * theta_acc).abs() < 1e-15);
    }
}

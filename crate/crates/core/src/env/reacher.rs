//! Planar two-link reacher with torque control.
//!
//! State layout (10 values):
//! `[cos q1, cos q2, sin q1, sin q2, target_x, target_y, dq1, dq2, tip_x - target_x, tip_y - target_y]`.
//! The target coordinates (indices 4 and 5) are task-specific; everything
//! else describes the arm.

use rand::{Rng, RngCore};

use super::{check_state, Action, ActionSpace, EnvDescriptor, Environment, Outcome};
use crate::error::Result;

pub const LINK1: f64 = 0.1;
pub const LINK2: f64 = 0.11;
pub const DT: f64 = 0.02;
/// Angular acceleration per unit torque.
pub const TORQUE_GAIN: f64 = 20.0;
pub const DAMPING: f64 = 1.0;
pub const CONTROL_COST: f64 = 0.1;
pub const TARGET_RADIUS: f64 = 0.2;

#[derive(Debug, Clone)]
pub struct Reacher2D {
    descriptor: EnvDescriptor,
}

/// Joint-space view of a reacher state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmState {
    pub q: [f64; 2],
    pub dq: [f64; 2],
    pub target: [f64; 2],
}

impl ArmState {
    pub fn from_state(state: &[f64]) -> Self {
        Self {
            q: [state[2].atan2(state[0]), state[3].atan2(state[1])],
            dq: [state[6], state[7]],
            target: [state[4], state[5]],
        }
    }

    pub fn fingertip(&self) -> [f64; 2] {
        fingertip(self.q)
    }

    pub fn to_state(&self) -> Vec<f64> {
        let tip = self.fingertip();
        vec![
            self.q[0].cos(),
            self.q[1].cos(),
            self.q[0].sin(),
            self.q[1].sin(),
            self.target[0],
            self.target[1],
            self.dq[0],
            self.dq[1],
            tip[0] - self.target[0],
            tip[1] - self.target[1],
        ]
    }
}

pub fn fingertip(q: [f64; 2]) -> [f64; 2] {
    let q12 = q[0] + q[1];
    [
        LINK1 * q[0].cos() + LINK2 * q12.cos(),
        LINK1 * q[0].sin() + LINK2 * q12.sin(),
    ]
}

/// Jacobian of the fingertip position with respect to the joint angles.
pub fn jacobian(q: [f64; 2]) -> [[f64; 2]; 2] {
    let q12 = q[0] + q[1];
    let (s1, c1) = q[0].sin_cos();
    let (s12, c12) = q12.sin_cos();
    [
        [-LINK1 * s1 - LINK2 * s12, -LINK2 * s12],
        [LINK1 * c1 + LINK2 * c12, LINK2 * c12],
    ]
}

impl Reacher2D {
    pub fn new() -> Self {
        Self {
            descriptor: EnvDescriptor {
                name: "reacher2d".into(),
                state_dim: 10,
                agent_state_indices: vec![0, 1, 2, 3, 6, 7, 8, 9],
                action_space: ActionSpace::Continuous {
                    low: vec![-1.0, -1.0],
                    high: vec![1.0, 1.0],
                },
                max_episode_steps: 50,
            },
        }
    }
}

impl Default for Reacher2D {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for Reacher2D {
    fn descriptor(&self) -> &EnvDescriptor {
        &self.descriptor
    }

    fn initial_state(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let q = [rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1)];
        let dq = [
            rng.random_range(-0.005..0.005),
            rng.random_range(-0.005..0.005),
        ];
        let target = loop {
            let t = [
                rng.random_range(-TARGET_RADIUS..TARGET_RADIUS),
                rng.random_range(-TARGET_RADIUS..TARGET_RADIUS),
            ];
            if t[0].hypot(t[1]) < TARGET_RADIUS {
                break t;
            }
        };
        ArmState { q, dq, target }.to_state()
    }

    fn transition(&self, state: &[f64], action: &Action) -> Result<Outcome> {
        check_state(&self.descriptor, state)?;
        self.descriptor.action_space.check(action)?;
        let torque = action.as_continuous().expect("checked continuous");
        let mut arm = ArmState::from_state(state);
        for (j, &t) in torque.iter().enumerate() {
            arm.dq[j] += DT * (TORQUE_GAIN * t - DAMPING * arm.dq[j]);
            arm.q[j] += DT * arm.dq[j];
        }
        let next = arm.to_state();
        let distance = next[8].hypot(next[9]);
        let effort: f64 = torque.iter().map(|t| t * t).sum();
        Ok(Outcome {
            next_state: next,
            reward: -distance - CONTROL_COST * effort,
            terminal: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn agent_state_strips_target() {
        let env = Reacher2D::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = env.initial_state(&mut rng);
        let a = env.agent_state(&s);
        assert_eq!(a.len(), 8);
        assert_eq!(&a[..4], &s[..4]);
        assert_eq!(&a[4..], &s[6..]);
    }

    #[test]
    fn targets_resampled_inside_disk() {
        let env = Reacher2D::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let first = env.initial_state(&mut rng);
        let second = env.initial_state(&mut rng);
        assert_ne!(first[4..6], second[4..6]);
        for _ in 0..500 {
            let s = env.initial_state(&mut rng);
            assert!(s[4].hypot(s[5]) < TARGET_RADIUS);
        }
    }

    #[test]
    fn state_round_trips_through_joint_space() {
        let arm = ArmState {
            q: [0.7, -2.1],
            dq: [0.3, -0.4],
            target: [0.05, -0.1],
        };
        let back = ArmState::from_state(&arm.to_state());
        for j in 0..2 {
            assert!((back.q[j] - arm.q[j]).abs() < 1e-12);
        }
        assert_eq!(back.dq, arm.dq);
        assert_eq!(back.target, arm.target);
    }

    #[test]
    fn torque_is_recoverable_from_velocity_change() {
        let env = Reacher2D::new();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = env.initial_state(&mut rng);
        let tau = [0.4, -0.9];
        let out = env
            .transition(&s, &Action::Continuous(tau.to_vec()))
            .unwrap();
        for j in 0..2 {
            let recovered =
                ((out.next_state[6 + j] - s[6 + j]) / DT + DAMPING * s[6 + j]) / TORQUE_GAIN;
            assert!((recovered - tau[j]).abs() < 1e-9);
        }
        assert!(out.reward < 0.0 && !out.terminal);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let q = [0.3, 1.1];
        let jac = jacobian(q);
        let h = 1e-6;
        for j in 0..2 {
            let mut up = q;
            let mut dn = q;
            up[j] += h;
            dn[j] -= h;
            let (fu, fd) = (fingertip(up), fingertip(dn));
            for i in 0..2 {
                let fdiff = (fu[i] - fd[i]) / (2.0 * h);
                assert!((fdiff - jac[i][j]).abs() < 1e-8);
            }
        }
    }
}

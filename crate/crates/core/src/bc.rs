//! Behavioral cloning on the expert's true actions.

use rand::RngCore;

use crate::demos::ActionfulDemoSet;
use crate::env::{self, Environment};
use crate::error::{Error, Result};
use crate::nn::HiddenLayer;
use crate::policy::{cloning_examples, fit_policy, Policy};
use crate::training::{TrainConfig, TrainReport};

/// Fits a fresh policy on the demonstrated `(state, action)` pairs. Never
/// touches an environment.
pub fn run_bc(
    demos: &ActionfulDemoSet,
    policy_hidden: &[HiddenLayer],
    config: &TrainConfig,
    rng: &mut dyn RngCore,
) -> Result<(Policy, TrainReport)> {
    run_bc_on(
        env::make(&demos.env_name)?.as_ref(),
        demos,
        policy_hidden,
        config,
        rng,
    )
}

/// [`run_bc`] against a caller-supplied environment, which is only
/// consulted for its descriptor.
pub fn run_bc_on(
    env: &dyn Environment,
    demos: &ActionfulDemoSet,
    policy_hidden: &[HiddenLayer],
    config: &TrainConfig,
    rng: &mut dyn RngCore,
) -> Result<(Policy, TrainReport)> {
    demos.validate()?;
    if env.descriptor().name != demos.env_name {
        return Err(Error::config(format!(
            "demonstrations are from {:?}, environment is {:?}",
            demos.env_name,
            env.descriptor().name
        )));
    }
    let state_only = demos.state_only();
    state_only.validate(env.descriptor().state_dim)?;
    let mut policy = Policy::new(env.descriptor(), policy_hidden, rng)?;
    let examples = cloning_examples(&state_only, &demos.actions)?;
    let report = fit_policy(examples, &mut policy, config, rng)?;
    Ok((policy, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demos::{record_actionful_demos, ScriptedExpert, StateTrajectory};
    use crate::env::{chain_world::RIGHT, make, Action};
    use crate::policy::ActionMode;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn chainworld_single_demo_goes_right() {
        let env = make("chainworld").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let demos =
            record_actionful_demos(&env, &ScriptedExpert::ChainWorld, 1, 4, &mut rng).unwrap();
        let (policy, _) = run_bc(&demos, &[], &TrainConfig::default(), &mut rng).unwrap();
        for s in 0..4 {
            let a = policy.act(&[s as f64], ActionMode::Mode, &mut rng).unwrap();
            assert_eq!(a, Action::Discrete(RIGHT));
        }
    }

    #[test]
    fn empty_demos_are_rejected() {
        let demos = ActionfulDemoSet {
            env_name: "chainworld".into(),
            trajectories: vec![],
            actions: vec![],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = run_bc(&demos, &[], &TrainConfig::default(), &mut rng).unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn mismatched_action_counts_are_rejected() {
        let demos = ActionfulDemoSet {
            env_name: "chainworld".into(),
            trajectories: vec![StateTrajectory {
                states: vec![vec![0.0], vec![1.0], vec![2.0]],
            }],
            actions: vec![vec![Action::Discrete(RIGHT)]],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(run_bc(&demos, &[], &TrainConfig::default(), &mut rng).is_err());
    }
}

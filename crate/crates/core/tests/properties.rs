use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use bco::demos::{DemoSet, StateTrajectory};
use bco::env::{make, Action, ActionSpace};
use bco::harness::{Baselines, ScaledScore};
use bco::model::ConditionalModel;
use bco::nn::{gaussian_nll, softmax, Activation, HiddenLayer};
use bco::training::{split_70_30, train_size, Examples};

fn finite() -> impl Strategy<Value = f64> {
    -1e3..1e3f64
}

proptest! {
    #[test]
    fn softmax_sums_to_one(logits in prop::collection::vec(-700.0..700.0f64, 1..12)) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn gaussian_mean_gradient_vanishes_at_the_mean(
        mean in prop::collection::vec(finite(), 1..6),
        log_std in -3.0..3.0f64,
    ) {
        let log_std = vec![log_std; mean.len()];
        let out = gaussian_nll(&mean, &log_std, &mean);
        prop_assert!(out.mean_grad.iter().all(|&g| g == 0.0));
        for d in 0..mean.len() {
            let mut off = mean.clone();
            off[d] += 0.5;
            prop_assert!(gaussian_nll(&mean, &log_std, &off).loss > out.loss);
        }
    }

    #[test]
    fn lrelu_is_piecewise_linear(z in finite(), slope in 0.0..1.0f64) {
        let act = Activation::Lrelu { slope };
        let expected = if z >= 0.0 { z } else { slope * z };
        prop_assert_eq!(act.apply(z), expected);
    }

    #[test]
    fn scaling_is_affine_equivariant(
        random in -500.0..500.0f64,
        gap in 1e-2..500.0f64,
        raw in -1e3..1e3f64,
        a in 1e-2..1e2f64,
        b in -1e3..1e3f64,
    ) {
        let expert = random + gap;
        let base = Baselines::new(random, expert).unwrap().scale(raw);
        let mapped = ScaledScore::new(a * raw + b, a * random + b, a * expert + b).unwrap();
        prop_assert!((mapped.scaled - base).abs() <= 1e-9 * base.abs().max(1.0));
    }

    #[test]
    fn demo_sets_round_trip_through_json(
        trajectories in prop::collection::vec(
            prop::collection::vec(prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 3), 2..8),
            1..5,
        ),
    ) {
        let set = DemoSet {
            env_name: "chainworld".into(),
            trajectories: trajectories.into_iter().map(|states| StateTrajectory { states }).collect(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("demos.json");
        set.save(&path).unwrap();
        prop_assert_eq!(DemoSet::load(&path).unwrap(), set);
    }

    #[test]
    fn split_partitions_the_examples(n in 2usize..400, seed in any::<u64>()) {
        let inputs = (0..n).map(|i| vec![i as f64]).collect();
        let targets = vec![Action::Discrete(0); n];
        let data = split_70_30(Examples::new(inputs, targets).unwrap(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(data.split.train.len(), train_size(n));
        let train: BTreeSet<usize> = data.split.train.iter().copied().collect();
        let validation: BTreeSet<usize> = data.split.validation.iter().copied().collect();
        prop_assert!(train.is_disjoint(&validation));
        prop_assert_eq!(train.len() + validation.len(), n);
        prop_assert!(train.union(&validation).copied().eq(0..n));
    }

    #[test]
    fn discrete_model_outputs_a_distribution(
        seed in any::<u64>(),
        input in prop::collection::vec(-50.0..50.0f64, 4),
    ) {
        let hidden = [HiddenLayer { width: 8, activation: Activation::lrelu() }];
        let model = ConditionalModel::init(4, &hidden, &ActionSpace::Discrete { n: 3 }, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let p = model.probabilities(&input).unwrap();
        prop_assert_eq!(p.len(), 3);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn chainworld_moves_are_invertible(s in 0usize..5, a in 0usize..2, b in 0usize..2) {
        let env = make("chainworld").unwrap();
        let state = vec![s as f64];
        let next_a = env.transition(&state, &Action::Discrete(a)).unwrap().next_state;
        let next_b = env.transition(&state, &Action::Discrete(b)).unwrap().next_state;
        if next_a != state && next_a == next_b {
            prop_assert_eq!(a, b);
        }
    }
}

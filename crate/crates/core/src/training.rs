//! Supervised maximum-likelihood training with a 70/30 split and
//! validation-based early stopping.

use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::env::Action;
use crate::error::{Error, Result};
use crate::model::{ConditionalModel, Standardizer};
use crate::nn::{AdamConfig, AdamState};

pub const TRAIN_FRACTION: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a new best validation loss before stopping.
    pub patience: usize,
    /// Fit an input standardizer on the first training call.
    pub standardize_inputs: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            batch_size: 32,
            max_epochs: 500,
            patience: 10,
            standardize_inputs: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.adam.validate()?;
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::config("batch_size and max_epochs must be >= 1"));
        }
        Ok(())
    }
}

/// Unsplit supervised examples.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Examples {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Action>,
}

impl Examples {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<Action>) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::input(format!(
                "{} inputs but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub examples: Examples,
    pub split: Split,
}

impl LabeledDataset {
    pub fn train_inputs(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.split.train.iter().map(|&i| &self.examples.inputs[i])
    }

    fn subset(&self, idx: &[usize]) -> (Vec<Vec<f64>>, Vec<Action>) {
        idx.iter()
            .map(|&i| {
                (
                    self.examples.inputs[i].clone(),
                    self.examples.targets[i].clone(),
                )
            })
            .unzip()
    }

    pub fn validation_set(&self) -> (Vec<Vec<f64>>, Vec<Action>) {
        self.subset(&self.split.validation)
    }

    pub fn train_set(&self) -> (Vec<Vec<f64>>, Vec<Action>) {
        self.subset(&self.split.train)
    }
}

/// Training-set size for `total` examples: `round(0.7 n)`, clamped so both
/// sides keep at least one example.
pub fn train_size(total: usize) -> usize {
    ((TRAIN_FRACTION * total as f64).round() as usize).clamp(1, total - 1)
}

/// Random disjoint 70/30 split of `examples`.
pub fn split_70_30(examples: Examples, rng: &mut dyn RngCore) -> Result<LabeledDataset> {
    if examples.len() < 2 {
        return Err(Error::input(format!(
            "a train/validation split needs at least 2 examples, got {}",
            examples.len()
        )));
    }
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(rng);
    let n_train = train_size(examples.len());
    let validation = order.split_off(n_train);
    Ok(LabeledDataset {
        examples,
        split: Split {
            train: order,
            validation,
        },
    })
}

/// Mean negative log-likelihood over a set of indices.
pub fn mean_nll(model: &ConditionalModel, data: &LabeledDataset, idx: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    for &i in idx {
        total += model.nll(&data.examples.inputs[i], &data.examples.targets[i])?;
    }
    Ok(total / idx.len() as f64)
}

/// One Adam step on the mean gradient over `batch`; returns the batch loss.
pub fn train_batch(
    model: &mut ConditionalModel,
    optimizer: &mut AdamState,
    data: &LabeledDataset,
    batch: &[usize],
) -> Result<f64> {
    let mut grads = model.zero_grads();
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    for &i in batch {
        loss += scale
            * model.accumulate_grad(
                &data.examples.inputs[i],
                &data.examples.targets[i],
                &mut grads,
                scale,
            )?;
    }
    optimizer.step(model.tensors_mut(), grads.tensors());
    Ok(loss)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub train_loss: f64,
    pub validation_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Epochs actually run (not counting the initial evaluation).
    pub epochs: usize,
    /// 0 means the starting parameters were never beaten.
    pub best_epoch: usize,
    pub best_validation_loss: f64,
    pub history: Vec<EpochStats>,
}

/// Trains on the train side with Adam, evaluating mean validation NLL after
/// every epoch. Stops after `patience` epochs without a new best or at
/// `max_epochs`, and leaves `model` holding the best-validation parameters
/// (the starting parameters count as epoch 0).
pub fn early_stop_train(
    model: &mut ConditionalModel,
    data: &LabeledDataset,
    config: &TrainConfig,
    rng: &mut dyn RngCore,
) -> Result<TrainReport> {
    config.validate()?;
    if data.split.train.is_empty() || data.split.validation.is_empty() {
        return Err(Error::input("both sides of the split must be nonempty"));
    }
    if config.standardize_inputs && model.input_norm.is_none() {
        model.input_norm = Standardizer::fit(data.train_inputs());
    }

    let mut optimizer = AdamState::new(config.adam, &model.tensor_lens())?;
    let mut best_loss = mean_nll(model, data, &data.split.validation)?;
    let mut best_params = model.flat_params();
    let mut best_epoch = 0;
    let mut history = Vec::new();
    let mut order = data.split.train.clone();

    for epoch in 1..=config.max_epochs {
        order.shuffle(rng);
        let mut train_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            train_loss += batch.len() as f64 * train_batch(model, &mut optimizer, data, batch)?;
        }
        train_loss /= order.len() as f64;
        if !model.is_finite() {
            return Err(Error::state(format!(
                "non-finite parameters after epoch {epoch}"
            )));
        }
        let validation_loss = mean_nll(model, data, &data.split.validation)?;
        history.push(EpochStats {
            train_loss,
            validation_loss,
        });
        if validation_loss < best_loss {
            best_loss = validation_loss;
            best_params = model.flat_params();
            best_epoch = epoch;
        } else if epoch - best_epoch >= config.patience {
            break;
        }
    }

    model.load_flat_params(&best_params)?;
    Ok(TrainReport {
        epochs: history.len(),
        best_epoch,
        best_validation_loss: best_loss,
        history,
    })
}

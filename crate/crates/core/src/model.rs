//! Conditional action distributions `p(a | x)` built from an MLP and a
//! likelihood head. Both the inverse dynamics model and the imitation
//! policy are instances of [`ConditionalModel`].

use rand::RngCore;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::env::{Action, ActionSpace};
use crate::error::{Error, Result};
use crate::nn::{argmax, gaussian_nll, softmax, softmax_nll, HiddenLayer, Mlp, MlpParams, MlpSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    /// One logit per discrete action.
    Softmax { n: usize },
    /// Per-dimension means from the network, input-independent `log_std`.
    Gaussian {
        log_std: Vec<f64>,
        low: Vec<f64>,
        high: Vec<f64>,
    },
}

impl Head {
    pub fn for_space(space: &ActionSpace) -> Self {
        match space {
            ActionSpace::Discrete { n } => Head::Softmax { n: *n },
            ActionSpace::Continuous { low, high } => Head::Gaussian {
                log_std: vec![0.0; low.len()],
                low: low.clone(),
                high: high.clone(),
            },
        }
    }

    pub fn width(&self) -> usize {
        match self {
            Head::Softmax { n } => *n,
            Head::Gaussian { log_std, .. } => log_std.len(),
        }
    }

    fn free_params(&self) -> &[f64] {
        match self {
            Head::Softmax { .. } => &[],
            Head::Gaussian { log_std, .. } => log_std,
        }
    }

    fn free_params_mut(&mut self) -> &mut [f64] {
        match self {
            Head::Softmax { .. } => &mut [],
            Head::Gaussian { log_std, .. } => log_std,
        }
    }
}

/// Per-feature affine standardization fitted on training inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Features with (near-)zero spread get unit scale.
    pub fn fit<'a>(inputs: impl IntoIterator<Item = &'a Vec<f64>>) -> Option<Self> {
        let rows: Vec<&Vec<f64>> = inputs.into_iter().collect();
        let dim = rows.first()?.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in &rows {
            for (m, x) in mean.iter_mut().zip(r.iter()) {
                *m += x / n;
            }
        }
        let mut var = vec![0.0; dim];
        for r in &rows {
            for ((v, x), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *v += (x - m) * (x - m) / n;
            }
        }
        let scale = var
            .into_iter()
            .map(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 })
            .collect();
        Some(Self { mean, scale })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Gradient buffer matching a [`ConditionalModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub net: MlpParams,
    pub head: Vec<f64>,
}

impl ModelGrads {
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.net.tensors();
        t.push(&self.head);
        t
    }

    pub fn fill_zero(&mut self) {
        self.net.fill_zero();
        self.head.fill(0.0);
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().concat()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalModel {
    pub net: Mlp,
    pub head: Head,
    pub input_norm: Option<Standardizer>,
}

impl ConditionalModel {
    pub fn new(net: Mlp, head: Head) -> Result<Self> {
        if net.spec.output_dim != head.width() {
            return Err(Error::config(format!(
                "network output width {} does not match head width {}",
                net.spec.output_dim,
                head.width()
            )));
        }
        Ok(Self {
            net,
            head,
            input_norm: None,
        })
    }

    /// Fresh model with Glorot-initialized weights and `log_std = 0`.
    pub fn init(
        input_dim: usize,
        hidden: &[HiddenLayer],
        space: &ActionSpace,
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        let head = Head::for_space(space);
        let spec = MlpSpec {
            input_dim,
            hidden_layers: hidden.to_vec(),
            output_dim: head.width(),
        };
        Self::new(Mlp::init(spec, rng)?, head)
    }

    pub fn input_dim(&self) -> usize {
        self.net.spec.input_dim
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.head, Head::Softmax { .. })
    }

    fn prepare(&self, input: &[f64]) -> Vec<f64> {
        match &self.input_norm {
            Some(norm) => norm.apply(input),
            None => input.to_vec(),
        }
    }

    /// Raw network output: logits or Gaussian means.
    pub fn outputs(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.net.forward(&self.prepare(input))
    }

    /// Action probabilities (discrete heads only).
    pub fn probabilities(&self, input: &[f64]) -> Result<Vec<f64>> {
        match self.head {
            Head::Softmax { .. } => Ok(softmax(&self.outputs(input)?)),
            Head::Gaussian { .. } => Err(Error::config("probabilities need a discrete head")),
        }
    }

    /// Most likely action: lowest-index argmax, or the mean clipped to bounds.
    pub fn mode(&self, input: &[f64]) -> Result<Action> {
        let out = self.outputs(input)?;
        Ok(match &self.head {
            Head::Softmax { .. } => Action::Discrete(argmax(&out)),
            Head::Gaussian { low, high, .. } => Action::Continuous(clip(&out, low, high)),
        })
    }

    pub fn sample(&self, input: &[f64], rng: &mut dyn RngCore) -> Result<Action> {
        let out = self.outputs(input)?;
        Ok(match &self.head {
            Head::Softmax { .. } => {
                let probs = softmax(&out);
                let u: f64 = rand::Rng::random(rng);
                let mut acc = 0.0;
                let mut chosen = probs.len() - 1;
                for (i, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        chosen = i;
                        break;
                    }
                }
                Action::Discrete(chosen)
            }
            Head::Gaussian { log_std, low, high } => {
                let draws: Vec<f64> = out
                    .iter()
                    .zip(log_std)
                    .map(|(&mu, &ls)| {
                        Normal::new(mu, ls.exp())
                            .map(|d| d.sample(rng))
                            .unwrap_or(mu)
                    })
                    .collect();
                Action::Continuous(clip(&draws, low, high))
            }
        })
    }

    pub fn nll(&self, input: &[f64], target: &Action) -> Result<f64> {
        let out = self.outputs(input)?;
        self.head_loss(&out, target).map(|(loss, _, _)| loss)
    }

    fn head_loss(&self, out: &[f64], target: &Action) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        match (&self.head, target) {
            (Head::Softmax { n }, Action::Discrete(a)) => {
                if a >= n {
                    return Err(Error::input(format!(
                        "action {a} out of range for {n} logits"
                    )));
                }
                let (loss, grad) = softmax_nll(out, *a);
                Ok((loss, grad, Vec::new()))
            }
            (Head::Gaussian { log_std, .. }, Action::Continuous(a)) => {
                if a.len() != log_std.len() {
                    return Err(Error::input("continuous action has the wrong dimension"));
                }
                let g = gaussian_nll(out, log_std, a);
                Ok((g.loss, g.mean_grad, g.log_std_grad))
            }
            _ => Err(Error::input("action kind does not match the model head")),
        }
    }

    pub fn zero_grads(&self) -> ModelGrads {
        ModelGrads {
            net: MlpParams::zeros(&self.net.spec),
            head: vec![0.0; self.head.free_params().len()],
        }
    }

    /// Adds `scale * d nll / dθ` into `grads`; returns the loss.
    pub fn accumulate_grad(
        &self,
        input: &[f64],
        target: &Action,
        grads: &mut ModelGrads,
        scale: f64,
    ) -> Result<f64> {
        let trace = self.net.forward_trace(&self.prepare(input))?;
        let (loss, out_grad, head_grad) = self.head_loss(trace.output(), target)?;
        self.net
            .backward_trace(&trace, &out_grad, &mut grads.net, scale)?;
        for (g, h) in grads.head.iter_mut().zip(&head_grad) {
            *g += scale * h;
        }
        Ok(loss)
    }

    /// Parameter tensors in the same order as [`ModelGrads::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.net.params.tensors_mut();
        t.push(self.head.free_params_mut());
        t
    }

    pub fn tensor_lens(&self) -> Vec<usize> {
        let mut lens: Vec<usize> = self.net.params.tensors().iter().map(|t| t.len()).collect();
        lens.push(self.head.free_params().len());
        lens
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut flat = self.net.params.flatten();
        flat.extend_from_slice(self.head.free_params());
        flat
    }

    pub fn load_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        let n_net = self.net.spec.num_params();
        let n_head = self.head.free_params().len();
        if flat.len() != n_net + n_head {
            return Err(Error::config(format!(
                "expected {} parameters, got {}",
                n_net + n_head,
                flat.len()
            )));
        }
        self.net.params.load_flat(&flat[..n_net])?;
        self.head.free_params_mut().copy_from_slice(&flat[n_net..]);
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.net.params.is_finite() && self.head.free_params().iter().all(|x| x.is_finite())
    }

    /// Fraction of examples whose mode equals the target (discrete heads).
    pub fn accuracy(&self, inputs: &[Vec<f64>], targets: &[Action]) -> Result<f64> {
        if inputs.is_empty() {
            return Err(Error::input("accuracy of an empty set"));
        }
        let mut hits = 0usize;
        for (x, t) in inputs.iter().zip(targets) {
            if &self.mode(x)? == t {
                hits += 1;
            }
        }
        Ok(hits as f64 / inputs.len() as f64)
    }
}

fn clip(values: &[f64], low: &[f64], high: &[f64]) -> Vec<f64> {
    values
        .iter()
        .zip(low.iter().zip(high))
        .map(|(&v, (&lo, &hi))| v.clamp(lo, hi))
        .collect()
}

/// On-disk checkpoint: network spec, head (including `log_std`),
/// standardizer, and the flattened network parameters `W0, b0, W1, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub kind: String,
    pub spec: MlpSpec,
    pub head: Head,
    pub input_norm: Option<Standardizer>,
    pub params: Vec<f64>,
}

impl ConditionalModel {
    pub fn to_checkpoint(&self, kind: &str) -> Checkpoint {
        Checkpoint {
            kind: kind.to_owned(),
            spec: self.net.spec.clone(),
            head: self.head.clone(),
            input_norm: self.input_norm.clone(),
            params: self.net.params.flatten(),
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        ckpt.spec.validate()?;
        let mut params = MlpParams::zeros(&ckpt.spec);
        params.load_flat(&ckpt.params)?;
        let mut model = Self::new(Mlp::new(ckpt.spec.clone(), params)?, ckpt.head.clone())?;
        if let Some(norm) = &ckpt.input_norm {
            if norm.mean.len() != ckpt.spec.input_dim || norm.scale.len() != ckpt.spec.input_dim {
                return Err(Error::config(
                    "standardizer width does not match network input",
                ));
            }
        }
        model.input_norm = ckpt.input_norm.clone();
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gaussian_model(mean_bias: f64, log_std: f64) -> ConditionalModel {
        let spec = MlpSpec::linear(1, 1);
        let params = MlpParams {
            weights: vec![Matrix::zeros(1, 1)],
            biases: vec![vec![mean_bias]],
        };
        let head = Head::Gaussian {
            log_std: vec![log_std],
            low: vec![-1.0],
            high: vec![1.0],
        };
        ConditionalModel::new(Mlp::new(spec, params).unwrap(), head).unwrap()
    }

    #[test]
    fn softmax_mode_is_argmax() {
        let spec = MlpSpec::linear(1, 2);
        let params = MlpParams {
            weights: vec![Matrix::zeros(2, 1)],
            biases: vec![vec![2.0, 1.0]],
        };
        let model =
            ConditionalModel::new(Mlp::new(spec, params).unwrap(), Head::Softmax { n: 2 }).unwrap();
        assert_eq!(model.mode(&[0.3]).unwrap(), Action::Discrete(0));
        let p = model.probabilities(&[0.3]).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_mode_is_clipped_mean() {
        assert_eq!(
            gaussian_model(0.5, 0.0).mode(&[0.0]).unwrap(),
            Action::Continuous(vec![0.5])
        );
        assert_eq!(
            gaussian_model(3.0, 0.0).mode(&[0.0]).unwrap(),
            Action::Continuous(vec![1.0])
        );
    }

    #[test]
    fn narrow_gaussian_samples_concentrate_on_mean() {
        let sigma: f64 = 1e-3;
        let model = gaussian_model(0.5, sigma.ln());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 1000;
        let mean: f64 = (0..n)
            .map(|_| {
                model
                    .sample(&[0.0], &mut rng)
                    .unwrap()
                    .as_continuous()
                    .unwrap()[0]
            })
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.5).abs() < 3.0 * sigma / (n as f64).sqrt());
    }

    #[test]
    fn discrete_samples_follow_probabilities() {
        let spec = MlpSpec::linear(1, 2);
        let params = MlpParams {
            weights: vec![Matrix::zeros(2, 1)],
            biases: vec![vec![0.0, (3.0f64).ln()]],
        };
        let model =
            ConditionalModel::new(Mlp::new(spec, params).unwrap(), Head::Softmax { n: 2 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 20_000;
        let ones = (0..n)
            .filter(|_| model.sample(&[0.0], &mut rng).unwrap() == Action::Discrete(1))
            .count();
        let frac = ones as f64 / n as f64;
        let se = (0.75f64 * 0.25 / n as f64).sqrt();
        assert!((frac - 0.75).abs() < 4.0 * se);
    }

    #[test]
    fn standardizer_handles_constant_features() {
        let rows = vec![vec![1.0, 2.0], vec![1.0, 4.0]];
        let s = Standardizer::fit(&rows).unwrap();
        assert_eq!(s.scale[0], 1.0);
        assert_eq!(s.apply(&[1.0, 4.0]), vec![0.0, 1.0]);
    }

    #[test]
    fn mismatched_action_kind_is_input_error() {
        let model = gaussian_model(0.0, 0.0);
        assert!(matches!(
            model.nll(&[0.0], &Action::Discrete(0)),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let space = ActionSpace::Continuous {
            low: vec![-1.0; 2],
            high: vec![1.0; 2],
        };
        let mut model = ConditionalModel::init(
            5,
            &MlpSpec::lrelu(5, 7, 2, 2).hidden_layers,
            &space,
            &mut rng,
        )
        .unwrap();
        model.input_norm = Some(Standardizer {
            mean: vec![0.1, 0.2, 0.3, 0.4, 1.0 / 3.0],
            scale: vec![1.0, 2.0, 0.7, 1e-5, 3.0],
        });
        if let Head::Gaussian { log_std, .. } = &mut model.head {
            log_std[0] = -0.123_456_789_012_345_67;
        }
        let json = serde_json::to_string(&model.to_checkpoint("policy")).unwrap();
        let back: Checkpoint = serde_json::from_str(&json).unwrap();
        let restored = ConditionalModel::from_checkpoint(&back).unwrap();
        assert_eq!(restored, model);
    }
}

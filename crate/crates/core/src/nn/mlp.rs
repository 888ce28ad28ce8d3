//! Feed-forward networks with hand-written backpropagation.
//!
//! Every hidden layer is `h = act(W x + b)`; the output layer is always
//! affine. A spec with no hidden layers is a plain linear model.

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};

pub const DEFAULT_LRELU_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Lrelu { slope: f64 },
    Linear,
}

impl Activation {
    pub fn lrelu() -> Self {
        Activation::Lrelu {
            slope: DEFAULT_LRELU_SLOPE,
        }
    }

    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Lrelu { slope } => {
                if z >= 0.0 {
                    z
                } else {
                    slope * z
                }
            }
            Activation::Linear => z,
        }
    }

    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Lrelu { slope } => {
                if z >= 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HiddenLayer {
    pub width: usize,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_layers: Vec<HiddenLayer>,
    pub output_dim: usize,
}

impl MlpSpec {
    pub fn linear(input_dim: usize, output_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_layers: Vec::new(),
            output_dim,
        }
    }

    /// `depth` hidden LReLU layers of `width` units each.
    pub fn lrelu(input_dim: usize, width: usize, depth: usize, output_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_layers: vec![
                HiddenLayer {
                    width,
                    activation: Activation::lrelu(),
                };
                depth
            ],
            output_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::config(
                "network input and output widths must be >= 1",
            ));
        }
        for layer in &self.hidden_layers {
            if layer.width == 0 {
                return Err(Error::config("hidden layer widths must be >= 1"));
            }
            if let Activation::Lrelu { slope } = layer.activation {
                if !slope.is_finite() {
                    return Err(Error::config("LReLU slope must be finite"));
                }
            }
        }
        Ok(())
    }

    /// Widths of every layer from input to output.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_dim)
            .chain(self.hidden_layers.iter().map(|l| l.width))
            .chain(std::iter::once(self.output_dim))
            .collect()
    }

    pub fn num_layers(&self) -> usize {
        self.hidden_layers.len() + 1
    }

    fn activation(&self, layer: usize) -> Activation {
        self.hidden_layers
            .get(layer)
            .map_or(Activation::Linear, |l| l.activation)
    }

    pub fn num_params(&self) -> usize {
        self.widths().windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

/// Weights and biases of every layer. `weights[k]` has shape
/// `(width_k, width_{k-1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpParams {
    pub fn zeros(spec: &MlpSpec) -> Self {
        let widths = spec.widths();
        Self {
            weights: widths
                .windows(2)
                .map(|w| Matrix::zeros(w[1], w[0]))
                .collect(),
            biases: widths[1..].iter().map(|&w| vec![0.0; w]).collect(),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(spec: &MlpSpec, rng: &mut R) -> Self {
        let mut params = Self::zeros(spec);
        for w in &mut params.weights {
            let limit = (6.0 / (w.rows() + w.cols()) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
            for x in w.as_mut_slice() {
                *x = dist.sample(rng);
            }
        }
        params
    }

    pub fn check_shape(&self, spec: &MlpSpec) -> Result<()> {
        let widths = spec.widths();
        if self.weights.len() != spec.num_layers() || self.biases.len() != spec.num_layers() {
            return Err(Error::config("parameter layer count does not match spec"));
        }
        for (k, w) in widths.windows(2).enumerate() {
            if self.weights[k].rows() != w[1]
                || self.weights[k].cols() != w[0]
                || self.biases[k].len() != w[1]
            {
                return Err(Error::config(format!(
                    "layer {k} shape does not match spec"
                )));
            }
        }
        Ok(())
    }

    /// Parameter tensors in a fixed order: `W0, b0, W1, b1, ...`.
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w.as_mut_slice(), b.as_mut_slice()])
            .collect()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    pub fn load_flat(&mut self, flat: &[f64]) -> Result<()> {
        let total: usize = self.tensors().iter().map(|t| t.len()).sum();
        if flat.len() != total {
            return Err(Error::config(format!(
                "flat parameter vector has {} entries, expected {total}",
                flat.len()
            )));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&flat[offset..offset + t.len()]);
            offset += t.len();
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(Matrix::is_finite)
            && self.biases.iter().flatten().all(|x| x.is_finite())
    }

    pub fn fill_zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(0.0);
        }
    }

    /// `self += scale * other`; shapes must match.
    pub fn add_scaled(&mut self, other: &MlpParams, scale: f64) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }
}

/// Pre-activations and activations recorded during a forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    /// `activations[0]` is the input; `activations[k+1]` is layer k's output.
    pub activations: Vec<Vec<f64>>,
    pub pre_activations: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.activations
            .last()
            .expect("trace always holds the input")
    }
}

/// A network: its shape plus its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub spec: MlpSpec,
    pub params: MlpParams,
}

impl Mlp {
    pub fn new(spec: MlpSpec, params: MlpParams) -> Result<Self> {
        spec.validate()?;
        params.check_shape(&spec)?;
        Ok(Self { spec, params })
    }

    pub fn init<R: Rng + ?Sized>(spec: MlpSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let params = MlpParams::glorot(&spec, rng);
        Ok(Self { spec, params })
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut x = input.to_vec();
        for k in 0..self.spec.num_layers() {
            let act = self.spec.activation(k);
            let mut z = self.params.weights[k].matvec(&x);
            for (zi, bi) in z.iter_mut().zip(&self.params.biases[k]) {
                *zi = act.apply(*zi + bi);
            }
            x = z;
        }
        Ok(x)
    }

    pub fn forward_trace(&self, input: &[f64]) -> Result<Trace> {
        self.check_input(input)?;
        let layers = self.spec.num_layers();
        let mut activations = Vec::with_capacity(layers + 1);
        let mut pre_activations = Vec::with_capacity(layers);
        activations.push(input.to_vec());
        for k in 0..layers {
            let act = self.spec.activation(k);
            let mut z = self.params.weights[k].matvec(&activations[k]);
            for (zi, bi) in z.iter_mut().zip(&self.params.biases[k]) {
                *zi += bi;
            }
            let a = z.iter().map(|&v| act.apply(v)).collect();
            pre_activations.push(z);
            activations.push(a);
        }
        Ok(Trace {
            activations,
            pre_activations,
        })
    }

    /// Gradients of `output · output_grad` with respect to every parameter
    /// and to the input.
    pub fn backward(&self, input: &[f64], output_grad: &[f64]) -> Result<(MlpParams, Vec<f64>)> {
        let trace = self.forward_trace(input)?;
        let mut grads = MlpParams::zeros(&self.spec);
        let input_grad = self.backward_trace(&trace, output_grad, &mut grads, 1.0)?;
        Ok((grads, input_grad))
    }

    /// Accumulates `scale * d(output · output_grad)/dθ` into `grads` and
    /// returns the input gradient.
    pub fn backward_trace(
        &self,
        trace: &Trace,
        output_grad: &[f64],
        grads: &mut MlpParams,
        scale: f64,
    ) -> Result<Vec<f64>> {
        if output_grad.len() != self.spec.output_dim {
            return Err(Error::config(format!(
                "output gradient has length {}, network output is {}",
                output_grad.len(),
                self.spec.output_dim
            )));
        }
        let mut delta = output_grad.to_vec();
        for k in (0..self.spec.num_layers()).rev() {
            let act = self.spec.activation(k);
            for (d, &z) in delta.iter_mut().zip(&trace.pre_activations[k]) {
                *d *= act.derivative(z);
            }
            grads.weights[k].add_outer(&delta, &trace.activations[k], scale);
            for (gb, d) in grads.biases[k].iter_mut().zip(&delta) {
                *gb += scale * d;
            }
            delta = self.params.weights[k].matvec_transposed(&delta);
        }
        Ok(delta)
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.spec.input_dim {
            return Err(Error::config(format!(
                "network input has length {}, expected {}",
                input.len(),
                self.spec.input_dim
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_linear_model() {
        let spec = MlpSpec::linear(3, 3);
        let params = MlpParams {
            weights: vec![Matrix::identity(3)],
            biases: vec![vec![0.0; 3]],
        };
        let net = Mlp::new(spec, params).unwrap();
        assert_eq!(
            net.forward(&[1.5, -2.0, 0.25]).unwrap(),
            vec![1.5, -2.0, 0.25]
        );
    }

    #[test]
    fn zero_network_outputs_zero() {
        let spec = MlpSpec::lrelu(4, 5, 1, 2);
        let net = Mlp::new(spec.clone(), MlpParams::zeros(&spec)).unwrap();
        assert_eq!(net.forward(&[3.0, -1.0, 2.0, 7.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn hand_expanded_two_by_two() {
        // h = lrelu(W0 x + b0), y = W1 h + b1, x = (1, -1)
        // W0 x + b0 = (1*1 + 2*-1 + 0.5, 3*1 + -1*-1 - 1) = (-0.5, 3)
        // h = (-0.005, 3)
        // y = (1*-0.005 + -2*3 + 0.1, 0.5*-0.005 + 1*3 + 0) = (-5.905, 2.9975)
        let spec = MlpSpec::lrelu(2, 2, 1, 2);
        let params = MlpParams {
            weights: vec![
                Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, -1.0]).unwrap(),
                Matrix::from_vec(2, 2, vec![1.0, -2.0, 0.5, 1.0]).unwrap(),
            ],
            biases: vec![vec![0.5, -1.0], vec![0.1, 0.0]],
        };
        let net = Mlp::new(spec, params).unwrap();
        let y = net.forward(&[1.0, -1.0]).unwrap();
        assert!((y[0] - -5.905).abs() < 1e-12);
        assert!((y[1] - 2.9975).abs() < 1e-12);
    }

    #[test]
    fn lrelu_is_continuous_at_zero() {
        let act = Activation::lrelu();
        assert_eq!(act.apply(0.0), 0.0);
        assert!((act.apply(1e-12) - act.apply(-1e-12)).abs() < 1e-11);
        assert_eq!(act.apply(-2.0), -0.02);
        assert_eq!(act.apply(2.0), 2.0);
    }

    #[test]
    fn linear_gradient_is_outer_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::init(MlpSpec::linear(3, 2), &mut rng).unwrap();
        let x = [0.3, -1.2, 2.0];
        let g = [0.7, -0.4];
        let (grads, input_grad) = net.backward(&x, &g).unwrap();
        for (r, gr) in g.iter().enumerate() {
            for (c, xc) in x.iter().enumerate() {
                assert_eq!(grads.weights[0].get(r, c), gr * xc);
            }
        }
        assert_eq!(grads.biases[0], g.to_vec());
        let expected = net.params.weights[0].matvec_transposed(&g);
        assert_eq!(input_grad, expected);
    }

    #[test]
    fn zero_output_grad_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = Mlp::init(MlpSpec::lrelu(3, 8, 2, 2), &mut rng).unwrap();
        let (grads, input_grad) = net.backward(&[1.0, 2.0, 3.0], &[0.0, 0.0]).unwrap();
        assert!(grads.flatten().iter().all(|&g| g == 0.0));
        assert!(input_grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Mlp::init(MlpSpec::linear(3, 2), &mut rng).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(Error::Config(_))));
        assert!(matches!(
            net.backward(&[1.0, 2.0, 3.0], &[1.0]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn rejects_zero_width() {
        let spec = MlpSpec::lrelu(3, 0, 1, 2);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn flat_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let net = Mlp::init(MlpSpec::lrelu(4, 8, 2, 3), &mut rng).unwrap();
        let flat = net.params.flatten();
        assert_eq!(flat.len(), net.spec.num_params());
        let mut other = MlpParams::zeros(&net.spec);
        other.load_flat(&flat).unwrap();
        assert_eq!(other, net.params);
    }

    #[test]
    fn glorot_respects_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let spec = MlpSpec::lrelu(10, 20, 1, 5);
        let params = MlpParams::glorot(&spec, &mut rng);
        let limit0 = (6.0f64 / 30.0).sqrt();
        assert!(params.weights[0]
            .as_slice()
            .iter()
            .all(|w| w.abs() <= limit0));
        assert!(params.biases.iter().flatten().all(|&b| b == 0.0));
    }
}

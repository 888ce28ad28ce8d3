//! Numeric substrate: dense matrices, MLPs with analytic gradients,
//! likelihood heads, and Adam.

pub mod adam;
pub mod likelihood;
pub mod matrix;
pub mod mlp;

pub use adam::{AdamConfig, AdamState};
pub use likelihood::{argmax, gaussian_nll, softmax, softmax_nll, GaussianNll};
pub use matrix::Matrix;
pub use mlp::{Activation, HiddenLayer, Mlp, MlpParams, MlpSpec, Trace};

//! Behavioral cloning from observation.
//!
//! An agent first explores with a random policy and fits an inverse
//! dynamics model `P(a | s, s')` to what it saw. The model labels the
//! consecutive states of action-free expert demonstrations, and a policy
//! is cloned from the labelled pairs. With `α > 0` the cloned policy then
//! gathers `round(α · |I_pre|)` more interactions per iteration to refine
//! both models.
//!
//! ```no_run
//! use bco::{bco::BcoConfig, harness};
//!
//! let baselines = harness::env_baselines("cartpole", 1000, 0)?;
//! let demos = harness::demos_for("cartpole", 10, 0)?;
//! let config = BcoConfig::for_env("cartpole")?;
//! let run = harness::execute_run(&config, &demos, &baselines, 1000)?;
//! println!("scaled return {:.3}", run.score.scaled);
//! # Ok::<(), bco::Error>(())
//! ```

pub mod bc;
pub mod bco;
pub mod demos;
pub mod env;
pub mod error;
pub mod harness;
pub mod inverse;
pub mod model;
pub mod nn;
pub mod policy;
pub mod training;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use error::{Error, Result};

/// Independent generator number `stream` under `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

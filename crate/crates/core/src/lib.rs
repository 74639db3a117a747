//! Supervised tuning and composition of tabular synthetic-data generators.
//!
//! Each synthesizer's hyperparameters are tuned by TPE against the
//! validation AUC of a downstream classifier trained on its output
//! ([`sgoat`]); the tuned synthesizers are then mixed with weights learned
//! the same way ([`cgoat`]). [`harness`] runs the full repeated protocol.

pub mod cgoat;
pub mod data;
pub mod error;
pub mod eval;
pub mod scalar;
pub mod seed;
mod serde_float;
pub mod sgoat;
pub mod stats;
pub mod synth;
pub mod tpe;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Mixture weights in double precision, the precision used throughout the
/// optimisation loops.
pub type Weights = cgoat::MixtureWeights<f64>;
/// Single-precision mixture weights.
pub type Weights32 = cgoat::MixtureWeights<f32>;
pub mod harness;

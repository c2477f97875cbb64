//! Supervision-adaptation training for OOD-aware classifiers.
//!
//! The crate trains small dense ReLU classifiers with a family of objectives
//! that regularize the softmax output on a mixture of labeled in-distribution
//! (ID) samples and unlabeled out-of-distribution (OOD) samples, and scores
//! OOD inputs by their maximum softmax probability.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the trainer and CLI use.

pub mod datasets;
pub mod detection;
pub mod error;
pub mod gradnet;
pub mod matrix;
pub mod objective;
pub mod oracle;
pub mod runner;
pub mod scalar;

mod fsutil;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use scalar::Scalar;

pub type Params = gradnet::ParameterSet<f64>;
pub type Params32 = gradnet::ParameterSet<f32>;
pub type Batch = Matrix<f64>;
pub type Probs = objective::ProbMatrix<f64>;
pub type Prior = objective::ClassPrior<f64>;
pub type IdSet = datasets::LabeledSet<f64>;
pub type OodSet = datasets::UnlabeledSet<f64>;

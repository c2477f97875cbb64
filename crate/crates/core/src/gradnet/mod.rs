//! Dense feed-forward classifier: parameters, forward pass, reverse-mode
//! gradients, SGD and checkpoints.

pub mod checkpoint;
mod network;
mod params;
mod sgd;

pub use network::{forward, grad_of_loss, predict, ForwardPass, LogitLoss};
pub use params::{init_params, GradientSet, Layer, ParameterSet};
pub use sgd::{sgd_step, MomentumState, TrainConfig};

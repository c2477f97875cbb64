//! SGD with momentum and L2 weight decay, plus the step learning-rate schedule.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::params::{GradientSet, ParameterSet};

/// Velocity buffer carried between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumState<T> {
    velocity: ParameterSet<T>,
}

impl<T: Scalar> MomentumState<T> {
    pub fn new(params: &ParameterSet<T>) -> Self {
        Self {
            velocity: params.zeros_like(),
        }
    }

    pub fn velocity(&self) -> &ParameterSet<T> {
        &self.velocity
    }
}

/// One in-place update:
/// `v <- momentum * v + (grad + weight_decay * theta)`, `theta <- theta - lr * v`.
pub fn sgd_step<T: Scalar>(
    params: &mut ParameterSet<T>,
    grads: &GradientSet<T>,
    lr: T,
    state: &mut MomentumState<T>,
    momentum: T,
    weight_decay: T,
) -> Result<()> {
    if !params.same_shape(grads) || !params.same_shape(&state.velocity) {
        return Err(Error::shape(
            "parameters, gradients and momentum state differ in shape",
        ));
    }
    if !(lr > T::zero()) {
        return Err(Error::invalid(format!("learning rate must be > 0, got {lr}")));
    }
    for ((theta, g), v) in params
        .iter_mut()
        .zip(grads.iter())
        .zip(state.velocity.iter_mut())
    {
        *v = momentum * *v + (*g + weight_decay * *theta);
        *theta -= lr * *v;
    }
    Ok(())
}

/// Optimizer and schedule settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Input, hidden and output widths.
    pub layer_sizes: Vec<usize>,
    pub lr0: f64,
    /// Epochs (0-based) at which the rate is multiplied by `lr_decay_factor`.
    pub lr_decay_epochs: Vec<usize>,
    pub lr_decay_factor: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            layer_sizes: vec![2, 64, 64, 4],
            lr0: 0.1,
            lr_decay_epochs: vec![100, 150],
            lr_decay_factor: 0.1,
            momentum: 0.9,
            weight_decay: 1e-4,
            epochs: 200,
            batch_size: 128,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.layer_sizes.len() < 2 || self.layer_sizes.contains(&0) {
            return bad(format!("layer sizes must be >= 2 positive entries, got {:?}", self.layer_sizes));
        }
        if !(self.lr0.is_finite() && self.lr0 > 0.0) {
            return bad(format!("lr0 must be > 0, got {}", self.lr0));
        }
        if !(self.lr_decay_factor.is_finite() && self.lr_decay_factor > 0.0) {
            return bad(format!("lr_decay_factor must be > 0, got {}", self.lr_decay_factor));
        }
        if !(self.momentum.is_finite() && (0.0..1.0).contains(&self.momentum)) {
            return bad(format!("momentum must be in [0,1), got {}", self.momentum));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad(format!("weight_decay must be >= 0, got {}", self.weight_decay));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.lr_decay_epochs.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!(
                "lr_decay_epochs must be strictly increasing, got {:?}",
                self.lr_decay_epochs
            ));
        }
        if let Some(&last) = self.lr_decay_epochs.last() {
            if last >= self.epochs {
                return bad(format!(
                    "lr decay epoch {last} is not below epochs = {}",
                    self.epochs
                ));
            }
        }
        Ok(())
    }

    /// `lr0 * factor^(number of decay epochs <= epoch)`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let decays = self.lr_decay_epochs.iter().filter(|&&e| e <= epoch).count();
        self.lr0 * self.lr_decay_factor.powi(decays as i32)
    }
}

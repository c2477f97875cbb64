//! Probability transforms and the loss family: cross-entropy, the
//! supervision-adaptation objective, its MSMI and MBCE components, and the
//! terms of their combined lower bound.
//!
//! All objectives are returned in maximization form. [`BatchLoss`] negates
//! them for the minimizing trainer.

mod batch;
mod losses;
mod probs;

pub use batch::BatchLoss;
pub use losses::{
    bound_terms, ce_term, discriminator_d, mbce_loss, msmi_loss, sa_loss, sa_regularizer,
    tied_beta, LossBreakdown, Objective, ProbGrad,
};
pub use probs::{class_prior, softmax_backward, softmax_probs, ClassPrior, MixBatch, ProbMatrix};

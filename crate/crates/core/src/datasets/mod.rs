//! In-distribution and OOD sample sets, synthetic generators, CSV loading and
//! mixture batching.

mod batches;
mod csv;
mod synth;

pub use batches::{make_batches, ood_budget, BatchPlan, MixSpec};
pub use csv::{load_csv, load_labeled_csv, load_unlabeled_csv, write_csv, Loaded};
pub use synth::{gen_id_gaussians, gen_ood, OodKind, ID_CENTER_RADIUS};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Labeled ID samples. Every class in `0..classes` occurs at least once.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet<T> {
    x: Matrix<T>,
    y: Vec<usize>,
    classes: usize,
}

impl<T: Scalar> LabeledSet<T> {
    pub fn new(x: Matrix<T>, y: Vec<usize>, classes: usize) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::shape(format!("{} rows but {} labels", x.rows(), y.len())));
        }
        if classes < 2 {
            return Err(Error::invalid(format!("need at least 2 classes, got {classes}")));
        }
        let mut seen = vec![false; classes];
        for &label in &y {
            if label >= classes {
                return Err(Error::invalid(format!(
                    "label {label} out of range for {classes} classes"
                )));
            }
            seen[label] = true;
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(format!("class {c} has no samples")));
        }
        if !x.all_finite() {
            return Err(Error::non_finite("labeled features"));
        }
        Ok(Self { x, y, classes })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn x(&self) -> &Matrix<T> {
        &self.x
    }

    pub fn y(&self) -> &[usize] {
        &self.y
    }
}

/// Label-free OOD samples.
#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledSet<T> {
    x: Matrix<T>,
}

impl<T: Scalar> UnlabeledSet<T> {
    pub fn new(x: Matrix<T>) -> Result<Self> {
        if !x.all_finite() {
            return Err(Error::non_finite("unlabeled features"));
        }
        Ok(Self { x })
    }

    pub fn empty(dim: usize) -> Self {
        Self { x: Matrix::zeros(0, dim) }
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn x(&self) -> &Matrix<T> {
        &self.x
    }

    /// Splits off the first `n` rows; returns `(head, tail)`.
    pub fn split_at(&self, n: usize) -> (Self, Self) {
        let n = n.min(self.len());
        (
            Self { x: self.x.slice_rows(0, n) },
            Self { x: self.x.slice_rows(n, self.len()) },
        )
    }
}

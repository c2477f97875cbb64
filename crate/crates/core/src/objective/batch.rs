use crate::error::{Error, Result};
use crate::gradnet::LogitLoss;
use crate::matrix::Matrix;
use crate::scalar::{Scalar, LOG_FLOOR};

use super::losses::Objective;
use super::probs::{softmax_backward, softmax_probs, ClassPrior, ProbMatrix};

/// Minimization loss over the logits of a stacked batch (ID rows first, then
/// OOD rows). Its value is the negated objective; the ID rows also count as
/// mixture rows.
#[derive(Debug, Clone)]
pub struct BatchLoss<'a, T> {
    pub objective: Objective<T>,
    pub labels: &'a [usize],
    pub prior: &'a ClassPrior<T>,
}

impl<'a, T: Scalar> BatchLoss<'a, T> {
    pub fn new(objective: Objective<T>, labels: &'a [usize], prior: &'a ClassPrior<T>) -> Self {
        Self {
            objective,
            labels,
            prior,
        }
    }

    /// Objective value (maximization form) without gradients.
    pub fn objective_value(&self, logits: &Matrix<T>) -> Result<T> {
        let n_id = self.split(logits)?;
        let mix = softmax_probs(logits)?;
        let id = mix.slice_rows(0, n_id);
        self.objective.value(&id, self.labels, &mix, self.prior)
    }

    fn split(&self, logits: &Matrix<T>) -> Result<usize> {
        let n_id = self.labels.len();
        if logits.rows() < n_id {
            return Err(Error::shape(format!(
                "{} logit rows cannot hold {} labeled rows",
                logits.rows(),
                n_id
            )));
        }
        Ok(n_id)
    }
}

impl<T: Scalar> LogitLoss<T> for BatchLoss<'_, T> {
    fn value_and_grad(&self, logits: &Matrix<T>) -> Result<(T, Matrix<T>)> {
        let n_id = self.split(logits)?;
        let mix = softmax_probs(logits)?;
        let id = mix.slice_rows(0, n_id);
        let value = self.objective.value(&id, self.labels, &mix, self.prior)?;
        if let Objective::CrossEntropy = self.objective {
            return Ok((-value, ce_logit_grad(&mix, self.labels)));
        }
        let pg = self.objective.prob_grad(&id, self.labels, &mix, self.prior)?;
        let mut total = pg.mix;
        for i in 0..n_id {
            for (t, &g) in total.row_mut(i).iter_mut().zip(pg.id.row(i)) {
                *t += g;
            }
        }
        total.as_mut_slice().iter_mut().for_each(|g| *g = -*g);
        Ok((-value, softmax_backward(&mix, &total)?))
    }
}

/// Fused softmax cross-entropy gradient `(phi - onehot(y)) / M` on the ID
/// rows, zero elsewhere. Rows whose true-class probability is under the log
/// floor get zero, matching the clamped value.
fn ce_logit_grad<T: Scalar>(probs: &ProbMatrix<T>, labels: &[usize]) -> Matrix<T> {
    let mut g = Matrix::zeros(probs.len(), probs.classes());
    let scale = T::one() / T::from_count(labels.len());
    for (i, &y) in labels.iter().enumerate() {
        let row = probs.row(i);
        if row[y] < T::lit(LOG_FLOOR) {
            continue;
        }
        for (o, &p) in g.row_mut(i).iter_mut().zip(row) {
            *o = p * scale;
        }
        g.row_mut(i)[y] -= scale;
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::class_prior;

    #[test]
    fn fused_ce_matches_chain_rule() {
        let logits = Matrix::from_rows(&[
            [0.3, -1.2, 2.0],
            [1.5, 0.1, -0.4],
            [-0.7, 0.9, 0.2],
            [0.0, 0.0, 3.0],
        ])
        .unwrap();
        let labels = [2, 0, 1];
        let prior = class_prior::<f64>(&labels, 3).unwrap();
        let loss = BatchLoss::new(Objective::CrossEntropy, &labels, &prior);
        let (value, fused) = loss.value_and_grad(&logits).unwrap();

        let mix = softmax_probs(&logits).unwrap();
        let id = mix.slice_rows(0, 3);
        let pg = Objective::CrossEntropy.prob_grad(&id, &labels, &mix, &prior).unwrap();
        let mut total = pg.mix;
        for i in 0..3 {
            for (t, &g) in total.row_mut(i).iter_mut().zip(pg.id.row(i)) {
                *t -= g;
            }
        }
        let chain = softmax_backward(&mix, &total).unwrap();
        for (a, b) in fused.as_slice().iter().zip(chain.as_slice()) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
        assert!((value + loss.objective_value(&logits).unwrap()).abs() < 1e-15);
        assert!(fused.row(3).iter().all(|&g| g == 0.0));
    }
}

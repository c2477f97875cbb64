//! The objective family, all in maximization form.
//!
//! Every loss takes the ID probability rows with their labels and the
//! mixture rows (ID and OOD samples of the same batch). Expectations are
//! uniform means over the concrete rows. Logarithm arguments are floored at
//! [`LOG_FLOOR`](crate::scalar::LOG_FLOOR).

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::{clamped_ln, clamped_ln_deriv, Scalar};

use super::probs::{ClassPrior, ProbMatrix};

fn check_id<T: Scalar>(id: &ProbMatrix<T>, labels: &[usize]) -> Result<()> {
    if id.is_empty() {
        return Err(Error::invalid("empty ID batch"));
    }
    if id.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} ID probability rows but {} labels",
            id.len(),
            labels.len()
        )));
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= id.classes()) {
        return Err(Error::invalid(format!(
            "label {y} out of range for {} classes",
            id.classes()
        )));
    }
    Ok(())
}

fn check_mix<T: Scalar>(id: &ProbMatrix<T>, mix: &ProbMatrix<T>) -> Result<()> {
    if mix.is_empty() {
        return Err(Error::invalid("empty mixture batch"));
    }
    if mix.classes() != id.classes() {
        return Err(Error::shape(format!(
            "mixture rows have {} classes, ID rows have {}",
            mix.classes(),
            id.classes()
        )));
    }
    Ok(())
}

fn check_prior<T: Scalar>(id: &ProbMatrix<T>, prior: &ClassPrior<T>) -> Result<()> {
    if prior.classes() != id.classes() {
        return Err(Error::shape(format!(
            "prior has {} classes, probabilities have {}",
            prior.classes(),
            id.classes()
        )));
    }
    Ok(())
}

fn mean_over<T: Scalar>(rows: usize, f: impl Fn(usize) -> T) -> T {
    (0..rows).map(f).sum::<T>() / T::from_count(rows)
}

/// `phi / (1 + phi)`, i.e. `sigmoid(ln phi)`.
#[inline]
pub(crate) fn density_ratio<T: Scalar>(phi: T) -> T {
    phi / (T::one() + phi)
}

/// Shannon entropy of one row, with the clamped log.
#[inline]
fn entropy<T: Scalar>(row: &[T]) -> T {
    -row.iter().map(|&p| p * clamped_ln(p)).sum::<T>()
}

/// `ln(1 - D) = -ln(1 + phi)`, weighted by the prior and summed over classes.
#[inline]
fn weighted_log_one_minus_d<T: Scalar>(row: &[T], prior: &ClassPrior<T>) -> T {
    row.iter()
        .zip(prior.as_slice())
        .map(|(&p, &w)| -w * p.ln_1p())
        .sum()
}

/// Mean log-probability of the true label over ID rows (≤ 0).
pub fn ce_term<T: Scalar>(id: &ProbMatrix<T>, labels: &[usize]) -> Result<T> {
    check_id(id, labels)?;
    Ok(mean_over(id.len(), |i| clamped_ln(id.row(i)[labels[i]])))
}

/// `R(x) = sum_y (P_I(y) - phi_y) ln phi_y`.
pub fn sa_regularizer<T: Scalar>(row: &[T], prior: &ClassPrior<T>) -> T {
    row.iter()
        .zip(prior.as_slice())
        .map(|(&p, &w)| (w - p) * clamped_ln(p))
        .sum()
}

/// Empirical supervision-adaptation objective:
/// `mean_ID ln phi(x,y) + alpha * mean_mix R(x)`.
pub fn sa_loss<T: Scalar>(
    id: &ProbMatrix<T>,
    labels: &[usize],
    mix: &ProbMatrix<T>,
    prior: &ClassPrior<T>,
    alpha: T,
) -> Result<T> {
    check_id(id, labels)?;
    check_mix(id, mix)?;
    check_prior(id, prior)?;
    check_unit_interval("alpha", alpha, true)?;
    let ce = ce_term(id, labels)?;
    let reg = mean_over(mix.len(), |j| sa_regularizer(mix.row(j), prior));
    Ok(ce + alpha * reg)
}

/// `D = sigmoid(ln phi) = phi / (1 + phi)` for `phi` in `(0, 1]`.
pub fn discriminator_d<T: Scalar>(phi: T) -> Result<T> {
    if !(phi > T::zero() && phi <= T::one()) {
        return Err(Error::invalid(format!("probability {phi} outside (0,1]")));
    }
    Ok(density_ratio(phi))
}

/// Multiple-binary-cross-entropy objective, signs as derived:
/// `mean_ID ln D(x,y) - mean_mix sum_y P_I(y) ln(1 - D(x,y))`.
pub fn mbce_loss<T: Scalar>(
    id: &ProbMatrix<T>,
    labels: &[usize],
    mix: &ProbMatrix<T>,
    prior: &ClassPrior<T>,
) -> Result<T> {
    check_id(id, labels)?;
    check_mix(id, mix)?;
    check_prior(id, prior)?;
    let pos = mean_over(id.len(), |i| clamped_ln(density_ratio(id.row(i)[labels[i]])));
    let neg = mean_over(mix.len(), |j| weighted_log_one_minus_d(mix.row(j), prior));
    Ok(pos - neg)
}

/// Mixed-space MI objective with the model's own rows standing in for the
/// unknown targets: `mean_ID ln phi(x,y) + beta * mean_mix H(phi(x, .))`.
pub fn msmi_loss<T: Scalar>(
    id: &ProbMatrix<T>,
    labels: &[usize],
    mix: &ProbMatrix<T>,
    beta: T,
) -> Result<T> {
    check_id(id, labels)?;
    check_mix(id, mix)?;
    if !(beta >= T::zero() && beta.is_finite()) {
        return Err(Error::invalid(format!("beta must be >= 0, got {beta}")));
    }
    let ce = ce_term(id, labels)?;
    let ent = mean_over(mix.len(), |j| entropy(mix.row(j)));
    Ok(ce + beta * ent)
}

fn check_unit_interval<T: Scalar>(name: &str, v: T, closed: bool) -> Result<()> {
    let ok = v >= T::zero() && if closed { v <= T::one() } else { v < T::one() };
    if !ok {
        let hi = if closed { "]" } else { ")" };
        return Err(Error::invalid(format!("{name} must be in [0,1{hi}, got {v}")));
    }
    Ok(())
}

/// The four terms of the combined MSMI/MBCE objective with `beta` tied to
/// `alpha / (1 - alpha)`, plus the three losses on the same batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
    pub sa: T,
    pub msmi: T,
    pub mbce: T,
}

impl<T: Scalar> LossBreakdown<T> {
    pub fn combined(&self) -> T {
        self.a + self.b + self.c + self.d
    }
}

/// `beta = alpha / (1 - alpha)`.
pub fn tied_beta<T: Scalar>(alpha: T) -> Result<T> {
    check_unit_interval("alpha", alpha, false)?;
    Ok(alpha / (T::one() - alpha))
}

pub fn bound_terms<T: Scalar>(
    id: &ProbMatrix<T>,
    labels: &[usize],
    mix: &ProbMatrix<T>,
    prior: &ClassPrior<T>,
    alpha: T,
) -> Result<LossBreakdown<T>> {
    let beta = tied_beta(alpha)?;
    check_id(id, labels)?;
    check_mix(id, mix)?;
    check_prior(id, prior)?;
    let one_m = T::one() - alpha;
    let log_phi = mean_over(id.len(), |i| clamped_ln(id.row(i)[labels[i]]));
    let log_d = mean_over(id.len(), |i| clamped_ln(density_ratio(id.row(i)[labels[i]])));
    let neg_ent = mean_over(mix.len(), |j| -entropy(mix.row(j)));
    let log_1md = mean_over(mix.len(), |j| weighted_log_one_minus_d(mix.row(j), prior));
    Ok(LossBreakdown {
        a: one_m * log_phi,
        b: -one_m * beta * neg_ent,
        c: alpha * log_d,
        d: -alpha * log_1md,
        sa: sa_loss(id, labels, mix, prior, alpha)?,
        msmi: msmi_loss(id, labels, mix, beta)?,
        mbce: mbce_loss(id, labels, mix, prior)?,
    })
}

/// Gradient of an objective with respect to its two probability inputs,
/// treating the ID rows and the mixture rows as independent arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbGrad<T> {
    pub id: Matrix<T>,
    pub mix: Matrix<T>,
}

impl<T: Scalar> ProbGrad<T> {
    fn zeros(id: &ProbMatrix<T>, mix: &ProbMatrix<T>) -> Self {
        Self {
            id: Matrix::zeros(id.len(), id.classes()),
            mix: Matrix::zeros(mix.len(), mix.classes()),
        }
    }
}

/// Which member of the objective family to optimize.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective<T> {
    /// Plain cross-entropy (mean log-likelihood of the true label).
    CrossEntropy,
    Sa { alpha: T },
    /// `stop_gradient` detaches the target factor of the entropy term; the
    /// default lets gradients flow through both factors.
    Msmi { beta: T, stop_gradient: bool },
    Mbce,
}

impl<T: Scalar> Objective<T> {
    /// Objective value (to be maximized).
    pub fn value(
        &self,
        id: &ProbMatrix<T>,
        labels: &[usize],
        mix: &ProbMatrix<T>,
        prior: &ClassPrior<T>,
    ) -> Result<T> {
        match *self {
            Objective::CrossEntropy => ce_term(id, labels),
            Objective::Sa { alpha } => sa_loss(id, labels, mix, prior, alpha),
            Objective::Msmi { beta, .. } => msmi_loss(id, labels, mix, beta),
            Objective::Mbce => mbce_loss(id, labels, mix, prior),
        }
    }

    /// Gradient of [`value`](Self::value) with respect to the probabilities.
    pub fn prob_grad(
        &self,
        id: &ProbMatrix<T>,
        labels: &[usize],
        mix: &ProbMatrix<T>,
        prior: &ClassPrior<T>,
    ) -> Result<ProbGrad<T>> {
        check_id(id, labels)?;
        if !matches!(self, Objective::CrossEntropy) {
            check_mix(id, mix)?;
            check_prior(id, prior)?;
        }
        let mut g = ProbGrad::zeros(id, mix);
        let m = T::from_count(id.len());
        let n = T::from_count(mix.len().max(1));
        match *self {
            Objective::CrossEntropy => ce_grad(id, labels, &mut g.id),
            Objective::Sa { alpha } => {
                check_unit_interval("alpha", alpha, true)?;
                ce_grad(id, labels, &mut g.id);
                let scale = alpha / n;
                for j in 0..mix.len() {
                    for ((o, &p), &w) in g.mix.row_mut(j).iter_mut().zip(mix.row(j)).zip(prior.as_slice()) {
                        *o = scale * ((w - p) * clamped_ln_deriv(p) - clamped_ln(p));
                    }
                }
            }
            Objective::Msmi { beta, stop_gradient } => {
                ce_grad(id, labels, &mut g.id);
                let scale = beta / n;
                for j in 0..mix.len() {
                    for (o, &p) in g.mix.row_mut(j).iter_mut().zip(mix.row(j)) {
                        let through_log = -p * clamped_ln_deriv(p);
                        *o = scale
                            * if stop_gradient {
                                through_log
                            } else {
                                through_log - clamped_ln(p)
                            };
                    }
                }
            }
            Objective::Mbce => {
                for (i, &y) in labels.iter().enumerate() {
                    let p = id.row(i)[y];
                    let d = density_ratio(p);
                    // d/dphi ln(phi / (1 + phi)) = 1 / (phi (1 + phi))
                    let dd = if d > T::lit(crate::scalar::LOG_FLOOR) {
                        (p * (T::one() + p)).recip()
                    } else {
                        T::zero()
                    };
                    g.id.set(i, y, dd / m);
                }
                for j in 0..mix.len() {
                    for ((o, &p), &w) in g.mix.row_mut(j).iter_mut().zip(mix.row(j)).zip(prior.as_slice()) {
                        *o = w / (T::one() + p) / n;
                    }
                }
            }
        }
        Ok(g)
    }
}

fn ce_grad<T: Scalar>(id: &ProbMatrix<T>, labels: &[usize], out: &mut Matrix<T>) {
    let m = T::from_count(id.len());
    for (i, &y) in labels.iter().enumerate() {
        out.set(i, y, clamped_ln_deriv(id.row(i)[y]) / m);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pm(rows: &[&[f64]]) -> ProbMatrix<f64> {
        ProbMatrix::from_rows(rows).unwrap()
    }

    fn half() -> ClassPrior<f64> {
        ClassPrior::new(vec![0.5, 0.5]).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn ce_examples() {
        close(ce_term(&pm(&[&[1.0, 0.0], &[0.0, 1.0]]), &[0, 1]).unwrap(), 0.0, 0.0);
        let uni = pm(&[&[0.25; 4], &[0.25; 4]]);
        close(ce_term(&uni, &[3, 1]).unwrap(), -1.386294, 1e-6);
        close(ce_term(&pm(&[&[0.8, 0.2]]), &[0]).unwrap(), -0.223144, 1e-6);
        assert!(ce_term(&ProbMatrix::<f64>::from_rows::<[f64; 2]>(&[]).unwrap(), &[]).is_err());
    }

    #[test]
    fn regularizer_examples() {
        let p = ClassPrior::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        close(sa_regularizer(&[0.25; 4], &p), 0.0, 1e-15);
        close(sa_regularizer(&[0.1, 0.2, 0.3, 0.4], &p), 0.0, 0.0);
        close(sa_regularizer(&[0.9, 0.1], &half()), -0.878890, 1e-6);
    }

    #[test]
    fn sa_examples() {
        let id = pm(&[&[0.8, 0.2]]);
        let mix = pm(&[&[0.8, 0.2], &[0.5, 0.5]]);
        close(sa_loss(&id, &[0], &mix, &half(), 0.2).unwrap(), -0.264732, 1e-6);
        close(
            sa_loss(&id, &[0], &mix, &half(), 0.0).unwrap(),
            ce_term(&id, &[0]).unwrap(),
            0.0,
        );
        let uni = pm(&[&[0.5, 0.5], &[0.5, 0.5]]);
        close(
            sa_loss(&id, &[0], &uni, &half(), 0.7).unwrap(),
            ce_term(&id, &[0]).unwrap(),
            0.0,
        );
        assert!(sa_loss(&id, &[0], &mix, &half(), 1.5).is_err());
    }

    #[test]
    fn discriminator_examples() {
        assert_eq!(discriminator_d(1.0).unwrap(), 0.5);
        close(discriminator_d(0.5).unwrap(), 1.0 / 3.0, 1e-15);
        close(discriminator_d(1e-12).unwrap(), 1e-12, 1e-20);
        assert!(discriminator_d(0.0).is_err());
        assert!(discriminator_d(1.01).is_err());
    }

    #[test]
    fn mbce_examples() {
        let id = pm(&[&[0.8, 0.2]]);
        let mix = pm(&[&[0.8, 0.2], &[0.5, 0.5]]);
        close(mbce_loss(&id, &[0], &mix, &half()).unwrap(), -0.415670, 1e-6);
        let id = pm(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let mix = pm(&[&[0.5, 0.5], &[0.5, 0.5]]);
        close(mbce_loss(&id, &[0, 1], &mix, &half()).unwrap(), -0.287682, 1e-6);
    }

    #[test]
    fn msmi_examples() {
        let id = pm(&[&[0.8, 0.2]]);
        let mix = pm(&[&[0.8, 0.2], &[0.5, 0.5]]);
        close(msmi_loss(&id, &[0], &mix, 0.25).unwrap(), -0.073949, 1e-6);
        close(msmi_loss(&id, &[0], &mix, 0.0).unwrap(), ce_term(&id, &[0]).unwrap(), 0.0);
        let onehot = pm(&[&[1.0, 0.0], &[0.0, 1.0]]);
        close(
            msmi_loss(&id, &[0], &onehot, 3.0).unwrap(),
            ce_term(&id, &[0]).unwrap(),
            0.0,
        );
    }

    #[test]
    fn bound_terms_degenerate_alpha() {
        let id = pm(&[&[0.7, 0.3], &[0.4, 0.6]]);
        let mix = pm(&[&[0.7, 0.3], &[0.4, 0.6], &[0.5, 0.5]]);
        let br = bound_terms(&id, &[0, 1], &mix, &half(), 0.0).unwrap();
        let ce = ce_term(&id, &[0, 1]).unwrap();
        assert_eq!(br.a, ce);
        assert_eq!(br.sa, ce);
        assert_eq!((br.b, br.c, br.d), (0.0, 0.0, 0.0));
        assert!(bound_terms(&id, &[0, 1], &mix, &half(), 1.0).is_err());
    }

    #[test]
    fn bound_chain_on_small_batch() {
        let id = pm(&[&[0.7, 0.3], &[0.4, 0.6]]);
        let mix = pm(&[&[0.7, 0.3], &[0.4, 0.6], &[0.9, 0.1]]);
        let alpha = 0.2;
        let br = bound_terms(&id, &[0, 1], &mix, &half(), alpha).unwrap();
        assert!(br.combined() >= br.sa - alpha * 2f64.ln() - 1e-9);
    }

    #[test]
    fn saturated_rows_make_ac_slack_vanish() {
        // phi(true) = 1: A + C = mean ln phi - alpha ln 2 exactly.
        let id = pm(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let mix = pm(&[&[0.5, 0.5]]);
        let alpha = 0.3;
        let br = bound_terms(&id, &[0, 1], &mix, &half(), alpha).unwrap();
        close(br.a + br.c, -alpha * 2f64.ln(), 1e-15);
    }

    #[test]
    fn log_one_minus_d_identity() {
        for &p in &[1e-9_f64, 0.1, 0.5, 0.99, 1.0] {
            let d = discriminator_d(p).unwrap();
            close((1.0 - d).ln() + p.ln_1p(), 0.0, 1e-12);
        }
    }

    #[test]
    fn stop_gradient_entropy_term_vanishes_through_softmax() {
        use super::super::probs::softmax_backward;
        let id = pm(&[&[0.6, 0.4]]);
        let mix = pm(&[&[0.6, 0.4], &[0.3, 0.7]]);
        let obj = Objective::Msmi { beta: 1.0, stop_gradient: true };
        let g = obj.prob_grad(&id, &[0], &mix, &half()).unwrap();
        let dz = softmax_backward(&mix, &g.mix).unwrap();
        assert!(dz.as_slice().iter().all(|v| v.abs() < 1e-15));
    }
}

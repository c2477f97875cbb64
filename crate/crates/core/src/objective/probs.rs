use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Row-sum tolerance for probability rows: `1e-9` for `f64`, looser for `f32`.
pub(crate) fn simplex_tol<T: Scalar>() -> T {
    T::lit(1e-9).max(T::epsilon() * T::lit(100.0))
}

/// Softmax outputs, one probability row per sample.
///
/// Rows lie on the simplex: entries in `[0, 1]` summing to one. Rows produced
/// by [`softmax_probs`] are strictly positive unless the logit spread exceeds
/// the exponent range of `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix<T> {
    probs: Matrix<T>,
}

impl<T: Scalar> ProbMatrix<T> {
    /// Validates that every row is a probability vector.
    pub fn new(probs: Matrix<T>) -> Result<Self> {
        let tol = simplex_tol::<T>();
        for (i, row) in probs.iter_rows().enumerate() {
            if row.iter().any(|&p| !(p >= T::zero() && p <= T::one())) {
                return Err(Error::invalid(format!("row {i} has entries outside [0,1]")));
            }
            let s: T = row.iter().copied().sum();
            if (s - T::one()).abs() > tol {
                return Err(Error::invalid(format!("row {i} sums to {s}, not 1")));
            }
        }
        Ok(Self { probs })
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn len(&self) -> usize {
        self.probs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.rows() == 0
    }

    pub fn classes(&self) -> usize {
        self.probs.cols()
    }

    pub fn row(&self, i: usize) -> &[T] {
        self.probs.row(i)
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.probs.iter_rows()
    }

    pub fn as_matrix(&self) -> &Matrix<T> {
        &self.probs
    }

    /// Contiguous block of rows.
    pub fn slice_rows(&self, start: usize, end: usize) -> Self {
        Self {
            probs: self.probs.slice_rows(start, end),
        }
    }
}

/// Row-wise softmax with max-shift stabilization.
pub fn softmax_probs<T: Scalar>(logits: &Matrix<T>) -> Result<ProbMatrix<T>> {
    if logits.cols() < 2 {
        return Err(Error::invalid(format!(
            "softmax needs at least 2 classes, got {}",
            logits.cols()
        )));
    }
    if !logits.all_finite() {
        return Err(Error::non_finite("logits"));
    }
    let mut probs = Matrix::zeros(logits.rows(), logits.cols());
    for r in 0..logits.rows() {
        let z = logits.row(r);
        let m = z.iter().copied().fold(T::neg_infinity(), T::max);
        let out = probs.row_mut(r);
        let mut total = T::zero();
        for (o, &zi) in out.iter_mut().zip(z) {
            *o = (zi - m).exp();
            total += *o;
        }
        for o in out.iter_mut() {
            *o /= total;
        }
    }
    Ok(ProbMatrix { probs })
}

/// Pulls a gradient with respect to probabilities back to the logits:
/// `dz_k = phi_k * (g_k - sum_j phi_j g_j)`.
pub fn softmax_backward<T: Scalar>(probs: &ProbMatrix<T>, prob_grad: &Matrix<T>) -> Result<Matrix<T>> {
    if prob_grad.rows() != probs.len() || prob_grad.cols() != probs.classes() {
        return Err(Error::shape(format!(
            "probability gradient is {}x{}, probabilities are {}x{}",
            prob_grad.rows(),
            prob_grad.cols(),
            probs.len(),
            probs.classes()
        )));
    }
    let mut out = Matrix::zeros(probs.len(), probs.classes());
    for r in 0..probs.len() {
        let phi = probs.row(r);
        let g = prob_grad.row(r);
        let dot: T = phi.iter().zip(g).map(|(&p, &gi)| p * gi).sum();
        for ((o, &p), &gi) in out.row_mut(r).iter_mut().zip(phi).zip(g) {
            *o = p * (gi - dot);
        }
    }
    Ok(out)
}

/// Empirical ID class distribution `P_I(y)`, strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassPrior<T> {
    p: Vec<T>,
}

impl<T: Scalar> ClassPrior<T> {
    /// Validates a user-supplied prior.
    pub fn new(p: Vec<T>) -> Result<Self> {
        if p.len() < 2 {
            return Err(Error::invalid("a class prior needs at least 2 classes"));
        }
        if let Some(y) = p.iter().position(|&v| !(v > T::zero() && v.is_finite())) {
            return Err(Error::invalid(format!("prior entry for class {y} is not positive")));
        }
        let s: T = p.iter().copied().sum();
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(16.0));
        if (s - T::one()).abs() > tol {
            return Err(Error::invalid(format!("prior sums to {s}, not 1")));
        }
        Ok(Self { p })
    }

    pub fn classes(&self) -> usize {
        self.p.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.p
    }

    pub fn get(&self, y: usize) -> T {
        self.p[y]
    }
}

/// `p[y] = count(y) / M`. Every class in `0..classes` must occur.
pub fn class_prior<T: Scalar>(labels: &[usize], classes: usize) -> Result<ClassPrior<T>> {
    if labels.is_empty() {
        return Err(Error::invalid("cannot estimate a class prior from zero labels"));
    }
    let mut counts = vec![0usize; classes];
    for &y in labels {
        if y >= classes {
            return Err(Error::invalid(format!("label {y} out of range for {classes} classes")));
        }
        counts[y] += 1;
    }
    if let Some(y) = counts.iter().position(|&c| c == 0) {
        return Err(Error::invalid(format!("class {y} absent from labels")));
    }
    let m = T::from_count(labels.len());
    ClassPrior::new(counts.into_iter().map(|c| T::from_count(c) / m).collect())
}

/// One optimizer step's worth of samples: labeled ID rows and unlabeled OOD rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MixBatch<T> {
    pub id_x: Matrix<T>,
    pub id_y: Vec<usize>,
    pub ood_x: Matrix<T>,
}

impl<T: Scalar> MixBatch<T> {
    pub fn new(id_x: Matrix<T>, id_y: Vec<usize>, ood_x: Matrix<T>) -> Result<Self> {
        if id_x.rows() == 0 {
            return Err(Error::invalid("a batch needs at least one ID sample"));
        }
        if id_x.rows() != id_y.len() {
            return Err(Error::shape(format!(
                "{} ID rows but {} labels",
                id_x.rows(),
                id_y.len()
            )));
        }
        if ood_x.rows() > 0 && ood_x.cols() != id_x.cols() {
            return Err(Error::shape(format!(
                "OOD rows have {} features, ID rows have {}",
                ood_x.cols(),
                id_x.cols()
            )));
        }
        Ok(Self { id_x, id_y, ood_x })
    }

    pub fn id_len(&self) -> usize {
        self.id_x.rows()
    }

    pub fn ood_len(&self) -> usize {
        self.ood_x.rows()
    }

    /// ID rows followed by OOD rows.
    pub fn stacked(&self) -> Matrix<T> {
        self.id_x.vstack(&self.ood_x).expect("shapes checked at construction")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_row(z: &[f64]) -> Vec<f64> {
        let m = Matrix::from_rows(&[z]).unwrap();
        softmax_probs(&m).unwrap().row(0).to_vec()
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(one_row(&[0.0, 0.0, 0.0, 0.0]), vec![0.25; 4]);
        let r = one_row(&[0.0, 3.0_f64.ln()]);
        assert!((r[0] - 0.25).abs() < 1e-15 && (r[1] - 0.75).abs() < 1e-15);
        assert_eq!(one_row(&[1000.0, 1000.0]), vec![0.5, 0.5]);
    }

    #[test]
    fn softmax_rejects_bad_input() {
        let nan = Matrix::from_rows(&[[0.0, f64::NAN]]).unwrap();
        assert!(matches!(softmax_probs(&nan), Err(Error::NonFinite { .. })));
        let single = Matrix::from_rows(&[[1.0]]).unwrap();
        assert!(softmax_probs(&single).is_err());
    }

    #[test]
    fn softmax_backward_matches_jacobian() {
        let z = Matrix::from_rows(&[[0.3, -1.2, 2.0]]).unwrap();
        let p = softmax_probs(&z).unwrap();
        let g = Matrix::from_rows(&[[1.0, 0.0, 0.0]]).unwrap();
        let dz = softmax_backward(&p, &g).unwrap();
        let phi = p.row(0);
        // d phi_0 / d z_k = phi_0 (delta_0k - phi_k)
        for k in 0..3 {
            let expect: f64 = phi[0] * (if k == 0 { 1.0 } else { 0.0 } - phi[k]);
            assert!((dz.get(0, k) - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn prior_examples() {
        let p: ClassPrior<f64> = class_prior(&[0, 0, 1, 1], 2).unwrap();
        assert_eq!(p.as_slice(), &[0.5, 0.5]);
        let p: ClassPrior<f64> = class_prior(&[0, 1, 1, 1], 2).unwrap();
        assert_eq!(p.as_slice(), &[0.25, 0.75]);
        let err = class_prior::<f64>(&[0, 0], 2).unwrap_err();
        assert!(err.to_string().contains("class 1 absent"));
        assert!(class_prior::<f64>(&[], 2).is_err());
        assert!(class_prior::<f64>(&[0, 2], 2).is_err());
    }

    #[test]
    fn prob_matrix_validation() {
        assert!(ProbMatrix::from_rows(&[[0.5, 0.5], [1.0, 0.0]]).is_ok());
        assert!(ProbMatrix::from_rows(&[[0.5, 0.6]]).is_err());
        assert!(ProbMatrix::from_rows(&[[1.5, -0.5]]).is_err());
    }

    #[test]
    fn mix_batch_checks() {
        let id = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let ood = Matrix::from_rows(&[[1.0, 2.0, 3.0]]).unwrap();
        assert!(MixBatch::new(id.clone(), vec![0], ood).is_err());
        assert!(MixBatch::new(id.clone(), vec![0, 1], Matrix::zeros(0, 0)).is_err());
        assert!(MixBatch::new(Matrix::<f64>::zeros(0, 2), vec![], Matrix::zeros(0, 0)).is_err());
        let b = MixBatch::new(id, vec![0], Matrix::from_rows(&[[5.0, 6.0]]).unwrap()).unwrap();
        assert_eq!(b.stacked().rows(), 2);
    }
}

//! Max-softmax OOD scoring and evaluation metrics.
//!
//! Convention: a higher score means more ID-like, and a sample is predicted
//! ID when its score is `>=` the threshold.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::objective::ProbMatrix;
use crate::scalar::Scalar;

/// Confidence scores of an ID evaluation set and an OOD evaluation set.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet<T> {
    id: Vec<T>,
    ood: Vec<T>,
}

impl<T: Scalar> ScoreSet<T> {
    pub fn new(id: Vec<T>, ood: Vec<T>) -> Result<Self> {
        if id.is_empty() || ood.is_empty() {
            return Err(Error::invalid(format!(
                "score set needs both sides non-empty (id {}, ood {})",
                id.len(),
                ood.len()
            )));
        }
        if id.iter().chain(&ood).any(|s| !s.is_finite()) {
            return Err(Error::non_finite("scores"));
        }
        Ok(Self { id, ood })
    }

    pub fn id(&self) -> &[T] {
        &self.id
    }

    pub fn ood(&self) -> &[T] {
        &self.ood
    }

    /// Swaps the roles of the two sides.
    pub fn flipped(&self) -> Self {
        Self {
            id: self.ood.clone(),
            ood: self.id.clone(),
        }
    }
}

/// Maximum softmax probability of one row.
pub fn ood_score<T: Scalar>(row: &[T]) -> T {
    row.iter().copied().fold(T::neg_infinity(), T::max)
}

/// Scores of every row.
pub fn ood_scores<T: Scalar>(probs: &ProbMatrix<T>) -> Vec<T> {
    probs.iter_rows().map(ood_score).collect()
}

fn total_cmp<T: Scalar>(a: &T, b: &T) -> Ordering {
    a.partial_cmp(b).expect("finite scores")
}

/// Mann-Whitney AUROC with half credit for ties, via mid-ranks.
pub fn auroc<T: Scalar>(scores: &ScoreSet<T>) -> T {
    let m = scores.id.len();
    let n = scores.ood.len();
    let mut all: Vec<(T, bool)> = scores
        .id
        .iter()
        .map(|&s| (s, true))
        .chain(scores.ood.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| total_cmp(&a.0, &b.0));

    // Sum of doubled mid-ranks of ID scores keeps everything integral.
    let mut rank_sum_x2: u128 = 0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i + 1;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        // ranks i+1 ..= j, doubled mid-rank = i + 1 + j
        let ids = all[i..j].iter().filter(|e| e.1).count() as u128;
        rank_sum_x2 += ids * (i + 1 + j) as u128;
        i = j;
    }
    let m128 = m as u128;
    let u_x2 = rank_sum_x2 - m128 * (m128 + 1);
    T::lit(u_x2 as f64) / T::lit(2.0 * m as f64 * n as f64)
}

/// One ROC operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint<T> {
    pub threshold: T,
    pub fpr: T,
    pub tpr: T,
}

/// ROC curve from `(0,0)` at `+inf` to `(1,1)` at `-inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve<T> {
    pub points: Vec<RocPoint<T>>,
}

impl<T: Scalar> RocCurve<T> {
    /// Trapezoidal area under the curve.
    pub fn area(&self) -> T {
        self.points
            .windows(2)
            .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / T::lit(2.0))
            .sum()
    }

    /// CSV with header `threshold,fpr,tpr`, 9 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("threshold,fpr,tpr\n");
        for p in &self.points {
            let _ = writeln!(
                s,
                "{},{},{}",
                fmt_sig9(p.threshold.as_f64()),
                fmt_sig9(p.fpr.as_f64()),
                fmt_sig9(p.tpr.as_f64())
            );
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::fsutil::write_atomic(path, self.to_csv().as_bytes())
    }
}

/// Formats with 9 significant digits; infinities as `inf` / `-inf`.
pub fn fmt_sig9(v: f64) -> String {
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v.is_nan() {
        return "nan".into();
    }
    let s = format!("{v:.8e}");
    // Re-parse to drop redundant trailing zeros in a stable way.
    let parsed: f64 = s.parse().expect("formatted float");
    format!("{parsed}")
}

/// ROC points at every distinct score plus the two infinite sentinels.
pub fn roc_points<T: Scalar>(scores: &ScoreSet<T>) -> RocCurve<T> {
    let m = scores.id.len();
    let n = scores.ood.len();
    let mut all: Vec<(T, bool)> = scores
        .id
        .iter()
        .map(|&s| (s, true))
        .chain(scores.ood.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| total_cmp(&b.0, &a.0));

    let mut points = vec![RocPoint {
        threshold: T::infinity(),
        fpr: T::zero(),
        tpr: T::zero(),
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < all.len() {
        let t = all[i].0;
        while i < all.len() && all[i].0 == t {
            if all[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: t,
            fpr: T::from_count(fp) / T::from_count(n),
            tpr: T::from_count(tp) / T::from_count(m),
        });
    }
    points.push(RocPoint {
        threshold: T::neg_infinity(),
        fpr: T::one(),
        tpr: T::one(),
    });
    RocCurve { points }
}

/// Fraction of rows whose argmax equals the label. Ties go to the lowest class index.
pub fn accuracy<T: Scalar>(probs: &ProbMatrix<T>, labels: &[usize]) -> Result<T> {
    if probs.is_empty() {
        return Err(Error::invalid("accuracy of an empty set"));
    }
    if probs.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} rows but {} labels",
            probs.len(),
            labels.len()
        )));
    }
    let hits = probs
        .iter_rows()
        .zip(labels)
        .filter(|(row, &y)| argmax(row) == y)
        .count();
    Ok(T::from_count(hits) / T::from_count(labels.len()))
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Samples per second.
pub fn throughput(sample_count: u64, elapsed_seconds: f64) -> Result<f64> {
    if !(elapsed_seconds > 0.0 && elapsed_seconds.is_finite()) {
        return Err(Error::invalid(format!(
            "elapsed time must be positive, got {elapsed_seconds}"
        )));
    }
    Ok(sample_count as f64 / elapsed_seconds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ss(id: &[f64], ood: &[f64]) -> ScoreSet<f64> {
        ScoreSet::new(id.to_vec(), ood.to_vec()).unwrap()
    }

    #[test]
    fn score_examples() {
        assert_eq!(ood_score(&[0.25; 4]), 0.25);
        assert_eq!(ood_score(&[0.9, 0.1]), 0.9);
        assert_eq!(ood_score(&[0.0, 1.0, 0.0]), 1.0);
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&ss(&[0.9, 0.8], &[0.3, 0.1])), 1.0);
        assert_eq!(auroc(&ss(&[0.5, 0.5], &[0.5, 0.5, 0.5])), 0.5);
        assert_eq!(auroc(&ss(&[0.9, 0.4], &[0.6, 0.2])), 0.75);
        assert!(ScoreSet::<f64>::new(vec![], vec![1.0]).is_err());
        assert!(ScoreSet::new(vec![f64::NAN], vec![1.0]).is_err());
    }

    #[test]
    fn roc_examples() {
        let r = roc_points(&ss(&[0.9, 0.4], &[0.6, 0.2]));
        let first = r.points[0];
        let last = *r.points.last().unwrap();
        assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        assert_eq!(r.area(), 0.75);

        let sep = roc_points(&ss(&[0.9, 0.8], &[0.3, 0.1]));
        assert!(sep.points.iter().any(|p| p.fpr == 0.0 && p.tpr == 1.0));
        for w in sep.points.windows(2) {
            assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
        }
    }

    #[test]
    fn roc_csv_format() {
        let r = roc_points(&ss(&[2.0 / 3.0], &[0.1]));
        let csv = r.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "threshold,fpr,tpr");
        assert_eq!(lines[1], "inf,0,0");
        assert_eq!(lines[2], "0.666666667,0,1");
        assert_eq!(lines.last().unwrap(), &"-inf,1,1");
    }

    #[test]
    fn accuracy_examples() {
        let p = ProbMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(accuracy(&p, &[0, 1]).unwrap(), 1.0);
        assert_eq!(accuracy(&p, &[1, 0]).unwrap(), 0.0);
        let p = ProbMatrix::from_rows(&[[0.6, 0.4], [0.5, 0.5]]).unwrap();
        assert_eq!(accuracy(&p, &[0, 1]).unwrap(), 0.5);
        let empty = ProbMatrix::<f64>::from_rows::<[f64; 2]>(&[]).unwrap();
        assert!(accuracy(&empty, &[]).is_err());
    }

    #[test]
    fn throughput_examples() {
        assert_eq!(throughput(1000, 2.0).unwrap(), 500.0);
        assert_eq!(throughput(0, 1.0).unwrap(), 0.0);
        assert_eq!(throughput(1_000_000, 0.5).unwrap(), 2.0e6);
        assert!(throughput(10, 0.0).is_err());
        assert!(throughput(10, -1.0).is_err());
    }
}

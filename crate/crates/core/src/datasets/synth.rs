use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

use super::{LabeledSet, UnlabeledSet};

/// Radius of the sphere carrying the ID class centers.
pub const ID_CENTER_RADIUS: f64 = 3.0;

/// Center of class `k` of `classes`: angle `2 pi k / K` in the plane of the
/// first two coordinates, remaining coordinates zero.
pub fn class_center(k: usize, classes: usize, dim: usize) -> Vec<f64> {
    let theta = TAU * k as f64 / classes as f64;
    let mut c = vec![0.0; dim];
    c[0] = ID_CENTER_RADIUS * theta.cos();
    c[1] = ID_CENTER_RADIUS * theta.sin();
    c
}

/// Isotropic Gaussian blobs, `per_class` samples per class, class-major order.
pub fn gen_id_gaussians<T: Scalar>(
    classes: usize,
    per_class: usize,
    dim: usize,
    spread: f64,
    seed: u64,
) -> Result<LabeledSet<T>> {
    if classes < 2 || dim < 2 || per_class == 0 {
        return Err(Error::invalid(format!(
            "need classes >= 2, dim >= 2, per_class >= 1 (got {classes}, {dim}, {per_class})"
        )));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::invalid(format!("spread must be >= 0, got {spread}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(classes * per_class * dim);
    let mut labels = Vec::with_capacity(classes * per_class);
    for k in 0..classes {
        let center = class_center(k, classes, dim);
        for _ in 0..per_class {
            for &c in &center {
                let z: f64 = StandardNormal.sample(&mut rng);
                data.push(T::lit(c + spread * z));
            }
            labels.push(k);
        }
    }
    LabeledSet::new(Matrix::from_vec(labels.len(), dim, data)?, labels, classes)
}

/// OOD generator families.
#[derive(Debug, Clone, PartialEq)]
pub enum OodKind {
    /// Radius uniform in `[r_lo, r_hi]`, direction uniform on the sphere.
    Ring { r_lo: f64, r_hi: f64 },
    /// Each coordinate i.i.d. `U(lo, hi)`.
    UniformNoise { lo: f64, hi: f64 },
    /// Each coordinate i.i.d. `N(0, 1)`.
    GaussianNoise,
    /// One isotropic Gaussian centered at `radius * (cos angle, sin angle, 0, ...)`.
    ShiftedBlob { radius: f64, angle: f64, spread: f64 },
}

impl OodKind {
    /// Parses a kind name with its default parameters.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "ring" => Ok(OodKind::Ring { r_lo: 5.0, r_hi: 7.0 }),
            "uniform_noise" => Ok(OodKind::UniformNoise { lo: -8.0, hi: 8.0 }),
            "gaussian_noise" => Ok(OodKind::GaussianNoise),
            "shifted_blob" => Ok(OodKind::ShiftedBlob {
                radius: 6.0,
                angle: std::f64::consts::FRAC_PI_4,
                spread: 0.5,
            }),
            other => Err(Error::invalid(format!(
                "unknown OOD kind `{other}` (expected ring, uniform_noise, gaussian_noise, shifted_blob)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OodKind::Ring { .. } => "ring",
            OodKind::UniformNoise { .. } => "uniform_noise",
            OodKind::GaussianNoise => "gaussian_noise",
            OodKind::ShiftedBlob { .. } => "shifted_blob",
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            OodKind::Ring { r_lo, r_hi } => r_lo >= 0.0 && r_lo <= r_hi && r_hi.is_finite(),
            OodKind::UniformNoise { lo, hi } => lo <= hi && lo.is_finite() && hi.is_finite(),
            OodKind::GaussianNoise => true,
            OodKind::ShiftedBlob { radius, angle, spread } => {
                radius.is_finite() && angle.is_finite() && spread >= 0.0 && spread.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid parameters for {self:?}")))
        }
    }
}

fn unit_direction(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut *rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

pub fn gen_ood<T: Scalar>(kind: &OodKind, n: usize, dim: usize, seed: u64) -> Result<UnlabeledSet<T>> {
    if n == 0 {
        return Err(Error::invalid("OOD set size must be >= 1"));
    }
    if dim < 1 {
        return Err(Error::invalid("OOD dimension must be >= 1"));
    }
    kind.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * dim);
    for _ in 0..n {
        match *kind {
            OodKind::Ring { r_lo, r_hi } => {
                let r = if r_hi > r_lo { rng.gen_range(r_lo..=r_hi) } else { r_lo };
                data.extend(unit_direction(&mut rng, dim).into_iter().map(|u| T::lit(r * u)));
            }
            OodKind::UniformNoise { lo, hi } => {
                for _ in 0..dim {
                    let v = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
                    data.push(T::lit(v));
                }
            }
            OodKind::GaussianNoise => {
                for _ in 0..dim {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    data.push(T::lit(z));
                }
            }
            OodKind::ShiftedBlob { radius, angle, spread } => {
                for j in 0..dim {
                    let c = match j {
                        0 => radius * angle.cos(),
                        1 if dim > 1 => radius * angle.sin(),
                        _ => 0.0,
                    };
                    let z: f64 = StandardNormal.sample(&mut rng);
                    data.push(T::lit(c + spread * z));
                }
            }
        }
    }
    UnlabeledSet::new(Matrix::from_vec(n, dim, data)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn id_construction_contract() {
        let s: LabeledSet<f64> = gen_id_gaussians(4, 250, 2, 0.4, 1).unwrap();
        assert_eq!(s.len(), 1000);
        for k in 0..4 {
            assert_eq!(s.y().iter().filter(|&&y| y == k).count(), 250);
        }
    }

    #[test]
    fn zero_spread_collapses_to_centers() {
        let s: LabeledSet<f64> = gen_id_gaussians(3, 5, 4, 0.0, 2).unwrap();
        for (row, &y) in s.x().iter_rows().zip(s.y()) {
            assert_eq!(row, class_center(y, 3, 4).as_slice());
        }
        let r = class_center(1, 3, 4);
        assert!((r.iter().map(|v| v * v).sum::<f64>().sqrt() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn generators_are_deterministic() {
        let a: LabeledSet<f64> = gen_id_gaussians(4, 10, 2, 0.4, 9).unwrap();
        let b: LabeledSet<f64> = gen_id_gaussians(4, 10, 2, 0.4, 9).unwrap();
        assert_eq!(a, b);
        let k = OodKind::from_name("ring").unwrap();
        assert_eq!(gen_ood::<f64>(&k, 20, 3, 4).unwrap(), gen_ood::<f64>(&k, 20, 3, 4).unwrap());
    }

    #[test]
    fn id_rejects_invalid_dimensions() {
        assert!(gen_id_gaussians::<f64>(1, 10, 2, 0.4, 0).is_err());
        assert!(gen_id_gaussians::<f64>(2, 10, 1, 0.4, 0).is_err());
        assert!(gen_id_gaussians::<f64>(2, 0, 2, 0.4, 0).is_err());
        assert!(gen_id_gaussians::<f64>(2, 1, 2, -1.0, 0).is_err());
    }

    #[test]
    fn gaussian_noise_mean_near_origin() {
        let s: UnlabeledSet<f64> = gen_ood(&OodKind::GaussianNoise, 100, 2, 3).unwrap();
        assert_eq!((s.len(), s.dim()), (100, 2));
        for c in 0..2 {
            let mean = s.x().iter_rows().map(|r| r[c]).sum::<f64>() / 100.0;
            assert!(mean.abs() < 0.5);
        }
    }

    #[test]
    fn uniform_noise_support() {
        let s: UnlabeledSet<f64> =
            gen_ood(&OodKind::UniformNoise { lo: 0.0, hi: 1.0 }, 500, 3, 5).unwrap();
        assert!(s.x().as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn degenerate_ring_has_fixed_norm() {
        let s: UnlabeledSet<f64> = gen_ood(&OodKind::Ring { r_lo: 5.0, r_hi: 5.0 }, 200, 2, 6).unwrap();
        for row in s.x().iter_rows() {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 5.0).abs() < 1e-9);
        }
    }

    #[test]
    fn shifted_blob_is_away_from_id_centers() {
        let k = OodKind::from_name("shifted_blob").unwrap();
        let s: UnlabeledSet<f64> = gen_ood(&k, 400, 2, 8).unwrap();
        let mean: Vec<f64> = (0..2)
            .map(|c| s.x().iter_rows().map(|r| r[c]).sum::<f64>() / 400.0)
            .collect();
        for k in 0..4 {
            let c = class_center(k, 4, 2);
            let dist = ((mean[0] - c[0]).powi(2) + (mean[1] - c[1]).powi(2)).sqrt();
            assert!(dist > 2.0, "blob mean {mean:?} too close to class {k}");
        }
    }

    #[test]
    fn unknown_kind_and_empty_set() {
        assert!(OodKind::from_name("spiral").is_err());
        assert!(gen_ood::<f64>(&OodKind::GaussianNoise, 0, 2, 0).is_err());
    }
}

//! OOD budgeting and epoch-wise mixture batches.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::objective::MixBatch;
use crate::scalar::Scalar;

use super::{LabeledSet, UnlabeledSet};

/// Number of OOD training samples for `m` ID samples at mixture weight
/// `epsilon`: `round(m * epsilon / (1 - epsilon))`.
pub fn ood_budget(m: usize, epsilon: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::invalid(format!("epsilon must be in [0,1), got {epsilon}")));
    }
    if m == 0 {
        return Err(Error::invalid("ID set is empty"));
    }
    Ok((m as f64 * epsilon / (1.0 - epsilon)).round() as usize)
}

/// Mixture batching parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixSpec {
    pub epsilon: f64,
    pub batch_size: usize,
    pub seed: u64,
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Batch layout for a fixed ID set and OOD training set.
///
/// Each batch holds `id_per_batch` ID rows and `ood_per_batch` OOD rows. ID
/// rows are a fresh permutation every epoch, so every ID sample appears
/// exactly once; the last batch may be short and gets a proportional OOD
/// share. OOD rows are drawn without replacement and reshuffled when
/// exhausted.
#[derive(Debug)]
pub struct BatchPlan<'a, T> {
    id: &'a LabeledSet<T>,
    ood: &'a UnlabeledSet<T>,
    spec: MixSpec,
    id_per_batch: usize,
    ood_per_batch: usize,
}

/// Row indices of one batch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchIndices {
    pub id: Vec<usize>,
    pub ood: Vec<usize>,
}

pub fn make_batches<'a, T: Scalar>(
    id: &'a LabeledSet<T>,
    ood: &'a UnlabeledSet<T>,
    spec: MixSpec,
) -> Result<BatchPlan<'a, T>> {
    if spec.batch_size < 2 {
        return Err(Error::invalid(format!(
            "batch_size must be >= 2, got {}",
            spec.batch_size
        )));
    }
    let budget = ood_budget(id.len(), spec.epsilon)?;
    if ood.len() != budget {
        return Err(Error::invalid(format!(
            "OOD training set has {} samples, budget for M = {} at epsilon = {} is {budget}",
            ood.len(),
            id.len(),
            spec.epsilon
        )));
    }
    if !ood.is_empty() && ood.dim() != id.dim() {
        return Err(Error::shape(format!(
            "OOD features have dimension {}, ID features {}",
            ood.dim(),
            id.dim()
        )));
    }
    let id_per_batch = round_half_up(spec.batch_size as f64 * (1.0 - spec.epsilon));
    if id_per_batch == 0 {
        return Err(Error::invalid(format!(
            "epsilon {} leaves no ID rows in a batch of {}",
            spec.epsilon, spec.batch_size
        )));
    }
    let mut ood_per_batch = spec.batch_size - id_per_batch.min(spec.batch_size);
    if spec.epsilon > 0.0 && ood_per_batch == 0 {
        if ood.is_empty() {
            log::warn!(
                "epsilon = {} but the OOD budget rounds to 0; batches are ID-only",
                spec.epsilon
            );
        } else {
            log::warn!(
                "epsilon * batch_size rounds to 0 OOD rows; forcing 1 OOD row per batch"
            );
            ood_per_batch = 1;
        }
    }
    if ood.is_empty() {
        ood_per_batch = 0;
    }
    Ok(BatchPlan {
        id,
        ood,
        spec,
        id_per_batch,
        ood_per_batch,
    })
}

const EPOCH_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

impl<'a, T: Scalar> BatchPlan<'a, T> {
    pub fn id_per_batch(&self) -> usize {
        self.id_per_batch
    }

    pub fn ood_per_batch(&self) -> usize {
        self.ood_per_batch
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.id.len().div_ceil(self.id_per_batch)
    }

    fn rng(&self, epoch: usize, stream: u64) -> ChaCha8Rng {
        let seed = self
            .spec
            .seed
            .wrapping_add((epoch as u64).wrapping_add(1).wrapping_mul(EPOCH_STRIDE));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng
    }

    /// Index layout of every batch in `epoch`.
    pub fn epoch_indices(&self, epoch: usize) -> Vec<BatchIndices> {
        let mut id_rng = self.rng(epoch, 0);
        let mut ood_rng = self.rng(epoch, 1);
        let mut id_perm: Vec<usize> = (0..self.id.len()).collect();
        id_perm.shuffle(&mut id_rng);
        let mut ood_perm: Vec<usize> = (0..self.ood.len()).collect();
        ood_perm.shuffle(&mut ood_rng);
        let mut ood_pos = 0;

        let mut out = Vec::with_capacity(self.batches_per_epoch());
        for chunk in id_perm.chunks(self.id_per_batch) {
            let mut n_ood = if chunk.len() == self.id_per_batch {
                self.ood_per_batch
            } else {
                round_half_up(chunk.len() as f64 * self.ood_per_batch as f64 / self.id_per_batch as f64)
            };
            if self.ood_per_batch > 0 {
                n_ood = n_ood.max(1);
            }
            let mut ood_idx = Vec::with_capacity(n_ood);
            while ood_idx.len() < n_ood {
                if ood_pos == ood_perm.len() {
                    ood_perm.shuffle(&mut ood_rng);
                    ood_pos = 0;
                }
                ood_idx.push(ood_perm[ood_pos]);
                ood_pos += 1;
            }
            out.push(BatchIndices {
                id: chunk.to_vec(),
                ood: ood_idx,
            });
        }
        out
    }

    /// Materialized batches of `epoch`.
    pub fn epoch(&self, epoch: usize) -> impl Iterator<Item = MixBatch<T>> + '_ {
        self.epoch_indices(epoch).into_iter().map(move |b| {
            let labels = b.id.iter().map(|&i| self.id.y()[i]).collect();
            MixBatch::new(
                self.id.x().select_rows(&b.id),
                labels,
                self.ood.x().select_rows(&b.ood),
            )
            .expect("indices drawn from validated sets")
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{gen_id_gaussians, gen_ood, OodKind};

    #[test]
    fn budget_examples() {
        assert_eq!(ood_budget(950, 0.05).unwrap(), 50);
        assert_eq!(ood_budget(1000, 0.0).unwrap(), 0);
        assert_eq!(ood_budget(100, 0.5).unwrap(), 100);
        assert!(ood_budget(100, 1.0).is_err());
        assert!(ood_budget(100, -0.1).is_err());
    }

    fn sets(m_per_class: usize, eps: f64) -> (LabeledSet<f64>, UnlabeledSet<f64>) {
        let id = gen_id_gaussians(4, m_per_class, 2, 0.4, 1).unwrap();
        let n = ood_budget(id.len(), eps).unwrap();
        let ood = if n == 0 {
            UnlabeledSet::empty(2)
        } else {
            gen_ood(&OodKind::GaussianNoise, n, 2, 2).unwrap()
        };
        (id, ood)
    }

    #[test]
    fn rounding_contract() {
        let (id, ood) = sets(250, 0.05);
        let plan = make_batches(&id, &ood, MixSpec { epsilon: 0.05, batch_size: 100, seed: 3 }).unwrap();
        assert_eq!((plan.id_per_batch(), plan.ood_per_batch()), (95, 5));
        let b = plan.epoch(0).next().unwrap();
        assert_eq!((b.id_len(), b.ood_len()), (95, 5));
    }

    #[test]
    fn zero_epsilon_is_id_only_and_partitions() {
        let (id, ood) = sets(250, 0.0);
        let plan = make_batches(&id, &ood, MixSpec { epsilon: 0.0, batch_size: 100, seed: 3 }).unwrap();
        let batches = plan.epoch_indices(0);
        assert_eq!(batches.len(), 10);
        assert!(batches.iter().all(|b| b.ood.is_empty() && b.id.len() == 100));
        let mut all: Vec<usize> = batches.iter().flat_map(|b| b.id.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
    }

    #[test]
    fn epochs_differ_but_are_reproducible() {
        let (id, ood) = sets(50, 0.1);
        let spec = MixSpec { epsilon: 0.1, batch_size: 32, seed: 7 };
        let a = make_batches(&id, &ood, spec).unwrap();
        let b = make_batches(&id, &ood, spec).unwrap();
        assert_eq!(a.epoch_indices(2), b.epoch_indices(2));
        assert_ne!(a.epoch_indices(0), a.epoch_indices(1));
    }

    #[test]
    fn small_epsilon_forces_one_ood_row() {
        let (id, ood) = sets(250, 0.005);
        assert_eq!(ood.len(), 5);
        let plan = make_batches(&id, &ood, MixSpec { epsilon: 0.005, batch_size: 64, seed: 0 }).unwrap();
        assert_eq!(plan.id_per_batch(), 64);
        assert_eq!(plan.ood_per_batch(), 1);
        // 16 batches each need one OOD row: the 5 OOD samples are recycled.
        let idx = plan.epoch_indices(0);
        assert!(idx.iter().all(|b| b.ood.len() == 1));
    }

    #[test]
    fn partial_last_batch_gets_proportional_ood() {
        let (id, ood) = sets(250, 0.05);
        let plan = make_batches(&id, &ood, MixSpec { epsilon: 0.05, batch_size: 128, seed: 1 }).unwrap();
        let idx = plan.epoch_indices(0);
        assert_eq!(plan.id_per_batch(), 122);
        let last = idx.last().unwrap();
        assert_eq!(last.id.len(), 1000 - 8 * 122);
        assert_eq!(last.ood.len(), 1);
    }

    #[test]
    fn errors() {
        let (id, ood) = sets(250, 0.05);
        assert!(make_batches(&id, &ood, MixSpec { epsilon: 0.05, batch_size: 1, seed: 0 }).is_err());
        assert!(make_batches(&id, &ood, MixSpec { epsilon: 0.1, batch_size: 10, seed: 0 }).is_err());
        let (id, ood) = sets(1, 0.9);
        assert!(make_batches(&id, &ood, MixSpec { epsilon: 0.9, batch_size: 2, seed: 0 }).is_err());
    }
}

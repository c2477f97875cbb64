use proptest::prelude::*;

use sa_ood::datasets::{gen_id_gaussians, gen_ood, make_batches, ood_budget, MixSpec, OodKind};
use sa_ood::detection::{auroc, roc_points, ScoreSet};
use sa_ood::gradnet::{checkpoint, init_params};
use sa_ood::objective::{sa_regularizer, softmax_probs, ClassPrior};
use sa_ood::oracle::auroc_bruteforce;
use sa_ood::{Matrix, Params};

/// Scores on a coarse integer grid so ties are common.
fn tied_scores(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0u8..8).prop_map(f64::from), 1..max_len)
}

fn simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-6.0f64..6.0, k).prop_map(|z| {
        let e: Vec<f64> = z.iter().map(|v| v.exp()).collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|v| v / s).collect()
    })
}

fn pair_on_simplex() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..9).prop_flat_map(|k| (simplex(k), simplex(k)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn auroc_matches_pair_count(id in tied_scores(40), ood in tied_scores(40)) {
        let ss = ScoreSet::new(id, ood).unwrap();
        prop_assert!((auroc(&ss) - auroc_bruteforce(&ss)).abs() <= 1e-12);
    }

    #[test]
    fn roc_area_equals_auroc(id in tied_scores(40), ood in tied_scores(40)) {
        let ss = ScoreSet::new(id, ood).unwrap();
        let curve = roc_points(&ss);
        prop_assert!((curve.area() - auroc(&ss)).abs() <= 1e-12);
        prop_assert_eq!(curve.points.first().map(|p| (p.fpr, p.tpr)), Some((0.0, 0.0)));
        prop_assert_eq!(curve.points.last().map(|p| (p.fpr, p.tpr)), Some((1.0, 1.0)));
        for w in curve.points.windows(2) {
            prop_assert!(w[0].threshold > w[1].threshold);
            prop_assert!(w[0].fpr <= w[1].fpr && w[0].tpr <= w[1].tpr);
        }
    }

    #[test]
    fn auroc_is_invariant_under_increasing_maps(id in tied_scores(30), ood in tied_scores(30)) {
        let f = |v: &f64| 3.0 * v * v * v + 0.5 * v - 7.0;
        let a = auroc(&ScoreSet::new(id.clone(), ood.clone()).unwrap());
        let b = auroc(&ScoreSet::new(id.iter().map(f).collect(), ood.iter().map(f).collect()).unwrap());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn swapping_sides_complements_auroc(id in tied_scores(30), ood in tied_scores(30)) {
        let ss = ScoreSet::new(id, ood).unwrap();
        prop_assert!((auroc(&ss) + auroc(&ss.flipped()) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn regularizer_bounds((p, phi) in pair_on_simplex()) {
        let k = p.len();
        let prior = ClassPrior::new(p.clone()).unwrap();
        let r = sa_regularizer(&phi, &prior);
        let jeffreys: f64 = p.iter().zip(&phi).map(|(a, b)| (a - b) * a.ln()).sum();
        prop_assert!(r <= jeffreys + 1e-9, "R={} rhs={}", r, jeffreys);
        prop_assert!(r <= (k as f64).ln() + 1e-9);
        prop_assert!(sa_regularizer(&p, &prior).abs() <= 1e-12);
        prop_assert!(sa_regularizer(&vec![1.0 / k as f64; k], &prior).abs() <= 1e-9);
    }

    #[test]
    fn softmax_rows_are_simplex_points(
        rows in 1usize..6,
        logits in prop::collection::vec(-800.0f64..800.0, 30),
    ) {
        let k = 5;
        let m = Matrix::from_vec(rows, k, logits[..rows * k].to_vec()).unwrap();
        let p = softmax_probs(&m).unwrap();
        for row in p.iter_rows() {
            prop_assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn budget_identity(m in 1usize..5000, eps in 0.0f64..0.95) {
        let n = ood_budget(m, eps).unwrap();
        let exact = m as f64 * eps / (1.0 - eps);
        prop_assert!((n as f64 - exact).abs() <= 0.5);
    }

    #[test]
    fn epochs_partition_the_id_set(
        per_class in 3usize..40,
        batch_size in 2usize..70,
        eps in 0.0f64..0.3,
        seed in 0u64..1000,
        epoch in 0usize..5,
    ) {
        let id = gen_id_gaussians::<f64>(3, per_class, 2, 1.0, seed).unwrap();
        let n = ood_budget(id.len(), eps).unwrap();
        let ood = if n == 0 {
            sa_ood::datasets::UnlabeledSet::empty(2)
        } else {
            gen_ood::<f64>(&OodKind::GaussianNoise, n, 2, seed + 1).unwrap()
        };
        let spec = MixSpec { epsilon: eps, batch_size, seed };
        let plan = match make_batches(&id, &ood, spec) {
            Ok(p) => p,
            Err(_) => return Ok(()),
        };
        let batches = plan.epoch_indices(epoch);
        prop_assert_eq!(batches.len(), plan.batches_per_epoch());
        let mut seen: Vec<usize> = batches.iter().flat_map(|b| b.id.iter().copied()).collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..id.len()).collect::<Vec<_>>());
        for b in &batches {
            prop_assert!(b.id.len() <= plan.id_per_batch());
            prop_assert!(b.ood.iter().all(|&j| j < ood.len()));
            if n == 0 {
                prop_assert!(b.ood.is_empty());
            } else {
                prop_assert!(!b.ood.is_empty());
            }
        }
        prop_assert_eq!(plan.epoch_indices(epoch), batches);
    }

    #[test]
    fn checkpoint_roundtrip(hidden in 1usize..12, seed in 0u64..500) {
        let params: Params = init_params(&[3, hidden, 4], seed).unwrap();
        let back: Params = checkpoint::decode(&checkpoint::encode(&params)).unwrap();
        prop_assert_eq!(back.to_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                        params.to_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
}

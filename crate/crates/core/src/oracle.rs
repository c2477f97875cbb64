//! Independent numerical oracles.
//!
//! Each check recomputes its quantity by a separate arithmetic route and
//! compares against the primary implementation, or verifies an inequality of
//! the bound derivation directly on random inputs.

use std::f64::consts::LN_2;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::{json, Value};

use crate::detection::ScoreSet;
use crate::error::{Error, Result};
use crate::gradnet::{GradientSet, ParameterSet};
use crate::objective::{self, ClassPrior, ProbMatrix};
use crate::scalar::Scalar;

/// Tolerance for pure-arithmetic inequalities.
pub const CHAIN_TOL: f64 = 1e-9;
/// Tolerance for per-sample slacks.
pub const SLACK_TOL: f64 = 1e-12;
/// Tolerance for algebraic identities.
pub const IDENTITY_TOL: f64 = 1e-10;
/// Relative tolerance for gradient checks.
pub const GRAD_REL_TOL: f64 = 1e-4;
/// Absolute floor for gradient checks near zero.
pub const GRAD_ABS_FLOOR: f64 = 1e-7;

/// Central differences, one coordinate at a time, with step
/// `h * max(1, |theta_i|)`.
pub fn finite_diff_grad<T, F>(f: F, params: &ParameterSet<T>, h: T) -> Result<GradientSet<T>>
where
    T: Scalar,
    F: Fn(&ParameterSet<T>) -> Result<T>,
{
    if !(h > T::zero()) {
        return Err(Error::invalid(format!("step must be > 0, got {h}")));
    }
    let mut probe = params.clone();
    let mut grad = params.zeros_like();
    for i in 0..params.total_dim() {
        let theta = params.get(i);
        let step = h * theta.abs().max(T::one());
        probe.set(i, theta + step);
        let up = f(&probe)?;
        probe.set(i, theta - step);
        let down = f(&probe)?;
        probe.set(i, theta);
        if !(up.is_finite() && down.is_finite()) {
            return Err(Error::non_finite(format!("finite difference at coordinate {i}")));
        }
        grad.set(i, (up - down) / (step + step));
    }
    Ok(grad)
}

/// Error of one gradient coordinate, scaled so that `<= GRAD_REL_TOL` means
/// "relative error within 1e-4, or absolute error within 1e-7".
pub fn gradient_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic
        .abs()
        .max(numeric.abs())
        .max(GRAD_ABS_FLOOR / GRAD_REL_TOL);
    (analytic - numeric).abs() / scale
}

/// Largest [`gradient_error`] over all coordinates.
pub fn max_gradient_error<T: Scalar>(analytic: &GradientSet<T>, numeric: &GradientSet<T>) -> f64 {
    analytic
        .iter()
        .zip(numeric.iter())
        .map(|(a, n)| gradient_error(a.as_f64(), n.as_f64()))
        .fold(0.0, f64::max)
}

/// Exhaustive pair count with half credit for ties.
pub fn auroc_bruteforce<T: Scalar>(scores: &ScoreSet<T>) -> f64 {
    let mut credit = 0.0;
    for &a in scores.id() {
        for &b in scores.ood() {
            if a > b {
                credit += 1.0;
            } else if a == b {
                credit += 0.5;
            }
        }
    }
    credit / (scores.id().len() * scores.ood().len()) as f64
}

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub max_violation: f64,
    pub tolerance: f64,
    pub samples: usize,
    /// Description of the input that produced `max_violation`.
    pub worst_input: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn merge(mut self, other: VerifyReport) -> Self {
        self.checks.extend(other.checks);
        self
    }

    pub fn to_text(&self) -> String {
        let w = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(4).max(5);
        let mut s = format!(
            "{:<w$}  {:<4}  {:>13}  {:>9}  {:>8}\n",
            "check", "ok", "max_violation", "tolerance", "samples"
        );
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{:<w$}  {:<4}  {:>13.3e}  {:>9.1e}  {:>8}",
                c.name,
                if c.passed { "pass" } else { "FAIL" },
                c.max_violation,
                c.tolerance,
                c.samples
            );
        }
        for c in self.checks.iter().filter(|c| !c.passed) {
            let _ = writeln!(s, "worst input for {}: {}", c.name, c.worst_input);
        }
        s
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.checks
                .iter()
                .map(|c| {
                    json!({
                        "name": c.name,
                        "passed": c.passed,
                        "max_violation": c.max_violation,
                        "tolerance": c.tolerance,
                        "samples": c.samples,
                        "worst_input": c.worst_input,
                    })
                })
                .collect(),
        )
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&json!({ "checks": self.to_json() }))?;
        crate::fsutil::write_atomic(path, text.as_bytes())
    }
}

/// Running maximum of a violation measure.
struct Tracker {
    name: &'static str,
    tolerance: f64,
    worst: f64,
    worst_input: String,
    samples: usize,
}

impl Tracker {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self {
            name,
            tolerance,
            worst: 0.0,
            worst_input: String::new(),
            samples: 0,
        }
    }

    fn record(&mut self, violation: f64, input: impl FnOnce() -> String) {
        self.samples += 1;
        let v = if violation.is_nan() { f64::INFINITY } else { violation };
        if v > self.worst || (self.worst_input.is_empty() && v == self.worst) {
            self.worst = v;
            self.worst_input = input();
        }
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            name: self.name.to_string(),
            passed: self.worst <= self.tolerance,
            max_violation: self.worst,
            tolerance: self.tolerance,
            samples: self.samples,
            worst_input: self.worst_input,
        }
    }
}

/// Normalized exponentials of standard normals (scaled for variety).
fn random_simplex(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let scale = rng.gen_range(0.2..4.0);
    let z: Vec<f64> = (0..k)
        .map(|_| scale * { let z: f64 = StandardNormal.sample(&mut *rng); z })
        .collect();
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// A random batch in plain vectors so the oracle arithmetic never touches the
/// primary types.
#[derive(Debug)]
struct RandomBatch {
    classes: usize,
    prior: Vec<f64>,
    id_rows: Vec<Vec<f64>>,
    labels: Vec<usize>,
    ood_rows: Vec<Vec<f64>>,
}

impl RandomBatch {
    fn draw(rng: &mut ChaCha8Rng, empirical_prior: bool) -> Self {
        let classes = rng.gen_range(2..=8);
        let m = rng.gen_range(1..=16).max(if empirical_prior { classes } else { 1 });
        let n = rng.gen_range(0..=16);
        let mut labels: Vec<usize> = (0..m).map(|_| rng.gen_range(0..classes)).collect();
        if empirical_prior {
            for (i, l) in labels.iter_mut().take(classes).enumerate() {
                *l = i;
            }
        }
        let prior = if empirical_prior {
            let mut c = vec![0.0; classes];
            for &l in &labels {
                c[l] += 1.0;
            }
            c.into_iter().map(|v| v / m as f64).collect()
        } else {
            random_simplex(rng, classes)
                .into_iter()
                .map(|p| p.max(1e-6))
                .collect::<Vec<_>>()
        };
        let total: f64 = prior.iter().sum();
        let prior = prior.into_iter().map(|p| p / total).collect();
        let id_rows = (0..m).map(|_| random_simplex(rng, classes)).collect();
        let ood_rows = (0..n).map(|_| random_simplex(rng, classes)).collect();
        Self {
            classes,
            prior,
            id_rows,
            labels,
            ood_rows,
        }
    }

    fn mix_rows(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.id_rows.iter().chain(&self.ood_rows)
    }

    fn to_primary(&self) -> Result<(ProbMatrix<f64>, ProbMatrix<f64>, ClassPrior<f64>)> {
        let id = ProbMatrix::from_rows(&self.id_rows)?;
        let mix_rows: Vec<Vec<f64>> = self.mix_rows().cloned().collect();
        let mix = ProbMatrix::from_rows(&mix_rows)?;
        Ok((id, mix, ClassPrior::new(self.prior.clone())?))
    }

    fn describe(&self, alpha: f64) -> String {
        format!(
            "K={} M={} N={} alpha={alpha} prior={:?} first_id_row={:?} label={}",
            self.classes,
            self.id_rows.len(),
            self.ood_rows.len(),
            self.prior,
            self.id_rows[0],
            self.labels[0]
        )
    }
}

fn ln_floor(x: f64) -> f64 {
    x.max(crate::scalar::LOG_FLOOR).ln()
}

fn sigmoid(s: f64) -> f64 {
    1.0 / (1.0 + (-s).exp())
}

fn logit(s: f64) -> f64 {
    (s / (1.0 - s)).ln()
}

/// Oracle-side evaluation of the four bound terms and the SA estimator.
struct OracleTerms {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    sa: f64,
}

fn oracle_terms(batch: &RandomBatch, alpha: f64) -> OracleTerms {
    let beta = alpha / (1.0 - alpha);
    let m = batch.id_rows.len() as f64;
    let n_mix = (batch.id_rows.len() + batch.ood_rows.len()) as f64;
    let (mut log_phi, mut log_sig) = (0.0, 0.0);
    for (row, &y) in batch.id_rows.iter().zip(&batch.labels) {
        log_phi += ln_floor(row[y]);
        log_sig += ln_floor(sigmoid(ln_floor(row[y])));
    }
    let (mut plogp, mut p_log_1m_sig, mut reg) = (0.0, 0.0, 0.0);
    for row in batch.mix_rows() {
        for (k, &p) in row.iter().enumerate() {
            let w = batch.prior[k];
            plogp += p * ln_floor(p);
            p_log_1m_sig += w * (1.0 - sigmoid(ln_floor(p))).ln();
            reg += (w - p) * ln_floor(p);
        }
    }
    OracleTerms {
        a: (1.0 - alpha) * log_phi / m,
        b: -(1.0 - alpha) * beta * plogp / n_mix,
        c: alpha * log_sig / m,
        d: -alpha * p_log_1m_sig / n_mix,
        sa: log_phi / m + alpha * reg / n_mix,
    }
}

/// Checks the lower-bound chain from the combined objective down to the SA
/// estimator on `trials` random batches.
pub fn verify_bound_chain(trials: usize, seed: u64) -> Result<VerifyReport> {
    verify_bound_chain_with(trials, seed, None)
}

/// As [`verify_bound_chain`], optionally pinning `alpha`.
pub fn verify_bound_chain_with(trials: usize, seed: u64, alpha: Option<f64>) -> Result<VerifyReport> {
    if trials == 0 {
        return Err(Error::invalid("trials must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chain = Tracker::new("bound_chain", CHAIN_TOL);
    let mut chain_primary = Tracker::new("bound_chain_primary", CHAIN_TOL);
    let mut agree = Tracker::new("bound_terms_agree", CHAIN_TOL);
    let mut eq21 = Tracker::new("ac_slack_nonnegative", SLACK_TOL);
    let mut eq21_form = Tracker::new("ac_slack_closed_form", SLACK_TOL);
    let mut eq23 = Tracker::new("bd_log_monotone_step", SLACK_TOL);

    for _ in 0..trials {
        let batch = RandomBatch::draw(&mut rng, false);
        let alpha = alpha.unwrap_or_else(|| rng.gen_range(0.05..0.95));
        let t = oracle_terms(&batch, alpha);

        let combined = t.a + t.b + t.c + t.d + alpha * LN_2;
        chain.record((t.sa - combined).max(0.0), || batch.describe(alpha));

        let (id, mix, prior) = batch.to_primary()?;
        let br = objective::bound_terms(&id, &batch.labels, &mix, &prior, alpha)?;
        let sa = objective::sa_loss(&id, &batch.labels, &mix, &prior, alpha)?;
        chain_primary.record((sa - (br.combined() + alpha * LN_2)).max(0.0), || {
            batch.describe(alpha)
        });
        let diff = [
            (br.a - t.a).abs(),
            (br.b - t.b).abs(),
            (br.c - t.c).abs(),
            (br.d - t.d).abs(),
            (br.sa - t.sa).abs(),
            (sa - t.sa).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        agree.record(diff, || batch.describe(alpha));

        for (row, &y) in batch.id_rows.iter().zip(&batch.labels) {
            let phi = row[y];
            // per-sample A + C minus its bound ln phi - alpha ln 2
            let ac = (1.0 - alpha) * ln_floor(phi) + alpha * ln_floor(sigmoid(ln_floor(phi)));
            let slack = ac - (ln_floor(phi) - alpha * LN_2);
            eq21.record((-slack).max(0.0), || format!("phi={phi} alpha={alpha}"));
            let closed = alpha * (LN_2 - phi.ln_1p());
            eq21_form.record((slack - closed).abs(), || format!("phi={phi} alpha={alpha}"));
        }
        for row in batch.mix_rows() {
            let step: f64 = row
                .iter()
                .zip(&batch.prior)
                .map(|(&p, &w)| w * (p.ln_1p() - ln_floor(p)))
                .sum();
            eq23.record((-step).max(0.0), || format!("row={row:?} prior={:?}", batch.prior));
        }
    }
    Ok(VerifyReport {
        checks: vec![
            chain.finish(),
            chain_primary.finish(),
            agree.finish(),
            eq21.finish(),
            eq21_form.finish(),
            eq23.finish(),
        ],
    })
}

/// Checks the sigmoid / density-ratio identities and the per-class rewrite
/// of the MBCE objective on random inputs.
pub fn verify_identities(trials: usize, seed: u64) -> Result<VerifyReport> {
    if trials == 0 {
        return Err(Error::invalid("trials must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ratio = Tracker::new("sigmoid_of_log_is_ratio", IDENTITY_TOL);
    let mut inverse = Tracker::new("logit_recovers_log_phi", IDENTITY_TOL);
    let mut q_chain = Tracker::new("density_ratio_recovers_phi", IDENTITY_TOL);
    let mut one_minus = Tracker::new("log_one_minus_d", IDENTITY_TOL);
    let mut product = Tracker::new("mbce_per_class_rewrite", IDENTITY_TOL);

    for trial in 0..trials {
        let batch = RandomBatch::draw(&mut rng, true);
        let mut phis: Vec<f64> = batch.mix_rows().flatten().copied().collect();
        if trial == 0 {
            phis.push(1.0);
        }
        for &phi in phis.iter().filter(|&&p| p > 0.0) {
            let d = objective::discriminator_d(phi)?;
            ratio.record((sigmoid(phi.ln()) - d).abs(), || format!("phi={phi}"));
            inverse.record((logit(d) - phi.ln()).abs(), || format!("phi={phi}"));
            q_chain.record((logit(d).exp() - phi).abs(), || format!("phi={phi}"));
            one_minus.record(((1.0 - d).ln() + phi.ln_1p()).abs(), || format!("phi={phi}"));
        }

        let (id, mix, prior) = batch.to_primary()?;
        let primary = objective::mbce_loss(&id, &batch.labels, &mix, &prior)?;
        let n_mix = (batch.id_rows.len() + batch.ood_rows.len()) as f64;
        let mut rewrite = 0.0;
        for y in 0..batch.classes {
            let class_rows: Vec<f64> = batch
                .id_rows
                .iter()
                .zip(&batch.labels)
                .filter(|(_, &l)| l == y)
                .map(|(r, _)| ln_floor(sigmoid(ln_floor(r[y]))))
                .collect();
            let pos = class_rows.iter().sum::<f64>() / class_rows.len() as f64;
            let neg = batch
                .mix_rows()
                .map(|r| (1.0 - sigmoid(ln_floor(r[y]))).ln())
                .sum::<f64>()
                / n_mix;
            rewrite += batch.prior[y] * (pos - neg);
        }
        product.record((primary - rewrite).abs(), || batch.describe(0.0));
    }
    Ok(VerifyReport {
        checks: vec![
            ratio.finish(),
            inverse.finish(),
            q_chain.finish(),
            one_minus.finish(),
            product.finish(),
        ],
    })
}

/// Loss family members covered by [`verify_gradients`].
pub fn gradient_check_objectives() -> Vec<(&'static str, objective::Objective<f64>)> {
    use objective::Objective;
    vec![
        ("ce", Objective::CrossEntropy),
        ("sa", Objective::Sa { alpha: 0.2 }),
        ("msmi", Objective::Msmi { beta: 0.25, stop_gradient: false }),
        ("mbce", Objective::Mbce),
    ]
}

/// Network widths used by the gradient check.
pub const GRAD_CHECK_LAYERS: [usize; 4] = [2, 16, 16, 4];
/// Finite-difference step of the gradient check.
pub const GRAD_CHECK_STEP: f64 = 1e-5;

/// Instances with a hidden pre-activation closer than this to the ReLU kink
/// are redrawn, since central differences across the kink are meaningless.
pub const KINK_MARGIN: f64 = 1e-3;

/// Smallest `|pre-activation|` of any hidden unit on any row, computed
/// directly from the weights.
fn min_abs_preactivation(params: &ParameterSet<f64>, rows: &[f64], dim: usize) -> f64 {
    let layers = params.layers();
    let mut least = f64::INFINITY;
    for row in rows.chunks(dim) {
        let mut a = row.to_vec();
        for layer in &layers[..layers.len() - 1] {
            let mut next = Vec::with_capacity(layer.fan_out);
            for o in 0..layer.fan_out {
                let w = &layer.weights[o * layer.fan_in..(o + 1) * layer.fan_in];
                let z = layer.bias[o] + w.iter().zip(&a).map(|(w, v)| w * v).sum::<f64>();
                least = least.min(z.abs());
                next.push(z.max(0.0));
            }
            a = next;
        }
    }
    least
}

/// Reverse-mode gradients against central differences for every loss in
/// [`gradient_check_objectives`], `trials` random instances each.
pub fn verify_gradients(trials: usize, seed: u64) -> Result<VerifyReport> {
    use crate::gradnet::{grad_of_loss, init_params};
    use crate::matrix::Matrix;
    use objective::BatchLoss;

    if trials == 0 {
        return Err(Error::invalid("trials must be >= 1"));
    }
    let k = GRAD_CHECK_LAYERS[GRAD_CHECK_LAYERS.len() - 1];
    let d = GRAD_CHECK_LAYERS[0];
    let mut report = VerifyReport::default();
    for (li, (name, obj)) in gradient_check_objectives().into_iter().enumerate() {
        let check_name: &'static str = match name {
            "ce" => "grad_ce",
            "sa" => "grad_sa",
            "msmi" => "grad_msmi",
            _ => "grad_mbce",
        };
        let mut tr = Tracker::new(check_name, GRAD_REL_TOL);
        let mut draws = 0u64;
        for _ in 0..trials {
            let (inst_seed, params, x, labels, prior, m, n) = loop {
                let inst_seed = seed
                    .wrapping_add(1_000_003 * li as u64)
                    .wrapping_add(draws);
                draws += 1;
                let mut rng = ChaCha8Rng::seed_from_u64(inst_seed);
                let mut params = init_params::<f64>(&GRAD_CHECK_LAYERS, inst_seed)?;
                for layer in params.layers_mut() {
                    for b in layer.bias.iter_mut() {
                        *b = 0.1 * { let z: f64 = StandardNormal.sample(&mut rng); z };
                    }
                }
                let m = rng.gen_range(k..=3 * k);
                let n = rng.gen_range(1..=4);
                let mut normal = || -> f64 { 2.0 * { let z: f64 = StandardNormal.sample(&mut rng); z } };
                let data: Vec<f64> = (0..(m + n) * d).map(|_| normal()).collect();
                let labels: Vec<usize> = (0..m).map(|i| if i < k { i } else { rng.gen_range(0..k) }).collect();
                let prior = ClassPrior::new(random_simplex(&mut rng, k))?;
                if min_abs_preactivation(&params, &data, d) < KINK_MARGIN {
                    continue;
                }
                break (inst_seed, params, Matrix::from_vec(m + n, d, data)?, labels, prior, m, n);
            };
            let loss = BatchLoss::new(obj, &labels, &prior);
            let (_, analytic) = grad_of_loss(&params, &loss, &x)?;
            let numeric = finite_diff_grad(|p| Ok(grad_of_loss(p, &loss, &x)?.0), &params, GRAD_CHECK_STEP)?;
            let err = max_gradient_error(&analytic, &numeric);
            tr.record(err, || format!("loss={name} seed={inst_seed} m={m} n={n}"));
        }
        report.checks.push(tr.finish());
    }
    Ok(report)
}

/// Mid-rank AUROC against the pair count, and ROC area against AUROC, on
/// `trials` random score sets with many ties.
pub fn verify_auroc(trials: usize, seed: u64) -> Result<VerifyReport> {
    use crate::detection::{auroc, roc_points};

    if trials == 0 {
        return Err(Error::invalid("trials must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vs_brute = Tracker::new("auroc_vs_bruteforce", 1e-12);
    let mut vs_area = Tracker::new("roc_area_vs_auroc", 1e-12);
    for t in 0..trials {
        let levels = rng.gen_range(2..=12);
        let m = rng.gen_range(1..=60);
        let n = rng.gen_range(1..=60);
        let mut draw = |c: usize| -> Vec<f64> {
            (0..c).map(|_| rng.gen_range(0..levels) as f64 / levels as f64).collect()
        };
        let ss = ScoreSet::new(draw(m), draw(n))?;
        let a = auroc(&ss);
        vs_brute.record((a - auroc_bruteforce(&ss)).abs(), || format!("trial={t} seed={seed}"));
        vs_area.record((roc_points(&ss).area() - a).abs(), || format!("trial={t} seed={seed}"));
    }
    let mut random = Tracker::new("auroc_random_scorer", 0.02);
    let side = 10_000;
    let id: Vec<f64> = (0..side).map(|_| rng.gen::<f64>()).collect();
    let ood: Vec<f64> = (0..side).map(|_| rng.gen::<f64>()).collect();
    let a = auroc(&ScoreSet::new(id, ood)?);
    random.record((a - 0.5).abs(), || format!("auroc={a}"));
    Ok(VerifyReport {
        checks: vec![vs_brute.finish(), vs_area.finish(), random.finish()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::auroc;

    #[test]
    fn finite_diff_quadratic() {
        let p: ParameterSet<f64> = crate::gradnet::init_params(&[3, 2], 1).unwrap();
        let g = finite_diff_grad(|q: &ParameterSet<f64>| Ok(q.iter().map(|v| v * v).sum()), &p, 1e-4)
            .unwrap();
        for (gi, pi) in g.iter().zip(p.iter()) {
            assert!((gi - 2.0 * pi).abs() < 1e-6);
        }
    }

    #[test]
    fn finite_diff_constant_and_bilinear() {
        let p = ParameterSet::<f64>::from_flat(&[1, 1], &[2.0, 3.0]).unwrap();
        let g = finite_diff_grad(|_: &ParameterSet<f64>| Ok(4.0), &p, 1e-4).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
        let g = finite_diff_grad(|q: &ParameterSet<f64>| Ok(q.get(0) * q.get(1)), &p, 1e-4).unwrap();
        assert!((g.get(0) - 3.0).abs() < 1e-6 && (g.get(1) - 2.0).abs() < 1e-6);
        assert!(finite_diff_grad(|_: &ParameterSet<f64>| Ok(0.0), &p, 0.0).is_err());
        assert!(finite_diff_grad(|_: &ParameterSet<f64>| Ok(f64::NAN), &p, 1e-4).is_err());
    }

    #[test]
    fn bruteforce_examples() {
        let s = |a: &[f64], b: &[f64]| ScoreSet::new(a.to_vec(), b.to_vec()).unwrap();
        assert_eq!(auroc_bruteforce(&s(&[1.0], &[0.0])), 1.0);
        assert_eq!(auroc_bruteforce(&s(&[0.5], &[0.5])), 0.5);
        assert_eq!(auroc_bruteforce(&s(&[0.9, 0.4], &[0.6, 0.2])), 0.75);
        assert_eq!(auroc(&s(&[0.9, 0.4], &[0.6, 0.2])), 0.75);
    }

    #[test]
    fn gradient_error_floor() {
        assert!(gradient_error(1e-9, -5e-8) <= GRAD_REL_TOL);
        assert!(gradient_error(1.0, 1.0 + 5e-5) <= GRAD_REL_TOL);
        assert!(gradient_error(1.0, 1.001) > GRAD_REL_TOL);
    }

    #[test]
    fn bound_chain_passes() {
        let r = verify_bound_chain(200, 5).unwrap();
        assert!(r.all_passed(), "{}", r.to_text());
    }

    #[test]
    fn zero_alpha_makes_the_chain_an_equality() {
        let r = verify_bound_chain_with(50, 2, Some(0.0)).unwrap();
        assert_eq!(r.get("bound_chain").unwrap().max_violation, 0.0);
        assert!(r.all_passed());
    }

    #[test]
    fn identities_pass() {
        let r = verify_identities(200, 9).unwrap();
        assert!(r.all_passed(), "{}", r.to_text());
    }

    #[test]
    fn sigma_spot_values() {
        assert_eq!(sigmoid(1f64.ln()), 0.5);
        let d = objective::discriminator_d(0.25_f64).unwrap();
        assert!((d - 0.2).abs() < 1e-15);
        assert!((logit(d) - 0.25f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_trials_rejected() {
        assert!(verify_bound_chain(0, 0).is_err());
        assert!(verify_identities(0, 0).is_err());
    }
}

//! Top-level commands. Each writes its files into an output directory.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::datasets::{LabeledSet, UnlabeledSet};
use crate::detection::fmt_sig9;
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::gradnet::{checkpoint, ParameterSet};
use crate::oracle::{self, VerifyReport};

use super::config::{ExperimentConfig, Method};
use super::eval::{evaluate, trend_header, trend_line, trend_row, Evaluation, TrendRow};
use super::experiment::{prepare_data, train_run, PreparedData, TrainOutcome, Trainer};
use super::report::EvalReport;

/// Everything one run produced, before anything is written.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub report: EvalReport,
    pub outcome: TrainOutcome,
    pub evaluation: Evaluation,
    pub trend: Vec<TrendRow>,
    pub ood_names: Vec<String>,
}

/// Trains and evaluates without touching the filesystem. `trend` enables the
/// per-epoch confidence trace; `on_trend` sees each row as it is produced.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    trend: bool,
    mut on_trend: impl FnMut(&[TrendRow]) -> Result<()>,
) -> Result<RunResult> {
    cfg.validate()?;
    let data = prepare_data(cfg)?;
    run_on_data(cfg, &data, trend, &mut on_trend)
}

/// As [`run_experiment`] on already prepared data.
pub fn run_on_data(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    trend: bool,
    on_trend: &mut dyn FnMut(&[TrendRow]) -> Result<()>,
) -> Result<RunResult> {
    let mut rows = Vec::new();
    let mut observer = |epoch: usize, params: &ParameterSet<f64>| -> Result<()> {
        if epoch.is_multiple_of(cfg.eval_every) {
            rows.push(trend_row(epoch, params, &data.id_test, &data.ood_test)?);
            on_trend(&rows)?;
        }
        Ok(())
    };
    let outcome = if trend {
        train_run(cfg, data, Some(&mut observer))?
    } else {
        train_run(cfg, data, None)?
    };
    let evaluation = evaluate(&outcome.params, &data.id_test, &data.ood_test)?;
    let mut report = EvalReport::from_eval(&evaluation).with_config(cfg);
    report.throughput = outcome.throughput();
    report.epochs_run = outcome.epochs_run;
    report.final_loss = outcome.loss_trace.last().copied();
    report.id_train_size = Some(data.id_train.len());
    report.ood_train_size = Some(data.ood_train.len());
    Ok(RunResult {
        report,
        outcome,
        evaluation,
        trend: rows,
        ood_names: data.ood_test.iter().map(|(n, _)| n.clone()).collect(),
    })
}

fn trend_csv(names: &[String], rows: &[TrendRow]) -> String {
    let mut s = trend_header(names);
    for r in rows {
        s.push_str(&trend_line(r));
    }
    s
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Trains, then writes `checkpoint.bin`, `report.json`, `timing.json`,
/// `trend.csv`, `roc_<set>.csv`, `probs.csv` and `features.csv`.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<RunResult> {
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    create_dir(&dir)?;
    let data = prepare_data(cfg)?;
    let names: Vec<String> = data.ood_test.iter().map(|(n, _)| n.clone()).collect();
    let trend_path = dir.join("trend.csv");
    write_atomic(&trend_path, trend_header(&names).as_bytes())?;
    let mut write_trend =
        |rows: &[TrendRow]| write_atomic(&trend_path, trend_csv(&names, rows).as_bytes());
    let res = run_on_data(cfg, &data, true, &mut write_trend)?;
    checkpoint::save(&res.outcome.params, &dir.join("checkpoint.bin"))?;
    res.report.write_json(&dir.join("report.json"))?;
    res.report.write_timing(
        &dir.join("timing.json"),
        res.outcome.samples,
        res.outcome.train_seconds,
    )?;
    res.evaluation.write_artifacts(&dir)?;
    log::info!(
        "trained {} for {} epochs: acc {:.4}, auroc_mean {:.4}",
        cfg.method,
        res.outcome.epochs_run,
        res.report.acc,
        res.report.auroc_mean
    );
    Ok(res)
}

/// Evaluates a saved checkpoint and writes `report.json`, `roc_<set>.csv`,
/// `probs.csv` and `features.csv` into `out`.
pub fn cmd_eval(
    checkpoint_path: &Path,
    id_test: &LabeledSet<f64>,
    ood_test: &[(String, UnlabeledSet<f64>)],
    out: &Path,
) -> Result<EvalReport> {
    let params: ParameterSet<f64> = checkpoint::load(checkpoint_path)?;
    let evaluation = evaluate(&params, id_test, ood_test)?;
    let report = EvalReport::from_eval(&evaluation);
    create_dir(out)?;
    report.write_json(&out.join("report.json"))?;
    evaluation.write_artifacts(out)?;
    Ok(report)
}

/// Hyperparameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Epsilon,
    Alpha,
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "epsilon" => Ok(SweepParam::Epsilon),
            "alpha" => Ok(SweepParam::Alpha),
            other => Err(Error::Config(format!(
                "sweep parameter must be epsilon or alpha, got `{other}`"
            ))),
        }
    }
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Epsilon => "epsilon",
            SweepParam::Alpha => "alpha",
        }
    }
}

/// One trained cell of a sweep or ablation.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub key: String,
    pub seed: u64,
    pub report: EvalReport,
}

fn run_cells(cells: Vec<(String, ExperimentConfig)>) -> Result<Vec<CellResult>> {
    cells
        .into_par_iter()
        .map(|(key, cfg)| {
            let res = run_experiment(&cfg, false, |_| Ok(()))?;
            Ok(CellResult {
                key,
                seed: cfg.seed,
                report: res.report,
            })
        })
        .collect()
}

fn cells_csv(first: &str, cells: &[CellResult]) -> String {
    let names: Vec<&str> = cells
        .first()
        .map(|c| c.report.auroc_per_ood_set.iter().map(|(n, _)| n.as_str()).collect())
        .unwrap_or_default();
    let mut s = format!("{first},seed,acc,auroc_mean");
    for n in &names {
        let _ = write!(s, ",auroc_{n}");
    }
    s.push('\n');
    for c in cells {
        let _ = write!(
            s,
            "{},{},{},{}",
            c.key,
            c.seed,
            fmt_sig9(c.report.acc),
            fmt_sig9(c.report.auroc_mean)
        );
        for (_, v) in &c.report.auroc_per_ood_set {
            let _ = write!(s, ",{}", fmt_sig9(*v));
        }
        s.push('\n');
    }
    s
}

/// Per-key means over seeds, keys in first-appearance order.
fn summary_csv(first: &str, cells: &[CellResult]) -> String {
    let mut keys: Vec<&str> = Vec::new();
    for c in cells {
        if !keys.contains(&c.key.as_str()) {
            keys.push(&c.key);
        }
    }
    let names: Vec<&str> = cells
        .first()
        .map(|c| c.report.auroc_per_ood_set.iter().map(|(n, _)| n.as_str()).collect())
        .unwrap_or_default();
    let mut s = format!("{first},seeds,acc,auroc_mean");
    for n in &names {
        let _ = write!(s, ",auroc_{n}");
    }
    s.push('\n');
    for k in keys {
        let group: Vec<&CellResult> = cells.iter().filter(|c| c.key == k).collect();
        let n = group.len() as f64;
        let avg = |f: &dyn Fn(&CellResult) -> f64| group.iter().map(|c| f(c)).sum::<f64>() / n;
        let _ = write!(
            s,
            "{k},{},{},{}",
            group.len(),
            fmt_sig9(avg(&|c| c.report.acc)),
            fmt_sig9(avg(&|c| c.report.auroc_mean))
        );
        for i in 0..names.len() {
            let _ = write!(s, ",{}", fmt_sig9(avg(&|c| c.report.auroc_per_ood_set[i].1)));
        }
        s.push('\n');
    }
    s
}

fn check_seeds(seeds: &[u64]) -> Result<()> {
    if seeds.is_empty() {
        return Err(Error::Config("seed list is empty".into()));
    }
    Ok(())
}

/// Trains one run per `(value, seed)` cell and writes `sweep.csv` (one row
/// per cell) and `sweep_summary.csv` (seed means per value) into `out`.
pub fn cmd_sweep(
    cfg: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
    seeds: &[u64],
    out: &Path,
) -> Result<Vec<CellResult>> {
    if values.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    check_seeds(seeds)?;
    let mut cells = Vec::with_capacity(values.len() * seeds.len());
    for &v in values {
        for &seed in seeds {
            let mut c = cfg.clone();
            c.seed = seed;
            match param {
                SweepParam::Epsilon => c.epsilon = v,
                SweepParam::Alpha => c.alpha = v,
            }
            c.validate().map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("sweep value {v}: {m}")),
                other => other,
            })?;
            cells.push((v.to_string(), c));
        }
    }
    let results = run_cells(cells)?;
    create_dir(out)?;
    write_atomic(&out.join("sweep.csv"), cells_csv(param.name(), &results).as_bytes())?;
    write_atomic(
        &out.join("sweep_summary.csv"),
        summary_csv(param.name(), &results).as_bytes(),
    )?;
    Ok(results)
}

/// Methods compared by [`cmd_ablate`], in row order.
pub const ABLATION_METHODS: [Method; 3] = [Method::Sa, Method::Msmi, Method::Mbce];

/// Trains SA, MSMI (weight tied to alpha) and MBCE on shared data per seed and
/// writes `ablate.csv` and `ablate_summary.csv` into `out`.
pub fn cmd_ablate(cfg: &ExperimentConfig, seeds: &[u64], out: &Path) -> Result<Vec<CellResult>> {
    check_seeds(seeds)?;
    let mut cells = Vec::with_capacity(3 * seeds.len());
    for &seed in seeds {
        for m in ABLATION_METHODS {
            let mut c = cfg.clone();
            c.seed = seed;
            c.method = m;
            c.msmi_beta = None;
            c.validate()?;
            cells.push((m.to_string(), c));
        }
    }
    let results = run_cells(cells)?;
    create_dir(out)?;
    write_atomic(&out.join("ablate.csv"), cells_csv("method", &results).as_bytes())?;
    write_atomic(
        &out.join("ablate_summary.csv"),
        summary_csv("method", &results).as_bytes(),
    )?;
    Ok(results)
}

/// Trains and writes only `trend.csv` into the configured output directory.
pub fn cmd_trend(cfg: &ExperimentConfig) -> Result<Vec<TrendRow>> {
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    create_dir(&dir)?;
    let data = prepare_data(cfg)?;
    let names: Vec<String> = data.ood_test.iter().map(|(n, _)| n.clone()).collect();
    let path = dir.join("trend.csv");
    write_atomic(&path, trend_header(&names).as_bytes())?;
    let mut write_trend = |rows: &[TrendRow]| write_atomic(&path, trend_csv(&names, rows).as_bytes());
    let res = run_on_data(cfg, &data, true, &mut write_trend)?;
    Ok(res.trend)
}

/// Trains several runs in lockstep, one epoch of each in turn, so that their
/// timings see the same machine load. Useful for throughput comparisons.
pub fn train_interleaved(cfgs: &[ExperimentConfig]) -> Result<Vec<TrainOutcome>> {
    let data = cfgs
        .iter()
        .map(|c| {
            c.validate()?;
            prepare_data(c)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut trainers = cfgs
        .iter()
        .zip(&data)
        .map(|(c, d)| Trainer::new(c, d))
        .collect::<Result<Vec<_>>>()?;
    while trainers.iter().any(|t| !t.is_done()) {
        for t in trainers.iter_mut().filter(|t| !t.is_done()) {
            t.run_epoch()?;
        }
    }
    Ok(trainers.into_iter().map(Trainer::finish).collect())
}

/// Runs every oracle check and writes `verify.json` into `out`.
pub fn cmd_verify(trials: usize, seed: u64, out: &Path) -> Result<VerifyReport> {
    let report = oracle::verify_bound_chain(trials, seed)?
        .merge(oracle::verify_identities(trials, seed.wrapping_add(1))?)
        .merge(oracle::verify_gradients(trials.clamp(1, 20), seed.wrapping_add(2))?)
        .merge(oracle::verify_auroc(trials.clamp(1, 200), seed.wrapping_add(3))?);
    create_dir(out)?;
    report.write_json(&out.join("verify.json"))?;
    Ok(report)
}

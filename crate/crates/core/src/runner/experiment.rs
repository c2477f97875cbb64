//! Data preparation and the training loop of a single run.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::datasets::{
    gen_id_gaussians, gen_ood, load_labeled_csv, load_unlabeled_csv, make_batches, ood_budget,
    BatchPlan, LabeledSet, MixSpec, UnlabeledSet,
};
use crate::error::{Error, Result};
use crate::gradnet::{grad_of_loss, init_params, sgd_step, MomentumState, ParameterSet, TrainConfig};
use crate::objective::{class_prior, BatchLoss, ClassPrior, Objective};

use super::config::{DataSource, ExperimentConfig, Method};

const INIT_OFFSET: u64 = 0x1000_0000;
const SHUFFLE_OFFSET: u64 = 0x2000_0000;
const OOD_SUBSET_OFFSET: u64 = 0x3000_0000;

/// Seeds derived from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedPlan {
    pub master: u64,
    pub data: u64,
    pub init: u64,
    pub shuffle: u64,
    pub ood_subset: u64,
}

impl SeedPlan {
    pub fn new(master: u64) -> Self {
        Self {
            master,
            data: master,
            init: master.wrapping_add(INIT_OFFSET),
            shuffle: master.wrapping_add(SHUFFLE_OFFSET),
            ood_subset: master.wrapping_add(OOD_SUBSET_OFFSET),
        }
    }
}

/// Everything a run trains and evaluates on.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub id_train: LabeledSet<f64>,
    pub id_test: LabeledSet<f64>,
    /// Exactly the OOD budget for the configured epsilon (empty for baseline).
    pub ood_train: UnlabeledSet<f64>,
    pub ood_test: Vec<(String, UnlabeledSet<f64>)>,
    pub prior: ClassPrior<f64>,
}

/// Epsilon that actually drives batching: baseline runs never see OOD data.
pub fn effective_epsilon(cfg: &ExperimentConfig) -> f64 {
    match cfg.method {
        Method::Baseline => 0.0,
        _ => cfg.epsilon,
    }
}

/// Unique display names; repeated names get a `_2`, `_3`, ... suffix.
fn unique_names(names: Vec<String>) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(names.len());
    for n in names {
        let mut name = n.clone();
        let mut k = 2;
        while out.contains(&name) {
            name = format!("{n}_{k}");
            k += 1;
        }
        out.push(name);
    }
    out
}

pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    if cfg.method == Method::Baseline && cfg.epsilon > 0.0 {
        log::warn!("method = baseline ignores epsilon = {}", cfg.epsilon);
    }
    let seeds = SeedPlan::new(cfg.seed);
    let eps = effective_epsilon(cfg);
    let (id_train, id_test, ood_train, ood_test) = match &cfg.data {
        DataSource::Synthetic(s) => {
            let train = gen_id_gaussians(s.classes, s.train_per_class, s.dim, s.spread, seeds.data)?;
            let test = gen_id_gaussians(
                s.classes,
                s.test_per_class,
                s.dim,
                s.spread,
                seeds.data.wrapping_add(1),
            )?;
            let budget = ood_budget(train.len(), eps)?;
            let ood_train = if budget == 0 {
                UnlabeledSet::empty(s.dim)
            } else {
                gen_ood(&s.ood_train, budget, s.dim, seeds.data.wrapping_add(2))?
            };
            let names = unique_names(s.ood_test.iter().map(|k| k.name().to_string()).collect());
            let mut tests = Vec::with_capacity(names.len());
            for (i, (kind, name)) in s.ood_test.iter().zip(names).enumerate() {
                let seed = seeds.data.wrapping_add(3 + i as u64);
                tests.push((name, gen_ood(kind, s.ood_test_size, s.dim, seed)?));
            }
            (train, test, ood_train, tests)
        }
        DataSource::Csv(c) => {
            let train: LabeledSet<f64> = load_labeled_csv(&c.id_train, None)?;
            let test = load_labeled_csv(&c.id_test, Some(train.classes()))?;
            check_dim(train.dim(), test.dim(), &c.id_test.display().to_string())?;
            let budget = ood_budget(train.len(), eps)?;
            let ood_train = match (&c.ood_train, budget) {
                (_, 0) => UnlabeledSet::empty(train.dim()),
                (None, _) => {
                    return Err(Error::Config(format!(
                        "epsilon = {eps} needs {budget} OOD training samples but data.ood_train_csv is unset"
                    )))
                }
                (Some(path), _) => {
                    let pool: UnlabeledSet<f64> = load_unlabeled_csv(path)?;
                    check_dim(train.dim(), pool.dim(), &path.display().to_string())?;
                    if pool.len() < budget {
                        return Err(Error::invalid(format!(
                            "{} holds {} OOD samples, the budget is {budget}",
                            path.display(),
                            pool.len()
                        )));
                    }
                    let mut idx: Vec<usize> = (0..pool.len()).collect();
                    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seeds.ood_subset));
                    idx.truncate(budget);
                    UnlabeledSet::new(pool.x().select_rows(&idx))?
                }
            };
            let names = unique_names(
                c.ood_test
                    .iter()
                    .map(|p| {
                        p.file_stem()
                            .map_or_else(|| "ood".to_string(), |s| s.to_string_lossy().into_owned())
                    })
                    .collect(),
            );
            let mut tests = Vec::with_capacity(names.len());
            for (path, name) in c.ood_test.iter().zip(names) {
                let set: UnlabeledSet<f64> = load_unlabeled_csv(path)?;
                check_dim(train.dim(), set.dim(), &path.display().to_string())?;
                tests.push((name, set));
            }
            (train, test, ood_train, tests)
        }
    };
    let prior = class_prior(id_train.y(), id_train.classes())?;
    Ok(PreparedData {
        id_train,
        id_test,
        ood_train,
        ood_test,
        prior,
    })
}

fn check_dim(expected: usize, got: usize, what: &str) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::shape(format!(
            "{what} has feature dimension {got}, expected {expected}"
        )))
    }
}

pub fn objective_for(cfg: &ExperimentConfig) -> Objective<f64> {
    match cfg.method {
        Method::Baseline => Objective::CrossEntropy,
        Method::Sa => Objective::Sa { alpha: cfg.alpha },
        Method::Msmi => Objective::Msmi {
            beta: cfg.effective_beta(),
            stop_gradient: cfg.msmi_stop_gradient,
        },
        Method::Mbce => Objective::Mbce,
    }
}

/// Optimizer settings with the layer sizes and init seed of this run.
pub fn train_config(cfg: &ExperimentConfig, data: &PreparedData) -> TrainConfig {
    let mut t = cfg.train.clone();
    t.layer_sizes = std::iter::once(data.id_train.dim())
        .chain(cfg.hidden.iter().copied())
        .chain(std::iter::once(data.id_train.classes()))
        .collect();
    t.seed = SeedPlan::new(cfg.seed).init;
    t
}

pub fn batch_plan<'a>(cfg: &ExperimentConfig, data: &'a PreparedData) -> Result<BatchPlan<'a, f64>> {
    make_batches(
        &data.id_train,
        &data.ood_train,
        MixSpec {
            epsilon: effective_epsilon(cfg),
            batch_size: cfg.train.batch_size,
            seed: SeedPlan::new(cfg.seed).shuffle,
        },
    )
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ParameterSet<f64>,
    /// Minimized loss (negated objective) of every step, in order.
    pub loss_trace: Vec<f64>,
    /// ID plus OOD rows fed to the optimizer.
    pub samples: u64,
    /// Wall clock spent in forward, loss, backward and update.
    pub train_seconds: f64,
    pub epochs_run: usize,
}

impl TrainOutcome {
    /// Samples per second, or `None` when no step ran.
    pub fn throughput(&self) -> Option<f64> {
        if self.samples == 0 || self.train_seconds <= 0.0 {
            None
        } else {
            Some(self.samples as f64 / self.train_seconds)
        }
    }
}

/// Step-by-step training state of one run.
pub struct Trainer<'a> {
    cfg: TrainConfig,
    data: &'a PreparedData,
    plan: BatchPlan<'a, f64>,
    objective: Objective<f64>,
    params: ParameterSet<f64>,
    state: MomentumState<f64>,
    outcome: TrainOutcome,
}

impl<'a> Trainer<'a> {
    /// Fresh initialization for `cfg` on `data`.
    pub fn new(cfg: &ExperimentConfig, data: &'a PreparedData) -> Result<Self> {
        let tc = train_config(cfg, data);
        tc.validate()?;
        let params = init_params::<f64>(&tc.layer_sizes, tc.seed)?;
        let state = MomentumState::new(&params);
        let plan = batch_plan(cfg, data)?;
        Ok(Self {
            objective: objective_for(cfg),
            outcome: TrainOutcome {
                params: params.clone(),
                loss_trace: Vec::new(),
                samples: 0,
                train_seconds: 0.0,
                epochs_run: 0,
            },
            cfg: tc,
            data,
            plan,
            params,
            state,
        })
    }

    pub fn params(&self) -> &ParameterSet<f64> {
        &self.params
    }

    pub fn epochs_run(&self) -> usize {
        self.outcome.epochs_run
    }

    pub fn is_done(&self) -> bool {
        self.outcome.epochs_run >= self.cfg.epochs
    }

    /// Runs the next epoch and returns its 1-based number.
    pub fn run_epoch(&mut self) -> Result<usize> {
        let epoch = self.outcome.epochs_run;
        let lr = self.cfg.lr_at(epoch);
        for (b, batch) in self.plan.epoch(epoch).enumerate() {
            let at = |what: &str| format!("{what} at epoch {} batch {}", epoch + 1, b + 1);
            let x = batch.stacked();
            let started = Instant::now();
            let loss = BatchLoss::new(self.objective, &batch.id_y, &self.data.prior);
            let (value, grads) = grad_of_loss(&self.params, &loss, &x).map_err(|e| match e {
                Error::NonFinite { stage } => Error::non_finite(at(&stage)),
                other => other,
            })?;
            sgd_step(
                &mut self.params,
                &grads,
                lr,
                &mut self.state,
                self.cfg.momentum,
                self.cfg.weight_decay,
            )?;
            self.outcome.train_seconds += started.elapsed().as_secs_f64();
            if !self.params.all_finite() {
                return Err(Error::non_finite(at("parameters")));
            }
            self.outcome.loss_trace.push(value);
            self.outcome.samples += x.rows() as u64;
        }
        self.outcome.epochs_run = epoch + 1;
        Ok(epoch + 1)
    }

    pub fn finish(mut self) -> TrainOutcome {
        self.outcome.params = self.params;
        self.outcome
    }
}

/// Trains from a fresh initialization. `on_epoch` sees the 1-based epoch
/// number and the parameters after it.
pub fn train_run(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    mut on_epoch: Option<&mut dyn FnMut(usize, &ParameterSet<f64>) -> Result<()>>,
) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(cfg, data)?;
    while !trainer.is_done() {
        let epoch = trainer.run_epoch()?;
        if let Some(f) = on_epoch.as_mut() {
            f(epoch, trainer.params())?;
        }
    }
    Ok(trainer.finish())
}

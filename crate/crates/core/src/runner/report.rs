//! The flat `report.json` object.

use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::Result;
use crate::fsutil::write_atomic;

use super::config::ExperimentConfig;
use super::eval::{mean_auroc, Evaluation};
use super::experiment::{effective_epsilon, SeedPlan};

/// Metrics of one evaluated model plus the settings that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub acc: f64,
    pub auroc_per_ood_set: Vec<(String, f64)>,
    pub auroc_mean: f64,
    /// Training samples per second; absent for evaluation-only reports and
    /// zero-epoch runs.
    pub throughput: Option<f64>,
    pub config_echo: Option<String>,
    pub method: Option<String>,
    pub alpha: Option<f64>,
    pub epsilon: Option<f64>,
    pub beta: Option<f64>,
    pub seeds: Option<SeedPlan>,
    pub epochs_run: usize,
    pub final_loss: Option<f64>,
    pub id_train_size: Option<usize>,
    pub ood_train_size: Option<usize>,
}

impl EvalReport {
    pub fn from_eval(eval: &Evaluation) -> Self {
        Self {
            acc: eval.acc,
            auroc_per_ood_set: eval.auroc.clone(),
            auroc_mean: eval.auroc_mean,
            throughput: None,
            config_echo: None,
            method: None,
            alpha: None,
            epsilon: None,
            beta: None,
            seeds: None,
            epochs_run: 0,
            final_loss: None,
            id_train_size: None,
            ood_train_size: None,
        }
    }

    /// Fills in the run settings from `cfg`.
    pub fn with_config(mut self, cfg: &ExperimentConfig) -> Self {
        self.config_echo = Some(cfg.echo());
        self.method = Some(cfg.method.to_string());
        self.alpha = Some(cfg.alpha);
        self.epsilon = Some(effective_epsilon(cfg));
        self.beta = Some(cfg.effective_beta());
        self.seeds = Some(SeedPlan::new(cfg.seed));
        self
    }

    pub fn auroc(&self, set: &str) -> Option<f64> {
        self.auroc_per_ood_set
            .iter()
            .find(|(n, _)| n == set)
            .map(|&(_, v)| v)
    }

    /// `auroc_mean` recomputed from the per-set values.
    pub fn recomputed_mean(&self) -> f64 {
        mean_auroc(&self.auroc_per_ood_set)
    }

    /// Flat object with sorted keys. Throughput is left out so that reruns
    /// produce identical bytes; it goes to `timing.json` instead.
    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        let opt = |v: Option<f64>| v.map_or(Value::Null, |x| json!(x));
        m.insert("acc".into(), json!(self.acc));
        for (name, v) in &self.auroc_per_ood_set {
            m.insert(format!("auroc.{name}"), json!(v));
        }
        m.insert("auroc_mean".into(), json!(self.auroc_mean));
        m.insert("config".into(), self.config_echo.clone().map_or(Value::Null, Value::String));
        m.insert("method".into(), self.method.clone().map_or(Value::Null, Value::String));
        m.insert("alpha".into(), opt(self.alpha));
        m.insert("epsilon".into(), opt(self.epsilon));
        m.insert("beta".into(), opt(self.beta));
        let s = self.seeds;
        let seed = |f: fn(&SeedPlan) -> u64| s.as_ref().map_or(Value::Null, |p| json!(f(p)));
        m.insert("seed".into(), seed(|p| p.master));
        m.insert("seed.data".into(), seed(|p| p.data));
        m.insert("seed.init".into(), seed(|p| p.init));
        m.insert("seed.shuffle".into(), seed(|p| p.shuffle));
        m.insert("seed.ood_subset".into(), seed(|p| p.ood_subset));
        m.insert("epochs_run".into(), json!(self.epochs_run));
        m.insert("final_loss".into(), opt(self.final_loss));
        m.insert(
            "id_train_size".into(),
            self.id_train_size.map_or(Value::Null, |v| json!(v)),
        );
        m.insert(
            "ood_train_size".into(),
            self.ood_train_size.map_or(Value::Null, |v| json!(v)),
        );
        Value::Object(m)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(&self.to_json())?;
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }

    /// `{"throughput", "samples", "train_seconds"}`.
    pub fn write_timing(&self, path: &Path, samples: u64, train_seconds: f64) -> Result<()> {
        let v = json!({
            "throughput": self.throughput,
            "samples": samples,
            "train_seconds": train_seconds,
        });
        let mut text = serde_json::to_string_pretty(&v)?;
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }
}

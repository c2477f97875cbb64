//! Experiment configuration.
//!
//! Flat `key = value` lines with dotted section prefixes, `#` comments and
//! blank lines allowed. Unknown or repeated keys are errors. Lists are
//! comma-separated.
//!
//! ```text
//! method = sa
//! alpha = 0.2
//! epsilon = 0.05
//! data.ood_test = ring,uniform_noise,shifted_blob
//! train.hidden = 64,64
//! train.lr0 = 0.1
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::datasets::OodKind;
use crate::error::{Error, Result};
use crate::gradnet::TrainConfig;

/// Training objective selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Baseline,
    Sa,
    Msmi,
    Mbce,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::Sa => "sa",
            Method::Msmi => "msmi",
            Method::Mbce => "mbce",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Method::Baseline),
            "sa" => Ok(Method::Sa),
            "msmi" => Ok(Method::Msmi),
            "mbce" => Ok(Method::Mbce),
            other => Err(Error::Config(format!(
                "unknown method `{other}` (expected baseline, sa, msmi, mbce)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub classes: usize,
    pub dim: usize,
    pub spread: f64,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub ood_train: OodKind,
    pub ood_test: Vec<OodKind>,
    pub ood_test_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvData {
    pub id_train: PathBuf,
    pub id_test: PathBuf,
    pub ood_train: Option<PathBuf>,
    pub ood_test: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic(SyntheticData),
    Csv(CsvData),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub method: Method,
    pub alpha: f64,
    pub epsilon: f64,
    /// Free MSMI weight; `None` ties it to `alpha / (1 - alpha)`.
    pub msmi_beta: Option<f64>,
    pub msmi_stop_gradient: bool,
    pub seed: u64,
    pub data: DataSource,
    /// Hidden widths; input and output widths come from the data.
    pub hidden: Vec<usize>,
    /// Optimizer settings. `layer_sizes` and `seed` are filled in per run.
    pub train: TrainConfig,
    /// Trend evaluation cadence in epochs.
    pub eval_every: usize,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            method: Method::Sa,
            alpha: 0.2,
            epsilon: 0.05,
            msmi_beta: None,
            msmi_stop_gradient: false,
            seed: 0,
            data: DataSource::Synthetic(SyntheticData {
                classes: 4,
                dim: 2,
                spread: 1.0,
                train_per_class: 250,
                test_per_class: 250,
                ood_train: OodKind::from_name("ring").expect("known kind"),
                ood_test: ["ring", "uniform_noise", "shifted_blob"]
                    .iter()
                    .map(|k| OodKind::from_name(k).expect("known kind"))
                    .collect(),
                ood_test_size: 1000,
            }),
            hidden: vec![64, 64],
            train: TrainConfig {
                layer_sizes: Vec::new(),
                ..TrainConfig::default()
            },
            eval_every: 1,
            output_dir: PathBuf::from("out"),
        }
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{v}`")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| parse_num(key, s.trim())).collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got `{v}`"))),
    }
}

/// Kind names plus per-kind parameter overrides.
#[derive(Debug, Default)]
struct KindParams {
    ring: (Option<f64>, Option<f64>),
    uniform: (Option<f64>, Option<f64>),
    blob: (Option<f64>, Option<f64>, Option<f64>),
}

impl KindParams {
    fn kind(&self, name: &str) -> Result<OodKind> {
        let mut k = OodKind::from_name(name).map_err(|e| Error::Config(e.to_string()))?;
        match &mut k {
            OodKind::Ring { r_lo, r_hi } => {
                *r_lo = self.ring.0.unwrap_or(*r_lo);
                *r_hi = self.ring.1.unwrap_or(*r_hi);
            }
            OodKind::UniformNoise { lo, hi } => {
                *lo = self.uniform.0.unwrap_or(*lo);
                *hi = self.uniform.1.unwrap_or(*hi);
            }
            OodKind::ShiftedBlob { radius, angle, spread } => {
                *radius = self.blob.0.unwrap_or(*radius);
                *angle = self.blob.1.unwrap_or(*angle);
                *spread = self.blob.2.unwrap_or(*spread);
            }
            OodKind::GaussianNoise => {}
        }
        Ok(k)
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        // Relative CSV paths resolve against the config file's directory.
        if let (DataSource::Csv(csv), Some(dir)) = (&mut cfg.data, path.parent()) {
            let fix = |p: &mut PathBuf| {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            };
            fix(&mut csv.id_train);
            fix(&mut csv.id_test);
            if let Some(p) = csv.ood_train.as_mut() {
                fix(p);
            }
            csv.ood_test.iter_mut().for_each(fix);
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if entries.insert(k.clone(), v).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{k}`", n + 1)));
            }
        }
        Self::from_entries(entries)
    }

    fn from_entries(entries: BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = Self::default();
        let mut synth = match &cfg.data {
            DataSource::Synthetic(s) => s.clone(),
            DataSource::Csv(_) => unreachable!(),
        };
        let mut source = "synthetic".to_string();
        let mut ood_train_name = "ring".to_string();
        let mut ood_test_names = vec![
            "ring".to_string(),
            "uniform_noise".to_string(),
            "shifted_blob".to_string(),
        ];
        let mut kp = KindParams::default();
        let mut id_train_csv = None;
        let mut id_test_csv = None;
        let mut ood_train_csv = None;
        let mut ood_test_csv = Vec::new();

        for (key, v) in &entries {
            let k = key.as_str();
            match k {
                "method" => cfg.method = v.parse()?,
                "alpha" => cfg.alpha = parse_num(k, v)?,
                "epsilon" => cfg.epsilon = parse_num(k, v)?,
                "seed" => cfg.seed = parse_num(k, v)?,
                "output_dir" => cfg.output_dir = PathBuf::from(v),
                "msmi.beta" => cfg.msmi_beta = Some(parse_num(k, v)?),
                "msmi.stop_gradient" => cfg.msmi_stop_gradient = parse_bool(k, v)?,
                "data.source" => source = v.clone(),
                "data.classes" => synth.classes = parse_num(k, v)?,
                "data.dim" => synth.dim = parse_num(k, v)?,
                "data.spread" => synth.spread = parse_num(k, v)?,
                "data.train_per_class" => synth.train_per_class = parse_num(k, v)?,
                "data.test_per_class" => synth.test_per_class = parse_num(k, v)?,
                "data.ood_train" => ood_train_name = v.clone(),
                "data.ood_test" => {
                    ood_test_names = v.split(',').map(|s| s.trim().to_string()).collect()
                }
                "data.ood_test_size" => synth.ood_test_size = parse_num(k, v)?,
                "data.ring.r_lo" => kp.ring.0 = Some(parse_num(k, v)?),
                "data.ring.r_hi" => kp.ring.1 = Some(parse_num(k, v)?),
                "data.uniform.lo" => kp.uniform.0 = Some(parse_num(k, v)?),
                "data.uniform.hi" => kp.uniform.1 = Some(parse_num(k, v)?),
                "data.blob.radius" => kp.blob.0 = Some(parse_num(k, v)?),
                "data.blob.angle" => kp.blob.1 = Some(parse_num(k, v)?),
                "data.blob.spread" => kp.blob.2 = Some(parse_num(k, v)?),
                "data.id_train_csv" => id_train_csv = Some(PathBuf::from(v)),
                "data.id_test_csv" => id_test_csv = Some(PathBuf::from(v)),
                "data.ood_train_csv" => ood_train_csv = Some(PathBuf::from(v)),
                "data.ood_test_csv" => {
                    ood_test_csv = v.split(',').map(|s| PathBuf::from(s.trim())).collect()
                }
                "train.hidden" => cfg.hidden = parse_list(k, v)?,
                "train.lr0" => cfg.train.lr0 = parse_num(k, v)?,
                "train.lr_decay_epochs" => cfg.train.lr_decay_epochs = parse_list(k, v)?,
                "train.lr_decay_factor" => cfg.train.lr_decay_factor = parse_num(k, v)?,
                "train.momentum" => cfg.train.momentum = parse_num(k, v)?,
                "train.weight_decay" => cfg.train.weight_decay = parse_num(k, v)?,
                "train.epochs" => cfg.train.epochs = parse_num(k, v)?,
                "train.batch_size" => cfg.train.batch_size = parse_num(k, v)?,
                "eval.every" => cfg.eval_every = parse_num(k, v)?,
                other => return Err(Error::Config(format!("unknown key `{other}`"))),
            }
        }

        cfg.data = match source.as_str() {
            "synthetic" => {
                synth.ood_train = kp.kind(&ood_train_name)?;
                synth.ood_test = ood_test_names
                    .iter()
                    .map(|n| kp.kind(n))
                    .collect::<Result<_>>()?;
                DataSource::Synthetic(synth)
            }
            "csv" => {
                let need = |p: Option<PathBuf>, key: &str| {
                    p.ok_or_else(|| Error::Config(format!("data.source = csv requires {key}")))
                };
                DataSource::Csv(CsvData {
                    id_train: need(id_train_csv, "data.id_train_csv")?,
                    id_test: need(id_test_csv, "data.id_test_csv")?,
                    ood_train: ood_train_csv,
                    ood_test: ood_test_csv,
                })
            }
            other => {
                return Err(Error::Config(format!(
                    "data.source must be synthetic or csv, got `{other}`"
                )))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0..1.0).contains(&self.alpha) {
            return bad(format!("alpha must be in [0,1), got {}", self.alpha));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return bad(format!("epsilon must be in [0,1), got {}", self.epsilon));
        }
        if let Some(b) = self.msmi_beta {
            if !(b >= 0.0 && b.is_finite()) {
                return bad(format!("msmi.beta must be >= 0, got {b}"));
            }
        }
        if self.hidden.contains(&0) {
            return bad("train.hidden entries must be positive".into());
        }
        if self.eval_every == 0 {
            return bad("eval.every must be positive".into());
        }
        if self.train.batch_size < 2 {
            return bad(format!("train.batch_size must be >= 2, got {}", self.train.batch_size));
        }
        match &self.data {
            DataSource::Synthetic(s) => {
                if s.classes < 2 || s.dim < 2 || s.train_per_class == 0 || s.test_per_class == 0 {
                    return bad("synthetic data needs classes >= 2, dim >= 2 and positive per-class counts".into());
                }
                if s.ood_test.is_empty() || s.ood_test_size == 0 {
                    return bad("at least one non-empty OOD test set is required".into());
                }
            }
            DataSource::Csv(c) => {
                if c.ood_test.is_empty() {
                    return bad("data.ood_test_csv must list at least one file".into());
                }
            }
        }
        let mut t = self.train.clone();
        t.layer_sizes = vec![1, 1];
        t.validate()
    }

    /// Objective weight actually used by MSMI runs.
    pub fn effective_beta(&self) -> f64 {
        self.msmi_beta
            .unwrap_or(self.alpha / (1.0 - self.alpha))
    }

    /// Canonical `key = value` rendering, one line per key, sorted.
    pub fn echo(&self) -> String {
        let mut m: BTreeMap<&str, String> = BTreeMap::new();
        let list = |v: &[usize]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        m.insert("method", self.method.to_string());
        m.insert("alpha", self.alpha.to_string());
        m.insert("epsilon", self.epsilon.to_string());
        m.insert("seed", self.seed.to_string());
        if let Some(b) = self.msmi_beta {
            m.insert("msmi.beta", b.to_string());
        }
        m.insert("msmi.stop_gradient", self.msmi_stop_gradient.to_string());
        m.insert("train.hidden", list(&self.hidden));
        m.insert("train.lr0", self.train.lr0.to_string());
        m.insert("train.lr_decay_epochs", list(&self.train.lr_decay_epochs));
        m.insert("train.lr_decay_factor", self.train.lr_decay_factor.to_string());
        m.insert("train.momentum", self.train.momentum.to_string());
        m.insert("train.weight_decay", self.train.weight_decay.to_string());
        m.insert("train.epochs", self.train.epochs.to_string());
        m.insert("train.batch_size", self.train.batch_size.to_string());
        m.insert("eval.every", self.eval_every.to_string());
        match &self.data {
            DataSource::Synthetic(s) => {
                m.insert("data.source", "synthetic".into());
                m.insert("data.classes", s.classes.to_string());
                m.insert("data.dim", s.dim.to_string());
                m.insert("data.spread", s.spread.to_string());
                m.insert("data.train_per_class", s.train_per_class.to_string());
                m.insert("data.test_per_class", s.test_per_class.to_string());
                m.insert("data.ood_train", format!("{:?}", s.ood_train));
                m.insert(
                    "data.ood_test",
                    s.ood_test.iter().map(|k| format!("{k:?}")).collect::<Vec<_>>().join(";"),
                );
                m.insert("data.ood_test_size", s.ood_test_size.to_string());
            }
            DataSource::Csv(c) => {
                m.insert("data.source", "csv".into());
                m.insert("data.id_train_csv", c.id_train.display().to_string());
                m.insert("data.id_test_csv", c.id_test.display().to_string());
                if let Some(p) = &c.ood_train {
                    m.insert("data.ood_train_csv", p.display().to_string());
                }
                m.insert(
                    "data.ood_test_csv",
                    c.ood_test.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(","),
                );
            }
        }
        m.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_dotted_keys() {
        let cfg = ExperimentConfig::parse(
            "# comment\nmethod = baseline\nalpha = 0.1\n\ntrain.lr0 = 0.05\ntrain.hidden = 32, 16\n\
             train.lr_decay_epochs = 10,20\ntrain.epochs = 30\ndata.ood_test = ring,gaussian_noise\n\
             data.ring.r_lo = 4\n",
        )
        .unwrap();
        assert_eq!(cfg.method, Method::Baseline);
        assert_eq!(cfg.alpha, 0.1);
        assert_eq!(cfg.train.lr0, 0.05);
        assert_eq!(cfg.hidden, vec![32, 16]);
        match &cfg.data {
            DataSource::Synthetic(s) => {
                assert_eq!(s.ood_test.len(), 2);
                assert_eq!(s.ood_test[0], OodKind::Ring { r_lo: 4.0, r_hi: 7.0 });
                assert_eq!(s.ood_train, OodKind::Ring { r_lo: 4.0, r_hi: 7.0 });
            }
            DataSource::Csv(_) => panic!(),
        }
    }

    #[test]
    fn rejects_unknown_duplicate_and_illegal() {
        for text in [
            "bogus = 1",
            "alpha = 0.1\nalpha = 0.2",
            "alpha = 1.0",
            "epsilon = 1.5",
            "method = oe",
            "train.epochs = ten",
            "train.lr_decay_epochs = 90,80",
            "data.source = csv",
            "justtext",
        ] {
            let err = ExperimentConfig::parse(text).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}: {err}");
        }
    }

    #[test]
    fn beta_ties_to_alpha() {
        let cfg = ExperimentConfig::parse("alpha = 0.2").unwrap();
        assert!((cfg.effective_beta() - 0.25).abs() < 1e-15);
        let cfg = ExperimentConfig::parse("alpha = 0.2\nmsmi.beta = 0.7").unwrap();
        assert_eq!(cfg.effective_beta(), 0.7);
    }

    #[test]
    fn echo_is_stable() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.echo(), cfg.clone().echo());
        assert!(cfg.echo().contains("method = sa\n"));
    }
}

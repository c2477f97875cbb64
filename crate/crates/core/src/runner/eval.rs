//! Evaluation of a trained network and the files it emits.

use std::fmt::Write as _;
use std::path::Path;

use crate::datasets::{LabeledSet, UnlabeledSet};
use crate::detection::{accuracy, argmax, auroc, fmt_sig9, ood_scores, roc_points, RocCurve, ScoreSet};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::gradnet::{forward, ParameterSet};
use crate::matrix::Matrix;
use crate::objective::{softmax_probs, ProbMatrix};

/// Softmax rows and penultimate activations of one evaluation set.
#[derive(Debug, Clone)]
pub struct SetOutputs {
    pub name: String,
    pub probs: ProbMatrix<f64>,
    pub features: Matrix<f64>,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub acc: f64,
    pub auroc: Vec<(String, f64)>,
    pub auroc_mean: f64,
    pub id: SetOutputs,
    pub ood: Vec<SetOutputs>,
    pub roc: Vec<RocCurve<f64>>,
    pub labels: Vec<usize>,
}

fn check_input(params: &ParameterSet<f64>, dim: usize, what: &str) -> Result<()> {
    if params.input_dim() != dim {
        return Err(Error::shape(format!(
            "model expects input dimension {}, {what} has dimension {dim}",
            params.input_dim()
        )));
    }
    Ok(())
}

fn outputs(params: &ParameterSet<f64>, name: &str, x: &Matrix<f64>) -> Result<SetOutputs> {
    if x.rows() == 0 {
        return Err(Error::invalid(format!("evaluation set `{name}` is empty")));
    }
    let fp = forward(params, x)?;
    let probs = softmax_probs(&fp.logits)?;
    let scores = ood_scores(&probs);
    Ok(SetOutputs {
        name: name.to_string(),
        probs,
        features: fp.penultimate,
        scores,
    })
}

/// ACC on the ID test set and max-softmax AUROC against every OOD set.
pub fn evaluate(
    params: &ParameterSet<f64>,
    id_test: &LabeledSet<f64>,
    ood_test: &[(String, UnlabeledSet<f64>)],
) -> Result<Evaluation> {
    check_input(params, id_test.dim(), "ID test set")?;
    if params.output_dim() != id_test.classes() {
        return Err(Error::shape(format!(
            "model has {} outputs, ID test set has {} classes",
            params.output_dim(),
            id_test.classes()
        )));
    }
    if ood_test.is_empty() {
        return Err(Error::invalid("no OOD test sets"));
    }
    let id = outputs(params, "id", id_test.x())?;
    let acc = accuracy(&id.probs, id_test.y())?;
    let mut ood = Vec::with_capacity(ood_test.len());
    let mut aurocs = Vec::with_capacity(ood_test.len());
    let mut roc = Vec::with_capacity(ood_test.len());
    for (name, set) in ood_test {
        check_input(params, set.dim(), &format!("OOD set `{name}`"))?;
        let out = outputs(params, name, set.x())?;
        let ss = ScoreSet::new(id.scores.clone(), out.scores.clone())?;
        aurocs.push((name.clone(), auroc(&ss)));
        roc.push(roc_points(&ss));
        ood.push(out);
    }
    let auroc_mean = mean_auroc(&aurocs);
    Ok(Evaluation {
        acc,
        auroc: aurocs,
        auroc_mean,
        id,
        ood,
        roc,
        labels: id_test.y().to_vec(),
    })
}

/// Unweighted mean over sets.
pub fn mean_auroc(per_set: &[(String, f64)]) -> f64 {
    per_set.iter().map(|(_, v)| v).sum::<f64>() / per_set.len() as f64
}

/// File-name-safe version of a set name.
pub fn file_tag(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect()
}

impl Evaluation {
    /// Header `set,index,label,pred,score,p0..p{K-1}`; OOD rows leave `label` empty.
    pub fn probs_csv(&self) -> String {
        let k = self.id.probs.classes();
        let mut s = String::from("set,index,label,pred,score");
        for j in 0..k {
            let _ = write!(s, ",p{j}");
        }
        s.push('\n');
        let sets = std::iter::once(&self.id).chain(&self.ood);
        for (si, set) in sets.enumerate() {
            for (i, row) in set.probs.iter_rows().enumerate() {
                let label = if si == 0 { self.labels[i].to_string() } else { String::new() };
                let _ = write!(
                    s,
                    "{},{i},{label},{},{}",
                    set.name,
                    argmax(row),
                    fmt_sig9(set.scores[i])
                );
                for &p in row {
                    let _ = write!(s, ",{}", fmt_sig9(p));
                }
                s.push('\n');
            }
        }
        s
    }

    /// Header `set,index,label,h0..h{H-1}`.
    pub fn features_csv(&self) -> String {
        let h = self.id.features.cols();
        let mut s = String::from("set,index,label");
        for j in 0..h {
            let _ = write!(s, ",h{j}");
        }
        s.push('\n');
        let sets = std::iter::once(&self.id).chain(&self.ood);
        for (si, set) in sets.enumerate() {
            for (i, row) in set.features.iter_rows().enumerate() {
                let label = if si == 0 { self.labels[i].to_string() } else { String::new() };
                let _ = write!(s, "{},{i},{label}", set.name);
                for &v in row {
                    let _ = write!(s, ",{}", fmt_sig9(v));
                }
                s.push('\n');
            }
        }
        s
    }

    /// Writes `roc_<set>.csv`, `probs.csv` and `features.csv` into `dir`.
    pub fn write_artifacts(&self, dir: &Path) -> Result<()> {
        for ((name, _), curve) in self.auroc.iter().zip(&self.roc) {
            curve.write_csv(&dir.join(format!("roc_{}.csv", file_tag(name))))?;
        }
        write_atomic(&dir.join("probs.csv"), self.probs_csv().as_bytes())?;
        write_atomic(&dir.join("features.csv"), self.features_csv().as_bytes())
    }
}

/// Mean max-softmax confidence of correct ID, wrong ID and each OOD set.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendRow {
    pub epoch: usize,
    /// `None` when no ID sample falls in the group.
    pub correct: Option<f64>,
    pub wrong: Option<f64>,
    pub ood: Vec<f64>,
}

fn mean(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

pub fn trend_row(
    epoch: usize,
    params: &ParameterSet<f64>,
    id_test: &LabeledSet<f64>,
    ood_test: &[(String, UnlabeledSet<f64>)],
) -> Result<TrendRow> {
    check_input(params, id_test.dim(), "ID test set")?;
    let id = outputs(params, "id", id_test.x())?;
    let (mut right, mut wrong) = (Vec::new(), Vec::new());
    for ((row, &s), &y) in id.probs.iter_rows().zip(&id.scores).zip(id_test.y()) {
        if argmax(row) == y {
            right.push(s);
        } else {
            wrong.push(s);
        }
    }
    let mut ood = Vec::with_capacity(ood_test.len());
    for (name, set) in ood_test {
        check_input(params, set.dim(), &format!("OOD set `{name}`"))?;
        ood.push(mean(&outputs(params, name, set.x())?.scores).expect("non-empty set"));
    }
    Ok(TrendRow {
        epoch,
        correct: mean(&right),
        wrong: mean(&wrong),
        ood,
    })
}

pub fn trend_header(ood_names: &[String]) -> String {
    let mut s = String::from("epoch,Correct,Wrong");
    for n in ood_names {
        s.push(',');
        s.push_str(n);
    }
    s.push('\n');
    s
}

pub fn trend_line(row: &TrendRow) -> String {
    let opt = |v: Option<f64>| v.map(fmt_sig9).unwrap_or_default();
    let mut s = format!("{},{},{}", row.epoch, opt(row.correct), opt(row.wrong));
    for &v in &row.ood {
        let _ = write!(s, ",{}", fmt_sig9(v));
    }
    s.push('\n');
    s
}

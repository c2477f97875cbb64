//! CSV dataset files.
//!
//! Header `f0,f1,...,f{d-1}` optionally followed by `label`. UTF-8,
//! comma-separated, decimal reals, base-10 integer labels. Unlabeled files
//! have no label column.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

use super::{LabeledSet, UnlabeledSet};

/// Result of [`load_csv`].
#[derive(Debug, Clone, PartialEq)]
pub enum Loaded<T> {
    Labeled(LabeledSet<T>),
    Unlabeled(UnlabeledSet<T>),
}

struct Parsed {
    dim: usize,
    rows: Vec<f64>,
    labels: Vec<usize>,
}

fn parse(path: &Path, has_label: bool, classes: Option<usize>) -> Result<Parsed> {
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut rdr = ::csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(::csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            ::csv::ErrorKind::Io(io) => Error::io(path, io),
            other => perr(1, format!("{other:?}")),
        })?;

    let header = rdr.headers().map_err(|e| perr(1, e.to_string()))?.clone();
    let names: Vec<&str> = header.iter().collect();
    let label_col = names.last() == Some(&"label");
    if has_label && !label_col {
        return Err(perr(1, "labeled file must end with a `label` column".into()));
    }
    if !has_label && label_col {
        return Err(perr(1, "unlabeled file must not have a `label` column".into()));
    }
    let dim = names.len() - usize::from(label_col);
    if dim == 0 {
        return Err(perr(1, "header declares no feature columns".into()));
    }
    for (j, name) in names.iter().take(dim).enumerate() {
        if *name != format!("f{j}") {
            return Err(perr(1, format!("expected column `f{j}`, found `{name}`")));
        }
    }

    let width = names.len();
    let mut out = Parsed {
        dim,
        rows: Vec::new(),
        labels: Vec::new(),
    };
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            perr(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != width {
            return Err(perr(
                line,
                format!("row has {} fields, header has {width}", rec.len()),
            ));
        }
        for (j, field) in rec.iter().take(dim).enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| perr(line, format!("column f{j}: `{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(perr(line, format!("column f{j}: non-finite value")));
            }
            out.rows.push(v);
        }
        if has_label {
            let field = rec.get(dim).unwrap_or("");
            if field.is_empty() {
                return Err(perr(line, "missing label".into()));
            }
            let y: usize = field
                .parse()
                .map_err(|_| perr(line, format!("label `{field}` is not a non-negative integer")))?;
            if let Some(k) = classes {
                if y >= k {
                    return Err(perr(line, format!("label {y} out of range for {k} classes")));
                }
            }
            out.labels.push(y);
        }
    }
    Ok(out)
}

/// Loads a labeled file. `classes` fixes `K`; otherwise `K = max label + 1`.
pub fn load_labeled_csv<T: Scalar>(path: &Path, classes: Option<usize>) -> Result<LabeledSet<T>> {
    let p = parse(path, true, classes)?;
    let n = p.labels.len();
    let k = classes.unwrap_or_else(|| p.labels.iter().max().map_or(0, |m| m + 1));
    let x = Matrix::from_vec(n, p.dim, p.rows.into_iter().map(T::lit).collect())?;
    LabeledSet::new(x, p.labels, k)
}

pub fn load_unlabeled_csv<T: Scalar>(path: &Path) -> Result<UnlabeledSet<T>> {
    let p = parse(path, false, None)?;
    let n = p.rows.len() / p.dim;
    UnlabeledSet::new(Matrix::from_vec(n, p.dim, p.rows.into_iter().map(T::lit).collect())?)
}

pub fn load_csv<T: Scalar>(path: &Path, has_label: bool) -> Result<Loaded<T>> {
    if has_label {
        load_labeled_csv(path, None).map(Loaded::Labeled)
    } else {
        load_unlabeled_csv(path).map(Loaded::Unlabeled)
    }
}

/// Serializes features (and labels, when given) in the loader's format.
pub fn write_csv<T: Scalar>(path: &Path, x: &Matrix<T>, labels: Option<&[usize]>) -> Result<()> {
    let mut s = (0..x.cols()).map(|j| format!("f{j}")).collect::<Vec<_>>().join(",");
    if labels.is_some() {
        s.push_str(",label");
    }
    s.push('\n');
    for (i, row) in x.iter_rows().enumerate() {
        let fields: Vec<String> = row.iter().map(|v| format!("{}", v.as_f64())).collect();
        s.push_str(&fields.join(","));
        if let Some(l) = labels {
            let _ = write!(s, ",{}", l[i]);
        }
        s.push('\n');
    }
    crate::fsutil::write_atomic(path, s.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn file(contents: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("data.csv");
        fs::write(&p, contents).unwrap();
        (dir, p)
    }

    #[test]
    fn labeled_file_parses() {
        let (_d, p) = file("f0,f1,label\n0.5,1.0,0\n-2,3e-1,1\n1,1,1\n");
        match load_csv::<f64>(&p, true).unwrap() {
            Loaded::Labeled(s) => {
                assert_eq!((s.len(), s.dim(), s.classes()), (3, 2, 2));
                assert_eq!(s.x().row(1), &[-2.0, 0.3]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ragged_row_reports_line() {
        let (_d, p) = file("f0,f1,label\n0.5,1.0,0\n7\n");
        let err = load_csv::<f64>(&p, true).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unlabeled_file_parses() {
        let (_d, p) = file("f0,f1\n1,2\n3,4\n");
        match load_csv::<f64>(&p, false).unwrap() {
            Loaded::Unlabeled(s) => assert_eq!((s.len(), s.dim()), (2, 2)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_inputs() {
        let (_d, p) = file("f0,f1,label\n1,x,0\n");
        assert!(load_csv::<f64>(&p, true).unwrap_err().to_string().contains("not a number"));
        let (_d, p) = file("f0,f1,label\n1,2,\n");
        assert!(load_csv::<f64>(&p, true).unwrap_err().to_string().contains("missing label"));
        let (_d, p) = file("f0,f1,label\n1,2,5\n");
        assert!(load_labeled_csv::<f64>(&p, Some(2)).unwrap_err().to_string().contains("out of range"));
        let (_d, p) = file("f0,f1,label\n1,2,-1\n");
        assert!(load_csv::<f64>(&p, true).is_err());
        let (_d, p) = file("a,b\n1,2\n");
        assert!(load_csv::<f64>(&p, false).is_err());
    }

    #[test]
    fn write_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.csv");
        let x = Matrix::from_rows(&[[0.1, -2.5], [3.0, 4.25]]).unwrap();
        write_csv(&p, &x, Some(&[1, 0])).unwrap();
        let s = load_labeled_csv::<f64>(&p, None).unwrap();
        assert_eq!(s.x(), &x);
        assert_eq!(s.y(), &[1, 0]);
    }
}

//! LIBSVM sparse text format: `label idx:val idx:val ...` with 1-based, strictly increasing indices.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("dataset is empty")]
    Empty,
    #[error("dataset has no features")]
    NoFeatures,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseDataset {
    /// `(feature index, value)` pairs per sample, 0-based and strictly increasing.
    pub rows: Vec<Vec<(usize, f64)>>,
    /// `+1.0` or `-1.0` per sample.
    pub labels: Vec<f64>,
    pub n_features: usize,
}

impl SparseDataset {
    pub fn n_samples(&self) -> usize {
        self.rows.len()
    }

    /// `a_i' x`
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        self.rows[i].iter().map(|&(j, v)| v * x[j]).sum()
    }

    pub fn row_norm_sq(&self, i: usize) -> f64 {
        self.rows[i].iter().map(|&(_, v)| v * v).sum()
    }

    /// Serializes to LIBSVM text; parsing the result gives back an identical dataset.
    pub fn to_libsvm(&self) -> String {
        let mut s = String::new();
        for (row, label) in self.rows.iter().zip(&self.labels) {
            s.push_str(if *label > 0.0 { "+1" } else { "-1" });
            for &(j, v) in row {
                let _ = write!(s, " {}:{}", j + 1, v);
            }
            s.push('\n');
        }
        s
    }
}

fn parse_label(tok: &str, line: usize) -> Result<f64, DatasetError> {
    let v: f64 = tok
        .parse()
        .map_err(|_| DatasetError::Parse { line, msg: format!("non-numeric label '{tok}'") })?;
    if v == 1.0 {
        Ok(1.0)
    } else if v == -1.0 || v == 0.0 {
        Ok(-1.0)
    } else {
        Err(DatasetError::Parse { line, msg: format!("label {tok} is not one of -1, 0, +1") })
    }
}

pub fn parse_libsvm<R: BufRead>(reader: R) -> Result<SparseDataset, DatasetError> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut n_features = 0usize;
    for (k, line) in reader.lines().enumerate() {
        let line_no = k + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut toks = content.split_whitespace();
        let label = parse_label(toks.next().unwrap(), line_no)?;
        let mut row: Vec<(usize, f64)> = Vec::new();
        for tok in toks {
            let err = |msg: String| DatasetError::Parse { line: line_no, msg };
            let (i, v) = tok.split_once(':').ok_or_else(|| err(format!("expected idx:val, got '{tok}'")))?;
            let idx: usize = i.parse().map_err(|_| err(format!("non-numeric index '{i}'")))?;
            let val: f64 = v.parse().map_err(|_| err(format!("non-numeric value '{v}'")))?;
            if idx == 0 {
                return Err(err("feature indices are 1-based".into()));
            }
            if !val.is_finite() {
                return Err(err(format!("non-finite value '{v}'")));
            }
            if let Some(&(prev, _)) = row.last() {
                if idx - 1 <= prev {
                    return Err(err(format!("non-increasing index {idx}")));
                }
            }
            row.push((idx - 1, val));
        }
        if let Some(&(last, _)) = row.last() {
            n_features = n_features.max(last + 1);
        }
        rows.push(row);
        labels.push(label);
    }
    if rows.is_empty() {
        return Err(DatasetError::Empty);
    }
    Ok(SparseDataset { rows, labels, n_features })
}

pub fn parse_libsvm_str(text: &str) -> Result<SparseDataset, DatasetError> {
    parse_libsvm(text.as_bytes())
}

/// Reads a LIBSVM file, decompressing it when the name ends in `.gz`.
pub fn load_libsvm(path: &Path) -> Result<SparseDataset, DatasetError> {
    let file = File::open(path)?;
    if path.extension().is_some_and(|e| e == "gz") {
        parse_libsvm(BufReader::new(flate2::read::GzDecoder::new(file)))
    } else {
        parse_libsvm(BufReader::new(file))
    }
}

/// Dense synthetic binary classification data: `a_i ~ N(0, I/d)`, labels from a random
/// linear separator with 10% of them flipped.
pub fn synthetic_logistic(n: usize, d: usize, rng: &mut dyn RngCore) -> Result<SparseDataset, DatasetError> {
    if n == 0 {
        return Err(DatasetError::Empty);
    }
    if d == 0 {
        return Err(DatasetError::NoFeatures);
    }
    let w: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let scale = 1.0 / (d as f64).sqrt();
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let a: Vec<f64> = (0..d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
        let margin: f64 = a.iter().zip(&w).map(|(p, q)| p * q).sum();
        let mut label = if margin >= 0.0 { 1.0 } else { -1.0 };
        if rng.gen::<f64>() < 0.1 {
            label = -label;
        }
        rows.push(a.into_iter().enumerate().collect());
        labels.push(label);
    }
    Ok(SparseDataset { rows, labels, n_features: d })
}

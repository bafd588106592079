//! Labeled-dataset container, CSV ingestion, and label-noise injection.

use std::fmt;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A classification dataset: an `m x p` feature matrix and one class label in
/// `0..K` per row. Labels are contiguous by construction (ingestion remaps
/// raw label tokens by first appearance).
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    name: String,
    features: DMatrix<f64>,
    labels: Vec<usize>,
    n_classes: usize,
}

impl LabeledDataset {
    pub fn new(name: impl Into<String>, features: DMatrix<f64>, labels: Vec<usize>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.nrows(),
                got: labels.len(),
            });
        }
        if features.nrows() == 0 {
            return Err(Error::InvalidInput("dataset has no rows".into()));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("dataset has non-finite features".into()));
        }
        let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
        let mut counts = vec![0usize; n_classes];
        for &l in &labels {
            counts[l] += 1;
        }
        if n_classes < 2 {
            return Err(Error::InvalidInput(
                "dataset must contain at least two classes".into(),
            ));
        }
        if counts.contains(&0) {
            return Err(Error::InvalidInput(
                "class labels must be contiguous with no empty class".into(),
            ));
        }
        Ok(Self {
            name: name.into(),
            features,
            labels,
            n_classes,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Feature dimension p.
    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn feature_row(&self, i: usize) -> DVector<f64> {
        self.features.row(i).transpose()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    /// Indices of the samples of class k.
    pub fn class_indices(&self, k: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == k).collect()
    }

    /// Sub-dataset of the given rows, keeping the label remapping.
    pub fn subset(&self, rows: &[usize], name: impl Into<String>) -> Result<Self> {
        let mut features = DMatrix::zeros(rows.len(), self.dim());
        let mut labels = Vec::with_capacity(rows.len());
        for (dst, &src) in rows.iter().enumerate() {
            features.set_row(dst, &self.features.row(src));
            labels.push(self.labels[src]);
        }
        Self::new(name, features, labels)
    }

    /// Applies an affine feature map `x -> (x - shift) / scale` componentwise.
    pub fn standardized(&self, shift: &DVector<f64>, scale: &DVector<f64>) -> Self {
        let mut features = self.features.clone();
        for mut row in features.row_iter_mut() {
            for j in 0..row.ncols() {
                row[j] = (row[j] - shift[j]) / scale[j];
            }
        }
        Self {
            name: self.name.clone(),
            features,
            labels: self.labels.clone(),
            n_classes: self.n_classes,
        }
    }
}

/// How to find the label column in a CSV file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

impl fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelColumn::Index(i) => write!(f, "{i}"),
            LabelColumn::Name(n) => write!(f, "{n}"),
        }
    }
}

impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_string()),
        })
    }
}

/// Loads a CSV classification dataset: one row per sample, numeric feature
/// columns, the label column picked by zero-based index or header name.
/// Label tokens are remapped to contiguous classes by first appearance.
pub fn load_dataset(path: &Path, label: &LabelColumn) -> Result<LabeledDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::DatasetIo {
                path: path.to_path_buf(),
                source: std::io::Error::other(e.to_string()),
            },
            _ => Error::Csv(e),
        })?;

    let mut records: Vec<csv::StringRecord> = Vec::new();
    for rec in reader.records() {
        records.push(rec?);
    }
    if records.is_empty() {
        return Err(format_err(path, "file has no rows"));
    }

    let width = records[0].len();
    if width < 2 {
        return Err(format_err(path, "need at least one feature column and a label column"));
    }

    let label_idx = match label {
        LabelColumn::Index(i) => {
            if *i >= width {
                return Err(format_err(
                    path,
                    &format!("label column {i} out of range (file has {width} columns)"),
                ));
            }
            *i
        }
        LabelColumn::Name(name) => {
            let header = &records[0];
            match header.iter().position(|h| h.trim() == name) {
                Some(i) => i,
                None => {
                    return Err(format_err(path, &format!("no header column named {name:?}")))
                }
            }
        }
    };

    // Header detection: a first row whose feature fields are not all numeric
    // is a header. (Column addressing by name already implies one.)
    let has_header = matches!(label, LabelColumn::Name(_))
        || records[0]
            .iter()
            .enumerate()
            .any(|(j, field)| j != label_idx && field.trim().parse::<f64>().is_err());
    let data_rows = if has_header { &records[1..] } else { &records[..] };
    if data_rows.is_empty() {
        return Err(format_err(path, "file has a header but no data rows"));
    }

    let p = width - 1;
    let mut features = DMatrix::zeros(data_rows.len(), p);
    let mut labels = Vec::with_capacity(data_rows.len());
    let mut label_map: Vec<String> = Vec::new();
    let mut missing_rows: Vec<usize> = Vec::new();

    for (r, rec) in data_rows.iter().enumerate() {
        let line = r + 1 + usize::from(has_header);
        if rec.len() != width {
            return Err(format_err(
                path,
                &format!("row {line} has {} fields, expected {width}", rec.len()),
            ));
        }
        if rec.iter().any(|f| f.trim().is_empty()) {
            missing_rows.push(line);
            continue;
        }
        let mut col = 0;
        for (j, field) in rec.iter().enumerate() {
            if j == label_idx {
                let token = field.trim().to_string();
                let id = match label_map.iter().position(|t| *t == token) {
                    Some(id) => id,
                    None => {
                        label_map.push(token);
                        label_map.len() - 1
                    }
                };
                labels.push(id);
            } else {
                features[(r, col)] = field.trim().parse::<f64>().map_err(|_| {
                    format_err(
                        path,
                        &format!("row {line}: non-numeric feature value {:?}", field),
                    )
                })?;
                col += 1;
            }
        }
    }

    if !missing_rows.is_empty() {
        return Err(format_err(
            path,
            &format!("rows with missing values: {missing_rows:?}"),
        ));
    }
    if label_map.len() < 2 {
        return Err(format_err(path, "dataset contains a single class"));
    }

    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    LabeledDataset::new(name, features, labels)
}

fn format_err(path: &Path, message: &str) -> Error {
    Error::DatasetFormat {
        path: PathBuf::from(path),
        message: message.to_string(),
    }
}

/// Replaces the labels of exactly `round(rate * m)` distinct samples, chosen
/// uniformly without replacement, by a label drawn uniformly from the other
/// `K - 1` classes (the new label always differs from the old one).
pub fn inject_mislabels<R: Rng>(train: &LabeledDataset, rate: f64, rng: &mut R) -> LabeledDataset {
    assert!((0.0..1.0).contains(&rate), "mislabel rate must be in [0, 1)");
    let m = train.len();
    let k = train.n_classes();
    let n_flip = (rate * m as f64).round() as usize;
    let mut out = train.clone();
    if n_flip == 0 {
        return out;
    }
    let chosen = sample(rng, m, n_flip);
    for i in chosen.iter() {
        let old = out.labels[i];
        let mut new = rng.random_range(0..k - 1);
        if new >= old {
            new += 1;
        }
        out.labels[i] = new;
    }
    out
}

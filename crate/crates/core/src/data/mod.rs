//! Tabular ingestion: loading, filtering, one-hot encoding, stratified
//! splitting and standardisation.

mod compas;
mod split;
mod wdbc;

pub use compas::{load_compas, load_compas_with, CompasCovariates};
pub use split::{standardize, stratified_split, SplitData};
pub use wdbc::load_breast_cancer;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: csv error: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: line {line}: expected {expected} columns, found {found}")]
    ColumnCount {
        path: PathBuf,
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("{path}: line {line}, column `{column}`: invalid value {value:?}")]
    BadCell {
        path: PathBuf,
        line: u64,
        column: String,
        value: String,
    },
    #[error("{path}: missing required columns: {}", missing.join(", "))]
    MissingColumns { path: PathBuf, missing: Vec<String> },
    #[error("dataset `{0}` has no rows")]
    Empty(String),
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("cannot split: {0}")]
    Split(String),
}

/// How a column came to be.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FeatureKind {
    Numeric,
    OneHot { source_column: String, level: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub names: Vec<String>,
    pub kinds: Vec<FeatureKind>,
}

impl FeatureSchema {
    pub fn new(names: Vec<String>, kinds: Vec<FeatureKind>) -> Result<Self, DataError> {
        if names.len() != kinds.len() {
            return Err(DataError::Invalid("schema names/kinds length mismatch".into()));
        }
        let mut seen = HashSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(DataError::Invalid(format!("duplicate feature name `{n}`")));
            }
        }
        // one-hot columns from the same source must be contiguous
        let mut finished: HashSet<&str> = HashSet::new();
        let mut current: Option<&str> = None;
        for k in &kinds {
            let src = match k {
                FeatureKind::OneHot { source_column, .. } => Some(source_column.as_str()),
                FeatureKind::Numeric => None,
            };
            if src != current {
                if let Some(prev) = current {
                    finished.insert(prev);
                }
                if let Some(s) = src {
                    if finished.contains(s) {
                        return Err(DataError::Invalid(format!(
                            "one-hot columns of `{s}` are not contiguous"
                        )));
                    }
                }
                current = src;
            }
        }
        Ok(Self { names, kinds })
    }

    pub fn numeric(names: Vec<String>) -> Result<Self, DataError> {
        let kinds = vec![FeatureKind::Numeric; names.len()];
        Self::new(names, kinds)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// A fully numeric binary-classification table.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub x: Array2<f64>,
    pub y: Vec<u8>,
    pub schema: FeatureSchema,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        x: Array2<f64>,
        y: Vec<u8>,
        schema: FeatureSchema,
    ) -> Result<Self, DataError> {
        let name = name.into();
        if x.nrows() == 0 {
            return Err(DataError::Empty(name));
        }
        if x.nrows() != y.len() {
            return Err(DataError::Invalid(format!(
                "{} rows but {} labels",
                x.nrows(),
                y.len()
            )));
        }
        if x.ncols() != schema.len() {
            return Err(DataError::Invalid(format!(
                "{} columns but schema has {} features",
                x.ncols(),
                schema.len()
            )));
        }
        if let Some(v) = x.iter().find(|v| !v.is_finite()) {
            return Err(DataError::Invalid(format!("non-finite value {v}")));
        }
        if let Some(l) = y.iter().find(|&&l| l > 1) {
            return Err(DataError::Invalid(format!("label {l} is not binary")));
        }
        Ok(Self { name, x, y, schema })
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let pos = self.y.iter().filter(|&&l| l == 1).count();
        [self.y.len() - pos, pos]
    }

    pub fn select_rows(&self, idx: &[usize]) -> (Array2<f64>, Vec<u8>) {
        let x = self.x.select(Axis(0), idx);
        let y = idx.iter().map(|&i| self.y[i]).collect();
        (x, y)
    }
}

pub(crate) fn parse_f64(raw: &str) -> Option<f64> {
    raw.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

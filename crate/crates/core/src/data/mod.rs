//! Datasets: imbalanced synthetic generators, CSV and IDX loaders, and a
//! stratified train/test split.

mod csv_io;
mod idx;
mod split;
mod synthetic;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use csv_io::{load_csv, write_csv, LabelMap};
pub use idx::{encode_idx_images, encode_idx_labels, load_idx, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use split::train_test_split;
pub use synthetic::{gen_synthetic, SyntheticSpec};

use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{path}: empty file")]
    EmptyFile { path: String },
    #[error("{path}: missing column {column:?}")]
    MissingColumn { path: String, column: String },
    #[error("{path}: non-numeric cell {value:?} at row {row}, column {column}")]
    NonNumeric {
        path: String,
        row: usize,
        column: usize,
        value: String,
    },
    #[error("{path}: row {row} has {found} fields, expected {expected}")]
    RaggedRow {
        path: String,
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("{path}: label {value} at row {row} is not an integer")]
    NonIntegerLabel { path: String, row: usize, value: f64 },
    #[error("{path}: bad IDX magic {found:#010x}, expected {expected:#010x}")]
    BadMagic { path: String, found: u32, expected: u32 },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// Features and private labels for `n` samples.
///
/// Sample `i`'s id throughout the protocol is its row index.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    classes: usize,
    split: Split,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, classes: usize, split: Split) -> Result<Self, DataError> {
        if labels.len() != features.rows() {
            return Err(DataError::InvalidArgument(format!(
                "{} labels for {} feature rows",
                labels.len(),
                features.rows()
            )));
        }
        if classes == 0 {
            return Err(DataError::InvalidArgument("class count must be positive".into()));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(DataError::InvalidArgument(format!(
                "label {bad} outside [0, {classes})"
            )));
        }
        if !features.is_finite() {
            return Err(DataError::InvalidArgument("features contain NaN or infinity".into()));
        }
        Ok(Self {
            features,
            labels,
            classes,
            split,
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_width(&self) -> usize {
        self.features.cols()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        self.labels.iter().for_each(|&l| counts[l] += 1);
        counts
    }

    /// Class with the most samples (lowest index on ties).
    pub fn majority_class(&self) -> usize {
        crate::numerics::argmax(&self.class_counts().iter().map(|&c| c as f64).collect::<Vec<_>>())
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize], split: Split) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
            split,
        }
    }

    pub fn with_labels(&self, labels: Vec<usize>) -> Result<Dataset, DataError> {
        Dataset::new(self.features.clone(), labels, self.classes, self.split)
    }
}

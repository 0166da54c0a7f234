//! Tabular dataset handling: schema declaration, raw CSV ingestion,
//! preprocessing (missing-row removal, {-1,1} one-hot encoding, z-score
//! normalization), stratified train/test splitting, SMOTE rebalancing, and
//! CSV import/export of processed artifacts.

mod io;
mod preprocess;
mod raw;
mod smote;
mod split;

pub use io::{export_dataset_csv, export_matrix_csv, import_dataset_csv, import_matrix_csv};
pub use preprocess::{preprocess, ColumnStats, FitStats};
pub use raw::{load_dataset, ColumnKind, RawCell, RawDataset, Schema, SchemaBuilder};
pub use smote::smote_rebalance;
pub use split::{split_raw, stratified_partition, train_test_split, SplitConfig};

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::{Error, Result};

/// Whether a processed feature column came from a raw numerical column or
/// from the {-1,1} one-hot encoding of a categorical column. The distinction
/// drives replacement-value computation: one-hot features take the neutral
/// value 0, numerical features take a data-driven median.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureOrigin {
    Numerical,
    OneHot,
}

/// Protected-attribute group identifier for fairness evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Group {
    A,
    B,
}

impl std::fmt::Display for Group {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Group::A => write!(f, "A"),
            Group::B => write!(f, "B"),
        }
    }
}

/// A fully processed dataset: numeric feature matrix, binary labels, and
/// per-feature metadata. Immutable after construction; transforms produce
/// new values.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    /// n x m feature matrix.
    pub x: Matrix,
    /// n binary labels in {0,1}.
    pub y: Vec<u8>,
    /// m column names.
    pub feature_names: Vec<String>,
    /// m column origins.
    pub feature_origin: Vec<FeatureOrigin>,
    /// Optional per-row protected-group ids.
    pub protected: Option<Vec<Group>>,
    /// Statistics fitted during preprocessing (present on datasets produced
    /// by [`preprocess`]; `None` on derived datasets).
    pub norm_stats: Option<FitStats>,
}

impl Dataset {
    /// Number of samples.
    pub fn n(&self) -> usize {
        self.x.rows()
    }

    /// Number of feature columns.
    pub fn m(&self) -> usize {
        self.x.cols()
    }

    /// Checks the structural invariants (non-empty, consistent lengths,
    /// binary labels).
    pub fn validate(&self) -> Result<()> {
        if self.n() == 0 || self.m() == 0 {
            return Err(Error::Data(format!(
                "dataset `{}` is empty ({} samples, {} features)",
                self.name,
                self.n(),
                self.m()
            )));
        }
        if self.y.len() != self.n() {
            return Err(Error::Dimension(format!(
                "dataset `{}` has {} labels for {} rows",
                self.name,
                self.y.len(),
                self.n()
            )));
        }
        if self.feature_names.len() != self.m() || self.feature_origin.len() != self.m() {
            return Err(Error::Dimension(format!(
                "dataset `{}` has inconsistent feature metadata",
                self.name
            )));
        }
        if let Some(p) = &self.protected {
            if p.len() != self.n() {
                return Err(Error::Dimension(format!(
                    "dataset `{}` has {} protected ids for {} rows",
                    self.name,
                    p.len(),
                    self.n()
                )));
            }
        }
        if self.y.iter().any(|&v| v > 1) {
            return Err(Error::Data(format!(
                "dataset `{}` has non-binary labels",
                self.name
            )));
        }
        Ok(())
    }

    /// New dataset keeping only the rows listed in `indices`, in order.
    pub fn select_rows(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            x: self.x.select_rows(indices),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            feature_names: self.feature_names.clone(),
            feature_origin: self.feature_origin.clone(),
            protected: self
                .protected
                .as_ref()
                .map(|p| indices.iter().map(|&i| p[i]).collect()),
            norm_stats: self.norm_stats.clone(),
        }
    }

    /// New dataset keeping only the feature columns listed in `indices`,
    /// in order. Fitted statistics are dropped because they describe the
    /// original column layout.
    pub fn select_features(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            x: self.x.select_cols(indices),
            y: self.y.clone(),
            feature_names: indices
                .iter()
                .map(|&j| self.feature_names[j].clone())
                .collect(),
            feature_origin: indices.iter().map(|&j| self.feature_origin[j]).collect(),
            protected: self.protected.clone(),
            norm_stats: None,
        }
    }

    /// Same metadata, new feature matrix (used by dataset transforms).
    /// Fitted statistics are dropped because the values are no longer the
    /// output of plain preprocessing.
    pub fn with_x(&self, x: Matrix) -> Result<Dataset> {
        if x.rows() != self.n() || x.cols() != self.m() {
            return Err(Error::Dimension(format!(
                "replacement matrix is {}x{}, dataset `{}` is {}x{}",
                x.rows(),
                x.cols(),
                self.name,
                self.n(),
                self.m()
            )));
        }
        Ok(Dataset {
            name: self.name.clone(),
            x,
            y: self.y.clone(),
            feature_names: self.feature_names.clone(),
            feature_origin: self.feature_origin.clone(),
            protected: self.protected.clone(),
            norm_stats: None,
        })
    }
}

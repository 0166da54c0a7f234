//! Explanation-guided feature engineering for tabular binary classifiers.
//!
//! The crate trains a one-hidden-layer MLP on a preprocessed tabular dataset,
//! computes per-sample Shapley-value explanations of its probability output,
//! and uses those explanations to re-engineer the dataset so that retrained
//! ("streamlined") models make decisions that rely on fewer features per
//! sample. Two engineering strategies are provided:
//!
//! * **IDW** (iterative dataset weighting): multiply every feature value by
//!   the absolute attribution it received, rescale columns to unit spread,
//!   retrain, and iterate.
//! * **TRV** (targeted replacement values): per sample, keep the `K` most
//!   important features and overwrite the rest with per-feature neutral
//!   replacement values, then retrain once.
//!
//! Everything is deterministic given the configured seeds. The crate also
//! ships the evaluation metrics used to compare models (accuracy, four
//! group-fairness parities, explanation compactness, and glocal similarity)
//! and a CLI (`shapline`) that orchestrates full experiment runs from a
//! single TOML config with persisted, hash-manifested artifacts.

pub mod data;
pub mod error;
pub mod explain;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod runner;
pub mod streamline;
pub mod util;

pub use error::{Error, Result};

/// Library version recorded in run manifests and reported by the CLI.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

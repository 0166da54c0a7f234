//! Per-sample Shapley-value explanations of a classifier's probability
//! output, with masked evaluation against a background set.
//!
//! A coalition `S` of features is evaluated by keeping the explained
//! sample's values on `S` and taking the remaining values from a background
//! row, averaging the model output over all background rows. Feature `j`'s
//! attribution is its Shapley value in that coalition game: computed either
//! by brute-force enumeration ([`exact_shap`], `m <= 20`) or by the sampled
//! kernel-weighted least-squares estimator ([`kernel_shap`]), which falls
//! back to complete coalition enumeration when the budget covers it.

mod kmeans;
mod shap;

pub use kmeans::{kmeans, kmeans_backgrounds, stratified_backgrounds};
pub use shap::{coalition_value, exact_shap, explain_matrix, kernel_shap, masked_eval};

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::model::MLPModel;
use crate::{Error, Result};

/// Anything that can score a single feature row; the quantity explained.
///
/// Implemented by [`MLPModel`] (probability output). Scorers must be cheap
/// to call and thread-safe: explanation of a dataset fans rows out across
/// threads sharing one scorer.
pub trait Scorer: Sync {
    /// Model output for one feature row.
    fn score_row(&self, x: &[f64]) -> f64;
}

impl Scorer for MLPModel {
    fn score_row(&self, x: &[f64]) -> f64 {
        self.predict_row(x)
    }
}

/// How a background set was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundProvenance {
    Kmeans,
    StratifiedKmeans,
    /// Loaded verbatim from a user-supplied file.
    File,
}

/// Reference rows whose values stand in for "absent" features during masked
/// evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundSet {
    /// k x m matrix of masking values.
    pub b: Matrix,
    pub provenance: BackgroundProvenance,
}

impl BackgroundSet {
    /// Wraps a matrix of background rows (at least one row required).
    pub fn from_matrix(b: Matrix, provenance: BackgroundProvenance) -> Result<BackgroundSet> {
        if b.rows() == 0 || b.cols() == 0 {
            return Err(Error::Data(format!(
                "background set must be non-empty, got {}x{}",
                b.rows(),
                b.cols()
            )));
        }
        Ok(BackgroundSet { b, provenance })
    }

    /// Number of background rows.
    pub fn k(&self) -> usize {
        self.b.rows()
    }

    /// Feature count.
    pub fn m(&self) -> usize {
        self.b.cols()
    }
}

/// How coalitions are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapMode {
    /// Kernel-weighted least squares over sampled coalitions (complete
    /// enumeration when the budget covers all `2^m`).
    #[default]
    Sampled,
    /// Brute-force enumeration of all coalitions (`m <= 20`).
    Exact,
}

/// Explanation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapConfig {
    /// Number of coalitions evaluated in sampled mode; `None` means the
    /// default `2m + 2048`.
    pub coalition_budget: Option<usize>,
    pub seed: u64,
    pub mode: ShapMode,
}

impl Default for ShapConfig {
    fn default() -> Self {
        ShapConfig {
            coalition_budget: None,
            seed: 0,
            mode: ShapMode::Sampled,
        }
    }
}

impl ShapConfig {
    /// Effective coalition budget for `m` features.
    pub fn budget_for(&self, m: usize) -> usize {
        self.coalition_budget.unwrap_or(2 * m + 2048)
    }

    /// Validates the settings against a feature count.
    pub fn validate_for(&self, m: usize) -> Result<()> {
        if m == 0 {
            return Err(Error::Config("cannot explain zero features".into()));
        }
        match self.mode {
            ShapMode::Exact => {
                if m > 20 {
                    return Err(Error::Config(format!(
                        "exact mode enumerates 2^m coalitions and requires m <= 20, got m = {m}"
                    )));
                }
            }
            ShapMode::Sampled => {
                let budget = self.budget_for(m);
                // A budget covering full enumeration is always acceptable;
                // otherwise the regression needs at least all coalitions of
                // size 1 and m-1 plus the two constraint points.
                let full = m < usize::BITS as usize && (1usize << m) <= budget;
                if !full && budget < 2 * m + 2 {
                    return Err(Error::Config(format!(
                        "coalition budget {budget} is below the minimum 2m + 2 = {}",
                        2 * m + 2
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Explanation of a single sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    /// Signed per-feature attributions.
    pub phi: Vec<f64>,
    /// Background score: mean model output over the background rows; the
    /// intercept of the explanation.
    pub phi0: f64,
    /// Model output on the explained sample.
    pub fx: f64,
}

/// Explanations of every row of a dataset. `phi0` is shared: it depends
/// only on the model and background set.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplanationMatrix {
    /// n x m matrix of signed attributions.
    pub e: Matrix,
    pub phi0: f64,
}

impl ExplanationMatrix {
    pub fn n(&self) -> usize {
        self.e.rows()
    }

    pub fn m(&self) -> usize {
        self.e.cols()
    }
}

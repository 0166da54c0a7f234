//! Run configuration: one TOML file describes an end-to-end experiment.
//!
//! Every section except `[dataset]` is optional and falls back to the
//! documented defaults, so a minimal config is just a dataset declaration.
//! Sub-stage seeds are derived deterministically from the single global
//! `seed`, so one number reproduces the whole run.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data::{Schema, SchemaBuilder, SplitConfig};
use crate::explain::{ShapConfig, ShapMode};
use crate::model::{Regularization, TrainConfig};
use crate::util::derive_seed;
use crate::{Error, Result};

fn default_seed() -> u64 {
    42
}

fn default_epsilon() -> f64 {
    0.01
}

/// Declares the dataset file and the kind of every CSV column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    /// Path to the CSV file.
    pub path: PathBuf,
    /// Dataset name in reports; defaults to the file stem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Name of the binary label column.
    pub label: String,
    /// Name of the protected binary column, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protected: Option<String>,
    /// Numerical feature columns.
    #[serde(default)]
    pub numerical: Vec<String>,
    /// Binary categorical feature columns (encoded to one signed column).
    #[serde(default)]
    pub binary: Vec<String>,
    /// N-ary categorical feature columns (one-hot expanded).
    #[serde(default)]
    pub nary: Vec<String>,
    /// Cell values treated as missing; defaults to "", "?", "NA".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub missing_values: Option<Vec<String>>,
}

impl DatasetSection {
    /// Builds the column schema declared by this section.
    pub fn schema(&self) -> Result<Schema> {
        fn as_refs(v: &[String]) -> Vec<&str> {
            v.iter().map(String::as_str).collect()
        }
        let mut b = SchemaBuilder::new()
            .numerical(&as_refs(&self.numerical))
            .binary(&as_refs(&self.binary))
            .nary(&as_refs(&self.nary))
            .label(&self.label);
        if let Some(p) = &self.protected {
            b = b.protected(p);
        }
        if let Some(mv) = &self.missing_values {
            b = b.missing_values(&as_refs(mv));
        }
        b.build()
    }

    /// Report name: the explicit name, or the file stem.
    pub fn resolved_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".to_string())
        })
    }
}

/// `[split]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSection {
    /// Fraction of rows held out for testing.
    pub test_fraction: f64,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection { test_fraction: 0.2 }
    }
}

/// `[train]` section; seeds and penalties are filled in per stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub validation_fraction: f64,
    /// Penalty factor used by the regularized baseline stages.
    pub factor: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let base = TrainConfig::default();
        TrainSection {
            learning_rate: base.learning_rate,
            max_epochs: base.max_epochs,
            patience: base.patience,
            batch_size: base.batch_size,
            validation_fraction: base.validation_fraction,
            factor: base.factor,
        }
    }
}

impl TrainSection {
    /// Materializes a full training config for one stage.
    pub fn to_config(&self, seed: u64, regularization: Regularization) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            max_epochs: self.max_epochs,
            patience: self.patience,
            batch_size: self.batch_size,
            validation_fraction: self.validation_fraction,
            regularization,
            factor: self.factor,
            seed,
        }
    }
}

/// `[smote]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmoteSection {
    pub enabled: bool,
    pub k_neighbors: usize,
}

impl Default for SmoteSection {
    fn default() -> Self {
        SmoteSection {
            enabled: true,
            k_neighbors: 5,
        }
    }
}

/// `[shap]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShapSection {
    /// Coalition evaluations per explained sample; `None` uses `2m + 2048`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coalition_budget: Option<usize>,
    pub mode: ShapMode,
}

impl Default for ShapSection {
    fn default() -> Self {
        ShapSection {
            coalition_budget: None,
            mode: ShapMode::Sampled,
        }
    }
}

/// `[background]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackgroundSection {
    /// Background rows per stage (split evenly across protected groups when
    /// present).
    pub k: usize,
}

impl Default for BackgroundSection {
    fn default() -> Self {
        BackgroundSection { k: 4 }
    }
}

/// `[idw]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdwSection {
    pub enabled: bool,
    pub iterations: usize,
}

impl Default for IdwSection {
    fn default() -> Self {
        IdwSection {
            enabled: true,
            iterations: 4,
        }
    }
}

/// `[trv]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrvSection {
    pub enabled: bool,
    /// Cognitive budgets to run, one streamlined model each.
    pub k: Vec<usize>,
}

impl Default for TrvSection {
    fn default() -> Self {
        TrvSection {
            enabled: true,
            k: vec![3, 5, 10, 15, 20],
        }
    }
}

/// `[baselines]` section: comparison models retrained on the untouched data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselinesSection {
    pub l1: bool,
    pub l2: bool,
    pub l12: bool,
    pub selectk: bool,
}

impl Default for BaselinesSection {
    fn default() -> Self {
        BaselinesSection {
            l1: true,
            l2: true,
            l12: true,
            selectk: true,
        }
    }
}

/// Everything one experiment needs, parsed from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Global seed; every sub-stage seed is derived from it.
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Importance threshold shared by XCP, Sim, replacement fitting, and
    /// the selection budget.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Output directory; overridable on the command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub dataset: DatasetSection,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub smote: SmoteSection,
    #[serde(default)]
    pub shap: ShapSection,
    #[serde(default)]
    pub background: BackgroundSection,
    #[serde(default)]
    pub idw: IdwSection,
    #[serde(default)]
    pub trv: TrvSection,
    #[serde(default)]
    pub baselines: BaselinesSection,
}

impl RunConfig {
    /// Parses a TOML config file.
    pub fn load(path: &std::path::Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Checks every invariant that can be checked before touching data.
    pub fn validate(&self) -> Result<()> {
        if !self.dataset.path.exists() {
            return Err(Error::Config(format!(
                "dataset file `{}` does not exist",
                self.dataset.path.display()
            )));
        }
        self.dataset.schema()?;
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Config(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if !(self.split.test_fraction > 0.0 && self.split.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "test_fraction must be in (0,1), got {}",
                self.split.test_fraction
            )));
        }
        if self.smote.enabled && self.smote.k_neighbors == 0 {
            return Err(Error::Config("smote k_neighbors must be >= 1".into()));
        }
        if self.background.k == 0 {
            return Err(Error::Config("background k must be >= 1".into()));
        }
        if self.dataset.protected.is_some() && !self.background.k.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "background k must be even when a protected attribute is configured \
                 (half per group); got {}",
                self.background.k
            )));
        }
        if self.idw.enabled && self.idw.iterations == 0 {
            return Err(Error::Config("idw iterations must be >= 1".into()));
        }
        if self.trv.enabled {
            if self.trv.k.is_empty() {
                return Err(Error::Config("trv is enabled but its K list is empty".into()));
            }
            if self.trv.k.contains(&0) {
                return Err(Error::Config("trv K values must be >= 1".into()));
            }
        }
        self.train_config(Regularization::None).validate()?;
        Ok(())
    }

    /// Seed of the train/test shuffle.
    pub fn split_seed(&self) -> u64 {
        derive_seed(self.seed, "split")
    }

    /// Seed of the minority oversampler.
    pub fn smote_seed(&self) -> u64 {
        derive_seed(self.seed, "smote")
    }

    /// Base seed of model training (stages derive their own from it).
    pub fn train_seed(&self) -> u64 {
        derive_seed(self.seed, "train")
    }

    /// Base seed of background fitting and explanations.
    pub fn shap_seed(&self) -> u64 {
        derive_seed(self.seed, "shap")
    }

    /// Split configuration with the derived seed.
    pub fn split_config(&self) -> SplitConfig {
        SplitConfig {
            test_fraction: self.split.test_fraction,
            seed: self.split_seed(),
        }
    }

    /// Training configuration with the derived base seed.
    pub fn train_config(&self, regularization: Regularization) -> TrainConfig {
        self.train.to_config(self.train_seed(), regularization)
    }

    /// Explanation configuration with the derived base seed.
    pub fn shap_config(&self) -> ShapConfig {
        ShapConfig {
            coalition_budget: self.shap.coalition_budget,
            seed: self.shap_seed(),
            mode: self.shap.mode,
        }
    }
}

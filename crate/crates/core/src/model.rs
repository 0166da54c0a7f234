//! One-hidden-layer MLP binary classifier.
//!
//! Architecture: `m` inputs -> `m` ReLU hidden units -> 1 sigmoid output.
//! Trained with mini-batch gradient descent on binary cross-entropy, with
//! optional L1/L2/L1+L2 weight penalties and early stopping on a held-out
//! validation split (best-epoch weights are restored). Training is
//! single-threaded and bitwise deterministic per seed; a trained model is
//! immutable and safe to evaluate from many threads.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

use crate::data::{stratified_partition, Dataset};
use crate::linalg::Matrix;
use crate::util::derive_seed;
use crate::{Error, Result};

/// Weight-penalty flavor added to the training loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularization {
    /// No penalty.
    #[default]
    None,
    /// `factor * sum(|w|)` over both weight matrices (biases excluded).
    L1,
    /// `factor * sum(w^2)` over both weight matrices (biases excluded).
    L2,
    /// Both penalties at once, each with the same factor.
    L12,
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub batch_size: usize,
    /// Fraction of the training set held out for early stopping.
    pub validation_fraction: f64,
    pub regularization: Regularization,
    /// Penalty factor (ignored when `regularization` is `None`).
    pub factor: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            max_epochs: 500,
            patience: 10,
            batch_size: 32,
            validation_fraction: 0.1,
            regularization: Regularization::None,
            factor: 0.0001,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Checks hyperparameter ranges.
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::Config(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.patience < 1 {
            return Err(Error::Config("patience must be >= 1".into()));
        }
        if self.max_epochs < 1 {
            return Err(Error::Config("max_epochs must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config(format!(
                "validation_fraction must be in (0,1), got {}",
                self.validation_fraction
            )));
        }
        if self.factor.is_nan() || self.factor < 0.0 {
            return Err(Error::Config(format!(
                "regularization factor must be >= 0, got {}",
                self.factor
            )));
        }
        Ok(())
    }
}

/// Trained model parameters. The hidden width always equals `input_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct MLPModel {
    /// Hidden weights, `m x m`; row `i` feeds hidden unit `i`.
    pub w1: Matrix,
    /// Hidden biases, length `m`.
    pub b1: Vec<f64>,
    /// Output weights, length `m`.
    pub w2: Vec<f64>,
    /// Output bias.
    pub b2: f64,
    pub input_dim: usize,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable `ln(1 + e^z)`.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl MLPModel {
    /// Validates shapes and assembles a model.
    pub fn new(w1: Matrix, b1: Vec<f64>, w2: Vec<f64>, b2: f64) -> Result<MLPModel> {
        let m = w1.cols();
        if w1.rows() != m || b1.len() != m || w2.len() != m || m == 0 {
            return Err(Error::Dimension(format!(
                "inconsistent model shapes: w1 {}x{}, b1 {}, w2 {}",
                w1.rows(),
                w1.cols(),
                b1.len(),
                w2.len()
            )));
        }
        Ok(MLPModel {
            w1,
            b1,
            w2,
            b2,
            input_dim: m,
        })
    }

    /// Probability output for a single feature row (length `input_dim`).
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.input_dim);
        let m = self.input_dim;
        let mut z = self.b2;
        for i in 0..m {
            let mut a = self.b1[i];
            let w_row = self.w1.row(i);
            for j in 0..m {
                a += w_row[j] * x[j];
            }
            if a > 0.0 {
                z += self.w2[i] * a;
            }
        }
        sigmoid(z)
    }

    /// Pre-sigmoid score of a single row (used internally by training).
    fn logit_row(&self, x: &[f64]) -> f64 {
        let m = self.input_dim;
        let mut z = self.b2;
        for i in 0..m {
            let mut a = self.b1[i];
            let w_row = self.w1.row(i);
            for j in 0..m {
                a += w_row[j] * x[j];
            }
            if a > 0.0 {
                z += self.w2[i] * a;
            }
        }
        z
    }

    /// Probability outputs for every row of `x`.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.input_dim {
            return Err(Error::Dimension(format!(
                "input has {} columns, model expects {}",
                x.cols(),
                self.input_dim
            )));
        }
        Ok((0..x.rows()).map(|i| self.predict_row(x.row(i))).collect())
    }

    /// Hard labels: 1 iff probability >= 0.5.
    pub fn predict_label(&self, x: &Matrix) -> Result<Vec<u8>> {
        Ok(self
            .predict_proba(x)?
            .into_iter()
            .map(|p| u8::from(p >= 0.5))
            .collect())
    }

    const MAGIC: &'static [u8; 8] = b"SHPLNMLP";
    const FORMAT_VERSION: u32 = 1;

    /// Persists the model: magic, format version, input_dim, then row-major
    /// `w1`, `b1`, `w2`, `b2` as little-endian 64-bit floats.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(16 + 8 * (self.input_dim * (self.input_dim + 2) + 1));
        buf.extend_from_slice(Self::MAGIC);
        buf.extend_from_slice(&Self::FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.input_dim as u64).to_le_bytes());
        for v in self.w1.as_slice() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for v in &self.b1 {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for v in &self.w2 {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&self.b2.to_le_bytes());
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&buf).map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Loads a model persisted by [`MLPModel::save`], rejecting unknown
    /// magic bytes, format versions, and truncated files.
    pub fn load(path: &Path) -> Result<MLPModel> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .map_err(|e| Error::io(path, e))?
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io(path, e))?;
        if bytes.len() < 20 || &bytes[..8] != Self::MAGIC {
            return Err(Error::Artifact(format!(
                "`{}` is not a model file",
                path.display()
            )));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != Self::FORMAT_VERSION {
            return Err(Error::Artifact(format!(
                "model format version {} unsupported (expected {})",
                version,
                Self::FORMAT_VERSION
            )));
        }
        let m = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let expected = 20 + 8 * (m * m + m + m + 1);
        if bytes.len() != expected {
            return Err(Error::Artifact(format!(
                "model file has {} bytes, expected {} for input_dim {}",
                bytes.len(),
                expected,
                m
            )));
        }
        let mut floats = bytes[20..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let w1_data: Vec<f64> = floats.by_ref().take(m * m).collect();
        let b1: Vec<f64> = floats.by_ref().take(m).collect();
        let w2: Vec<f64> = floats.by_ref().take(m).collect();
        let b2 = floats.next().unwrap();
        MLPModel::new(Matrix::from_vec(m, m, w1_data)?, b1, w2, b2)
    }
}

/// Analytic gradients of the training objective with respect to every
/// parameter, in the same layout as the model.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

/// Mean binary cross-entropy over the listed rows, plus the configured
/// weight penalty, together with its analytic gradients.
fn objective_on_rows(
    model: &MLPModel,
    x: &Matrix,
    y: &[u8],
    rows: &[usize],
    reg: Regularization,
    factor: f64,
) -> (f64, Gradients) {
    let m = model.input_dim;
    let inv_n = 1.0 / rows.len() as f64;
    let mut loss = 0.0;
    let mut g = Gradients {
        w1: Matrix::zeros(m, m),
        b1: vec![0.0; m],
        w2: vec![0.0; m],
        b2: 0.0,
    };
    let mut hidden = vec![0.0; m];
    for &r in rows {
        let xi = x.row(r);
        let yi = y[r] as f64;
        let mut z = model.b2;
        for (i, h_slot) in hidden.iter_mut().enumerate() {
            let mut a = model.b1[i];
            let w_row = model.w1.row(i);
            for j in 0..m {
                a += w_row[j] * xi[j];
            }
            let h = if a > 0.0 { a } else { 0.0 };
            *h_slot = h;
            z += model.w2[i] * h;
        }
        loss += (softplus(z) - yi * z) * inv_n;
        // dLoss/dz for BCE on a sigmoid output.
        let dz = (sigmoid(z) - yi) * inv_n;
        g.b2 += dz;
        for (i, &h) in hidden.iter().enumerate() {
            g.w2[i] += dz * h;
            if h > 0.0 {
                let dh = dz * model.w2[i];
                g.b1[i] += dh;
                let g_row = g.w1.row_mut(i);
                for j in 0..m {
                    g_row[j] += dh * xi[j];
                }
            }
        }
    }
    // Weight penalties (biases excluded).
    let (l1_on, l2_on) = match reg {
        Regularization::None => (false, false),
        Regularization::L1 => (true, false),
        Regularization::L2 => (false, true),
        Regularization::L12 => (true, true),
    };
    if l1_on || l2_on {
        let mut penalty = 0.0;
        let mut add = |w: f64| -> f64 {
            let mut dw = 0.0;
            if l1_on {
                penalty += w.abs();
                // Subgradient of |w|, taking 0 at w = 0.
                dw += factor * if w == 0.0 { 0.0 } else { w.signum() };
            }
            if l2_on {
                penalty += w * w;
                dw += 2.0 * factor * w;
            }
            dw
        };
        for i in 0..m {
            for j in 0..m {
                let dw = add(model.w1.get(i, j));
                let v = g.w1.get(i, j) + dw;
                g.w1.set(i, j, v);
            }
        }
        for i in 0..m {
            g.w2[i] += add(model.w2[i]);
        }
        loss += factor * penalty;
    }
    (loss, g)
}

/// Full-batch training objective (mean BCE over all rows plus the weight
/// penalty) and its analytic gradients. Exposed so that the gradients can be
/// verified against finite differences.
pub fn loss_and_gradients(
    model: &MLPModel,
    x: &Matrix,
    y: &[u8],
    reg: Regularization,
    factor: f64,
) -> Result<(f64, Gradients)> {
    if x.cols() != model.input_dim {
        return Err(Error::Dimension(format!(
            "input has {} columns, model expects {}",
            x.cols(),
            model.input_dim
        )));
    }
    if x.rows() == 0 || x.rows() != y.len() {
        return Err(Error::Dimension(format!(
            "{} rows vs {} labels",
            x.rows(),
            y.len()
        )));
    }
    let rows: Vec<usize> = (0..x.rows()).collect();
    Ok(objective_on_rows(model, x, y, &rows, reg, factor))
}

fn mean_bce(model: &MLPModel, x: &Matrix, y: &[u8], rows: &[usize]) -> f64 {
    let mut loss = 0.0;
    for &r in rows {
        let z = model.logit_row(x.row(r));
        loss += softplus(z) - y[r] as f64 * z;
    }
    loss / rows.len() as f64
}

/// Summary of a training run.
#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Epochs actually executed (early stopping may cut `max_epochs` short).
    pub epochs_run: usize,
    /// 1-based epoch whose weights were restored.
    pub best_epoch: usize,
    /// Validation loss of the restored weights.
    pub best_val_loss: f64,
    /// Unregularized validation BCE after every epoch.
    pub val_losses: Vec<f64>,
}

/// Trains a model; see [`train_report`] for details.
pub fn train(train_set: &Dataset, cfg: &TrainConfig) -> Result<MLPModel> {
    Ok(train_report(train_set, cfg)?.0)
}

/// Trains a one-hidden-layer MLP with mini-batch gradient descent.
///
/// A stratified `validation_fraction` of the rows is held out; after every
/// epoch the unregularized validation BCE is measured, and training stops
/// once it has not improved for `patience` consecutive epochs. The weights
/// of the best validation epoch are restored. Weight init is uniform in
/// `[-1/sqrt(m), 1/sqrt(m)]`, biases start at zero. Deterministic per seed.
pub fn train_report(train_set: &Dataset, cfg: &TrainConfig) -> Result<(MLPModel, TrainReport)> {
    cfg.validate()?;
    train_set.validate()?;
    if !train_set.y.contains(&0) || !train_set.y.contains(&1) {
        return Err(Error::Train(
            "training set must contain both classes".into(),
        ));
    }
    let m = train_set.m();
    let x = &train_set.x;
    let y = &train_set.y;

    let (fit_rows, val_rows) = stratified_partition(
        y,
        cfg.validation_fraction,
        derive_seed(cfg.seed, "mlp/validation"),
    )
    .map_err(|e| Error::Train(format!("validation split failed: {e}")))?;

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "mlp/weights"));
    let bound = 1.0 / (m as f64).sqrt();
    let mut w1 = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            w1.set(i, j, rng.gen_range(-bound..=bound));
        }
    }
    let b1 = vec![0.0; m];
    let mut w2 = vec![0.0; m];
    for w in w2.iter_mut() {
        *w = rng.gen_range(-bound..=bound);
    }
    let mut model = MLPModel::new(w1, b1, w2, 0.0)?;

    let mut best_model = model.clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut epochs_since_best = 0usize;
    let mut val_losses = Vec::new();
    let mut epochs_run = 0usize;
    let mut order = fit_rows.clone();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let (batch_loss, g) =
                objective_on_rows(&model, x, y, batch, cfg.regularization, cfg.factor);
            if !batch_loss.is_finite() {
                return Err(Error::Train(format!(
                    "non-finite training loss at epoch {epoch}"
                )));
            }
            let lr = cfg.learning_rate;
            for i in 0..m {
                let w_row = model.w1.row_mut(i);
                let g_row = g.w1.row(i);
                for j in 0..m {
                    w_row[j] -= lr * g_row[j];
                }
                model.b1[i] -= lr * g.b1[i];
                model.w2[i] -= lr * g.w2[i];
            }
            model.b2 -= lr * g.b2;
        }
        let val = mean_bce(&model, x, y, &val_rows);
        if !val.is_finite() {
            return Err(Error::Train(format!(
                "non-finite validation loss at epoch {epoch}"
            )));
        }
        val_losses.push(val);
        epochs_run = epoch;
        if val < best_val {
            best_val = val;
            best_epoch = epoch;
            best_model = model.clone();
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
            if epochs_since_best >= cfg.patience {
                break;
            }
        }
    }

    Ok((
        best_model,
        TrainReport {
            epochs_run,
            best_epoch,
            best_val_loss: best_val,
            val_losses,
        },
    ))
}

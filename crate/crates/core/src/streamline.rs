//! Explanation-guided dataset streamlining.
//!
//! Two workflows reshape a dataset using per-sample importance scores and
//! retrain the classifier on the result:
//!
//! * **Iterative dataset weighting** — multiply the data elementwise by the
//!   absolute scores, rescale columns back to unit spread, retrain, and
//!   repeat ([`idw_iterate`]).
//! * **Targeted replacement values** — per sample, keep the `K` most
//!   important features and overwrite the rest with neutral replacement
//!   values fitted on the training split ([`trv_train`]).
//!
//! A global filter-style feature-selection baseline ([`select_k_best`]) is
//! included for comparison.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureOrigin};
use crate::explain::{
    explain_matrix, kmeans_backgrounds, stratified_backgrounds, BackgroundSet, ExplanationMatrix,
    ShapConfig,
};
use crate::linalg::Matrix;
use crate::model::{train, MLPModel, TrainConfig};
use crate::util::{derive_seed, median, population_std};
use crate::{Error, Result};

/// Background-set size used when a workflow does not specify one.
pub const DEFAULT_BACKGROUND_K: usize = 4;

/// Configuration of the iterative-weighting workflow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IDWConfig {
    /// Number of weighting/retraining rounds (model chain `h1..h_iterations`).
    pub iterations: usize,
    /// Rows in each stage's background set.
    pub background_k: usize,
    /// Explanation settings shared by every stage.
    pub shap: ShapConfig,
    /// Training settings; each stage derives its own seed from this one.
    pub train: TrainConfig,
}

impl Default for IDWConfig {
    fn default() -> Self {
        IDWConfig {
            iterations: 4,
            background_k: DEFAULT_BACKGROUND_K,
            shap: ShapConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl IDWConfig {
    /// Checks the invariants that do not depend on a dataset.
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be >= 1".into()));
        }
        if self.background_k == 0 {
            return Err(Error::Config("background_k must be >= 1".into()));
        }
        self.train.validate()
    }
}

/// Configuration of the targeted-replacement workflow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TRVConfig {
    /// Cognitive budget: per-sample count of features kept.
    pub k: usize,
    /// Importance threshold below which a feature counts as irrelevant.
    pub epsilon: f64,
    /// Explanation settings.
    pub shap: ShapConfig,
    /// Training settings; the stage derives its own seed from this one.
    pub train: TrainConfig,
}

impl Default for TRVConfig {
    fn default() -> Self {
        TRVConfig {
            k: 3,
            epsilon: 0.01,
            shap: ShapConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl TRVConfig {
    /// Checks invariants against the dataset width `m`.
    pub fn validate(&self, m: usize) -> Result<()> {
        if self.k == 0 || self.k > m {
            return Err(Error::Config(format!(
                "K must satisfy 1 <= K <= {m}, got {}",
                self.k
            )));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Config(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        self.train.validate()
    }
}

/// Where each entry of a [`ReplacementVector`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplacementProvenance {
    /// One-hot-encoded feature: the neutral replacement is always 0.
    CategoricalZero,
    /// Median of the training values whose importance fell below epsilon.
    MedianOfLowImportance,
    /// No training value fell below epsilon; median of the whole column.
    FallbackGlobalMedian,
}

/// Per-feature neutral replacement values used by [`trv_mask`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplacementVector {
    /// One replacement value per feature.
    pub r: Vec<f64>,
    /// How each entry was derived.
    pub provenance: Vec<ReplacementProvenance>,
}

/// How a pipeline stage was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    /// Plain model on the untouched data.
    Baseline,
    /// Baseline retrained with a weight penalty.
    Regularized,
    /// Baseline retrained on a globally selected feature subset.
    SelectK,
    /// Iterative-weighting stage.
    Idw,
    /// Targeted-replacement stage.
    Trv,
}

/// One model in a streamlining chain together with everything needed to
/// evaluate it: its data, its background set, and its explanations.
#[derive(Debug, Clone)]
pub struct Stage {
    /// Stage label, e.g. `f0`, `h2`, `h1_k5`.
    pub name: String,
    /// Workflow that produced the stage.
    pub kind: StageKind,
    /// Training split the model was fitted on.
    pub train: Dataset,
    /// Held-out split used for every reported metric.
    pub test: Dataset,
    /// Background rows summarizing this stage's training split.
    pub backgrounds: BackgroundSet,
    /// The fitted classifier.
    pub model: MLPModel,
    /// Explanations of the training split; present only when a later stage
    /// (or replacement fitting) needs them.
    pub e_train: Option<ExplanationMatrix>,
    /// Explanations of the test split.
    pub e_test: ExplanationMatrix,
}

/// A chain of stages; `stages[0]` is the baseline and each later stage was
/// built from its predecessor's explanations.
#[derive(Debug, Clone)]
pub struct StreamlineRun {
    /// Stage chain in production order.
    pub stages: Vec<Stage>,
}

impl StreamlineRun {
    /// The final (most streamlined) stage.
    pub fn last(&self) -> &Stage {
        self.stages.last().expect("runs contain at least one stage")
    }
}

/// Builds a background set for a training split: stratified by protected
/// group when one is present (requiring an even `k`, half per group),
/// otherwise plain k-means with `k` centroids.
pub fn make_backgrounds(train_set: &Dataset, k: usize, seed: u64) -> Result<BackgroundSet> {
    if k == 0 {
        return Err(Error::Config("background k must be >= 1".into()));
    }
    if train_set.protected.is_some() {
        if !k.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "stratified backgrounds need an even k (half per group), got {k}"
            )));
        }
        stratified_backgrounds(train_set, k / 2, seed)
    } else {
        kmeans_backgrounds(train_set, k, seed)
    }
}

/// Trains a model on `train_set` and packages it as a [`Stage`]: fits the
/// background set, explains the test split, and optionally the training
/// split. Background and explanation seeds are derived from
/// `shap_cfg.seed` and the stage name, so stages are independently
/// reproducible.
#[allow(clippy::too_many_arguments)]
pub fn fit_stage(
    name: &str,
    kind: StageKind,
    train_set: Dataset,
    test_set: Dataset,
    train_cfg: &TrainConfig,
    shap_cfg: &ShapConfig,
    background_k: usize,
    explain_train: bool,
) -> Result<Stage> {
    train_set.validate()?;
    test_set.validate()?;
    if train_set.m() != test_set.m() {
        return Err(Error::Dimension(format!(
            "train split has {} features, test split has {}",
            train_set.m(),
            test_set.m()
        )));
    }
    let model = train(&train_set, train_cfg)?;
    let backgrounds = make_backgrounds(
        &train_set,
        background_k,
        derive_seed(shap_cfg.seed, &format!("bg/{name}")),
    )?;
    let e_test = explain_matrix(
        &model,
        &test_set,
        &backgrounds,
        &ShapConfig {
            seed: derive_seed(shap_cfg.seed, &format!("shap-test/{name}")),
            ..*shap_cfg
        },
    )?;
    let e_train = if explain_train {
        Some(explain_matrix(
            &model,
            &train_set,
            &backgrounds,
            &ShapConfig {
                seed: derive_seed(shap_cfg.seed, &format!("shap-train/{name}")),
                ..*shap_cfg
            },
        )?)
    } else {
        None
    };
    Ok(Stage {
        name: name.to_string(),
        kind,
        train: train_set,
        test: test_set,
        backgrounds,
        model,
        e_train,
        e_test,
    })
}

/// `|E| elementwise-times X`.
fn weight_by_scores(x: &Matrix, e: &Matrix) -> Matrix {
    let mut out = x.clone();
    for i in 0..x.rows() {
        let er = e.row(i);
        for (j, v) in out.row_mut(i).iter_mut().enumerate() {
            *v *= er[j].abs();
        }
    }
    out
}

fn check_combine_shapes(d: &Dataset, e: &ExplanationMatrix) -> Result<()> {
    if d.n() != e.n() || d.m() != e.m() {
        return Err(Error::Dimension(format!(
            "dataset is {}x{} but explanation matrix is {}x{}",
            d.n(),
            d.m(),
            e.n(),
            e.m()
        )));
    }
    Ok(())
}

/// Applies precomputed per-column divisors: columns whose divisor is zero
/// are zeroed out, others are divided through.
fn rescale_columns(x: &mut Matrix, stds: &[f64]) {
    for i in 0..x.rows() {
        for (j, v) in x.row_mut(i).iter_mut().enumerate() {
            if stds[j] == 0.0 {
                *v = 0.0;
            } else {
                *v /= stds[j];
            }
        }
    }
}

/// Weights a dataset by the absolute explanation scores and rescales every
/// column by its own (population) standard deviation after weighting, so
/// the output columns stay on a z-score-like spread. Columns whose weighted
/// values have zero spread are left as all-zeros.
pub fn idw_combine(d: &Dataset, e: &ExplanationMatrix) -> Result<Dataset> {
    check_combine_shapes(d, e)?;
    let mut x = weight_by_scores(&d.x, &e.e);
    let stds: Vec<f64> = (0..x.cols()).map(|j| population_std(&x.column(j))).collect();
    rescale_columns(&mut x, &stds);
    d.with_x(x)
}

/// [`idw_combine`] applied to a train/test pair. Both splits are weighted
/// by their own explanation rows, but the column rescale uses the training
/// split's standard deviations for both, so the test split never leaks into
/// the transform.
pub fn idw_combine_pair(
    d_train: &Dataset,
    e_train: &ExplanationMatrix,
    d_test: &Dataset,
    e_test: &ExplanationMatrix,
) -> Result<(Dataset, Dataset)> {
    check_combine_shapes(d_train, e_train)?;
    check_combine_shapes(d_test, e_test)?;
    if d_train.m() != d_test.m() {
        return Err(Error::Dimension(format!(
            "train split has {} features, test split has {}",
            d_train.m(),
            d_test.m()
        )));
    }
    let mut x_train = weight_by_scores(&d_train.x, &e_train.e);
    let mut x_test = weight_by_scores(&d_test.x, &e_test.e);
    let stds: Vec<f64> = (0..x_train.cols())
        .map(|j| population_std(&x_train.column(j)))
        .collect();
    rescale_columns(&mut x_train, &stds);
    rescale_columns(&mut x_test, &stds);
    Ok((d_train.with_x(x_train)?, d_test.with_x(x_test)?))
}

/// One weighting/retraining round: builds stage `h<i>` from `prev`'s data
/// and explanations. `explain_train` keeps the new stage's training-split
/// explanations (required whenever another round will follow). The round's
/// training seed is derived from `cfg.train.seed` and the round index, so a
/// chain is reproducible no matter how its rounds are driven.
pub fn idw_step(prev: &Stage, i: usize, cfg: &IDWConfig, explain_train: bool) -> Result<Stage> {
    let name = format!("h{i}");
    let e_train_prev = prev.e_train.as_ref().ok_or_else(|| {
        Error::Config(format!(
            "stage `{}` lacks training-split explanations required for iterative weighting",
            prev.name
        ))
    })?;
    let (d_train, d_test) = idw_combine_pair(&prev.train, e_train_prev, &prev.test, &prev.e_test)
        .map_err(|e| e.in_stage(&name))?;
    let train_cfg = TrainConfig {
        seed: derive_seed(cfg.train.seed, &format!("idw/train/{i}")),
        ..cfg.train.clone()
    };
    fit_stage(
        &name,
        StageKind::Idw,
        d_train,
        d_test,
        &train_cfg,
        &cfg.shap,
        cfg.background_k,
        explain_train,
    )
    .map_err(|e| e.in_stage(&name))
}

/// Runs the iterative-weighting chain on top of an existing baseline stage.
/// The baseline must carry training-split explanations. Iteration `i`
/// weights stage `i-1`'s splits by stage `i-1`'s explanations, retrains,
/// and explains the result; the final stage skips the training-split
/// explanations nothing consumes.
pub fn idw_iterate_from(baseline: Stage, cfg: &IDWConfig) -> Result<StreamlineRun> {
    cfg.validate()?;
    if baseline.e_train.is_none() {
        return Err(Error::Config(
            "baseline stage lacks training-split explanations required for iterative weighting"
                .into(),
        ));
    }
    let mut stages = vec![baseline];
    for i in 1..=cfg.iterations {
        let prev = stages.last().expect("chain starts with the baseline");
        let stage = idw_step(prev, i, cfg, i < cfg.iterations)?;
        stages.push(stage);
    }
    Ok(StreamlineRun { stages })
}

/// Full iterative-weighting workflow: trains the baseline `f0` on the given
/// splits, then runs [`idw_iterate_from`], yielding stages
/// `f0, h1, ..., h_iterations`.
pub fn idw_iterate(
    train_set: Dataset,
    test_set: Dataset,
    cfg: &IDWConfig,
) -> Result<StreamlineRun> {
    cfg.validate()?;
    let baseline = fit_stage(
        "f0",
        StageKind::Baseline,
        train_set,
        test_set,
        &cfg.train,
        &cfg.shap,
        cfg.background_k,
        true,
    )
    .map_err(|e| e.in_stage("f0"))?;
    idw_iterate_from(baseline, cfg)
}

/// Fits per-feature neutral replacement values on a training split.
///
/// One-hot-origin features are always replaced by 0 (the encoding's
/// "absent" direction carries no category). A numerical feature takes the
/// median of its values on the rows where its importance is below
/// `epsilon`; if no row qualifies, the median of the whole column is used
/// and flagged in the provenance.
pub fn replacement_values(
    d_train: &Dataset,
    e: &ExplanationMatrix,
    epsilon: f64,
) -> Result<ReplacementVector> {
    check_combine_shapes(d_train, e)?;
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::Config(format!("epsilon must be > 0, got {epsilon}")));
    }
    let n = d_train.n();
    let mut r = Vec::with_capacity(d_train.m());
    let mut provenance = Vec::with_capacity(d_train.m());
    for j in 0..d_train.m() {
        if d_train.feature_origin[j] == FeatureOrigin::OneHot {
            r.push(0.0);
            provenance.push(ReplacementProvenance::CategoricalZero);
            continue;
        }
        let low: Vec<f64> = (0..n)
            .filter(|&i| e.e.get(i, j).abs() < epsilon)
            .map(|i| d_train.x.get(i, j))
            .collect();
        if low.is_empty() {
            r.push(median(&d_train.x.column(j)));
            provenance.push(ReplacementProvenance::FallbackGlobalMedian);
        } else {
            r.push(median(&low));
            provenance.push(ReplacementProvenance::MedianOfLowImportance);
        }
    }
    Ok(ReplacementVector { r, provenance })
}

/// Per sample, keeps the `k` features with the largest absolute importance
/// (ties broken toward the lower feature index) and replaces every other
/// feature with its entry in `r`.
pub fn trv_mask(
    d: &Dataset,
    e: &ExplanationMatrix,
    k: usize,
    r: &ReplacementVector,
) -> Result<Dataset> {
    check_combine_shapes(d, e)?;
    let m = d.m();
    if r.r.len() != m {
        return Err(Error::Dimension(format!(
            "replacement vector has {} entries for {m} features",
            r.r.len()
        )));
    }
    if k > m {
        return Err(Error::Config(format!("K = {k} exceeds the {m} features")));
    }
    let mut x = d.x.clone();
    let mut order: Vec<usize> = (0..m).collect();
    for i in 0..d.n() {
        let er = e.e.row(i);
        order.sort_by(|&a, &b| er[b].abs().total_cmp(&er[a].abs()).then(a.cmp(&b)));
        let row = x.row_mut(i);
        for &j in &order[k..] {
            row[j] = r.r[j];
        }
    }
    d.with_x(x)
}

/// Runs the targeted-replacement workflow on top of an existing baseline
/// stage (which must carry training-split explanations): fits the
/// replacement vector on the training split, masks both splits to their
/// per-sample top-`K` features, and trains the streamlined model `h1_k<K>`.
/// Returns the two-stage run and the fitted replacement vector.
pub fn trv_train_from(
    baseline: Stage,
    cfg: &TRVConfig,
) -> Result<(StreamlineRun, ReplacementVector)> {
    cfg.validate(baseline.train.m())?;
    let name = format!("h1_k{}", cfg.k);
    let e_train = baseline.e_train.as_ref().ok_or_else(|| {
        Error::Config(
            "baseline stage lacks training-split explanations required for targeted replacement"
                .into(),
        )
    })?;
    let r = replacement_values(&baseline.train, e_train, cfg.epsilon)?;
    let d_train =
        trv_mask(&baseline.train, e_train, cfg.k, &r).map_err(|e| e.in_stage(&name))?;
    let d_test =
        trv_mask(&baseline.test, &baseline.e_test, cfg.k, &r).map_err(|e| e.in_stage(&name))?;
    let train_cfg = TrainConfig {
        seed: derive_seed(cfg.train.seed, &format!("trv/train/k{}", cfg.k)),
        ..cfg.train.clone()
    };
    let background_k = baseline.backgrounds.k();
    let stage = fit_stage(
        &name,
        StageKind::Trv,
        d_train,
        d_test,
        &train_cfg,
        &cfg.shap,
        background_k,
        false,
    )
    .map_err(|e| e.in_stage(&name))?;
    let run = StreamlineRun {
        stages: vec![baseline, stage],
    };
    Ok((run, r))
}

/// Full targeted-replacement workflow: trains the baseline `f0`, then runs
/// [`trv_train_from`]. Not iterative — exactly one streamlined stage.
pub fn trv_train(
    train_set: Dataset,
    test_set: Dataset,
    cfg: &TRVConfig,
) -> Result<(StreamlineRun, ReplacementVector)> {
    cfg.validate(train_set.m())?;
    let baseline = fit_stage(
        "f0",
        StageKind::Baseline,
        train_set,
        test_set,
        &cfg.train,
        &cfg.shap,
        DEFAULT_BACKGROUND_K,
        true,
    )
    .map_err(|e| e.in_stage("f0"))?;
    trv_train_from(baseline, cfg)
}

/// Per-feature one-way ANOVA F statistic between the two label classes:
/// `F = (SSB / 1) / (SSW / (n - 2))`. A feature with zero within-class
/// variance scores positive infinity if the class means differ and 0 if the
/// feature is constant.
pub fn anova_f_scores(train_set: &Dataset) -> Result<Vec<f64>> {
    train_set.validate()?;
    let n = train_set.n();
    let (idx0, idx1): (Vec<usize>, Vec<usize>) =
        (0..n).partition(|&i| train_set.y[i] == 0);
    if idx0.is_empty() || idx1.is_empty() {
        return Err(Error::Data(
            "ANOVA scoring needs both label classes present".into(),
        ));
    }
    let mut scores = Vec::with_capacity(train_set.m());
    for j in 0..train_set.m() {
        let col = train_set.x.column(j);
        let m0 = idx0.iter().map(|&i| col[i]).sum::<f64>() / idx0.len() as f64;
        let m1 = idx1.iter().map(|&i| col[i]).sum::<f64>() / idx1.len() as f64;
        let grand = col.iter().sum::<f64>() / n as f64;
        let ssb = idx0.len() as f64 * (m0 - grand).powi(2) + idx1.len() as f64 * (m1 - grand).powi(2);
        let ssw = idx0.iter().map(|&i| (col[i] - m0).powi(2)).sum::<f64>()
            + idx1.iter().map(|&i| (col[i] - m1).powi(2)).sum::<f64>();
        let f = if ssw == 0.0 {
            if ssb > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        } else {
            ssb / (ssw / (n - 2) as f64)
        };
        scores.push(f);
    }
    Ok(scores)
}

/// Indices (ascending) of the `k` features with the largest ANOVA F
/// statistic; ties broken toward the lower index.
pub fn select_k_best(train_set: &Dataset, k: usize) -> Result<Vec<usize>> {
    let m = train_set.m();
    if k == 0 || k > m {
        return Err(Error::Config(format!(
            "K must satisfy 1 <= K <= {m}, got {k}"
        )));
    }
    let scores = anova_f_scores(train_set)?;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut chosen: Vec<usize> = order[..k].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

/// The feature budget used by the selection baseline: the mean per-sample
/// count of importances strictly above `epsilon`, rounded, clamped to
/// `[1, m]`.
pub fn selectk_baseline_k(e: &ExplanationMatrix, epsilon: f64) -> Result<usize> {
    if e.n() == 0 {
        return Err(Error::Data("empty explanation matrix".into()));
    }
    let mut total = 0usize;
    for i in 0..e.n() {
        total += e.e.row(i).iter().filter(|v| v.abs() > epsilon).count();
    }
    let mean = total as f64 / e.n() as f64;
    Ok((mean.round() as usize).clamp(1, e.m()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Regularization;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dataset(rows: &[Vec<f64>], y: Vec<u8>) -> Dataset {
        let m = rows[0].len();
        Dataset {
            name: "t".into(),
            x: Matrix::from_rows(rows).unwrap(),
            y,
            feature_names: (0..m).map(|j| format!("f{j}")).collect(),
            feature_origin: vec![FeatureOrigin::Numerical; m],
            protected: None,
            norm_stats: None,
        }
    }

    fn explanations(rows: &[Vec<f64>]) -> ExplanationMatrix {
        ExplanationMatrix {
            e: Matrix::from_rows(rows).unwrap(),
            phi0: 0.5,
        }
    }

    #[test]
    fn idw_unit_scores_on_unit_spread_data_is_identity() {
        // Both columns already have population std 1, so weighting by all
        // ones and rescaling must reproduce the input exactly.
        let d = dataset(&[vec![1.0, 2.0], vec![-1.0, 0.0]], vec![1, 0]);
        let e = explanations(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let out = idw_combine(&d, &e).unwrap();
        assert_eq!(out.x, d.x);
    }

    #[test]
    fn idw_zero_score_row_becomes_zero_row() {
        let d = dataset(&[vec![3.0, -2.0], vec![1.0, 5.0], vec![2.0, 1.0]], vec![0, 1, 1]);
        let e = explanations(&[
            vec![0.0, 0.0],
            vec![1.0, 0.5],
            vec![0.3, 0.2],
        ]);
        let out = idw_combine(&d, &e).unwrap();
        assert_eq!(out.x.row(0), &[0.0, 0.0]);
    }

    #[test]
    fn idw_hand_case_two_rows() {
        // Column (1, -1), scores (2, 2): weighted (2, -2), population std 2,
        // rescaled back to (1, -1).
        let d = dataset(&[vec![1.0], vec![-1.0]], vec![1, 0]);
        let e = explanations(&[vec![2.0], vec![-2.0]]);
        let out = idw_combine(&d, &e).unwrap();
        assert_eq!(out.x.row(0), &[1.0]);
        assert_eq!(out.x.row(1), &[-1.0]);
    }

    #[test]
    fn idw_zero_spread_column_is_zeroed() {
        // Column 0 gets zero scores everywhere; column 1 keeps std 1.
        let d = dataset(&[vec![4.0, 1.0], vec![7.0, -1.0]], vec![1, 0]);
        let e = explanations(&[vec![0.0, 1.0], vec![0.0, 1.0]]);
        let out = idw_combine(&d, &e).unwrap();
        assert_eq!(out.x.row(0), &[0.0, 1.0]);
        assert_eq!(out.x.row(1), &[0.0, -1.0]);
    }

    #[test]
    fn idw_pair_rescales_test_with_train_stds() {
        let d_train = dataset(&[vec![1.0], vec![-1.0]], vec![1, 0]);
        let e_train = explanations(&[vec![2.0], vec![2.0]]);
        let d_test = dataset(&[vec![3.0]], vec![1]);
        let e_test = explanations(&[vec![2.0]]);
        let (out_train, out_test) =
            idw_combine_pair(&d_train, &e_train, &d_test, &e_test).unwrap();
        // Train: weighted (2, -2), std 2 -> (1, -1). Test: weighted 6,
        // divided by the TRAIN std 2 -> 3 (its own std would be 0).
        assert_eq!(out_train.x.row(0), &[1.0]);
        assert_eq!(out_test.x.row(0), &[3.0]);
    }

    #[test]
    fn idw_shape_mismatch_is_rejected() {
        let d = dataset(&[vec![1.0, 2.0]], vec![1]);
        let e = explanations(&[vec![1.0]]);
        assert!(idw_combine(&d, &e).is_err());
    }

    #[test]
    fn replacement_for_one_hot_is_zero_regardless_of_scores() {
        let mut d = dataset(&[vec![1.0, 5.0], vec![-1.0, 7.0]], vec![1, 0]);
        d.feature_origin[0] = FeatureOrigin::OneHot;
        let e = explanations(&[vec![9.0, 0.001], vec![9.0, 0.002]]);
        let rv = replacement_values(&d, &e, 0.01).unwrap();
        assert_eq!(rv.r[0], 0.0);
        assert_eq!(rv.provenance[0], ReplacementProvenance::CategoricalZero);
    }

    #[test]
    fn replacement_median_of_low_importance_rows() {
        let d = dataset(&[vec![1.0], vec![2.0], vec![3.0]], vec![0, 1, 0]);
        let e = explanations(&[vec![0.001], vec![-0.002], vec![0.5]]);
        let rv = replacement_values(&d, &e, 0.01).unwrap();
        assert_eq!(rv.r[0], 1.5); // median of {1, 2}
        assert_eq!(rv.provenance[0], ReplacementProvenance::MedianOfLowImportance);
    }

    #[test]
    fn replacement_falls_back_to_global_median() {
        let d = dataset(&[vec![1.0], vec![2.0], vec![3.0]], vec![0, 1, 0]);
        let e = explanations(&[vec![0.5], vec![0.5], vec![0.5]]);
        let rv = replacement_values(&d, &e, 0.01).unwrap();
        assert_eq!(rv.r[0], 2.0);
        assert_eq!(rv.provenance[0], ReplacementProvenance::FallbackGlobalMedian);
    }

    #[test]
    fn replacement_boundary_score_is_not_low() {
        // |score| exactly epsilon does not qualify as low importance.
        let d = dataset(&[vec![1.0], vec![2.0]], vec![0, 1]);
        let e = explanations(&[vec![0.01], vec![0.01]]);
        let rv = replacement_values(&d, &e, 0.01).unwrap();
        assert_eq!(rv.provenance[0], ReplacementProvenance::FallbackGlobalMedian);
    }

    fn simple_replacement(m: usize, value: f64) -> ReplacementVector {
        ReplacementVector {
            r: vec![value; m],
            provenance: vec![ReplacementProvenance::MedianOfLowImportance; m],
        }
    }

    #[test]
    fn trv_mask_k_equal_m_is_identity() {
        let d = dataset(&[vec![0.3, -0.7, 2.0], vec![1.0, 0.0, -5.0]], vec![1, 0]);
        let e = explanations(&[vec![0.1, 0.2, 0.3], vec![0.3, 0.2, 0.1]]);
        let out = trv_mask(&d, &e, 3, &simple_replacement(3, 9.0)).unwrap();
        assert_eq!(out.x, d.x);
        assert_eq!(out.y, d.y);
    }

    #[test]
    fn trv_mask_k_zero_replaces_everything() {
        let d = dataset(&[vec![0.3, -0.7], vec![1.0, 0.0]], vec![1, 0]);
        let e = explanations(&[vec![0.1, 0.2], vec![0.3, 0.2]]);
        let out = trv_mask(&d, &e, 0, &simple_replacement(2, 9.0)).unwrap();
        for i in 0..2 {
            assert_eq!(out.x.row(i), &[9.0, 9.0]);
        }
    }

    #[test]
    fn trv_mask_tie_at_kth_rank_keeps_lower_index() {
        let d = dataset(&[vec![10.0, 20.0, 30.0]], vec![1]);
        let e = explanations(&[vec![0.5, 0.5, 0.1]]);
        let out = trv_mask(&d, &e, 1, &simple_replacement(3, 0.0)).unwrap();
        assert_eq!(out.x.row(0), &[10.0, 0.0, 0.0]);
    }

    #[test]
    fn trv_mask_is_idempotent() {
        let d = dataset(
            &[vec![0.3, -0.7, 2.0, 4.0], vec![1.0, 0.5, -5.0, 2.0]],
            vec![1, 0],
        );
        let e = explanations(&[vec![0.4, 0.2, 0.3, 0.1], vec![0.1, 0.2, 0.3, 0.4]]);
        let r = simple_replacement(4, -1.0);
        let once = trv_mask(&d, &e, 2, &r).unwrap();
        let twice = trv_mask(&once, &e, 2, &r).unwrap();
        assert_eq!(once.x, twice.x);
    }

    #[test]
    fn anova_hand_computed_f() {
        // Class 0: (1,2,3); class 1: (2,3,4). SSB = 1.5, SSW = 4, df = (1,4),
        // F = 1.5 / (4/4) = 1.5.
        let d = dataset(
            &[vec![1.0], vec![2.0], vec![3.0], vec![2.0], vec![3.0], vec![4.0]],
            vec![0, 0, 0, 1, 1, 1],
        );
        let f = anova_f_scores(&d).unwrap();
        assert!((f[0] - 1.5).abs() < 1e-12, "F = {}", f[0]);
    }

    #[test]
    fn anova_constant_feature_scores_zero() {
        let d = dataset(
            &[vec![5.0, 1.0], vec![5.0, 2.0], vec![5.0, 4.0], vec![5.0, 5.0]],
            vec![0, 0, 1, 1],
        );
        let f = anova_f_scores(&d).unwrap();
        assert_eq!(f[0], 0.0);
        assert!(f[1] > 0.0);
        assert_eq!(select_k_best(&d, 1).unwrap(), vec![1]);
    }

    #[test]
    fn anova_perfect_separator_ranks_first() {
        let d = dataset(
            &[vec![0.9, 0.0], vec![1.1, 0.0], vec![0.8, 1.0], vec![1.2, 1.0]],
            vec![0, 0, 1, 1],
        );
        let f = anova_f_scores(&d).unwrap();
        assert_eq!(f[1], f64::INFINITY);
        assert_eq!(select_k_best(&d, 1).unwrap(), vec![1]);
    }

    #[test]
    fn select_k_best_full_width_returns_identity() {
        let d = dataset(
            &[vec![1.0, 0.0, 3.0], vec![2.0, 1.0, 1.0], vec![0.0, 1.0, 2.0]],
            vec![0, 1, 1],
        );
        assert_eq!(select_k_best(&d, 3).unwrap(), vec![0, 1, 2]);
        assert!(select_k_best(&d, 0).is_err());
        assert!(select_k_best(&d, 4).is_err());
    }

    #[test]
    fn anova_single_class_is_rejected() {
        let d = dataset(&[vec![1.0], vec![2.0]], vec![1, 1]);
        assert!(anova_f_scores(&d).is_err());
    }

    #[test]
    fn selectk_budget_from_mean_counts() {
        // Rows with 2 and 4 scores above epsilon -> mean 3.
        let e = explanations(&[
            vec![0.5, 0.5, 0.0, 0.0, 0.0],
            vec![0.5, 0.5, 0.5, 0.5, 0.0],
        ]);
        assert_eq!(selectk_baseline_k(&e, 0.01).unwrap(), 3);
    }

    #[test]
    fn selectk_budget_clamps_to_one() {
        let e = explanations(&[vec![0.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(selectk_baseline_k(&e, 0.01).unwrap(), 1);
        // Exactly epsilon is not "above epsilon".
        let boundary = explanations(&[vec![0.01, 0.01]]);
        assert_eq!(selectk_baseline_k(&boundary, 0.01).unwrap(), 1);
    }

    #[test]
    fn selectk_budget_exact_counts() {
        let rows = vec![vec![0.5, 0.5, 0.5, 0.02, 0.0]; 4];
        let e = explanations(&rows);
        assert_eq!(selectk_baseline_k(&e, 0.01).unwrap(), 4);
    }

    /// Small linearly separable dataset for end-to-end workflow tests.
    fn toy_splits(n_train: usize, n_test: usize, seed: u64) -> (Dataset, Dataset) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut make = |n: usize, tag: &str| {
            let mut rows = Vec::with_capacity(n);
            let mut y = Vec::with_capacity(n);
            for i in 0..n {
                let label = (i % 2) as u8;
                let sign = if label == 1 { 1.0 } else { -1.0 };
                rows.push(vec![
                    sign + rng.gen_range(-0.3..0.3),
                    -sign + rng.gen_range(-0.3..0.3),
                    rng.gen_range(-1.0..1.0),
                ]);
                y.push(label);
            }
            let mut d = dataset(&rows, y);
            d.name = tag.to_string();
            d
        };
        (make(n_train, "train"), make(n_test, "test"))
    }

    fn quick_train_cfg() -> TrainConfig {
        TrainConfig {
            max_epochs: 60,
            regularization: Regularization::None,
            seed: 7,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn idw_iterate_builds_the_expected_chain() {
        let (train_set, test_set) = toy_splits(60, 20, 3);
        let cfg = IDWConfig {
            iterations: 2,
            background_k: 2,
            train: quick_train_cfg(),
            ..IDWConfig::default()
        };
        let run = idw_iterate(train_set, test_set, &cfg).unwrap();
        let names: Vec<&str> = run.stages.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["f0", "h1", "h2"]);
        assert_eq!(run.stages[0].kind, StageKind::Baseline);
        assert!(run.stages.iter().take(2).all(|s| s.e_train.is_some()));
        assert!(run.last().e_train.is_none());
        for s in &run.stages {
            assert_eq!(s.e_test.n(), 20);
            assert_eq!(s.e_test.m(), 3);
        }
        // Single-iteration runs produce exactly one streamlined model.
        let (train_set, test_set) = toy_splits(60, 20, 3);
        let one = idw_iterate(
            train_set,
            test_set,
            &IDWConfig {
                iterations: 1,
                ..cfg.clone()
            },
        )
        .unwrap();
        assert_eq!(one.stages.len(), 2);
    }

    #[test]
    fn trv_train_builds_one_streamlined_stage() {
        let (train_set, test_set) = toy_splits(60, 20, 4);
        let cfg = TRVConfig {
            k: 2,
            train: quick_train_cfg(),
            ..TRVConfig::default()
        };
        let (run, r) = trv_train(train_set, test_set, &cfg).unwrap();
        assert_eq!(run.stages.len(), 2);
        assert_eq!(run.last().name, "h1_k2");
        assert_eq!(run.last().kind, StageKind::Trv);
        assert!(run.last().e_train.is_none());
        assert_eq!(r.r.len(), 3);
        // The masked training data keeps at most K original entries per row.
        let masked = &run.last().train;
        let original = &run.stages[0].train;
        for i in 0..masked.n() {
            let changed = (0..3)
                .filter(|&j| masked.x.get(i, j) != original.x.get(i, j))
                .count();
            assert!(changed <= 1, "row {i} changed {changed} entries");
        }
    }

    #[test]
    fn trv_config_validates_k_and_epsilon() {
        let cfg = TRVConfig {
            k: 0,
            ..TRVConfig::default()
        };
        assert!(cfg.validate(5).is_err());
        let cfg = TRVConfig {
            k: 6,
            ..TRVConfig::default()
        };
        assert!(cfg.validate(5).is_err());
        let cfg = TRVConfig {
            epsilon: 0.0,
            ..TRVConfig::default()
        };
        assert!(cfg.validate(5).is_err());
    }

    #[test]
    fn make_backgrounds_stratifies_on_protected_groups() {
        use crate::data::Group;
        let mut d = dataset(
            &[
                vec![0.0, 1.0],
                vec![0.1, 1.0],
                vec![5.0, -1.0],
                vec![5.1, -1.0],
            ],
            vec![0, 1, 0, 1],
        );
        d.protected = Some(vec![Group::A, Group::A, Group::B, Group::B]);
        let bg = make_backgrounds(&d, 4, 1).unwrap();
        assert_eq!(bg.k(), 4);
        assert!(make_backgrounds(&d, 3, 1).is_err(), "odd k must be rejected");
        let plain = dataset(&[vec![0.0, 1.0], vec![1.0, 0.0]], vec![0, 1]);
        assert_eq!(make_backgrounds(&plain, 2, 1).unwrap().k(), 2);
    }

    proptest! {
        #[test]
        fn prop_idw_preserves_sign_or_zeroes(
            rows in prop::collection::vec(
                prop::collection::vec(-10.0f64..10.0, 4),
                2..8,
            ),
            scores in prop::collection::vec(
                prop::collection::vec(-1.0f64..1.0, 4),
                8,
            ),
        ) {
            let n = rows.len();
            let y = (0..n).map(|i| (i % 2) as u8).collect();
            let d = dataset(&rows, y);
            let e = explanations(&scores[..n]);
            let out = idw_combine(&d, &e).unwrap();
            for i in 0..n {
                for j in 0..4 {
                    let before = d.x.get(i, j);
                    let after = out.x.get(i, j);
                    prop_assert!(
                        after == 0.0 || after.signum() == before.signum(),
                        "sign flipped at ({i},{j}): {before} -> {after}"
                    );
                }
            }
        }

        #[test]
        fn prop_trv_mask_changes_at_most_m_minus_k(
            rows in prop::collection::vec(
                prop::collection::vec(-10.0f64..10.0, 5),
                1..6,
            ),
            scores in prop::collection::vec(
                prop::collection::vec(-1.0f64..1.0, 5),
                6,
            ),
            k in 0usize..=5,
        ) {
            let n = rows.len();
            let y = (0..n).map(|i| (i % 2) as u8).collect();
            let d = dataset(&rows, y);
            let e = explanations(&scores[..n]);
            let r = simple_replacement(5, 1e6); // sentinel no original value hits
            let out = trv_mask(&d, &e, k, &r).unwrap();
            for i in 0..n {
                let changed = (0..5)
                    .filter(|&j| out.x.get(i, j) != d.x.get(i, j))
                    .count();
                prop_assert!(changed <= 5 - k);
                for j in 0..5 {
                    let v = out.x.get(i, j);
                    prop_assert!(
                        v == d.x.get(i, j) || v == r.r[j],
                        "entry ({i},{j}) is neither kept nor replaced"
                    );
                }
            }
        }
    }
}

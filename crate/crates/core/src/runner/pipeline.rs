//! The end-to-end experiment pipeline behind `shapline run`, plus the
//! single-purpose `explain` and `preprocess` commands.
//!
//! A run executes, in order: data preparation (load, split, preprocess,
//! optional rebalancing), the baseline model `f0`, the regularized and
//! feature-selection comparison baselines, the iterative-weighting chain
//! `h1..hN`, and one targeted-replacement stage per configured budget `K`.
//! Every stage persists its model, splits, backgrounds, and explanations
//! under `stages/<name>/`, and the consolidated `metrics.csv` plus the plot
//! tables are rewritten after each stage so that an aborted run still leaves
//! every completed stage's results on disk. The hash manifest is written
//! last (best-effort when aborting) and is what `shapline report` verifies.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::data::{
    export_dataset_csv, export_matrix_csv, import_dataset_csv, import_matrix_csv, load_dataset,
    preprocess, smote_rebalance, split_raw, Dataset,
};
use crate::explain::{explain_matrix, BackgroundProvenance, BackgroundSet, ShapConfig};
use crate::metrics::{accuracy, fairness, glocal_sim, global_importance, xcp};
use crate::model::{MLPModel, Regularization};
use crate::runner::artifacts::{export_explanations, ArtifactSink};
use crate::runner::config::{DatasetSection, RunConfig};
use crate::runner::manifest::{RunManifest, StageTiming, MANIFEST_VERSION};
use crate::streamline::{
    fit_stage, idw_step, select_k_best, selectk_baseline_k, trv_train_from, IDWConfig, Stage,
    StageKind, TRVConfig,
};
use crate::util::{derive_seed, fmt_f64, summarize};
use crate::{Error, Result, VERSION};

/// Environment variable that prefixes relative output directories.
pub const OUTPUT_ROOT_ENV: &str = "SHAPLINE_OUTPUT_ROOT";

/// One row of the consolidated `metrics.csv`. `value` is `None` when the
/// metric is undefined for the stage (for example a fairness difference
/// whose denominator group is empty); such rows carry the literal `NA`.
struct MetricRow {
    method: &'static str,
    stage: String,
    metric: String,
    value: Option<f64>,
}

/// Feature-selection summary persisted by the `f0_selectk` stage.
#[derive(Debug, Serialize)]
struct SelectedFeatures {
    k: usize,
    indices: Vec<usize>,
    names: Vec<String>,
}

fn method_name(kind: StageKind) -> &'static str {
    match kind {
        StageKind::Baseline => "baseline",
        StageKind::Regularized => "regularized",
        StageKind::SelectK => "selectk",
        StageKind::Idw => "idw",
        StageKind::Trv => "trv",
    }
}

/// `foo.csv` -> `foo.meta.json` (the sidecar written next to matrix CSVs).
fn sidecar_rel(rel: &str) -> String {
    match rel.strip_suffix(".csv") {
        Some(stem) => format!("{stem}.meta.json"),
        None => format!("{rel}.meta.json"),
    }
}

/// Mutable run state: the artifact sink plus every buffered output table.
struct Runner {
    cfg: RunConfig,
    dataset_name: String,
    sink: ArtifactSink,
    metrics: Vec<MetricRow>,
    /// (stage, sample index, value) rows of the per-sample XCP table.
    xcp_rows: Vec<(String, usize, f64)>,
    /// (stage, sample index, value) rows of the per-sample Sim table.
    sim_rows: Vec<(String, usize, f64)>,
    /// (stage, feature, six-number summary of |attribution|) rows.
    feature_rows: Vec<(String, String, crate::util::Summary)>,
    timings: Vec<StageTiming>,
}

impl Runner {
    fn new(cfg: RunConfig, out_dir: &Path) -> Result<Runner> {
        let dataset_name = cfg.dataset.resolved_name();
        Ok(Runner {
            cfg,
            dataset_name,
            sink: ArtifactSink::new(out_dir)?,
            metrics: Vec::new(),
            xcp_rows: Vec::new(),
            sim_rows: Vec::new(),
            feature_rows: Vec::new(),
            timings: Vec::new(),
        })
    }

    /// Runs `f`, records its wall time under `label`, and tags any error
    /// with the stage name so the CLI can report where the run died.
    fn timed<T>(
        &mut self,
        label: &str,
        f: impl FnOnce(&mut Runner) -> Result<T>,
    ) -> Result<T> {
        let start = Instant::now();
        let out = f(self);
        self.timings.push(StageTiming {
            stage: label.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out.map_err(|e| e.in_stage(label))
    }

    fn execute(&mut self) -> Result<()> {
        let (train0, test0) = self.timed("data", Runner::stage_data)?;
        let shap_cfg = self.cfg.shap_config();
        let bg_k = self.cfg.background.k;
        // Training-split explanations are only needed by workflows that
        // re-engineer the training data (or size a feature budget from it).
        let need_e_train =
            self.cfg.idw.enabled || self.cfg.trv.enabled || self.cfg.baselines.selectk;

        let f0 = self.timed("f0", |r| {
            let stage = fit_stage(
                "f0",
                StageKind::Baseline,
                train0.clone(),
                test0.clone(),
                &r.cfg.train_config(Regularization::None),
                &shap_cfg,
                bg_k,
                need_e_train,
            )?;
            r.persist_stage(&stage)?;
            r.evaluate_stage(&stage)?;
            Ok(stage)
        })?;

        let regularized: [(bool, Regularization, &str); 3] = [
            (self.cfg.baselines.l1, Regularization::L1, "f0_l1"),
            (self.cfg.baselines.l2, Regularization::L2, "f0_l2"),
            (self.cfg.baselines.l12, Regularization::L12, "f0_l12"),
        ];
        for (enabled, reg, name) in regularized {
            if !enabled {
                continue;
            }
            self.timed(name, |r| {
                let mut train_cfg = r.cfg.train_config(reg);
                train_cfg.seed = derive_seed(train_cfg.seed, &format!("train/{name}"));
                let stage = fit_stage(
                    name,
                    StageKind::Regularized,
                    train0.clone(),
                    test0.clone(),
                    &train_cfg,
                    &shap_cfg,
                    bg_k,
                    false,
                )?;
                r.persist_stage(&stage)?;
                r.evaluate_stage(&stage)
            })?;
        }

        if self.cfg.baselines.selectk {
            self.timed("f0_selectk", |r| {
                let e0 = f0
                    .e_train
                    .as_ref()
                    .expect("training explanations were requested above");
                let k = selectk_baseline_k(e0, r.cfg.epsilon)?;
                let indices = select_k_best(&train0, k)?;
                let names: Vec<String> = indices
                    .iter()
                    .map(|&j| train0.feature_names[j].clone())
                    .collect();
                let mut train_cfg = r.cfg.train_config(Regularization::None);
                train_cfg.seed = derive_seed(train_cfg.seed, "train/selectk");
                let stage = fit_stage(
                    "f0_selectk",
                    StageKind::SelectK,
                    train0.select_features(&indices),
                    test0.select_features(&indices),
                    &train_cfg,
                    &shap_cfg,
                    bg_k,
                    false,
                )?;
                r.write_json(
                    "stages/f0_selectk/selected_features.json",
                    &SelectedFeatures { k, indices, names },
                )?;
                r.persist_stage(&stage)?;
                r.evaluate_stage(&stage)
            })?;
        }

        if self.cfg.idw.enabled {
            let idw_cfg = IDWConfig {
                iterations: self.cfg.idw.iterations,
                background_k: bg_k,
                shap: shap_cfg,
                train: self.cfg.train_config(Regularization::None),
            };
            let mut prev = f0.clone();
            for i in 1..=idw_cfg.iterations {
                let label = format!("h{i}");
                let next = self.timed(&label, |r| {
                    let stage = idw_step(&prev, i, &idw_cfg, i < idw_cfg.iterations)?;
                    r.persist_stage(&stage)?;
                    r.evaluate_stage(&stage)?;
                    Ok(stage)
                })?;
                prev = next;
            }
        }

        if self.cfg.trv.enabled {
            let budgets = self.cfg.trv.k.clone();
            let m = train0.m();
            for k in budgets {
                if k > m {
                    eprintln!(
                        "skipping replacement budget K={k}: dataset has only {m} features"
                    );
                    continue;
                }
                let label = format!("trv_k{k}");
                self.timed(&label, |r| {
                    let trv_cfg = TRVConfig {
                        k,
                        epsilon: r.cfg.epsilon,
                        shap: shap_cfg,
                        train: r.cfg.train_config(Regularization::None),
                    };
                    let (run, replacement) = trv_train_from(f0.clone(), &trv_cfg)?;
                    let stage = run.last();
                    r.write_json(
                        &format!("stages/{}/replacement.json", stage.name),
                        &replacement,
                    )?;
                    r.persist_stage(stage)?;
                    r.evaluate_stage(stage)
                })?;
            }
        }

        Ok(())
    }

    /// Load, split, preprocess (test normalized with training statistics),
    /// and optionally rebalance the training split.
    fn stage_data(&mut self) -> Result<(Dataset, Dataset)> {
        let schema = self.cfg.dataset.schema()?;
        let raw = load_dataset(&self.cfg.dataset.path, &schema)?;
        let (raw_train, raw_test) = split_raw(&raw, &self.cfg.split_config())?;
        let mut train0 = preprocess(&raw_train, None)?;
        let stats = train0
            .norm_stats
            .clone()
            .ok_or_else(|| Error::Data("training split lost its fitted statistics".into()))?;
        let mut test0 = preprocess(&raw_test, Some(&stats))?;
        if self.cfg.smote.enabled {
            train0 = smote_rebalance(&train0, self.cfg.smote.k_neighbors, self.cfg.smote_seed())?;
        }
        train0.name = self.dataset_name.clone();
        test0.name = self.dataset_name.clone();
        Ok((train0, test0))
    }

    /// Writes every artifact a stage owns under `stages/<name>/`.
    fn persist_stage(&mut self, stage: &Stage) -> Result<()> {
        let base = format!("stages/{}", stage.name);

        let model_rel = format!("{base}/model.bin");
        stage.model.save(&self.sink.prepare(&model_rel)?)?;
        self.sink.record(&model_rel)?;

        for (rel, split) in [
            (format!("{base}/train.csv"), &stage.train),
            (format!("{base}/test.csv"), &stage.test),
        ] {
            export_dataset_csv(split, &self.sink.prepare(&rel)?)?;
            self.sink.record(&rel)?;
            self.sink.record(&sidecar_rel(&rel))?;
        }

        let bg_rel = format!("{base}/backgrounds.csv");
        export_matrix_csv(
            &stage.backgrounds.b,
            &stage.train.feature_names,
            &self.sink.prepare(&bg_rel)?,
        )?;
        self.sink.record(&bg_rel)?;

        let e_test_rel = format!("{base}/e_test.csv");
        export_explanations(
            &stage.e_test,
            &stage.test.feature_names,
            &self.sink.prepare(&e_test_rel)?,
        )?;
        self.sink.record(&e_test_rel)?;
        self.sink.record(&sidecar_rel(&e_test_rel))?;

        if let Some(e_train) = &stage.e_train {
            let e_train_rel = format!("{base}/e_train.csv");
            export_explanations(
                e_train,
                &stage.train.feature_names,
                &self.sink.prepare(&e_train_rel)?,
            )?;
            self.sink.record(&e_train_rel)?;
            self.sink.record(&sidecar_rel(&e_train_rel))?;
        }
        Ok(())
    }

    /// Scores the stage on its held-out split, buffers every metric and
    /// plot row, and flushes the consolidated tables to disk.
    fn evaluate_stage(&mut self, stage: &Stage) -> Result<()> {
        let method = method_name(stage.kind);
        let preds = stage.model.predict_label(&stage.test.x)?;
        let acc = accuracy(&preds, &stage.test.y)?;
        self.push_metric(method, &stage.name, "accuracy", Some(acc));

        if let Some(groups) = &stage.test.protected {
            let report = fairness(&preds, &stage.test.y, groups)?;
            for (name, value) in report.named_metrics() {
                self.push_metric(method, &stage.name, name, value);
                self.push_metric(
                    method,
                    &stage.name,
                    &format!("abs_{name}"),
                    value.map(f64::abs),
                );
            }
        }

        let (xcp_mean, xcp_per_sample) = xcp(&stage.e_test, self.cfg.epsilon)?;
        self.push_metric(method, &stage.name, "xcp", Some(xcp_mean));

        let g = global_importance(&stage.e_test)?;
        let sim = glocal_sim(&stage.e_test, &g, self.cfg.epsilon)?;
        let sim_summary = summarize(&sim);
        for (name, value) in [
            ("sim_mean", sim_summary.mean),
            ("sim_min", sim_summary.min),
            ("sim_q1", sim_summary.q1),
            ("sim_median", sim_summary.median),
            ("sim_q3", sim_summary.q3),
            ("sim_max", sim_summary.max),
        ] {
            self.push_metric(method, &stage.name, name, Some(value));
        }

        for (i, v) in xcp_per_sample.iter().enumerate() {
            self.xcp_rows.push((stage.name.clone(), i, *v));
        }
        for (i, v) in sim.iter().enumerate() {
            self.sim_rows.push((stage.name.clone(), i, *v));
        }
        for j in 0..stage.e_test.m() {
            let magnitudes: Vec<f64> = (0..stage.e_test.n())
                .map(|i| stage.e_test.e.get(i, j).abs())
                .collect();
            self.feature_rows.push((
                stage.name.clone(),
                stage.test.feature_names[j].clone(),
                summarize(&magnitudes),
            ));
        }

        self.flush_tables()
    }

    fn push_metric(&mut self, method: &'static str, stage: &str, metric: &str, value: Option<f64>) {
        self.metrics.push(MetricRow {
            method,
            stage: stage.to_string(),
            metric: metric.to_string(),
            value,
        });
    }

    /// Rewrites `metrics.csv` and the three plot tables from the buffers.
    /// Called after every stage so aborted runs keep completed results.
    fn flush_tables(&mut self) -> Result<()> {
        let rel = "metrics.csv";
        let mut w = csv_writer(&self.sink.prepare(rel)?)?;
        write_row(&mut w, &["dataset", "method", "stage", "metric", "value"])?;
        for row in &self.metrics {
            let value = row.value.map(fmt_f64).unwrap_or_else(|| "NA".to_string());
            write_row(
                &mut w,
                &[&self.dataset_name, row.method, &row.stage, &row.metric, &value],
            )?;
        }
        finish_csv(w)?;
        self.sink.record(rel)?;

        for (rel, column, rows) in [
            ("plots/xcp_distribution.csv", "xcp", &self.xcp_rows),
            ("plots/sim_distribution.csv", "sim", &self.sim_rows),
        ] {
            let mut w = csv_writer(&self.sink.prepare(rel)?)?;
            write_row(&mut w, &["dataset", "stage", "sample_index", column])?;
            for (stage, index, value) in rows {
                write_row(
                    &mut w,
                    &[&self.dataset_name, stage, &index.to_string(), &fmt_f64(*value)],
                )?;
            }
            finish_csv(w)?;
            self.sink.record(rel)?;
        }

        let rel = "plots/feature_importance.csv";
        let mut w = csv_writer(&self.sink.prepare(rel)?)?;
        write_row(
            &mut w,
            &["dataset", "stage", "feature", "mean_abs", "min", "q1", "median", "q3", "max"],
        )?;
        for (stage, feature, s) in &self.feature_rows {
            write_row(
                &mut w,
                &[
                    &self.dataset_name,
                    stage,
                    feature,
                    &fmt_f64(s.mean),
                    &fmt_f64(s.min),
                    &fmt_f64(s.q1),
                    &fmt_f64(s.median),
                    &fmt_f64(s.q3),
                    &fmt_f64(s.max),
                ],
            )?;
        }
        finish_csv(w)?;
        self.sink.record(rel)
    }

    /// Serializes `value` as pretty JSON at `rel` and records its hash.
    fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let path = self.sink.prepare(rel)?;
        let text = serde_json::to_string_pretty(value)
            .map_err(|e| Error::Artifact(format!("{rel}: {e}")))?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        self.sink.record(rel)
    }

    fn into_manifest(self) -> RunManifest {
        RunManifest {
            manifest_version: MANIFEST_VERSION,
            library_version: VERSION.to_string(),
            config: self.cfg,
            artifacts: self.sink.into_records(),
            timings: self.timings,
        }
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn write_row<W: std::io::Write>(w: &mut csv::Writer<W>, fields: &[&str]) -> Result<()> {
    w.write_record(fields)
        .map_err(|e| Error::Artifact(format!("writing csv row: {e}")))
}

fn finish_csv(w: csv::Writer<std::fs::File>) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::Artifact(format!("flushing csv: {e}")))?
        .sync_all()
        .ok();
    Ok(())
}

/// Executes a full experiment run into `out_dir` and returns the manifest.
///
/// The manifest is written last on success; on failure a best-effort
/// manifest covering the completed artifacts is still written before the
/// error propagates, so partial runs remain inspectable.
pub fn cmd_run(cfg: &RunConfig, out_dir: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    let mut runner = Runner::new(cfg.clone(), out_dir)?;
    let outcome = runner.execute();
    let manifest = runner.into_manifest();
    match outcome {
        Ok(()) => {
            manifest.save(out_dir)?;
            Ok(manifest)
        }
        Err(e) => {
            let _ = manifest.save(out_dir);
            Err(e)
        }
    }
}

/// Resolves the run output directory from, in priority order: the CLI
/// `--output` flag, the config's `output` key, and the dataset name with a
/// `-run` suffix. `root` (from the environment) prefixes relative results.
pub fn resolve_output_with(
    cfg: &RunConfig,
    cli_override: Option<&Path>,
    root: Option<PathBuf>,
) -> PathBuf {
    let base = cli_override
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from(format!("{}-run", cfg.dataset.resolved_name())));
    match root {
        Some(root) if base.is_relative() => root.join(base),
        _ => base,
    }
}

/// [`resolve_output_with`] using the `SHAPLINE_OUTPUT_ROOT` variable.
pub fn resolve_output_dir(cfg: &RunConfig, cli_override: Option<&Path>) -> PathBuf {
    resolve_output_with(
        cfg,
        cli_override,
        std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from),
    )
}

/// Explains every row of a preprocessed dataset CSV against a model and a
/// background-row CSV, writing the attribution matrix (plus its base-value
/// sidecar) to `out`.
pub fn cmd_explain(
    model_path: &Path,
    dataset_path: &Path,
    background_path: &Path,
    shap: &ShapConfig,
    out: &Path,
) -> Result<()> {
    let model = MLPModel::load(model_path)?;
    let ds = import_dataset_csv(dataset_path)?;
    if ds.m() != model.input_dim {
        return Err(Error::Dimension(format!(
            "dataset `{}` has {} feature columns but model `{}` expects {}",
            dataset_path.display(),
            ds.m(),
            model_path.display(),
            model.input_dim
        )));
    }
    let (b, _header) = import_matrix_csv(background_path)?;
    if b.cols() != model.input_dim {
        return Err(Error::Dimension(format!(
            "background file `{}` has {} columns but model `{}` expects {}",
            background_path.display(),
            b.cols(),
            model_path.display(),
            model.input_dim
        )));
    }
    let backgrounds = BackgroundSet::from_matrix(b, BackgroundProvenance::File)?;
    let e = explain_matrix(&model, &ds, &backgrounds, shap)?;
    export_explanations(&e, &ds.feature_names, out)
}

/// Loads a raw CSV under `section`'s schema, fits the preprocessing on it,
/// and writes the resulting model-ready dataset (plus sidecar) to `out`.
pub fn cmd_preprocess(section: &DatasetSection, out: &Path) -> Result<Dataset> {
    let schema = section.schema()?;
    let raw = load_dataset(&section.path, &schema)?;
    let mut ds = preprocess(&raw, None)?;
    ds.name = section.resolved_name();
    export_dataset_csv(&ds, out)?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_demo_csv(path: &Path, n_per_class: usize) {
        let mut f = std::fs::File::create(path).unwrap();
        writeln!(f, "alpha,beta,gamma,outcome").unwrap();
        // Separable by alpha's sign with mild structured noise elsewhere.
        for i in 0..n_per_class {
            let t = i as f64 / n_per_class as f64;
            writeln!(f, "{},{},{},yes", 1.0 + t, t - 0.5, 0.3 * t).unwrap();
            writeln!(f, "{},{},{},no", -1.0 - t, 0.5 - t, 0.3 * t + 0.01).unwrap();
        }
    }

    fn demo_config(dir: &Path) -> RunConfig {
        let csv = dir.join("demo.csv");
        write_demo_csv(&csv, 30);
        let toml_text = format!(
            r#"
            seed = 7
            [dataset]
            path = "{}"
            label = "outcome"
            numerical = ["alpha", "beta", "gamma"]
            [train]
            max_epochs = 40
            [smote]
            enabled = false
            [idw]
            iterations = 1
            [trv]
            k = [2]
            [baselines]
            l1 = false
            l2 = false
            l12 = false
            selectk = true
            "#,
            csv.display()
        );
        toml::from_str(&toml_text).unwrap()
    }

    #[test]
    fn run_produces_verifiable_artifacts_and_is_deterministic() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = demo_config(tmp.path());

        let out_a = tmp.path().join("run-a");
        let out_b = tmp.path().join("run-b");
        let manifest = cmd_run(&cfg, &out_a).unwrap();
        cmd_run(&cfg, &out_b).unwrap();

        // Hash manifest covers the artifacts and verifies in place.
        assert!(manifest.artifacts.iter().any(|a| a.path == "metrics.csv"));
        manifest.verify(&out_a).unwrap();
        RunManifest::load(&out_b).unwrap().verify(&out_b).unwrap();

        // Stage layout: baseline, selectk, one weighting round, one budget.
        for stage in ["f0", "f0_selectk", "h1", "h1_k2"] {
            assert!(out_a.join("stages").join(stage).join("model.bin").exists());
            assert!(out_a.join("stages").join(stage).join("e_test.csv").exists());
        }
        assert!(out_a.join("stages/f0/e_train.csv").exists());
        assert!(out_a.join("stages/f0_selectk/selected_features.json").exists());
        assert!(out_a.join("stages/h1_k2/replacement.json").exists());
        // The single weighting round has no successor, so no e_train.
        assert!(!out_a.join("stages/h1/e_train.csv").exists());

        // Same config + seed => byte-identical consolidated tables.
        let bytes_a = std::fs::read(out_a.join("metrics.csv")).unwrap();
        let bytes_b = std::fs::read(out_b.join("metrics.csv")).unwrap();
        assert!(!bytes_a.is_empty());
        assert_eq!(bytes_a, bytes_b);
        for plot in [
            "plots/xcp_distribution.csv",
            "plots/sim_distribution.csv",
            "plots/feature_importance.csv",
        ] {
            assert_eq!(
                std::fs::read(out_a.join(plot)).unwrap(),
                std::fs::read(out_b.join(plot)).unwrap()
            );
        }

        // Every stage reported the core metrics.
        let text = String::from_utf8(bytes_a).unwrap();
        for stage in ["f0", "f0_selectk", "h1", "h1_k2"] {
            assert!(text.contains(&format!(",{stage},accuracy,")));
            assert!(text.contains(&format!(",{stage},xcp,")));
            assert!(text.contains(&format!(",{stage},sim_mean,")));
        }
        // No protected attribute configured => no fairness rows.
        assert!(!text.contains("ppr_d"));
    }

    #[test]
    fn explain_command_round_trips_artifacts() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = demo_config(tmp.path());
        let out = tmp.path().join("run");
        cmd_run(&cfg, &out).unwrap();

        let e_path = tmp.path().join("fresh.csv");
        cmd_explain(
            &out.join("stages/f0/model.bin"),
            &out.join("stages/f0/test.csv"),
            &out.join("stages/f0/backgrounds.csv"),
            &cfg.shap_config(),
            &e_path,
        )
        .unwrap();

        // The command reproduces the run's own test-split explanations
        // because it uses the same seed, model, and background rows.
        let (fresh, _) = crate::runner::artifacts::import_explanations(&e_path).unwrap();
        let (persisted, _) =
            crate::runner::artifacts::import_explanations(&out.join("stages/f0/e_test.csv"))
                .unwrap();
        assert_eq!(fresh, persisted);
    }

    #[test]
    fn explain_command_rejects_dimension_mismatch() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = demo_config(tmp.path());
        let out = tmp.path().join("run");
        cmd_run(&cfg, &out).unwrap();

        // A dataset with fewer columns than the model's input layer.
        let narrow = import_dataset_csv(&out.join("stages/f0/test.csv"))
            .unwrap()
            .select_features(&[0, 1]);
        let narrow_path = tmp.path().join("narrow.csv");
        export_dataset_csv(&narrow, &narrow_path).unwrap();
        let err = cmd_explain(
            &out.join("stages/f0/model.bin"),
            &narrow_path,
            &out.join("stages/f0/backgrounds.csv"),
            &cfg.shap_config(),
            &tmp.path().join("e.csv"),
        )
        .unwrap_err();
        assert!(err.is_validation());
        assert!(err.to_string().contains("expects"));

        // Same for a background file of the wrong width.
        let narrow_bg = tmp.path().join("bg.csv");
        export_matrix_csv(
            &narrow.x,
            &narrow.feature_names,
            &narrow_bg,
        )
        .unwrap();
        let err = cmd_explain(
            &out.join("stages/f0/model.bin"),
            &out.join("stages/f0/test.csv"),
            &narrow_bg,
            &cfg.shap_config(),
            &tmp.path().join("e.csv"),
        )
        .unwrap_err();
        assert!(err.is_validation());
        assert!(err.to_string().contains("background"));
    }

    #[test]
    fn preprocess_command_writes_model_ready_dataset() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = demo_config(tmp.path());
        let out = tmp.path().join("pre.csv");
        let ds = cmd_preprocess(&cfg.dataset, &out).unwrap();
        assert_eq!(ds.m(), 3);
        let round = import_dataset_csv(&out).unwrap();
        assert_eq!(round.x, ds.x);
        assert_eq!(round.y, ds.y);
    }

    #[test]
    fn failed_runs_still_leave_a_manifest_for_completed_stages() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = demo_config(tmp.path());
        // An absurd background size cannot be satisfied by k-means on the
        // training split, so the baseline stage fails after data prep.
        cfg.background.k = 10_000;
        let out = tmp.path().join("run");
        let err = cmd_run(&cfg, &out).unwrap_err();
        assert!(!err.is_validation());
        assert!(err.to_string().contains("f0"));
        let manifest = RunManifest::load(&out).unwrap();
        manifest.verify(&out).unwrap();
    }

    #[test]
    fn output_directory_resolution_prefers_flag_then_config_then_name() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = demo_config(tmp.path());

        let by_name = resolve_output_with(&cfg, None, None);
        assert_eq!(by_name, PathBuf::from("demo-run"));

        cfg.output = Some(PathBuf::from("configured"));
        assert_eq!(
            resolve_output_with(&cfg, None, None),
            PathBuf::from("configured")
        );
        assert_eq!(
            resolve_output_with(&cfg, Some(Path::new("flag")), None),
            PathBuf::from("flag")
        );

        // A root prefixes relative directories but not absolute ones.
        assert_eq!(
            resolve_output_with(&cfg, None, Some(PathBuf::from("/tmp/root"))),
            PathBuf::from("/tmp/root/configured")
        );
        assert_eq!(
            resolve_output_with(&cfg, Some(Path::new("/abs/flag")), Some(PathBuf::from("/r"))),
            PathBuf::from("/abs/flag")
        );
    }
}

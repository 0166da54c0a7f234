//! Read-only rendering of a finished run: verifies the hash manifest, then
//! summarizes `metrics.csv` as one fixed-width table row per stage.

use std::collections::HashMap;
use std::path::Path;

use crate::runner::manifest::RunManifest;
use crate::{Error, Result};

/// Metrics of one stage, keyed by metric name; `None` marks an `NA` cell.
#[derive(Debug)]
struct ReportRow {
    stage: String,
    method: String,
    values: HashMap<String, Option<f64>>,
}

/// Columns of the rendered table: header label and source metric name.
/// Fairness magnitudes are reported; run metrics keep the signed values.
const COLUMNS: [(&str, &str); 8] = [
    ("accuracy", "accuracy"),
    ("|PPR_d|", "abs_ppr_d"),
    ("|NPR_d|", "abs_npr_d"),
    ("|FPR_d|", "abs_fpr_d"),
    ("|EO_d|", "abs_eo_d"),
    ("XCP", "xcp"),
    ("Sim mean", "sim_mean"),
    ("Sim med", "sim_median"),
];

/// Parses the consolidated metrics table into per-stage rows, preserving
/// the order in which stages first appear.
fn parse_metrics(path: &Path) -> Result<(String, Vec<ReportRow>)> {
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(csv_err)?;
    let mut dataset = String::new();
    let mut rows: Vec<ReportRow> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        if record.len() != 5 {
            return Err(Error::Artifact(format!(
                "`{}`: expected 5 fields per row, found {}",
                path.display(),
                record.len()
            )));
        }
        let (ds, method, stage, metric, raw) =
            (&record[0], &record[1], &record[2], &record[3], &record[4]);
        if dataset.is_empty() {
            dataset = ds.to_string();
        }
        let value = if raw == "NA" {
            None
        } else {
            Some(raw.parse::<f64>().map_err(|e| {
                Error::Artifact(format!(
                    "`{}`: bad numeric value `{raw}` for {stage}/{metric}: {e}",
                    path.display()
                ))
            })?)
        };
        let row = match rows.iter_mut().find(|r| r.stage == stage) {
            Some(row) => row,
            None => {
                rows.push(ReportRow {
                    stage: stage.to_string(),
                    method: method.to_string(),
                    values: HashMap::new(),
                });
                rows.last_mut().expect("just pushed")
            }
        };
        row.values.insert(metric.to_string(), value);
    }
    if rows.is_empty() {
        return Err(Error::Artifact(format!(
            "`{}` contains no metric rows",
            path.display()
        )));
    }
    Ok((dataset, rows))
}

fn render(
    dataset: &str,
    library_version: &str,
    artifact_count: usize,
    total_seconds: f64,
    rows: &[ReportRow],
) -> String {
    let stage_w = rows
        .iter()
        .map(|r| r.stage.len())
        .chain(["stage".len()])
        .max()
        .expect("at least the header");
    let method_w = rows
        .iter()
        .map(|r| r.method.len())
        .chain(["method".len()])
        .max()
        .expect("at least the header");

    let mut text = format!(
        "run of dataset `{dataset}` (library {library_version}); \
         {artifact_count} artifacts verified; {total_seconds:.1} s total\n\n"
    );
    text.push_str(&format!("{:<stage_w$}  {:<method_w$}", "stage", "method"));
    for (label, _) in COLUMNS {
        text.push_str(&format!("  {label:>9}"));
    }
    text.push('\n');
    for row in rows {
        text.push_str(&format!("{:<stage_w$}  {:<method_w$}", row.stage, row.method));
        for (_, metric) in COLUMNS {
            let cell = match row.values.get(metric) {
                Some(Some(v)) => format!("{v:.4}"),
                // Metric undefined (NA) or never emitted for this run.
                Some(None) | None => "n/a".to_string(),
            };
            text.push_str(&format!("  {cell:>9}"));
        }
        text.push('\n');
    }
    text
}

/// Verifies a run directory against its manifest and renders the metric
/// summary. Never mutates the run; the text is returned and, when `out` is
/// given, also written there.
pub fn cmd_report(run_dir: &Path, out: Option<&Path>) -> Result<String> {
    let manifest = RunManifest::load(run_dir)?;
    manifest.verify(run_dir)?;
    let (dataset, rows) = parse_metrics(&run_dir.join("metrics.csv"))?;
    let total_seconds: f64 = manifest.timings.iter().map(|t| t.seconds).sum();
    let text = render(
        &dataset,
        &manifest.library_version,
        manifest.artifacts.len(),
        total_seconds,
        &rows,
    );
    if let Some(path) = out {
        std::fs::write(path, &text).map_err(|e| Error::io(path, e))?;
    }
    Ok(text)
}

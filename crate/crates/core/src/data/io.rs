//! CSV import/export of processed datasets and plain numeric matrices.
//!
//! Conventions for every CSV written by this crate: comma delimiter, one
//! header row, UTF-8, `.` decimal separator, floats rendered with 17
//! significant digits so that re-parsing is bit-exact.
//!
//! A dataset CSV carries features, then a `label` column, then (optionally)
//! a `protected` column. Feature metadata that cannot live in the CSV
//! (origins, fitted statistics) goes to a `<stem>.meta.json` sidecar.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use super::preprocess::FitStats;
use super::{Dataset, FeatureOrigin, Group};
use crate::linalg::Matrix;
use crate::util::fmt_f64;
use crate::{Error, Result};

/// Sidecar metadata persisted next to a dataset CSV.
#[derive(Debug, Serialize, Deserialize)]
struct DatasetMeta {
    name: String,
    feature_names: Vec<String>,
    feature_origin: Vec<FeatureOrigin>,
    norm_stats: Option<FitStats>,
}

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

fn csv_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Csv {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Writes a dataset as CSV (features, `label`, optional `protected`) plus a
/// `<stem>.meta.json` sidecar with the feature metadata.
pub fn export_dataset_csv(ds: &Dataset, path: &Path) -> Result<()> {
    ds.validate()?;
    for reserved in ["label", "protected"] {
        if ds.feature_names.iter().any(|n| n == reserved) {
            return Err(Error::Data(format!(
                "feature name `{reserved}` collides with a reserved CSV column"
            )));
        }
    }
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header: Vec<String> = ds.feature_names.clone();
    header.push("label".into());
    if ds.protected.is_some() {
        header.push("protected".into());
    }
    writer.write_record(&header).map_err(|e| csv_error(path, e))?;
    for i in 0..ds.n() {
        let mut record: Vec<String> = ds.x.row(i).iter().map(|&v| fmt_f64(v)).collect();
        record.push(ds.y[i].to_string());
        if let Some(p) = &ds.protected {
            record.push(p[i].to_string());
        }
        writer.write_record(&record).map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;

    let meta = DatasetMeta {
        name: ds.name.clone(),
        feature_names: ds.feature_names.clone(),
        feature_origin: ds.feature_origin.clone(),
        norm_stats: ds.norm_stats.clone(),
    };
    let json = serde_json::to_string_pretty(&meta)
        .map_err(|e| Error::Artifact(format!("cannot serialize dataset metadata: {e}")))?;
    std::fs::write(sidecar_path(path), json).map_err(|e| Error::io(&sidecar_path(path), e))?;
    Ok(())
}

/// Reads a dataset CSV written by [`export_dataset_csv`].
///
/// The `label` column is required; `protected` is optional. If the sidecar
/// is present it supplies name, origins, and fitted statistics; otherwise
/// the dataset is named after the file stem and every feature is assumed
/// numerical.
pub fn import_dataset_csv(path: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(|h| h.to_string())
        .collect();
    let label_col = header
        .iter()
        .position(|h| h == "label")
        .ok_or_else(|| csv_error(path, "missing `label` column"))?;
    let protected_col = header.iter().position(|h| h == "protected");
    let feature_cols: Vec<usize> = (0..header.len())
        .filter(|&j| j != label_col && Some(j) != protected_col)
        .collect();

    let mut data = Vec::new();
    let mut y = Vec::new();
    let mut protected: Vec<Group> = Vec::new();
    let mut n = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        for &j in &feature_cols {
            let v: f64 = record[j]
                .parse()
                .map_err(|_| csv_error(path, format!("non-numeric cell `{}`", &record[j])))?;
            data.push(v);
        }
        let label: u8 = record[label_col]
            .parse()
            .map_err(|_| csv_error(path, format!("bad label `{}`", &record[label_col])))?;
        y.push(label);
        if let Some(pc) = protected_col {
            protected.push(match &record[pc] {
                "A" => Group::A,
                "B" => Group::B,
                other => return Err(csv_error(path, format!("bad group `{other}`"))),
            });
        }
        n += 1;
    }
    let m = feature_cols.len();
    let feature_names: Vec<String> = feature_cols.iter().map(|&j| header[j].clone()).collect();

    let sidecar = sidecar_path(path);
    let (name, feature_origin, norm_stats) = if sidecar.exists() {
        let json = std::fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        let meta: DatasetMeta = serde_json::from_str(&json)
            .map_err(|e| Error::Artifact(format!("corrupt sidecar `{}`: {e}", sidecar.display())))?;
        if meta.feature_names != feature_names {
            return Err(Error::Artifact(format!(
                "sidecar `{}` does not match the CSV feature columns",
                sidecar.display()
            )));
        }
        (meta.name, meta.feature_origin, meta.norm_stats)
    } else {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into());
        (stem, vec![FeatureOrigin::Numerical; m], None)
    };

    let ds = Dataset {
        name,
        x: Matrix::from_vec(n, m, data)?,
        y,
        feature_names,
        feature_origin,
        protected: if protected_col.is_some() {
            Some(protected)
        } else {
            None
        },
        norm_stats,
    };
    ds.validate()?;
    Ok(ds)
}

/// Writes a numeric matrix as CSV with the given column header.
pub fn export_matrix_csv(matrix: &Matrix, header: &[String], path: &Path) -> Result<()> {
    if header.len() != matrix.cols() {
        return Err(Error::Dimension(format!(
            "header has {} names for {} columns",
            header.len(),
            matrix.cols()
        )));
    }
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    writer.write_record(header).map_err(|e| csv_error(path, e))?;
    for i in 0..matrix.rows() {
        let record: Vec<String> = matrix.row(i).iter().map(|&v| fmt_f64(v)).collect();
        writer.write_record(&record).map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a numeric matrix CSV written by [`export_matrix_csv`]; returns the
/// matrix and its header.
pub fn import_matrix_csv(path: &Path) -> Result<(Matrix, Vec<String>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(|h| h.to_string())
        .collect();
    let mut data = Vec::new();
    let mut rows = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.len() != header.len() {
            return Err(csv_error(
                path,
                format!("row has {} cells, expected {}", record.len(), header.len()),
            ));
        }
        for cell in record.iter() {
            let v: f64 = cell
                .parse()
                .map_err(|_| csv_error(path, format!("non-numeric cell `{cell}`")))?;
            data.push(v);
        }
        rows += 1;
    }
    Ok((Matrix::from_vec(rows, header.len(), data)?, header))
}

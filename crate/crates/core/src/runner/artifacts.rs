//! Artifact bookkeeping: every file a run writes is hashed and recorded so
//! the manifest can later prove the run directory is intact.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::import_matrix_csv;
use crate::explain::ExplanationMatrix;
use crate::util::sha256_file;
use crate::{Error, Result};

/// One file produced by a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    /// Path relative to the run directory, with `/` separators.
    pub path: String,
    /// SHA-256 of the file contents, lowercase hex.
    pub sha256: String,
    /// File size in bytes.
    pub bytes: u64,
}

/// Collects artifact records as files land in the run directory. Recording
/// the same relative path twice replaces the earlier record (metric files
/// are rewritten after every stage).
#[derive(Debug)]
pub struct ArtifactSink {
    root: PathBuf,
    records: Vec<ArtifactRecord>,
}

impl ArtifactSink {
    /// Creates the run directory (and parents) and an empty record list.
    pub fn new(root: &Path) -> Result<ArtifactSink> {
        std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(ArtifactSink {
            root: root.to_path_buf(),
            records: Vec::new(),
        })
    }

    /// The run directory.
    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Absolute path for a run-relative file, creating its parent directory.
    pub fn prepare(&self, relative: &str) -> Result<PathBuf> {
        let path = self.root.join(relative);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        Ok(path)
    }

    /// Hashes an already-written file and records it.
    pub fn record(&mut self, relative: &str) -> Result<()> {
        let path = self.root.join(relative);
        let sha256 = sha256_file(&path)?;
        let bytes = std::fs::metadata(&path)
            .map_err(|e| Error::io(&path, e))?
            .len();
        let record = ArtifactRecord {
            path: relative.to_string(),
            sha256,
            bytes,
        };
        match self.records.iter_mut().find(|r| r.path == relative) {
            Some(existing) => *existing = record,
            None => self.records.push(record),
        }
        Ok(())
    }

    /// The records collected so far.
    pub fn records(&self) -> &[ArtifactRecord] {
        &self.records
    }

    /// Consumes the sink, yielding the records.
    pub fn into_records(self) -> Vec<ArtifactRecord> {
        self.records
    }
}

/// Sidecar metadata stored next to an explanation CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplanationMeta {
    /// Shared intercept: mean model output over the background rows.
    pub phi0: f64,
}

fn meta_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

/// Writes an explanation matrix as a CSV (one row per sample, one column
/// per feature) plus a JSON sidecar holding the intercept.
pub fn export_explanations(
    e: &ExplanationMatrix,
    feature_names: &[String],
    path: &Path,
) -> Result<()> {
    crate::data::export_matrix_csv(&e.e, feature_names, path)?;
    let meta = ExplanationMeta { phi0: e.phi0 };
    let text = serde_json::to_string_pretty(&meta)
        .map_err(|err| Error::Artifact(format!("{}: {err}", path.display())))?;
    let mp = meta_path(path);
    std::fs::write(&mp, text + "\n").map_err(|e| Error::io(&mp, e))?;
    Ok(())
}

/// Reads an explanation CSV and its sidecar back.
pub fn import_explanations(path: &Path) -> Result<(ExplanationMatrix, Vec<String>)> {
    let (e, header) = import_matrix_csv(path)?;
    let mp = meta_path(path);
    let text = std::fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
    let meta: ExplanationMeta = serde_json::from_str(&text)
        .map_err(|err| Error::Artifact(format!("{}: {err}", mp.display())))?;
    Ok((ExplanationMatrix { e, phi0: meta.phi0 }, header))
}

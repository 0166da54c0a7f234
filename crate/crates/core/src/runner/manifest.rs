//! The run manifest: a JSON snapshot of the configuration, every artifact's
//! hash, and stage timings. It is written once, last, and later lets the
//! report command prove the directory has not been altered.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::runner::artifacts::ArtifactRecord;
use crate::runner::config::RunConfig;
use crate::util::sha256_file;
use crate::{Error, Result};

/// Format version of the manifest file itself.
pub const MANIFEST_VERSION: u32 = 1;

/// Wall-clock duration of one pipeline phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    /// Phase label, e.g. `data`, `f0`, `idw`, `trv_k3`.
    pub stage: String,
    /// Elapsed seconds.
    pub seconds: f64,
}

/// Everything needed to audit and reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Version of this file format.
    pub manifest_version: u32,
    /// Version of the library that produced the run.
    pub library_version: String,
    /// Snapshot of the configuration the run executed.
    pub config: RunConfig,
    /// Every file written, with content hashes.
    pub artifacts: Vec<ArtifactRecord>,
    /// Per-phase wall-clock timings (informational; not hashed artifacts).
    pub timings: Vec<StageTiming>,
}

impl RunManifest {
    /// File name inside the run directory.
    pub const FILE_NAME: &'static str = "manifest.json";

    /// Serializes into `dir/manifest.json`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(Self::FILE_NAME);
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Artifact(format!("{}: {e}", path.display())))?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }

    /// Loads `dir/manifest.json`.
    pub fn load(dir: &Path) -> Result<RunManifest> {
        let path = dir.join(Self::FILE_NAME);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: RunManifest = serde_json::from_str(&text)
            .map_err(|e| Error::Artifact(format!("{}: {e}", path.display())))?;
        if manifest.manifest_version != MANIFEST_VERSION {
            return Err(Error::Artifact(format!(
                "manifest version {} is not supported (expected {MANIFEST_VERSION})",
                manifest.manifest_version
            )));
        }
        Ok(manifest)
    }

    /// Verifies that every recorded artifact exists under `dir` and still
    /// matches its hash and size. Read-only.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for record in &self.artifacts {
            let path = dir.join(&record.path);
            if !path.is_file() {
                return Err(Error::Artifact(format!(
                    "artifact `{}` listed in the manifest is missing",
                    record.path
                )));
            }
            let hash = sha256_file(&path)?;
            if hash != record.sha256 {
                return Err(Error::Artifact(format!(
                    "artifact `{}` does not match its recorded hash (run directory altered?)",
                    record.path
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runner::artifacts::ArtifactSink;

    fn demo_config(dir: &Path) -> RunConfig {
        let csv = dir.join("demo.csv");
        std::fs::write(&csv, "a,outcome\n1,yes\n2,no\n").unwrap();
        let text = format!(
            "[dataset]\npath = {:?}\nlabel = \"outcome\"\nnumerical = [\"a\"]\n",
            csv
        );
        toml::from_str(&text).unwrap()
    }

    #[test]
    fn manifest_round_trips_and_verifies() {
        let dir = tempfile::tempdir().unwrap();
        let mut sink = ArtifactSink::new(dir.path()).unwrap();
        let file = sink.prepare("metrics.csv").unwrap();
        std::fs::write(&file, "dataset,stage,metric,value\n").unwrap();
        sink.record("metrics.csv").unwrap();

        let manifest = RunManifest {
            manifest_version: MANIFEST_VERSION,
            library_version: crate::VERSION.to_string(),
            config: demo_config(dir.path()),
            artifacts: sink.into_records(),
            timings: vec![StageTiming {
                stage: "data".into(),
                seconds: 0.25,
            }],
        };
        manifest.save(dir.path()).unwrap();
        let back = RunManifest::load(dir.path()).unwrap();
        assert_eq!(back, manifest);
        back.verify(dir.path()).unwrap();

        // Tampering with a recorded artifact must be detected.
        std::fs::write(&file, "dataset,stage,metric,value\ntampered\n").unwrap();
        let err = back.verify(dir.path()).unwrap_err();
        assert!(err.to_string().contains("metrics.csv"), "{err}");

        // A missing artifact must be detected too.
        std::fs::remove_file(&file).unwrap();
        assert!(back.verify(dir.path()).is_err());
    }

    #[test]
    fn missing_manifest_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(RunManifest::load(dir.path()).is_err());
    }

    #[test]
    fn wrong_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut manifest = RunManifest {
            manifest_version: MANIFEST_VERSION,
            library_version: crate::VERSION.to_string(),
            config: demo_config(dir.path()),
            artifacts: vec![],
            timings: vec![],
        };
        manifest.manifest_version = 99;
        manifest.save(dir.path()).unwrap();
        assert!(RunManifest::load(dir.path()).is_err());
    }
}

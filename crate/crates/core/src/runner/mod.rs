//! Experiment orchestration: declarative run configuration, the end-to-end
//! pipeline behind `shapline run`, artifact persistence with content hashes,
//! and the consolidated report renderer.

pub mod artifacts;
pub mod config;
pub mod manifest;
pub mod pipeline;
pub mod report;

pub use artifacts::{export_explanations, import_explanations, ArtifactRecord, ArtifactSink};
pub use config::RunConfig;
pub use manifest::{RunManifest, StageTiming, MANIFEST_VERSION};
pub use pipeline::{cmd_explain, cmd_preprocess, cmd_run, resolve_output_dir};
pub use report::cmd_report;

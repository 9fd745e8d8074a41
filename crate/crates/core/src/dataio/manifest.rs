//! Run manifests: the configuration that produced a run plus its outcome.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DataError;
use crate::adapt::LawVariant;
use crate::config::RunConfig;
use crate::diagnose::Verdict;

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Contents of a `manifest.toml`. The embedded config is complete, so a run
/// can be replayed from its manifest alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub toolkit_version: String,
    pub command: String,
    pub law_variant: LawVariant,
    /// Trace file name, relative to the manifest.
    pub trace_file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_params: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict<f64>>,
    pub config: RunConfig,
}

impl Manifest {
    pub fn new(config: &RunConfig, command: &str, trace_file: &str) -> Self {
        Self {
            toolkit_version: TOOLKIT_VERSION.into(),
            command: command.into(),
            law_variant: config.law_variant,
            trace_file: trace_file.into(),
            final_params: None,
            verdict: None,
            config: config.clone(),
        }
    }

    pub fn with_verdict(mut self, verdict: Verdict<f64>) -> Self {
        self.final_params = Some(verdict.final_params);
        self.verdict = Some(verdict);
        self
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("manifest always serializes")
    }
}

pub fn write_manifest(manifest: &Manifest, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    std::fs::write(path, manifest.to_toml_string()).map_err(|e| DataError::io(path, e))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest, DataError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    toml::from_str(&text).map_err(|e| DataError::Manifest {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

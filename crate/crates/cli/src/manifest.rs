//! `run.toml`: everything needed to repeat a solve or bench run.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::options::Resolved;
use crate::CliError;

pub const RUN_MANIFEST: &str = "run.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRecord {
    pub name: String,
    /// Trace path relative to the manifest.
    pub trace: Option<String>,
    pub options: Resolved,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// `solve` or `bench`.
    pub command: String,
    pub artifact_version: String,
    pub instance: PathBuf,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub seeds: Vec<u64>,
    /// Relative to the manifest.
    pub outputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bench_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variants: Vec<VariantRecord>,
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl RunManifest {
    pub fn new(command: &str, instance: &Path, started_unix: f64) -> Self {
        Self {
            command: command.to_string(),
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            instance: std::fs::canonicalize(instance).unwrap_or_else(|_| instance.to_path_buf()),
            started_unix,
            finished_unix: started_unix,
            seeds: Vec::new(),
            outputs: Vec::new(),
            bench_tol: None,
            variants: Vec::new(),
        }
    }

    pub fn write(&mut self, dir: &Path) -> Result<PathBuf, CliError> {
        self.finished_unix = unix_now();
        let path = dir.join(RUN_MANIFEST);
        let text = toml::to_string(self).map_err(|e| CliError::Runtime(format!("cannot encode manifest: {e}")))?;
        std::fs::write(&path, text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("bad manifest {}: {e}", path.display())))
    }
}

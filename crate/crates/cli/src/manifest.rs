//! Run manifest: everything one pipeline run needs, resolvable from flags
//! or a TOML file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use bitsim_core::systolic::WorkloadMode;
use bitsim_core::Precision;

use crate::CliError;

/// Where the weights come from: a file on disk, or a seeded generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightSource {
    File(PathBuf),
    Seed(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Bundled network name or config path.
    pub network: String,
    pub weights: WeightSource,
    /// Arch config path; None means the built-in default.
    pub arch: Option<PathBuf>,
    /// "16b" or "8b".
    pub mode: String,
    /// "dense", "imbalanced", or "balanced".
    pub workload: String,
    /// Overrides every layer's NNZB cap.
    pub n_max: Option<u8>,
    pub out: PathBuf,
}

impl RunManifest {
    pub fn precision(&self) -> Result<Precision, CliError> {
        match self.mode.as_str() {
            "16b" => Ok(Precision::Bits16),
            "8b" => Ok(Precision::Bits8),
            other => Err(CliError::Usage(format!("mode {other:?} (want 16b or 8b)"))),
        }
    }

    pub fn workload_mode(&self) -> Result<WorkloadMode, CliError> {
        match self.workload.as_str() {
            "dense" => Ok(WorkloadMode::DenseBitSerial),
            "imbalanced" => Ok(WorkloadMode::SparseImbalanced),
            "balanced" => Ok(WorkloadMode::SparseBalanced),
            other => Err(CliError::Usage(format!(
                "workload {other:?} (want dense, imbalanced, or balanced)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.precision()?;
        self.workload_mode()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("manifest {}: {e}", path.display())))?;
        let m: RunManifest = toml::from_str(&text)
            .map_err(|e| CliError::Validation(format!("manifest {}: {e}", path.display())))?;
        m.validate()?;
        Ok(m)
    }
}

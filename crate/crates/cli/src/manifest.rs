//! Run manifest: everything needed to regenerate a run directory.

use std::path::Path;

use qaoi_core::CostKind;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioSpec;
use crate::files::SCHEMA_VERSION;
use crate::CliError;

pub const MANIFEST_FORMAT: &str = "qaoi-sched manifest v1";
pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub qaoi_cli: String,
    pub qaoi_core: String,
    pub csv_schema: u32,
}

impl Versions {
    pub fn current() -> Self {
        Versions {
            qaoi_cli: env!("CARGO_PKG_VERSION").to_string(),
            qaoi_core: qaoi_core::VERSION.to_string(),
            csv_schema: SCHEMA_VERSION,
        }
    }
}

/// One solved (and possibly simulated) model of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub policy: CostKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub config_hash: String,
    pub states: usize,
    pub transmit_states: usize,
    /// Files written for this point, relative to the run directory.
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    /// `solve`, `simulate` or `run`.
    pub command: String,
    pub seeds: Vec<u64>,
    pub versions: Versions,
    /// The scenario with defaults resolved.
    pub scenario: ScenarioSpec,
    pub points: Vec<PointRecord>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let path = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let manifest: Manifest =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if manifest.format != MANIFEST_FORMAT {
            return Err(CliError::Config(format!("{}: unsupported format `{}`", path.display(), manifest.format)));
        }
        if manifest.seeds != manifest.scenario.seeds() {
            return Err(CliError::Config(format!("{}: seed list disagrees with the simulation section", path.display())));
        }
        manifest.scenario.validate()?;
        Ok(manifest)
    }

    pub fn save(&self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join(MANIFEST_FILE);
        let text = toml::to_string(self).map_err(|e| CliError::Config(format!("cannot encode manifest: {e}")))?;
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }

    /// Sorted swept values, the axis two runs must share to be compared.
    pub fn axis(&self) -> Vec<Option<f64>> {
        let mut eps: Vec<Option<f64>> = self.scenario.points().into_iter().map(|p| p.0).collect();
        eps.sort_by(|a, b| a.partial_cmp(b).expect("finite sweep values"));
        eps
    }

    /// Checks that `other` sweeps the same channel axis.
    pub fn check_compatible(&self, other: &Manifest) -> Result<(), CliError> {
        let (a, b) = (&self.scenario, &other.scenario);
        if a.error.kind() != b.error.kind() {
            return Err(CliError::ManifestMismatch(format!(
                "error chain kinds differ: {} vs {}",
                a.error.kind(),
                b.error.kind()
            )));
        }
        if self.axis() != other.axis() {
            return Err(CliError::ManifestMismatch(format!("sweeps differ: {:?} vs {:?}", self.axis(), other.axis())));
        }
        Ok(())
    }
}

//! Scenario runner for the query-aware scheduler: TOML scenarios in, policy
//! files, CSV tables and a run manifest out.

use std::io;
use std::path::{Path, PathBuf};

use qaoi_core::analytic::AnalyticError;
use qaoi_core::policy_io::PolicyIoError;
use qaoi_core::{ChainError, ModelError, SimError, SolverError};
use thiserror::Error;

pub mod config;
pub mod files;
pub mod manifest;
pub mod run;

pub use config::{AnalyticSpec, ErrorSpec, QuerySpec, ScenarioSpec, SimulationSpec, SweepPoint};
pub use manifest::{Manifest, PointRecord};
pub use run::{compare_runs, run_analytic, run_scenario, Stage};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}: {reason}", path.display())]
    Schema { path: PathBuf, reason: String },
    #[error("{}: {source}", path.display())]
    PolicyFile { path: PathBuf, source: PolicyIoError },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("manifest mismatch: {0}")]
    ManifestMismatch(String),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }
}

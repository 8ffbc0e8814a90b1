//! Harness around `mondrian-rf`: synthetic data generation, CSV and JSON
//! IO, Monte Carlo experiments (coverage, bias decay), and the pieces
//! shared between the library API and the `mondrian-rf` binary.

pub mod config;
pub mod dgp;
pub mod experiments;
pub mod io;
pub mod parallel;

pub use dgp::{DensityKind, Dgp, MuKind, NoiseKind};
pub use experiments::{ExperimentKind, ExperimentSpec, LambdaRule, SizeRule};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] mondrian_rf::Error),
    #[error("{0}")]
    Config(String),
    #[error("unknown registry name {kind} '{name}'")]
    UnknownName { kind: &'static str, name: String },
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv {path}: {message}")]
    Csv { path: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

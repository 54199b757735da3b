//! Reproducible experiments on top of `hjcone`: convergence of the finite-`N`
//! free energy to the Hopf solution, identity and invariant suites,
//! concentration scaling and the nonsymmetric demo.

pub mod config;
pub mod emit;
pub mod report;
pub mod runners;

pub use config::{Experiment, ExperimentConfig};
pub use emit::{emit, render};
pub use report::{CheckRow, ConvergenceReport, SuiteReport};
pub use runners::{run_converge, run_suite};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error(transparent)]
    Core(#[from] hjcone::HjError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, LabError>;

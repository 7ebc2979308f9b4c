//! Experiment harness for the erasure-coded eigensolvers: configuration,
//! matrix loading, run orchestration, persistence and comparison.

pub mod compare;
pub mod config;
pub mod experiment;
pub mod report;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("incompatible results: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Core(#[from] ec_eigen_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// CLI exit code: 2 for configuration problems, 3 for solver failures,
    /// 4 when the fault capacity was exceeded.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Incompatible(_) => 2,
            HarnessError::Core(ec_eigen_core::Error::CapacityExceeded { .. }) => 4,
            HarnessError::Io(_) => 2,
            HarnessError::Core(_) => 3,
        }
    }
}

//! Configuration, climate ingestion, ensemble runs, trap comparison and
//! statistical self-tests for the Aedes albopictus model.

use std::path::{Path, PathBuf};

use thiserror::Error;

pub mod climate;
pub mod config;
pub mod ensemble;
pub mod selftest;
pub mod traps;

pub use climate::{ingest_climate, ClimateError};
pub use config::RunConfig;
pub use ensemble::{run_ensemble, RunOutput};
pub use traps::compare_traps;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Climate(#[from] ClimateError),
    #[error("model: {0}")]
    Model(String),
    #[error(transparent)]
    Aedes(#[from] scls_core::aedes::AedesError),
    #[error(transparent)]
    Rule(#[from] scls_core::rules::RuleError),
    #[error(transparent)]
    Sim(#[from] scls_core::ssa::SimError),
    #[error(transparent)]
    Term(#[from] scls_core::term::TermError),
    #[error("trap day {day} is outside the simulated range [0, {last}]")]
    DayOutOfRange { day: f64, last: f64 },
    #[error("unknown self-test suite {0:?} (expected exp-times, selection, ctmc-oracle or death-decay)")]
    UnknownSuite(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn csv(path: &Path, source: csv::Error) -> Self {
        CliError::Csv {
            path: path.to_path_buf(),
            source,
        }
    }
}

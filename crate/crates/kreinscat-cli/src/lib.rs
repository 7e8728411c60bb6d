//! Configuration-driven driver for the kreinscat solvers.

pub mod config;
pub mod run;

pub use config::{Mode, RunConfig, SCHEMA};
pub use run::{run, Report, FORMAT_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Solver(#[from] kreinscat::Error),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("{0}: {1}")]
    Csv(String, #[source] csv::Error),
}

impl CliError {
    /// 2 for configuration errors, 3 for singular or failed numerics, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use kreinscat::Error as E;
        match self {
            CliError::Solver(E::Config { .. }) => 2,
            CliError::Solver(E::InvalidInput(_)) => 2,
            CliError::Solver(_) => 3,
            _ => 1,
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] skewlab_core::Error),
    /// The run finished and wrote its files, but reported out-of-regime.
    #[error("{0}")]
    OutOfRegime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use skewlab_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(E::Convergence { .. }) => 3,
            CliError::Core(E::OutOfRegime { .. }) | CliError::OutOfRegime(_) => 4,
            _ => 1,
        }
    }
}

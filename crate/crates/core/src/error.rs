use std::time::Duration;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
///
/// Callers that need to distinguish bad input from runtime failure (the CLI
/// maps them to different exit codes) can use [`Error::is_input`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("evaluation budget exhausted after {used} of {budget} evaluations")]
    BudgetExhausted { used: usize, budget: usize },
    #[error("objective evaluation failed: {0}")]
    Evaluation(String),
    #[error("generator protocol violation: {0}")]
    Protocol(String),
    #[error("generator did not answer within {0:?}")]
    Timeout(Duration),
    #[error("generator process exited: {0}")]
    GeneratorExited(String),
    #[error("training diverged: {0}")]
    Divergence(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("config: {0}")]
    Config(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// True for errors caused by the caller's input (configuration, shapes,
    /// out-of-range indices) rather than by a failure while running.
    pub fn is_input(&self) -> bool {
        matches!(self, Error::Input(_) | Error::Config(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

//! Command-line front end: configuration, synthetic corpora, manifests and
//! the subcommands.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod pipeline;
pub mod synth;

use subtranx::neural::NeuralError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    pub fn io(path: &std::path::Path, e: impl std::fmt::Display) -> CliError {
        CliError::Data(format!("{}: {e}", path.display()))
    }
}

impl From<NeuralError> for CliError {
    fn from(e: NeuralError) -> Self {
        match e {
            NeuralError::EmptyInput
            | NeuralError::Checkpoint(_)
            | NeuralError::GrammarMismatch
            | NeuralError::NoExamples => CliError::Data(e.to_string()),
            NeuralError::NonFiniteLoss { .. }
            | NeuralError::NonFiniteParams(_)
            | NeuralError::Transit(_) => CliError::Internal(e.to_string()),
        }
    }
}

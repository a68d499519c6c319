use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// True for errors caused by data that breaks an annotation invariant,
    /// as opposed to malformed input or bad arguments.
    pub fn is_invariant_violation(&self) -> bool {
        matches!(self, Error::Invalid(_) | Error::InvalidRecord { .. } | Error::Schema(_))
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema violation: {0}")]
    Schema(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("corpus failed validation with {} violation(s); first: {}", .0.len(), .0[0])]
    Invalid(Vec<crate::schema::Violation>),

    #[error("{path}:{line}: {message}")]
    InvalidRecord {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("empty corpus: {0}")]
    EmptyCorpus(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("sequence of length {len} exceeds the encoder maximum of {max}")]
    SequenceTooLong { len: usize, max: usize },

    #[error("training diverged at epoch {epoch}, step {step}: loss = {loss}")]
    Diverged { epoch: usize, step: usize, loss: f64 },

    #[error("sentence sets differ: {0}")]
    Mismatch(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

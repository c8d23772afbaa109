use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    /// A precondition of an operation was violated by its caller.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("non-finite value during training at epoch {epoch}, step {step}")]
    NonFinite { epoch: usize, step: usize },

    #[error("determinism failure: {0}")]
    Determinism(String),

    #[error("seed {seed}: {source}")]
    Seeded {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn with_seed(self, seed: u64) -> Self {
        Error::Seeded {
            seed,
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad input or configuration rather than by
    /// a failure while running.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Parse { .. }
            | Error::Validation(_)
            | Error::Contract(_)
            | Error::Empty(_)
            | Error::Json(_)
            | Error::Csv(_) => true,
            Error::Seeded { source, .. } => source.is_validation(),
            Error::NonFinite { .. } | Error::Determinism(_) | Error::Io(_) => false,
        }
    }
}

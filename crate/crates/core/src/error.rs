use thiserror::Error;

/// Errors produced by the simulation and estimation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "insufficient training data: constellation point {point} observed {count} times, need {required}"
    )]
    TrainingInsufficient {
        point: usize,
        count: usize,
        required: usize,
    },

    #[error("config error at `{location}`: {message}")]
    Config { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

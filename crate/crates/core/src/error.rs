use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("state is not realizable: {0}")]
    NotRealizable(String),

    #[error("grid too small: {0}")]
    GridClipped(String),

    #[error("integration diverged at t = {time}: {reason}")]
    Diverged { time: f64, reason: String },

    #[error("particle {index} escaped to x = {x} at t = {time}")]
    Escape { index: usize, x: f64, time: f64 },

    #[error("snapshot format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

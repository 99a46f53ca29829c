use thiserror::Error;

/// Errors raised by the simulation, reconstruction and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("truncation budget {budget:e} exceeded: tail mass {tail:e} at bound {bound}")]
    Truncation { tail: f64, budget: f64, bound: usize },

    #[error("precision loss in {context}: estimated relative error {relative_error:e}")]
    Precision {
        context: String,
        relative_error: f64,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("mode-scale mismatch: {0}")]
    ModeScale(String),

    #[error("non-physical single-mode reduction: {0}")]
    NonPhysical(String),

    #[error("convergence failure: {0}")]
    Convergence(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed input {path}: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io(_) | Error::Csv(_) | Error::Parse { .. } => 4,
            Error::Json(e) if e.is_io() => 4,
            Error::Json(_) => 2,
            _ => 3,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

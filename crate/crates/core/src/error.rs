use thiserror::Error;

/// Errors produced by the library.
///
/// Variants are split into input validation failures (bad parameters,
/// malformed files) and numeric failures (degenerate geometry, divergent
/// integrals, solver breakdown). The CLI maps the former to exit code 2 and
/// the latter to exit code 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("integral diverges: {0}")]
    Divergent(String),
    #[error("audit failed: {0}")]
    Audit(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    /// True for errors caused by the caller's input rather than by numerics.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Invalid(_) | Error::Io(_) | Error::Json(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors raised by the library. Each variant maps onto a stable C error code in the FFI crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("no convergence: {what} (best estimate {estimate})")]
    Convergence { what: String, estimate: f64 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("numerically singular: {0}")]
    Singular(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

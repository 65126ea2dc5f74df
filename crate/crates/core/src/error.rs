use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Inputs with the wrong shape, out-of-range indices or nonsensical values.
    #[error("domain error: {0}")]
    Domain(String),

    /// A communication graph or weight matrix violates the mixing assumptions.
    #[error("topology error: {0}")]
    Topology(String),

    /// An operation was called outside its admissible parameter range.
    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// The iteration produced non-finite values or an exploding residual.
    #[error("diverged at iteration {iteration}: {reason}")]
    Divergence { iteration: usize, reason: String },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    /// A simulated agent did not receive a message its wiring says it should.
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

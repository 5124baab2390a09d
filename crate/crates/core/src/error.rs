use thiserror::Error;

use crate::engine::CertifiedInterval;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("node budget of {budget} exceeded")]
    BudgetExceeded { budget: u64 },

    /// The depth cap (or node budget, after at least one completed depth) was
    /// reached before the requested accuracy. The best certified bracket found
    /// so far is attached.
    #[error("no convergence: {reason}; best certified width {:.3e}", .best.width())]
    NoConvergence {
        reason: String,
        best: Box<CertifiedInterval>,
    },

    #[error("system is not reducible to a hardcore model: {0}")]
    NotReducible(String),

    #[error("oracle unsupported: {0}")]
    OracleUnsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}

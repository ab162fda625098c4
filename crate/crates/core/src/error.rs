use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// The CLI maps [`Error::Numerical`] to exit code 2 and everything else to 1.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Non-finite input where a finite value is required.
    #[error("domain error: {0}")]
    Domain(String),

    /// Quadrature or an iterative method did not reach its tolerance.
    #[error("numerical failure: {what} (achieved relative error {achieved:.3e})")]
    Numerical { what: String, achieved: f64 },

    /// Noise calibration could not bracket the target.
    #[error("calibration failed: {0}")]
    Calibration(String),

    /// A sub-exponential tail fit had nothing to fit.
    #[error("degenerate gradient statistics: {0}")]
    Degenerate(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// True for failures that come from numerics rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical { .. } | Error::Calibration(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

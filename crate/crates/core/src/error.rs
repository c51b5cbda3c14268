use thiserror::Error;

/// Errors raised by the laboratory's numerical and I/O routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grid with {points} points per axis under-resolves {what}")]
    UnderResolved { points: usize, what: String },

    #[error("shift {0} lies in the spectrum")]
    InSpectrum(String),

    #[error("iteration did not converge after {iterations} steps (estimate {estimate:e}, bracket [{lower:e}, {upper:e}])")]
    NonConvergence {
        iterations: usize,
        estimate: f64,
        lower: f64,
        upper: f64,
    },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

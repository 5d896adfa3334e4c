use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LdpError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("lattice too large: {0} sites (limit 2^31)")]
    LatticeTooLarge(u64),

    #[error("covariance factorization failed after ridge escalation (ridge {ridge:e}); smallest eigenvalue estimate {smallest_eigenvalue:e}")]
    Factorization { ridge: f64, smallest_eigenvalue: f64 },

    #[error("missing alpha4 calibration: {0}")]
    MissingCalibration(String),

    #[error("Parseval violated: sum of squared coefficients is {0}")]
    Parseval(f64),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("size mismatch: {0}")]
    Mismatch(String),

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LdpError>;

pub(crate) fn invalid(msg: impl Into<String>) -> LdpError {
    LdpError::InvalidParameter(msg.into())
}

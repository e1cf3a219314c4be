//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Not enough observations to estimate anything (e.g. T < 2).
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Inputs violated a documented precondition or invariant.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// Every eigenvalue of the sample covariance fell below the
    /// numerical-rank threshold.
    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),

    /// The squared-Sharpe estimate came out non-positive, so the
    /// normalized weight scale is undefined.
    #[error("non-positive squared-Sharpe estimate (theta_hat = {0})")]
    NonPositiveTheta(f64),

    /// Closed-form limits are undefined in a window around rho = 1.
    #[error("unsupported aspect ratio: rho = {0} is too close to 1")]
    UnsupportedAspectRatio(f64),

    /// The population mean vector is identically zero.
    #[error("zero signal: population mean vector is zero")]
    ZeroSignal,

    /// A portfolio with zero variance cannot have a Sharpe ratio.
    #[error("zero-risk portfolio")]
    ZeroRisk,

    /// An iterative solver failed to converge.
    #[error("solver failure: {0}")]
    Solver(String),

    /// An input file did not match its documented schema.
    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code class for the CLI: 2 usage, 3 schema/io, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Schema(_) | Error::Io(_) => 3,
            Error::Invalid(_) | Error::InsufficientData(_) => 2,
            _ => 4,
        }
    }
}

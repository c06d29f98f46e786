//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by network construction, dynamics, propagation and fitting.
#[derive(Debug, Error)]
pub enum QswError {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix not Hermitian: max |m - m^H| = {deviation:.3e} exceeds {tolerance:.1e}")]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error("trace deviates from 1 by {deviation:.3e} (tolerance {tolerance:.1e})")]
    TraceDrift { deviation: f64, tolerance: f64 },

    #[error("eigenvalue {value:.3e} below positivity floor -1e-8")]
    NegativeEigenvalue { value: f64 },

    #[error("probability vector invalid: {0}")]
    InvalidProbability(String),

    #[error("step size underflow at t = {t:.6e} (h = {h:.3e}); problem appears stiff")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("step budget of {max_steps} exhausted at t = {t:.6e}")]
    StepBudgetExhausted { t: f64, max_steps: usize },

    #[error("no scaling regime: {0}")]
    NoScalingRegime(String),

    #[error("fit error: {0}")]
    FitError(String),

    #[error("config error: {0}")]
    ConfigError(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, QswError>;

impl QswError {
    /// True for errors caused by an invalid configuration rather than a
    /// numerical failure at run time. Drives the CLI exit code split.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            QswError::InvalidNetwork(_)
                | QswError::InvalidParameter(_)
                | QswError::ConfigError(_)
        )
    }
}

use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A physical or numerical parameter is out of its allowed domain.
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    /// A time or frequency lies outside the grid it must fit into.
    #[error("out of range: {0}")]
    Range(String),

    /// Malformed input data (envelope files, calibration tables).
    #[error("format error: {0}")]
    Format(String),

    /// Two series that must share a grid do not.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Required configuration is missing.
    #[error("configuration error: {0}")]
    Config(String),

    /// The integrator could not meet its tolerance.
    #[error("integration failed at t = {time:.6e} s: {reason}")]
    Integration { time: f64, reason: String },

    /// A quasi-steady state was not reached.
    #[error("steady state not converged: {0}")]
    Convergence(String),

    /// A post-processing step (fit, extraction) could not produce a result.
    #[error("analysis failed: {0}")]
    Analysis(String),

    /// Not enough data points or features for the requested fit.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

use crate::gaussian_state::State3D;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unphysical state: uncertainty determinant {det:e} below hbar^2/4 = {bound:e} on axis {axis}")]
    Physicality { axis: usize, det: f64, bound: f64 },

    #[error("no stable trap: {0}")]
    NoTrap(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("integrator failure at t = {t:e} s: {reason}")]
    Integrator {
        t: f64,
        reason: String,
        state: Box<State3D>,
    },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Fails unless `value` is finite and strictly positive.
pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be positive and finite, got {value}")))
    }
}

use thiserror::Error;

use crate::geometry::Family;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("radius {r} outside the admissible range {range}")]
    Domain { r: f64, range: &'static str },

    #[error("unsupported index n = {n} for {family:?} (minimum is {min})")]
    UnsupportedIndex { family: Family, n: u32, min: u32 },

    #[error("integral `{what}` did not converge: value {value:e}, error estimate {error:e} after {panels} panels")]
    NonConvergence {
        what: String,
        value: f64,
        error: f64,
        panels: usize,
    },

    #[error("integrand of `{what}` is not finite at x = {x}")]
    NonFinite { what: String, x: f64 },

    #[error("overflow while evaluating {what}")]
    Overflow { what: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("path {path} exceeded the step budget of {budget} steps")]
    StepBudget { path: u64, budget: u64 },

    #[error("containment violated on path {path}: rho - R = {violation:e} exceeds slack {slack:e}")]
    Containment {
        path: u64,
        violation: f64,
        slack: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Attach a name to a quadrature failure so callers can tell which
    /// integral gave up.
    pub fn named(self, name: &str) -> Self {
        match self {
            Error::NonConvergence {
                value,
                error,
                panels,
                ..
            } => Error::NonConvergence {
                what: name.to_string(),
                value,
                error,
                panels,
            },
            Error::NonFinite { x, .. } => Error::NonFinite {
                what: name.to_string(),
                x,
            },
            other => other,
        }
    }

    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. } | Error::NonFinite { .. } | Error::Overflow { .. }
        )
    }
}

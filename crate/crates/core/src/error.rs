use thiserror::Error;

use crate::ComplexValue;

/// Errors reported by the decay-law library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecayError {
    /// Argument outside the domain of the operation (branch cut, origin, underflowed divisor, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// The mathematically finite result cannot be represented as an `f64`.
    #[error("result exceeds floating-point range: {0}")]
    RangeExceeded(String),

    /// A series or continued fraction failed to converge within its iteration cap.
    #[error("{routine} did not converge within {iterations} iterations")]
    NoConvergence {
        routine: &'static str,
        iterations: usize,
    },

    /// Adaptive quadrature ran out of panels before meeting its tolerance.
    #[error(
        "quadrature did not converge: best value {best}, error estimate {error_estimate:e}, \
         {panels_used} panels"
    )]
    ConvergenceFailure {
        best: ComplexValue,
        error_estimate: f64,
        panels_used: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("insufficient points: need at least {needed}, found {found}")]
    InsufficientPoints { needed: usize, found: usize },

    #[error("non-positive probability {value} at x = {x} inside the fit window")]
    NonPositiveProbability { x: f64, value: f64 },

    /// Finite-difference error estimate exceeded 1% of the quantity being estimated.
    #[error("finite-difference step too coarse: relative error estimate {relative_error:e}")]
    StepTooCoarse { relative_error: f64 },

    #[error("grid too coarse: Nyquist frequency {nyquist} is below the required {required}")]
    GridTooCoarse { nyquist: f64, required: f64 },
}

pub type Result<T> = std::result::Result<T, DecayError>;

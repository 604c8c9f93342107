use thiserror::Error;

use crate::process::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A time, grid or clock value lies outside the region where the process is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// Adaptive quadrature ran out of subdivisions before meeting its tolerance.
    #[error("quadrature did not converge: estimate {estimate:e}, error bound {error_bound:e}")]
    Convergence { estimate: f64, error_bound: f64 },

    #[error("non-finite function value {value} at x = {x}")]
    Evaluation { x: f64, value: f64 },

    #[error("target {target} outside bracket image [{lo}, {hi}]")]
    Bracket { target: f64, lo: f64, hi: f64 },

    /// The integrand f = h2(rho^-1)/rho'(rho^-1) is not strictly positive, so the
    /// variance clock of the integrated process is not guaranteed to be increasing.
    #[error("representation requires f > 0 on the clock range: {0}")]
    Representation(String),

    #[error("process failed validation: {0}")]
    Validation(ValidationReport),

    #[error("simulation blew up on path {path} at step {step}")]
    Simulation { path: usize, step: usize },

    #[error("internal consistency error: {0}")]
    Internal(String),
}

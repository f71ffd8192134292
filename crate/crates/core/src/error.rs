use thiserror::Error;

use crate::expr::{EvalError, ParseError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Eval(#[from] EvalError),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    /// The initial value problem could not be continued across the requested span.
    #[error("ExtensionFailure at x = {x}: {reason}")]
    ExtensionFailure { x: f64, reason: String },

    #[error("MaxIterations: Newton did not converge in {iterations} iterations (residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },

    /// Newton matrix pivot fell below threshold. `s` is the offending iterate.
    #[error("SingularJacobian: pivot {pivot:e} below {threshold:e}; boundary functionals are likely not uniquely solvable")]
    SingularJacobian {
        pivot: f64,
        threshold: f64,
        s: Vec<f64>,
    },

    #[error("DisconjugacyViolation: |det M| = {det:e} below {threshold:e}")]
    DisconjugacyViolation { det: f64, threshold: f64 },

    #[error("PerturbationInfeasible for {datum}: {reason}")]
    PerturbationInfeasible { datum: String, reason: String },

    #[error("abscissa {x} outside span [{lo}, {hi}]")]
    OutOfSpan { x: f64, lo: f64, hi: f64 },

    #[error("config error: {0}")]
    Config(String),
}

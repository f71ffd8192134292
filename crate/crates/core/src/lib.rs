//! Nonlinear multipoint boundary value problems with an integral boundary
//! condition, solved by single shooting, together with the partial
//! derivatives of the solution with respect to every boundary datum.
//!
//! The problem is
//!
//! ```text
//! y^(n) = f(x, y, y', ..., y^(n-1)),            a < x < b
//! y^(i)(x_j) = y_ij,                            0 <= i < m_j, 1 <= j < k
//! y^(i)(x_k) + p * integral_c^d y(x) dx = y_ik, 0 <= i < m_k
//! ```
//!
//! with `a < x_1 < ... < x_k < c < d < b` and `m_1 + ... + m_k = n`.
//!
//! Sensitivities are obtained from the variational equation along the
//! solution, expanded in the fundamental basis at `x_1`, and are checked
//! against finite differences by the [`oracle`] module.

pub mod config;
pub mod error;
pub mod expr;
pub mod functional;
pub mod ivp;
pub mod linalg;
pub mod oracle;
pub mod problem;
pub mod sens;
pub mod shoot;

pub use error::{Error, Result};
pub use expr::{EvalEnv, Expr};
pub use problem::{DatumId, ProblemSpec, ValidatedProblem};
pub use sens::SensitivityTable;
pub use shoot::{Solution, SolverOptions};

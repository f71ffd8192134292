//! Initial value problems for `y^(n) = f(x, y, ..., y^(n-1))`, written as
//! first-order systems and integrated by an adaptive Dormand–Prince 5(4)
//! scheme with continuous output.
//!
//! [`integrate_variational`] carries the state together with the
//! fundamental matrix `Phi` of the variational equation
//! `z^(n) = sum_i df/dy_i * z^(i)`, so that `Phi` is the derivative of the
//! same numerical flow that produced the state.

mod dopri;
mod trajectory;

pub use dopri::{integrate, integrate_two_sided, Tolerance};
pub use trajectory::{Step, Trajectory};

use crate::expr::{EvalEnv, Expr};
use crate::problem::ValidatedProblem;
use crate::{Error, Result};

/// `y^(n) = f(x, y, ..., y^(n-1))` as the system `u' = F(x, u)` with
/// `u = (y, y', ..., y^(n-1))`.
#[derive(Debug, Clone, PartialEq)]
pub struct HigherOrderOde {
    order: usize,
    rhs: Expr,
}

impl HigherOrderOde {
    pub fn new(order: usize, rhs: Expr) -> Self {
        assert!(order >= 1);
        Self { order, rhs }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn rhs(&self) -> &Expr {
        &self.rhs
    }

    /// `f(x, u)`, i.e. `y^(n)` at the state `u`.
    pub fn highest_derivative(&self, x: f64, u: &[f64]) -> Result<f64> {
        Ok(self.rhs.eval_real(&EvalEnv::new(x, &u[..self.order]))?)
    }

    pub fn field(&self, x: f64, u: &[f64], du: &mut [f64]) -> Result<()> {
        let n = self.order;
        du[..n - 1].copy_from_slice(&u[1..n]);
        du[n - 1] = self.highest_derivative(x, u)?;
        Ok(())
    }

    /// Field of the augmented state `(u, Phi)` with `Phi` stored row-major,
    /// `Phi[i][j] = alpha_j^(i)`.
    pub fn variational_field(&self, x: f64, w: &[f64], dw: &mut [f64], grad: &mut [f64]) -> Result<()> {
        let n = self.order;
        let (u, phi) = w.split_at(n);
        let (du, dphi) = dw.split_at_mut(n);
        du[..n - 1].copy_from_slice(&u[1..n]);
        du[n - 1] = self.rhs.eval_with_gradient(&EvalEnv::new(x, u), grad)?;
        dphi[..(n - 1) * n].copy_from_slice(&phi[n..]);
        for j in 0..n {
            dphi[(n - 1) * n + j] = (0..n).map(|i| grad[i] * phi[i * n + j]).sum();
        }
        Ok(())
    }
}

/// Joint trajectory of the state and of the fundamental matrix with
/// `Phi(x_base) = I`. Column `j` of `Phi` holds `alpha_j` and its first
/// `n - 1` derivatives.
#[derive(Debug, Clone)]
pub struct FundamentalSystem {
    traj: Trajectory,
    n: usize,
    x_base: f64,
}

impl FundamentalSystem {
    pub fn trajectory(&self) -> &Trajectory {
        &self.traj
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn x_base(&self) -> f64 {
        self.x_base
    }

    pub fn span(&self) -> (f64, f64) {
        self.traj.span()
    }

    /// `(u, u', ..., u^(n-1))` at `x`.
    pub fn state(&self, x: f64) -> Result<Vec<f64>> {
        let mut w = self.traj.eval(x)?;
        w.truncate(self.n);
        Ok(w)
    }

    /// `Phi(x)` as rows, `m[i][j] = alpha_j^(i)(x)`.
    pub fn matrix(&self, x: f64) -> Result<Vec<Vec<f64>>> {
        let w = self.traj.eval(x)?;
        Ok(w[self.n..].chunks(self.n).map(<[f64]>::to_vec).collect())
    }

    /// Trajectory component holding `alpha_j^(i)`.
    pub fn basis_component(&self, i: usize, j: usize) -> usize {
        self.n + i * self.n + j
    }
}

/// Integrates state and fundamental matrix from `x_base` so that the result
/// covers `[min(lo, x_base), max(hi, x_base)]`.
pub fn integrate_variational(
    ode: &HigherOrderOde,
    x_base: f64,
    u0: &[f64],
    lo: f64,
    hi: f64,
    tol: Tolerance,
) -> Result<FundamentalSystem> {
    let n = ode.order();
    assert_eq!(u0.len(), n, "initial state has wrong length");
    let mut w0 = vec![0.0; n + n * n];
    w0[..n].copy_from_slice(u0);
    for j in 0..n {
        w0[n + j * n + j] = 1.0;
    }
    let mut grad = vec![0.0; n];
    let traj = integrate_two_sided(
        |x, w, dw| ode.variational_field(x, w, dw, &mut grad),
        x_base,
        &w0,
        lo,
        hi,
        tol,
    )?;
    Ok(FundamentalSystem { traj, n, x_base })
}

/// Fundamental system of a validated problem based at `x_base`, covering at
/// least `[x_1, d]` and `span`, which must lie inside `(a, b)`.
pub fn integrate_fundamental(
    vp: &ValidatedProblem,
    x_base: f64,
    u0: &[f64],
    span: (f64, f64),
    tol: Tolerance,
) -> Result<FundamentalSystem> {
    let lo = span.0.min(vp.point(1)).min(x_base);
    let hi = span.1.max(vp.d()).max(x_base);
    check_inside(vp, lo, hi)?;
    integrate_variational(vp.ode(), x_base, u0, lo, hi, tol)
}

pub(crate) fn check_inside(vp: &ValidatedProblem, lo: f64, hi: f64) -> Result<()> {
    let (a, b) = vp.interval();
    if lo <= a || hi >= b {
        return Err(Error::ExtensionFailure {
            x: if lo <= a { lo } else { hi },
            reason: format!("integration span [{lo}, {hi}] leaves ({a}, {b})"),
        });
    }
    Ok(())
}

//! Single shooting from `x_1` with a damped Newton iteration.
//!
//! The unknowns are `u^(i)(x_1)` for `m_1 <= i < n`. The Jacobian of the
//! residual is read from the fundamental system integrated jointly with the
//! state: entry `(q, j)` is the `q`-th remaining boundary functional applied
//! to `alpha_{m_1 + j}`.

use std::sync::Arc;

use crate::functional::{Profile, QuadratureRule};
use crate::ivp::{check_inside, integrate_variational, FundamentalSystem, Tolerance};
use crate::linalg::{norm_inf, Lu};
use crate::problem::ValidatedProblem;
use crate::sens::{apply_functional, functionals, BoundaryFunctional};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub tol: Tolerance,
    pub quad_nodes: usize,
    pub max_iter: usize,
    /// Initial guess for the `n - m_1` free initial values; zeros when absent.
    pub guess: Option<Vec<f64>>,
    /// Extra window the final trajectory must cover besides `[x_1, d]`.
    pub cover: Option<(f64, f64)>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: Tolerance::default(),
            quad_nodes: 5,
            max_iter: 50,
            guess: None,
            cover: None,
        }
    }
}

pub const MAX_HALVINGS: usize = 20;
const PIVOT_RTOL: f64 = 1e-12;
const RESIDUAL_RTOL: f64 = 1e-10;

/// A converged shooting solution together with its fundamental system at `x_1`.
#[derive(Debug, Clone)]
pub struct Solution {
    problem: ValidatedProblem,
    system: Arc<FundamentalSystem>,
    unknowns: Vec<f64>,
    residual_norm: f64,
    iterations: usize,
    history: Vec<f64>,
    rule: QuadratureRule,
    options: SolverOptions,
}

impl Solution {
    pub fn problem(&self) -> &ValidatedProblem {
        &self.problem
    }

    pub fn system(&self) -> &FundamentalSystem {
        &self.system
    }

    pub(crate) fn system_arc(&self) -> Arc<FundamentalSystem> {
        Arc::clone(&self.system)
    }

    /// Converged `u^(i)(x_1)`, `m_1 <= i < n`.
    pub fn unknowns(&self) -> &[f64] {
        &self.unknowns
    }

    pub fn initial_state(&self) -> Vec<f64> {
        assemble_initial_state(&self.problem, &self.unknowns)
    }

    pub fn residual_norm(&self) -> f64 {
        self.residual_norm
    }

    /// Number of Newton updates taken.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// `||R||_inf` at every iterate, starting with the initial guess.
    pub fn residual_history(&self) -> &[f64] {
        &self.history
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    /// `u^(order)(x)`.
    pub fn u(&self, x: f64, order: usize) -> Result<f64> {
        Profile::solution().eval(self.system.trajectory(), x, order)
    }

    pub fn state(&self, x: f64) -> Result<Vec<f64>> {
        self.system.state(x)
    }

    /// `u^(n)(x)` from the differential equation.
    pub fn highest_derivative(&self, x: f64) -> Result<f64> {
        let state = self.state(x)?;
        self.problem.ode().highest_derivative(x, &state)
    }

    /// `integral_c^d u(x) dx` with the solution's quadrature rule.
    pub fn integral_of_u(&self) -> Result<f64> {
        crate::functional::integral(
            self.system.trajectory(),
            &Profile::solution(),
            self.problem.c(),
            self.problem.d(),
            &self.rule,
        )
    }
}

/// Initial state at `x_1`: the prescribed `y_{i,1}` followed by `s`.
pub fn assemble_initial_state(vp: &ValidatedProblem, s: &[f64]) -> Vec<f64> {
    let m1 = vp.multiplicity(1);
    assert_eq!(s.len(), vp.n() - m1, "expected n - m_1 shooting unknowns");
    let mut u0 = Vec::with_capacity(vp.n());
    u0.extend_from_slice(&vp.data()[..m1]);
    u0.extend_from_slice(s);
    u0
}

/// Functionals not located at `x_1`; these define the shooting residual.
fn remote_functionals(vp: &ValidatedProblem) -> Vec<(usize, BoundaryFunctional)> {
    functionals(vp)
        .into_iter()
        .enumerate()
        .filter(|(_, f)| f.point > 1)
        .collect()
}

struct Shot {
    system: FundamentalSystem,
    residual: Vec<f64>,
    norm: f64,
}

fn shoot(vp: &ValidatedProblem, s: &[f64], lo: f64, hi: f64, opts: &SolverOptions, rule: &QuadratureRule) -> Result<Shot> {
    let u0 = assemble_initial_state(vp, s);
    let system = integrate_variational(vp.ode(), vp.point(1), &u0, lo, hi, opts.tol)?;
    let traj = system.trajectory();
    let u = Profile::solution();
    let residual = remote_functionals(vp)
        .into_iter()
        .map(|(q, f)| Ok(apply_functional(&f, traj, &u, vp, rule)? - vp.data()[q]))
        .collect::<Result<Vec<f64>>>()?;
    let norm = norm_inf(&residual);
    Ok(Shot { system, residual, norm })
}

fn jacobian(vp: &ValidatedProblem, system: &FundamentalSystem, rule: &QuadratureRule) -> Result<Vec<Vec<f64>>> {
    let n = vp.n();
    let m1 = vp.multiplicity(1);
    let traj = system.trajectory();
    remote_functionals(vp)
        .into_iter()
        .map(|(_, f)| {
            (m1..n)
                .map(|j| apply_functional(&f, traj, &Profile::basis(n, j), vp, rule))
                .collect()
        })
        .collect()
}

fn forward_span(vp: &ValidatedProblem, opts: &SolverOptions) -> (f64, f64) {
    let hi = opts.cover.map_or(vp.d(), |(_, h)| h.max(vp.d()));
    (vp.point(1), hi)
}

/// Residual of the remote boundary functionals for the free initial values `s`.
pub fn residual(vp: &ValidatedProblem, s: &[f64], opts: &SolverOptions) -> Result<Vec<f64>> {
    let rule = QuadratureRule::gauss_legendre(opts.quad_nodes)?;
    let (lo, hi) = forward_span(vp, opts);
    Ok(shoot(vp, s, lo, hi, opts, &rule)?.residual)
}

/// `(n - m_1) x (n - m_1)` derivative of [`residual`] with respect to `s`.
pub fn residual_jacobian(vp: &ValidatedProblem, s: &[f64], opts: &SolverOptions) -> Result<Vec<Vec<f64>>> {
    let rule = QuadratureRule::gauss_legendre(opts.quad_nodes)?;
    let (lo, hi) = forward_span(vp, opts);
    let shot = shoot(vp, s, lo, hi, opts, &rule)?;
    jacobian(vp, &shot.system, &rule)
}

pub fn newton_solve(vp: &ValidatedProblem, opts: &SolverOptions) -> Result<Solution> {
    let rule = QuadratureRule::gauss_legendre(opts.quad_nodes)?;
    let unknowns = vp.n() - vp.multiplicity(1);
    let mut s = match &opts.guess {
        Some(g) if g.len() != unknowns => {
            return Err(Error::Config(format!(
                "initial guess has {} entries, expected n - m_1 = {unknowns}",
                g.len()
            )))
        }
        Some(g) => g.clone(),
        None => vec![0.0; unknowns],
    };
    let (x1, hi) = forward_span(vp, opts);
    let lo = opts.cover.map_or(x1, |(l, _)| l.min(x1));
    check_inside(vp, lo, hi)?;

    let target = RESIDUAL_RTOL * (1.0 + vp.data_scale());
    let mut shot = shoot(vp, &s, x1, hi, opts, &rule)?;
    let mut history = vec![shot.norm];
    let mut iterations = 0;

    while shot.norm > target {
        if iterations == opts.max_iter {
            return Err(Error::MaxIterations { iterations, residual: shot.norm });
        }
        let jac = jacobian(vp, &shot.system, &rule)?;
        let scale = jac.iter().flatten().fold(1.0_f64, |m, v| m.max(v.abs()));
        let lu = Lu::factor(&jac);
        let threshold = PIVOT_RTOL * scale;
        if lu.min_pivot() < threshold {
            return Err(Error::SingularJacobian { pivot: lu.min_pivot(), threshold, s });
        }
        let minus_r: Vec<f64> = shot.residual.iter().map(|r| -r).collect();
        let step = lu.solve(&minus_r);

        let mut lambda = 1.0;
        let mut halvings = 0;
        let next = loop {
            let trial: Vec<f64> = s.iter().zip(&step).map(|(a, d)| a + lambda * d).collect();
            let attempt = shoot(vp, &trial, x1, hi, opts, &rule);
            match attempt {
                Ok(t) if t.norm < shot.norm || halvings == MAX_HALVINGS => break (trial, t),
                Err(e) if halvings == MAX_HALVINGS => return Err(e),
                _ => {
                    lambda *= 0.5;
                    halvings += 1;
                }
            }
        };
        s = next.0;
        shot = next.1;
        iterations += 1;
        history.push(shot.norm);
    }

    let system = if lo < x1 {
        let u0 = assemble_initial_state(vp, &s);
        integrate_variational(vp.ode(), x1, &u0, lo, hi, opts.tol)?
    } else {
        shot.system
    };

    Ok(Solution {
        problem: vp.clone(),
        system: Arc::new(system),
        unknowns: s,
        residual_norm: shot.norm,
        iterations,
        history,
        rule,
        options: opts.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{validate, ProblemSpec};

    fn t1() -> ValidatedProblem {
        validate(ProblemSpec::t1_linear()).unwrap()
    }

    #[test]
    fn initial_state_assembly() {
        assert_eq!(assemble_initial_state(&t1(), &[7.0]), vec![0.0, 7.0]);
        let t2 = validate(ProblemSpec::t2_pendulum()).unwrap();
        assert_eq!(assemble_initial_state(&t2, &[0.3]), vec![0.0, 0.3]);
    }

    #[test]
    fn t1_residual_is_affine() {
        let opts = SolverOptions::default();
        for (s, expected) in [(1.0, 0.0), (0.0, -3.0), (2.0, 3.0)] {
            let r = residual(&t1(), &[s], &opts).unwrap();
            assert_eq!(r.len(), 1);
            assert!((r[0] - expected).abs() < 1e-10, "s = {s}: {r:?}");
        }
    }

    #[test]
    fn t1_jacobian() {
        let j = residual_jacobian(&t1(), &[0.4], &SolverOptions::default()).unwrap();
        assert!((j[0][0] - 3.0).abs() < 1e-9);
        let spec = ProblemSpec { p: 0.0, ..ProblemSpec::t1_linear() };
        let j = residual_jacobian(&validate(spec).unwrap(), &[0.0], &SolverOptions::default()).unwrap();
        assert!((j[0][0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn t1_one_newton_step() {
        let sol = newton_solve(&t1(), &SolverOptions::default()).unwrap();
        assert_eq!(sol.iterations(), 1);
        assert!((sol.unknowns()[0] - 1.0).abs() < 1e-12);
        assert!(sol.residual_norm() <= 1e-10);
    }

    #[test]
    fn singular_shooting_matrix() {
        let spec = ProblemSpec { p: -0.5, ..ProblemSpec::t1_linear() };
        let err = newton_solve(&validate(spec).unwrap(), &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, Error::SingularJacobian { .. }), "{err}");
    }

    #[test]
    fn max_iterations() {
        let opts = SolverOptions { max_iter: 0, ..SolverOptions::default() };
        let err = newton_solve(&t1(), &opts).unwrap_err();
        assert!(matches!(err, Error::MaxIterations { iterations: 0, .. }));
    }

    #[test]
    fn guess_length_checked() {
        let opts = SolverOptions { guess: Some(vec![1.0, 2.0]), ..SolverOptions::default() };
        assert!(matches!(newton_solve(&t1(), &opts), Err(Error::Config(_))));
    }

    #[test]
    fn cover_extends_trajectory() {
        let opts = SolverOptions { cover: Some((-0.5, 3.0)), ..SolverOptions::default() };
        let sol = newton_solve(&t1(), &opts).unwrap();
        assert_eq!(sol.system().span(), (-0.5, 3.0));
        assert!((sol.u(-0.5, 0).unwrap() + 0.5).abs() < 1e-12);
        let opts = SolverOptions { cover: Some((-2.0, 3.0)), ..SolverOptions::default() };
        assert!(matches!(newton_solve(&t1(), &opts), Err(Error::ExtensionFailure { .. })));
    }
}

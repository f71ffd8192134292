//! Independent checks of the variational sensitivities.
//!
//! Finite differences here re-solve perturbed boundary value problems from
//! scratch and never touch the fundamental system or `M`; they share only
//! the shooting solver with the code under test.

use rayon::prelude::*;
use serde::Serialize;

use crate::expr::Expr;
use crate::ivp::{integrate_two_sided, integrate_variational, HigherOrderOde, Tolerance};
use crate::problem::{DatumId, ValidatedProblem};
use crate::sens::{sensitivities_for, uniform_grid, SignConvention};
use crate::shoot::{newton_solve, Solution, SolverOptions};
use crate::{Error, Result};

/// Default Richardson base step relative to `max(1, |datum|)`.
pub const DEFAULT_H0_FACTOR: f64 = 1e-3;

/// Default base step for `id`: `1e-3 * max(1, |datum|)`.
pub fn default_h0(vp: &ValidatedProblem, id: DatumId) -> f64 {
    DEFAULT_H0_FACTOR * vp.datum_value(id).abs().max(1.0)
}

fn solve_perturbed(
    vp: &ValidatedProblem,
    id: DatumId,
    value: f64,
    grid: &[f64],
    opts: &SolverOptions,
) -> Result<Solution> {
    let perturbed = vp.with_datum(id, value)?;
    let lo = grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let opts = SolverOptions { cover: Some((lo, hi)), ..opts.clone() };
    newton_solve(&perturbed, &opts)
}

fn sample_u(sol: &Solution, grid: &[f64], order: usize) -> Result<Vec<f64>> {
    grid.iter().map(|&x| sol.u(x, order)).collect()
}

/// Richardson-extrapolated central difference of `u` with respect to `id`,
/// sampled on `grid`: `(4 D(h0/2) - D(h0)) / 3`.
pub fn fd_sensitivity(
    vp: &ValidatedProblem,
    id: DatumId,
    grid: &[f64],
    h0: f64,
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    let theta = vp.datum_value(id);
    let central = |h: f64| -> Result<Vec<f64>> {
        let plus = sample_u(&solve_perturbed(vp, id, theta + h, grid, opts)?, grid, 0)?;
        let minus = sample_u(&solve_perturbed(vp, id, theta - h, grid, opts)?, grid, 0)?;
        Ok(plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * h)).collect())
    };
    let coarse = central(h0)?;
    let fine = central(h0 / 2.0)?;
    Ok(fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    /// Base FD step; `None` selects [`default_h0`] per datum.
    pub h0: Option<f64>,
    pub tol_rel: f64,
    /// Allowed `max_q |L_q(Z) - t_q|`, scaled by `1 + data scale`.
    pub bc_tol: f64,
    pub grid_points: usize,
    pub signs: SignConvention,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            h0: None,
            tol_rel: 1e-5,
            bc_tol: 1e-8,
            grid_points: 101,
            signs: SignConvention::Leibniz,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DatumCheck {
    pub datum: DatumId,
    pub sup_abs: f64,
    pub sup_rel: f64,
    pub bc_residual: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub signs: SignConvention,
    pub tol_rel: f64,
    pub grid_points: usize,
    pub data: Vec<DatumCheck>,
    pub pass: bool,
}

impl VerificationReport {
    pub fn get(&self, id: DatumId) -> Option<&DatumCheck> {
        self.data.iter().find(|c| c.datum == id)
    }
}

/// Compares every variational sensitivity with its finite-difference estimate
/// and checks the boundary values `L_q(Z)` against the targets.
pub fn verify(vp: &ValidatedProblem, opts: &SolverOptions, vopts: &VerifyOptions) -> Result<VerificationReport> {
    if vopts.grid_points < 101 {
        return Err(Error::Config(format!(
            "verification grid needs at least 101 points, got {}",
            vopts.grid_points
        )));
    }
    let (sol, table) = sensitivities_for(vp, opts, vopts.signs)?;
    let grid = uniform_grid(vp.point(1), vp.d(), vopts.grid_points);
    let bc_limit = vopts.bc_tol * (1.0 + vp.data_scale());

    let data = table
        .entries()
        .par_iter()
        .map(|z| {
            let h0 = vopts.h0.unwrap_or_else(|| default_h0(vp, z.datum));
            let fd = fd_sensitivity(vp, z.datum, &grid, h0, opts)?;
            let zs = z.sample(&grid)?;
            let sup_abs = zs.iter().zip(&fd).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            let scale = zs.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
            let sup_rel = sup_abs / scale;
            let bc_residual = z.boundary_residual(vp, sol.rule())?;
            Ok(DatumCheck {
                datum: z.datum,
                sup_abs,
                sup_rel,
                bc_residual,
                pass: sup_rel <= vopts.tol_rel && bc_residual <= bc_limit,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pass = data.iter().all(|c| c.pass);
    Ok(VerificationReport {
        signs: vopts.signs,
        tol_rel: vopts.tol_rel,
        grid_points: vopts.grid_points,
        data,
        pass,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PeanoReport {
    /// `sup |du/dx0 - (-sum_i u^(i+1)(x0) alpha_i)|` over the span.
    pub residual: f64,
    /// `sup |du/dx0|` from finite differences, for scale.
    pub sup_derivative: f64,
}

/// Checks `du/dx0 (x) = -sum_{i<n} u^(i+1)(x0) alpha_i(x)` for the initial
/// value problem `y^(n) = rhs`, `y^(i)(x0) = init[i]`, on `span`.
/// `u^(n)(x0)` is taken from `rhs`.
pub fn peano_check(
    rhs: &Expr,
    n: usize,
    x0: f64,
    init: &[f64],
    span: (f64, f64),
    tol: Tolerance,
) -> Result<PeanoReport> {
    if init.len() != n {
        return Err(Error::Config(format!("{} initial values for order {n}", init.len())));
    }
    let ode = HigherOrderOde::new(n, rhs.clone());
    let grid = uniform_grid(span.0, span.1, 101);
    let h0 = DEFAULT_H0_FACTOR * x0.abs().max(1.0);

    let system = integrate_variational(&ode, x0, init, span.0, span.1, tol)?;
    let mut next = init[1..].to_vec();
    next.push(ode.highest_derivative(x0, init)?);
    let predicted = grid
        .iter()
        .map(|&x| {
            let phi = system.matrix(x)?;
            Ok(-next.iter().zip(&phi[0]).map(|(a, b)| a * b).sum::<f64>())
        })
        .collect::<Result<Vec<f64>>>()?;

    let sample = |start: f64| -> Result<Vec<f64>> {
        let traj = integrate_two_sided(|x, u, du| ode.field(x, u, du), start, init, span.0, span.1, tol)?;
        grid.iter().map(|&x| traj.eval_component(x, 0)).collect()
    };
    let central = |h: f64| -> Result<Vec<f64>> {
        let plus = sample(x0 + h)?;
        let minus = sample(x0 - h)?;
        Ok(plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * h)).collect())
    };
    let coarse = central(h0)?;
    let fine = central(h0 / 2.0)?;
    let fd: Vec<f64> = fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect();

    let residual = fd.iter().zip(&predicted).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    let sup_derivative = fd.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    Ok(PeanoReport { residual, sup_derivative })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepCell {
    pub datum: DatumId,
    pub delta: f64,
    /// `sup_{x, i} |u_delta^(i)(x) - u^(i)(x)|`; NaN when the cell failed.
    pub sup_deviation: f64,
    /// Deviation at the previous delta divided by this one.
    pub ratio_to_prev: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuityReport {
    pub deltas: Vec<f64>,
    pub cells: Vec<SweepCell>,
}

impl ContinuityReport {
    pub fn row(&self, id: DatumId) -> Vec<&SweepCell> {
        self.cells.iter().filter(|c| c.datum == id).collect()
    }
}

/// Perturbs each datum by `+delta`, one at a time, and records the uniform
/// deviation of `u, ..., u^(n-1)` over `[x_1, d]` of the unperturbed problem.
pub fn sweep(vp: &ValidatedProblem, deltas: &[f64], opts: &SolverOptions) -> Result<ContinuityReport> {
    if deltas.is_empty() {
        return Err(Error::Config("empty delta list".into()));
    }
    if deltas.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
        return Err(Error::Config("deltas must be finite and nonnegative".into()));
    }
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("deltas must be strictly decreasing".into()));
    }
    let base = newton_solve(vp, opts)?;
    let grid = uniform_grid(vp.point(1), vp.d(), 101);
    let n = vp.n();
    let reference: Vec<Vec<f64>> = (0..n)
        .map(|i| sample_u(&base, &grid, i))
        .collect::<Result<_>>()?;

    let jobs: Vec<(DatumId, f64)> = vp
        .data_ids()
        .iter()
        .flat_map(|&id| deltas.iter().map(move |&d| (id, d)))
        .collect();
    let deviations: Vec<std::result::Result<f64, String>> = jobs
        .par_iter()
        .map(|&(id, delta)| {
            let run = || -> Result<f64> {
                let sol = solve_perturbed(vp, id, vp.datum_value(id) + delta, &grid, opts)?;
                let mut sup = 0.0_f64;
                for (i, reference) in reference.iter().enumerate() {
                    for (v, r) in sample_u(&sol, &grid, i)?.iter().zip(reference) {
                        sup = sup.max((v - r).abs());
                    }
                }
                Ok(sup)
            };
            run().map_err(|e| e.to_string())
        })
        .collect();

    let mut cells = Vec::with_capacity(jobs.len());
    for (idx, (&(datum, delta), dev)) in jobs.iter().zip(deviations).enumerate() {
        let (sup_deviation, error) = match dev {
            Ok(v) => (v, None),
            Err(e) => (f64::NAN, Some(e)),
        };
        let ratio_to_prev = (idx % deltas.len() != 0).then(|| {
            let prev: &SweepCell = &cells[idx - 1];
            prev.sup_deviation / sup_deviation
        });
        cells.push(SweepCell { datum, delta, sup_deviation, ratio_to_prev, error });
    }
    Ok(ContinuityReport { deltas: deltas.to_vec(), cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::problem::{validate, ProblemSpec};

    #[test]
    fn fd_on_linear_fixture() {
        let vp = validate(ProblemSpec::t1_linear()).unwrap();
        let opts = SolverOptions::default();
        let grid = [1.0, 1.5];
        let y02 = fd_sensitivity(&vp, DatumId::Y { r: 0, l: 2 }, &grid, 1e-3, &opts).unwrap();
        assert!((y02[0] - 1.0 / 3.0).abs() < 1e-8);
        let p = fd_sensitivity(&vp, DatumId::P, &grid, 1e-3, &opts).unwrap();
        assert!((p[1] + 1.0).abs() < 1e-7);
        let c = fd_sensitivity(&vp, DatumId::C, &grid, 1e-3, &opts).unwrap();
        assert!((c[0] - 0.5).abs() < 1e-7);
    }

    #[test]
    fn infeasible_perturbation() {
        let vp = validate(ProblemSpec::t1_linear()).unwrap();
        let err = fd_sensitivity(&vp, DatumId::X(2), &[0.0], 0.6, &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, Error::PerturbationInfeasible { .. }));
    }

    #[test]
    fn peano_trivial_solution() {
        let rhs = parse_expr("y0*y1").unwrap();
        let r = peano_check(&rhs, 2, 0.5, &[0.0, 0.0], (0.0, 2.0), Tolerance::default()).unwrap();
        assert_eq!(r.residual, 0.0);
        assert_eq!(r.sup_derivative, 0.0);
    }

    #[test]
    fn sweep_argument_checks() {
        let vp = validate(ProblemSpec::t1_linear()).unwrap();
        let opts = SolverOptions::default();
        assert!(sweep(&vp, &[], &opts).is_err());
        assert!(sweep(&vp, &[1e-3, 1e-2], &opts).is_err());
        assert!(sweep(&vp, &[-1e-3], &opts).is_err());
    }

    #[test]
    fn zero_delta_gives_zero_deviation() {
        let vp = validate(ProblemSpec::t2_pendulum()).unwrap();
        let report = sweep(&vp, &[0.0], &SolverOptions::default()).unwrap();
        assert!(report.cells.iter().all(|c| c.sup_deviation == 0.0));
    }

    #[test]
    fn infeasible_sweep_cells_are_nan() {
        let vp = validate(ProblemSpec::t1_linear()).unwrap();
        let report = sweep(&vp, &[0.6, 1e-3], &SolverOptions::default()).unwrap();
        let x2 = report.row(DatumId::X(2));
        assert!(x2[0].sup_deviation.is_nan() && x2[0].error.is_some());
        assert!(x2[1].sup_deviation.is_finite());
    }
}

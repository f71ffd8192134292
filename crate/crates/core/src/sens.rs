//! Partial derivatives of the solution with respect to the boundary data.
//!
//! Each sensitivity solves the variational equation along `u` subject to
//! inhomogeneous boundary functionals. Writing it as `Z = sum_j c_j alpha_j`
//! in the fundamental basis at `x_1` reduces the problem to `M c = t`, where
//! `M[q][j] = L_q(alpha_j)` and `t` is the datum's target vector. One LU
//! factorization of `M` serves every datum.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::functional::{integral, Profile, QuadratureRule};
use crate::ivp::{FundamentalSystem, Trajectory};
use crate::linalg::{norm_inf, Lu};
use crate::problem::{DatumId, ValidatedProblem};
use crate::shoot::{assemble_initial_state, newton_solve, Solution, SolverOptions};
use crate::{Error, Result};

/// `z -> z^(order)(x_point)`, plus `p * integral_c^d z` on the last point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryFunctional {
    /// 1-based point index `j`.
    pub point: usize,
    pub order: usize,
    pub integral: bool,
}

impl fmt::Display for BoundaryFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "z^({})(x_{})", self.order, self.point)?;
        if self.integral {
            f.write_str(" + p*int_c^d z")?;
        }
        Ok(())
    }
}

/// The `n` boundary functionals, grouped by point and ordered by derivative.
pub fn functionals(vp: &ValidatedProblem) -> Vec<BoundaryFunctional> {
    let k = vp.k();
    (1..=k)
        .flat_map(|point| {
            (0..vp.multiplicity(point)).map(move |order| BoundaryFunctional {
                point,
                order,
                integral: point == k,
            })
        })
        .collect()
}

/// Row of the functional `(l, r)` in [`functionals`] order.
pub fn functional_index(vp: &ValidatedProblem, l: usize, r: usize) -> usize {
    vp.data_index(r, l)
}

pub fn apply_functional(
    f: &BoundaryFunctional,
    traj: &Trajectory,
    z: &Profile,
    vp: &ValidatedProblem,
    rule: &QuadratureRule,
) -> Result<f64> {
    let point = z.eval(traj, vp.point(f.point), f.order)?;
    if !f.integral || vp.p() == 0.0 {
        return Ok(point);
    }
    Ok(point + vp.p() * integral(traj, z, vp.c(), vp.d(), rule)?)
}

/// Signs of the `c` and `d` targets.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SignConvention {
    /// From differentiating the integral under its limits: `+p u(c)`, `-p u(d)`.
    #[default]
    Leibniz,
    /// The opposite signs, `-p u(c)` and `+p u(d)`, kept for comparison.
    Printed,
}

/// Below this fraction of the Hadamard bound `M` is treated as singular.
pub const DISCONJUGACY_RTOL: f64 = 1e-10;

/// The boundary-functional matrix of a fundamental system and its LU factors.
#[derive(Debug, Clone)]
pub struct FunctionalMatrix {
    pub rows: Vec<Vec<f64>>,
    pub det: f64,
    lu: Lu,
}

impl FunctionalMatrix {
    /// `M[q][j] = L_q(alpha_j)` without the nonsingularity check.
    pub fn along(vp: &ValidatedProblem, system: &FundamentalSystem, rule: &QuadratureRule) -> Result<Self> {
        let n = vp.n();
        let traj = system.trajectory();
        let rows = functionals(vp)
            .iter()
            .map(|f| {
                (0..n)
                    .map(|j| apply_functional(f, traj, &Profile::basis(n, j), vp, rule))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let lu = Lu::factor(&rows);
        Ok(Self { det: lu.det(), rows, lu })
    }

    /// `DISCONJUGACY_RTOL` times the product of Euclidean row norms.
    pub fn threshold(&self) -> f64 {
        DISCONJUGACY_RTOL
            * self
                .rows
                .iter()
                .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
                .product::<f64>()
    }

    /// Fails with [`Error::DisconjugacyViolation`] when `M` is numerically singular.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn check(self) -> Result<Self> {
        let threshold = self.threshold();
        if !(self.det.abs() >= threshold) || self.det == 0.0 {
            return Err(Error::DisconjugacyViolation { det: self.det, threshold });
        }
        Ok(self)
    }

    pub fn solve(&self, target: &[f64]) -> Vec<f64> {
        self.lu.solve(target)
    }
}

/// `M` along a converged solution, checked for nonsingularity.
pub fn build_m(sol: &Solution) -> Result<FunctionalMatrix> {
    FunctionalMatrix::along(sol.problem(), sol.system(), sol.rule())?.check()
}

/// Required values `L_q(Z)` for the sensitivity with respect to `id`.
pub fn target_vector(sol: &Solution, id: DatumId, signs: SignConvention) -> Result<Vec<f64>> {
    let vp = sol.problem();
    if !vp.is_valid_datum(id) {
        return Err(Error::Config(format!("datum {id} does not exist for this problem")));
    }
    let n = vp.n();
    let k = vp.k();
    let p = vp.p();
    let mut t = vec![0.0; n];
    let last_rows = functional_index(vp, k, 0)..n;
    match id {
        DatumId::Y { r, l } => t[functional_index(vp, l, r)] = 1.0,
        DatumId::X(l) => {
            let x = vp.point(l);
            let state = sol.state(x)?;
            for i in 0..vp.multiplicity(l) {
                let next = if i + 1 < n { state[i + 1] } else { sol.highest_derivative(x)? };
                t[functional_index(vp, l, i)] = -next;
            }
        }
        DatumId::C => {
            let v = p * sol.u(vp.c(), 0)?;
            let v = match signs {
                SignConvention::Leibniz => v,
                SignConvention::Printed => -v,
            };
            t[last_rows].fill(v);
        }
        DatumId::D => {
            let v = p * sol.u(vp.d(), 0)?;
            let v = match signs {
                SignConvention::Leibniz => -v,
                SignConvention::Printed => v,
            };
            t[last_rows].fill(v);
        }
        DatumId::P => t[last_rows].fill(-sol.integral_of_u()?),
    }
    Ok(t)
}

/// `Z = sum_j coeffs[j] * alpha_j`, the sensitivity with respect to one datum.
#[derive(Debug, Clone)]
pub struct Sensitivity {
    pub datum: DatumId,
    pub coeffs: Vec<f64>,
    pub target: Vec<f64>,
    system: Arc<FundamentalSystem>,
}

impl Sensitivity {
    pub fn profile(&self) -> Profile {
        Profile::combination(self.coeffs.len(), &self.coeffs)
    }

    /// `Z^(order)(x)`.
    pub fn eval(&self, x: f64, order: usize) -> Result<f64> {
        self.profile().eval(self.system.trajectory(), x, order)
    }

    pub fn sample(&self, grid: &[f64]) -> Result<Vec<f64>> {
        let profile = self.profile();
        grid.iter()
            .map(|&x| profile.eval(self.system.trajectory(), x, 0))
            .collect()
    }

    /// `L_q(Z)` for every functional, evaluated through `Z` itself.
    pub fn functional_values(&self, vp: &ValidatedProblem, rule: &QuadratureRule) -> Result<Vec<f64>> {
        let profile = self.profile();
        functionals(vp)
            .iter()
            .map(|f| apply_functional(f, self.system.trajectory(), &profile, vp, rule))
            .collect()
    }

    /// `max_q |L_q(Z) - t_q|`.
    pub fn boundary_residual(&self, vp: &ValidatedProblem, rule: &QuadratureRule) -> Result<f64> {
        let values = self.functional_values(vp, rule)?;
        Ok(values
            .iter()
            .zip(&self.target)
            .fold(0.0, |m, (v, t)| m.max((v - t).abs())))
    }
}

fn solve_with(sol: &Solution, m: &FunctionalMatrix, id: DatumId, signs: SignConvention) -> Result<Sensitivity> {
    let target = target_vector(sol, id, signs)?;
    let coeffs = m.solve(&target);
    Ok(Sensitivity { datum: id, coeffs, target, system: sol.system_arc() })
}

pub fn solve_sensitivity(sol: &Solution, id: DatumId, signs: SignConvention) -> Result<Sensitivity> {
    let m = build_m(sol)?;
    solve_with(sol, &m, id, signs)
}

/// Sensitivities for every datum of the problem, in enumeration order.
#[derive(Debug, Clone)]
pub struct SensitivityTable {
    pub matrix: FunctionalMatrix,
    pub signs: SignConvention,
    entries: Vec<Sensitivity>,
}

impl SensitivityTable {
    pub fn entries(&self) -> &[Sensitivity] {
        &self.entries
    }

    pub fn get(&self, id: DatumId) -> Option<&Sensitivity> {
        self.entries.iter().find(|s| s.datum == id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn all_sensitivities(sol: &Solution, signs: SignConvention) -> Result<SensitivityTable> {
    let matrix = build_m(sol)?;
    let entries = sol
        .problem()
        .data_ids()
        .iter()
        .map(|&id| solve_with(sol, &matrix, id, signs))
        .collect::<Result<Vec<_>>>()?;
    Ok(SensitivityTable { matrix, signs, entries })
}

/// Solves the problem and computes the full sensitivity table.
///
/// A singular shooting Jacobian is re-examined through `M` at the failing
/// iterate; since `M` is block lower triangular with the Jacobian as its
/// trailing block, this reports the disconjugacy violation directly.
pub fn sensitivities_for(
    vp: &ValidatedProblem,
    opts: &SolverOptions,
    signs: SignConvention,
) -> Result<(Solution, SensitivityTable)> {
    match newton_solve(vp, opts) {
        Ok(sol) => {
            let table = all_sensitivities(&sol, signs)?;
            Ok((sol, table))
        }
        Err(Error::SingularJacobian { pivot, threshold, s }) => {
            let rule = QuadratureRule::gauss_legendre(opts.quad_nodes)?;
            let u0 = assemble_initial_state(vp, &s);
            let system = crate::ivp::integrate_fundamental(vp, vp.point(1), &u0, (vp.point(1), vp.d()), opts.tol)?;
            FunctionalMatrix::along(vp, &system, &rule)?.check()?;
            Err(Error::SingularJacobian { pivot, threshold, s })
        }
        Err(e) => Err(e),
    }
}

/// Magnitudes of the linear relations among sensitivities.
#[derive(Debug, Clone, Serialize)]
pub struct CombinationReport {
    pub residuals: Vec<(String, f64)>,
}

impl CombinationReport {
    pub fn max(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, (_, r)| m.max(*r))
    }
}

/// Checks, on a 101-point grid over `[x_1, d]`,
///
/// ```text
/// X_l + sum_{i<m_l} u^(i+1)(x_l) Y_{i,l} = 0      for every l
/// Z - t * sum_{i<m_k} Y_{i,k} = 0                 for Z in {C, D, P}
/// ```
///
/// where `t` is the common value of the datum's target on the `x_k` rows.
pub fn combination_check(sol: &Solution, table: &SensitivityTable) -> Result<CombinationReport> {
    let vp = sol.problem();
    let n = vp.n();
    let k = vp.k();
    let grid = uniform_grid(vp.point(1), vp.d(), 101);
    let get = |id: DatumId| {
        table
            .get(id)
            .ok_or_else(|| Error::Config(format!("table lacks {id}")))
    };
    let sup = |terms: &[(f64, &Sensitivity)]| -> Result<f64> {
        let mut m = 0.0_f64;
        for &x in &grid {
            let mut acc = 0.0;
            for (w, s) in terms {
                acc += w * s.eval(x, 0)?;
            }
            m = m.max(acc.abs());
        }
        Ok(m)
    };

    let mut residuals = Vec::new();
    for l in 1..=k {
        let x = vp.point(l);
        let state = sol.state(x)?;
        let mut terms = vec![(1.0, get(DatumId::X(l))?)];
        for i in 0..vp.multiplicity(l) {
            let next = if i + 1 < n { state[i + 1] } else { sol.highest_derivative(x)? };
            terms.push((next, get(DatumId::Y { r: i, l })?));
        }
        residuals.push((format!("x:{l}"), sup(&terms)?));
    }
    let last = functional_index(vp, k, 0);
    for id in [DatumId::C, DatumId::D, DatumId::P] {
        let z = get(id)?;
        let t = z.target[last];
        let mut terms = vec![(1.0, z)];
        for i in 0..vp.multiplicity(k) {
            terms.push((-t, get(DatumId::Y { r: i, l: k })?));
        }
        residuals.push((id.to_string(), sup(&terms)?));
    }
    Ok(CombinationReport { residuals })
}

/// `count` equally spaced points from `lo` to `hi`, both included exactly.
pub fn uniform_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let h = (hi - lo) / (count - 1) as f64;
            (0..count)
                .map(|i| if i == count - 1 { hi } else { lo + i as f64 * h })
                .collect()
        }
    }
}

/// Infinity norm of the coefficients, for the zero-target uniqueness check.
pub fn coefficient_norm(s: &Sensitivity) -> f64 {
    norm_inf(&s.coeffs)
}

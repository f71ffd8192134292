//! The nonlocal term `p * integral_c^d z(x) dx` evaluated on dense output.
//!
//! Quadrature panels are aligned with the integrator's step boundaries, so
//! each panel integrates a single quartic interpolant.

use crate::ivp::Trajectory;
use crate::{Error, Result};

/// Composite Gauss–Legendre rule with `nodes` points per panel.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn gauss_legendre(q: usize) -> Result<Self> {
        if q < 2 {
            return Err(Error::Config(format!("quadrature needs at least 2 nodes, got {q}")));
        }
        let (nodes, weights) = gauss_legendre_nodes(q);
        Ok(Self { nodes, weights })
    }

    pub fn nodes_per_segment(&self) -> usize {
        self.nodes.len()
    }

    /// Integral of `f` over `[lo, hi]` with a single panel.
    pub fn panel(&self, lo: f64, hi: f64, mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let mut acc = 0.0;
        for (t, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * t)?;
        }
        Ok(half * acc)
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self::gauss_legendre(5).expect("5 nodes")
    }
}

/// Nodes on `[-1, 1]` (ascending) and weights, by Newton iteration on `P_q`.
fn gauss_legendre_nodes(q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    let qf = q as f64;
    for i in 0..q.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (qf + 0.5)).cos();
        let mut dp;
        loop {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=q {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
            }
            dp = qf * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[q - 1 - i] = z;
        weights[i] = w;
        weights[q - 1 - i] = w;
    }
    if q % 2 == 1 {
        nodes[q / 2] = 0.0;
    }
    (nodes, weights)
}

/// A scalar function read off a trajectory as a fixed linear combination of
/// components: `z^(i)(x) = sum_t w_t * state[base_t + i * stride]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    terms: Vec<(usize, f64)>,
    stride: usize,
}

impl Profile {
    /// A single component, without derivative structure.
    pub fn component(index: usize) -> Self {
        Self { terms: vec![(index, 1.0)], stride: 0 }
    }

    /// The solution `u` in a state or joint trajectory of order `n`.
    pub fn solution() -> Self {
        Self { terms: vec![(0, 1.0)], stride: 1 }
    }

    /// Basis function `alpha_j` of a joint trajectory of order `n`.
    pub fn basis(n: usize, j: usize) -> Self {
        Self { terms: vec![(n + j, 1.0)], stride: n }
    }

    /// `sum_j coeffs[j] * alpha_j` in a joint trajectory of order `n`.
    pub fn combination(n: usize, coeffs: &[f64]) -> Self {
        assert_eq!(coeffs.len(), n);
        Self {
            terms: coeffs.iter().enumerate().map(|(j, &c)| (n + j, c)).collect(),
            stride: n,
        }
    }

    /// `z^(order)(x)`.
    pub fn eval(&self, traj: &Trajectory, x: f64, order: usize) -> Result<f64> {
        if order > 0 && self.stride == 0 {
            return Err(Error::Config("profile has no derivative structure".into()));
        }
        let mut acc = 0.0;
        for &(base, w) in &self.terms {
            acc += w * traj.eval_component(x, base + order * self.stride)?;
        }
        Ok(acc)
    }
}

/// `p * integral_c^d z(x) dx` for trajectory component `component`.
pub fn nonlocal_integral(
    traj: &Trajectory,
    component: usize,
    p: f64,
    c: f64,
    d: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    if component >= traj.dim() {
        return Err(Error::Config(format!(
            "component {component} out of range for dimension {}",
            traj.dim()
        )));
    }
    nonlocal_integral_of(traj, &Profile::component(component), p, c, d, rule)
}

/// `p * integral_c^d z(x) dx` for an arbitrary [`Profile`].
pub fn nonlocal_integral_of(
    traj: &Trajectory,
    profile: &Profile,
    p: f64,
    c: f64,
    d: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    let (lo, hi) = traj.span();
    if c < lo || d > hi || c > d {
        let x = if c < lo { c } else { d };
        return Err(Error::OutOfSpan { x, lo, hi });
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    Ok(p * integral(traj, profile, c, d, rule)?)
}

/// `integral_c^d z(x) dx` over panels cut at the trajectory's step boundaries.
pub fn integral(traj: &Trajectory, profile: &Profile, c: f64, d: f64, rule: &QuadratureRule) -> Result<f64> {
    let mut cuts = vec![c];
    cuts.extend(traj.breakpoints().into_iter().filter(|&x| x > c && x < d));
    cuts.push(d);
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        // Gauss nodes are interior, so each evaluation stays inside one step
        acc += rule.panel(a, b, |x| profile.eval(traj, x, 0))?;
    }
    Ok(acc)
}

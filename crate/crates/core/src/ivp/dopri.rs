//! Dormand–Prince 5(4) with mixed absolute/relative error control and the
//! standard fourth-order continuous extension.

use super::trajectory::{Step, Trajectory};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub atol: f64,
    pub rtol: f64,
}

impl Tolerance {
    pub fn new(atol: f64, rtol: f64) -> Self {
        Self { atol, rtol }
    }

    pub fn uniform(tol: f64) -> Self {
        Self { atol: tol, rtol: tol }
    }

    pub fn halved(self) -> Self {
        Self { atol: self.atol / 2.0, rtol: self.rtol / 2.0 }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::uniform(1e-10)
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// 5th-order minus embedded 4th-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const MAX_STEPS: usize = 1_000_000;
/// Largest state magnitude accepted before declaring blow-up.
const BLOWUP_NORM: f64 = 1e12;
/// Smallest step relative to the span before declaring failure.
const MIN_STEP_FRACTION: f64 = 1e-14;

/// Integrates `u' = rhs(x, u)` from `x0` to `x_end` (either direction).
pub fn integrate<F>(mut rhs: F, x0: f64, u0: &[f64], x_end: f64, tol: Tolerance) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    if !u0.iter().all(|v| v.is_finite()) {
        return Err(Error::ExtensionFailure { x: x0, reason: "non-finite initial state".into() });
    }
    let steps = run(&mut rhs, x0, u0, x_end, tol)?;
    Ok(Trajectory::from_steps(x0, u0.to_vec(), steps))
}

/// Integrates from `x0` in both directions so that the result covers
/// `[min(lo, x0), max(hi, x0)]`.
pub fn integrate_two_sided<F>(
    mut rhs: F,
    x0: f64,
    u0: &[f64],
    lo: f64,
    hi: f64,
    tol: Tolerance,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let forward = integrate(&mut rhs, x0, u0, hi.max(x0), tol)?;
    if lo >= x0 {
        return Ok(forward);
    }
    let backward = integrate(&mut rhs, x0, u0, lo, tol)?;
    Ok(Trajectory::join(backward, forward))
}

fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], tol: Tolerance) -> f64 {
    let sum: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = tol.atol + tol.rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (sum / err.len() as f64).sqrt()
}

fn initial_step<F>(rhs: &mut F, x0: f64, u0: &[f64], f0: &[f64], dir: f64, span: f64, tol: Tolerance) -> Result<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let zeros = vec![0.0; u0.len()];
    let d0 = error_norm(u0, &zeros, u0, tol);
    let d1 = error_norm(f0, &zeros, u0, tol);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let u1: Vec<f64> = u0.iter().zip(f0).map(|(u, f)| u + dir * h0 * f).collect();
    let mut f1 = vec![0.0; u0.len()];
    rhs(x0 + dir * h0, &u1, &mut f1)?;
    let df: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = error_norm(&df, &zeros, u0, tol) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 5.0)
    };
    Ok((100.0 * h0).min(h1).min(span))
}

fn run<F>(rhs: &mut F, x0: f64, u0: &[f64], x_end: f64, tol: Tolerance) -> Result<Vec<Step>>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let dim = u0.len();
    let span = (x_end - x0).abs();
    if span == 0.0 {
        return Ok(Vec::new());
    }
    let dir = (x_end - x0).signum();
    let min_step = MIN_STEP_FRACTION * span;

    let mut x = x0;
    let mut y = u0.to_vec();
    let mut k1 = vec![0.0; dim];
    rhs(x, &y, &mut k1)?;
    let mut h = initial_step(rhs, x0, u0, &k1, dir, span, tol)?;

    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut k5 = vec![0.0; dim];
    let mut k6 = vec![0.0; dim];
    let mut k7 = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];
    let mut y1 = vec![0.0; dim];
    let mut err = vec![0.0; dim];

    let mut steps = Vec::new();
    let mut last_rejected = false;

    for _ in 0..MAX_STEPS {
        let remaining = (x_end - x).abs();
        let last = h * 1.01 >= remaining;
        if last {
            h = remaining;
        }
        let hs = dir * h;

        for i in 0..dim {
            tmp[i] = y[i] + hs * A21 * k1[i];
        }
        rhs(x + C2 * hs, &tmp, &mut k2)?;
        for i in 0..dim {
            tmp[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
        }
        rhs(x + C3 * hs, &tmp, &mut k3)?;
        for i in 0..dim {
            tmp[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        rhs(x + C4 * hs, &tmp, &mut k4)?;
        for i in 0..dim {
            tmp[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        rhs(x + C5 * hs, &tmp, &mut k5)?;
        for i in 0..dim {
            tmp[i] = y[i] + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let x_new = if last { x_end } else { x + hs };
        rhs(x_new, &tmp, &mut k6)?;
        for i in 0..dim {
            y1[i] = y[i] + hs * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        rhs(x_new, &y1, &mut k7)?;
        for i in 0..dim {
            err[i] = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }

        let e = error_norm(&err, &y, &y1, tol);
        if !e.is_finite() {
            return Err(Error::ExtensionFailure { x, reason: "non-finite state encountered".into() });
        }

        if e <= 1.0 {
            let mut coeffs = vec![0.0; 5 * dim];
            for i in 0..dim {
                let r2 = y1[i] - y[i];
                let r3 = hs * k1[i] - r2;
                coeffs[i] = y[i];
                coeffs[dim + i] = r2;
                coeffs[2 * dim + i] = r3;
                coeffs[3 * dim + i] = r2 - hs * k7[i] - r3;
                coeffs[4 * dim + i] =
                    hs * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            steps.push(Step::new(x, x_new - x, coeffs, y1.clone()));

            let norm = y1.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if norm > BLOWUP_NORM {
                return Err(Error::ExtensionFailure {
                    x: x_new,
                    reason: format!("state norm {norm:e} exceeds {BLOWUP_NORM:e}"),
                });
            }

            x = x_new;
            std::mem::swap(&mut y, &mut y1);
            std::mem::swap(&mut k1, &mut k7);
            if last {
                return Ok(steps);
            }
            let mut fac = (SAFETY * e.powf(-0.2)).clamp(FAC_MIN, FAC_MAX);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h *= fac;
            last_rejected = false;
        } else {
            h *= (SAFETY * e.powf(-0.2)).max(FAC_MIN);
            last_rejected = true;
        }
        if h < min_step {
            return Err(Error::ExtensionFailure {
                x,
                reason: format!("step size {h:e} underflowed"),
            });
        }
    }
    Err(Error::ExtensionFailure { x, reason: format!("more than {MAX_STEPS} steps") })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, FRAC_PI_2};

    fn exp_rhs(_x: f64, u: &[f64], du: &mut [f64]) -> Result<()> {
        du[0] = u[0];
        Ok(())
    }

    fn harmonic(_x: f64, u: &[f64], du: &mut [f64]) -> Result<()> {
        du[0] = u[1];
        du[1] = -u[0];
        Ok(())
    }

    #[test]
    fn exponential_growth() {
        let t = integrate(exp_rhs, 0.0, &[1.0], 1.0, Tolerance::uniform(1e-10)).unwrap();
        assert!((t.eval(1.0).unwrap()[0] - E).abs() < 1e-8);
        // backwards
        let t = integrate(exp_rhs, 1.0, &[E], 0.0, Tolerance::uniform(1e-10)).unwrap();
        assert!((t.eval(0.0).unwrap()[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn linear_solution_is_exact() {
        let zero = |_x: f64, u: &[f64], du: &mut [f64]| {
            du[0] = u[1];
            du[1] = 0.0;
            Ok(())
        };
        let t = integrate(zero, 0.0, &[0.0, 1.0], 1.0, Tolerance::uniform(1e-10)).unwrap();
        for i in 0..=20 {
            let x = i as f64 / 20.0;
            let u = t.eval(x).unwrap();
            assert!((u[0] - x).abs() < 1e-15);
            assert!((u[1] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn harmonic_quarter_period() {
        let t = integrate(harmonic, 0.0, &[0.0, 1.0], FRAC_PI_2, Tolerance::uniform(1e-10)).unwrap();
        let u = t.eval(FRAC_PI_2).unwrap();
        assert!((u[0] - 1.0).abs() < 1e-8);
        assert!(u[1].abs() < 1e-8);
    }

    #[test]
    fn dense_output_tracks_solution() {
        let t = integrate(harmonic, 0.0, &[0.0, 1.0], 3.0, Tolerance::uniform(1e-10)).unwrap();
        for i in 0..=300 {
            let x = i as f64 * 0.01;
            let u = t.eval(x).unwrap();
            assert!((u[0] - x.sin()).abs() < 1e-8, "x = {x}");
            let du = t.eval_derivative(x).unwrap();
            assert!((du[0] - x.cos()).abs() < 1e-7, "x = {x}");
        }
    }

    #[test]
    fn endpoints_reproduce_stored_states() {
        let t = integrate(harmonic, 0.0, &[0.0, 1.0], 2.0, Tolerance::uniform(1e-8)).unwrap();
        assert!(t.steps().len() > 1);
        for w in t.steps().windows(2) {
            assert_eq!(w[0].right(), w[1].left(), "steps must tile the span");
            let a = t.eval(w[0].right()).unwrap();
            let inner = w[1].left();
            let b = t.eval(inner).unwrap();
            assert_eq!(a, b);
        }
        assert_eq!(t.eval(0.0).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn out_of_span() {
        let t = integrate(harmonic, 0.0, &[0.0, 1.0], 1.0, Tolerance::default()).unwrap();
        assert!(matches!(t.eval(1.5), Err(Error::OutOfSpan { .. })));
        assert!(matches!(t.eval(-0.1), Err(Error::OutOfSpan { .. })));
    }

    #[test]
    fn blow_up_is_an_extension_failure() {
        // u' = u^2, u(0) = 1 blows up at x = 1
        let sq = |_x: f64, u: &[f64], du: &mut [f64]| {
            du[0] = u[0] * u[0];
            Ok(())
        };
        let err = integrate(sq, 0.0, &[1.0], 2.0, Tolerance::default()).unwrap_err();
        assert!(matches!(err, Error::ExtensionFailure { .. }), "{err}");
    }

    #[test]
    fn two_sided_covers_both_directions() {
        let t = integrate_two_sided(harmonic, 1.0, &[1.0_f64.sin(), 1.0_f64.cos()], -1.0, 2.0, Tolerance::uniform(1e-10))
            .unwrap();
        assert_eq!(t.span(), (-1.0, 2.0));
        for x in [-1.0, -0.5, 0.0, 1.0, 1.7, 2.0] {
            assert!((t.eval(x).unwrap()[0] - f64::sin(x)).abs() < 1e-8);
        }
    }
}

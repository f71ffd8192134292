use crate::{Error, Result};

/// One accepted step with its quartic continuous extension
///
/// ```text
/// u(x0 + t h) = r1 + t (r2 + (1 - t) (r3 + t (r4 + (1 - t) r5)))
/// ```
#[derive(Debug, Clone)]
pub struct Step {
    pub x0: f64,
    /// Signed step; negative for steps taken towards smaller `x`.
    pub h: f64,
    /// `r1..r5` concatenated, `5 * dim` values.
    coeffs: Vec<f64>,
    end: Vec<f64>,
}

impl Step {
    pub(crate) fn new(x0: f64, h: f64, coeffs: Vec<f64>, end: Vec<f64>) -> Self {
        debug_assert_eq!(coeffs.len(), 5 * end.len());
        Self { x0, h, coeffs, end }
    }

    pub fn x1(&self) -> f64 {
        self.x0 + self.h
    }

    pub fn left(&self) -> f64 {
        self.x0.min(self.x1())
    }

    pub fn right(&self) -> f64 {
        self.x0.max(self.x1())
    }

    fn dim(&self) -> usize {
        self.end.len()
    }

    fn r(&self, k: usize) -> &[f64] {
        let d = self.dim();
        &self.coeffs[k * d..(k + 1) * d]
    }

    fn eval_component(&self, x: f64, i: usize) -> f64 {
        if x == self.x1() {
            return self.end[i];
        }
        let t = (x - self.x0) / self.h;
        let s = 1.0 - t;
        let [r1, r2, r3, r4, r5] = std::array::from_fn(|k| self.r(k)[i]);
        r1 + t * (r2 + s * (r3 + t * (r4 + s * r5)))
    }

    fn derivative_component(&self, x: f64, i: usize) -> f64 {
        let t = (x - self.x0) / self.h;
        let s = 1.0 - t;
        let [_, r2, r3, r4, r5] = std::array::from_fn(|k| self.r(k)[i]);
        let g = r3 + t * (r4 + s * r5);
        let dg = r4 + (s - t) * r5;
        let inner = r2 + s * g;
        let dinner = -g + s * dg;
        (inner + t * dinner) / self.h
    }
}

/// Dense output of an integration: steps sorted by abscissa and tiling
/// `[lo, hi]` without gaps.
#[derive(Debug, Clone)]
pub struct Trajectory {
    dim: usize,
    steps: Vec<Step>,
    lo: f64,
    hi: f64,
    /// State at the initial abscissa, used when the span is a single point.
    start: (f64, Vec<f64>),
}

impl Trajectory {
    /// `steps` in integration order from `x_start`.
    pub(crate) fn from_steps(x_start: f64, u0: Vec<f64>, mut steps: Vec<Step>) -> Self {
        steps.sort_by(|a, b| a.left().total_cmp(&b.left()));
        let lo = steps.first().map_or(x_start, Step::left);
        let hi = steps.last().map_or(x_start, Step::right);
        Self { dim: u0.len(), steps, lo, hi, start: (x_start, u0) }
    }

    /// Combines a backward and a forward integration from the same start.
    pub(crate) fn join(backward: Trajectory, forward: Trajectory) -> Self {
        let (x_start, u0) = forward.start.clone();
        let steps = backward.steps.into_iter().chain(forward.steps).collect();
        Self::from_steps(x_start, u0, steps)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn span(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    /// Step boundaries in increasing order, including both span ends.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        out.push(self.lo);
        out.extend(self.steps.iter().map(Step::right));
        out
    }

    fn locate(&self, x: f64) -> Result<Option<&Step>> {
        let slack = 1e-13 * (1.0 + self.lo.abs().max(self.hi.abs()));
        if !(x >= self.lo - slack && x <= self.hi + slack) {
            return Err(Error::OutOfSpan { x, lo: self.lo, hi: self.hi });
        }
        if self.steps.is_empty() {
            return Ok(None);
        }
        let idx = self.steps.partition_point(|s| s.right() < x);
        Ok(Some(&self.steps[idx.min(self.steps.len() - 1)]))
    }

    pub fn eval(&self, x: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(x, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, x: f64, out: &mut [f64]) -> Result<()> {
        match self.locate(x)? {
            None => out.copy_from_slice(&self.start.1),
            Some(step) => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = step.eval_component(x, i);
                }
            }
        }
        Ok(())
    }

    pub fn eval_component(&self, x: f64, i: usize) -> Result<f64> {
        Ok(match self.locate(x)? {
            None => self.start.1[i],
            Some(step) => step.eval_component(x, i),
        })
    }

    /// Derivative of the continuous extension at `x`.
    pub fn eval_derivative(&self, x: f64) -> Result<Vec<f64>> {
        Ok(match self.locate(x)? {
            None => vec![0.0; self.dim],
            Some(step) => (0..self.dim).map(|i| step.derivative_component(x, i)).collect(),
        })
    }
}

//! The boundary value problem and its boundary data.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::expr::{parse_expr, Expr};
use crate::ivp::HigherOrderOde;
use crate::{Error, Result};

/// Unvalidated problem description, as read from a config file.
///
/// `data[j][i]` holds `y_{i,j+1}`, the prescribed value of `y^(i)` at
/// `points[j]` (or of `y^(i)(x_k) + p * integral_c^d y` for the last point).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub n: usize,
    pub interval: (f64, f64),
    pub points: Vec<f64>,
    pub multiplicities: Vec<usize>,
    pub data: Vec<Vec<f64>>,
    pub p: f64,
    pub c: f64,
    pub d: f64,
    pub rhs: String,
}

impl ProblemSpec {
    /// `y'' = 0`, `y(0) = 0`, `y(1) + integral_{1.5}^{2.5} y = 3`; solution `u(x) = x`.
    pub fn t1_linear() -> Self {
        Self {
            n: 2,
            interval: (-1.0, 4.0),
            points: vec![0.0, 1.0],
            multiplicities: vec![1, 1],
            data: vec![vec![0.0], vec![3.0]],
            p: 1.0,
            c: 1.5,
            d: 2.5,
            rhs: "0".into(),
        }
    }

    /// Pendulum `y'' = -sin(y)` on the same geometry as [`ProblemSpec::t1_linear`].
    pub fn t2_pendulum() -> Self {
        Self {
            p: 0.1,
            data: vec![vec![0.0], vec![0.5]],
            rhs: "-sin(y0)".into(),
            ..Self::t1_linear()
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "t1_linear" => Some(Self::t1_linear()),
            "t2_pendulum" => Some(Self::t2_pendulum()),
            _ => None,
        }
    }
}

/// A boundary datum with respect to which the solution is differentiated.
/// Point indices `l` are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DatumId {
    /// `y_{r,l}`
    Y { r: usize, l: usize },
    /// The boundary point `x_l`.
    X(usize),
    C,
    D,
    P,
}

impl fmt::Display for DatumId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatumId::Y { r, l } => write!(f, "y:{r}:{l}"),
            DatumId::X(l) => write!(f, "x:{l}"),
            DatumId::C => f.write_str("c"),
            DatumId::D => f.write_str("d"),
            DatumId::P => f.write_str("p"),
        }
    }
}

impl FromStr for DatumId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown datum {s:?} (expected y:r:l, x:l, c, d or p)"));
        let parts: Vec<&str> = s.split(':').collect();
        let index = |t: &str| t.parse::<usize>().map_err(|_| bad());
        match parts.as_slice() {
            ["c"] => Ok(DatumId::C),
            ["d"] => Ok(DatumId::D),
            ["p"] => Ok(DatumId::P),
            ["x", l] => Ok(DatumId::X(index(l)?)),
            ["y", r, l] => Ok(DatumId::Y { r: index(r)?, l: index(l)? }),
            _ => Err(bad()),
        }
    }
}

impl Serialize for DatumId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// A problem whose ordering, counting and RHS constraints have been checked.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedProblem {
    spec: ProblemSpec,
    ode: HigherOrderOde,
    data_flat: Vec<f64>,
    /// Offset of the first `y_{0,l}` of point `l` (0-based) in `data_flat`.
    offsets: Vec<usize>,
    data_ids: Vec<DatumId>,
}

// negated comparisons so that NaN fails every ordering check
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn validate(spec: ProblemSpec) -> Result<ValidatedProblem> {
    let invalid = |msg: String| Err(Error::InvalidProblem(msg));
    let n = spec.n;
    let k = spec.points.len();
    if n < 2 {
        return invalid(format!("order n = {n} must be at least 2"));
    }
    if k < 2 {
        return invalid(format!("k = {k} boundary points; at least 2 required"));
    }
    if k > n {
        return invalid(format!("k = {k} boundary points exceeds n = {n}"));
    }
    if spec.multiplicities.len() != k {
        return invalid(format!(
            "{} multiplicities given for {k} points",
            spec.multiplicities.len()
        ));
    }
    if let Some(j) = spec.multiplicities.iter().position(|&m| m == 0) {
        return invalid(format!("m_{} >= 1 violated", j + 1));
    }
    let total: usize = spec.multiplicities.iter().sum();
    if total != n {
        return invalid(format!("Σm_j = {total} ≠ n = {n}"));
    }
    if spec.data.len() != k {
        return invalid(format!("data has {} rows for {k} points", spec.data.len()));
    }
    for (j, (row, &m)) in spec.data.iter().zip(&spec.multiplicities).enumerate() {
        if row.len() != m {
            return invalid(format!(
                "point {} has {} data values but m_{} = {m}",
                j + 1,
                row.len(),
                j + 1
            ));
        }
    }
    let scalars = [spec.interval.0, spec.interval.1, spec.p, spec.c, spec.d];
    let all_finite = scalars
        .iter()
        .chain(&spec.points)
        .chain(spec.data.iter().flatten())
        .all(|v| v.is_finite());
    if !all_finite {
        return invalid("all numeric fields must be finite".into());
    }

    let (a, b) = spec.interval;
    if !(a < spec.points[0]) {
        return invalid("a < x_1 violated".into());
    }
    for j in 1..k {
        if !(spec.points[j - 1] < spec.points[j]) {
            return invalid(format!("x_{j} < x_{} violated", j + 1));
        }
    }
    if !(spec.points[k - 1] < spec.c) {
        return invalid("x_k < c violated".into());
    }
    if !(spec.c < spec.d) {
        return invalid("c < d violated".into());
    }
    if !(spec.d < b) {
        return invalid("d < b violated".into());
    }

    let rhs: Expr = parse_expr(&spec.rhs)?;
    if let Some(j) = rhs.max_y_index() {
        if j >= n {
            return invalid(format!("rhs references y{j} but only y0..y{} exist for n = {n}", n - 1));
        }
    }

    let mut offsets = Vec::with_capacity(k);
    let mut data_flat = Vec::with_capacity(n);
    let mut data_ids = Vec::with_capacity(n + k + 3);
    for (j, row) in spec.data.iter().enumerate() {
        offsets.push(data_flat.len());
        data_flat.extend_from_slice(row);
        data_ids.extend((0..row.len()).map(|r| DatumId::Y { r, l: j + 1 }));
    }
    data_ids.extend((1..=k).map(DatumId::X));
    data_ids.extend([DatumId::C, DatumId::D, DatumId::P]);

    Ok(ValidatedProblem {
        ode: HigherOrderOde::new(n, rhs),
        spec,
        data_flat,
        offsets,
        data_ids,
    })
}

impl ValidatedProblem {
    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn ode(&self) -> &HigherOrderOde {
        &self.ode
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn k(&self) -> usize {
        self.spec.points.len()
    }

    /// `x_l` for 1-based `l`.
    pub fn point(&self, l: usize) -> f64 {
        self.spec.points[l - 1]
    }

    pub fn multiplicity(&self, l: usize) -> usize {
        self.spec.multiplicities[l - 1]
    }

    pub fn p(&self) -> f64 {
        self.spec.p
    }

    pub fn c(&self) -> f64 {
        self.spec.c
    }

    pub fn d(&self) -> f64 {
        self.spec.d
    }

    pub fn interval(&self) -> (f64, f64) {
        self.spec.interval
    }

    /// The `n` boundary values `y_{i,j}` in (point, order) order.
    pub fn data(&self) -> &[f64] {
        &self.data_flat
    }

    /// Flat index of `y_{r,l}` in [`ValidatedProblem::data`].
    pub fn data_index(&self, r: usize, l: usize) -> usize {
        self.offsets[l - 1] + r
    }

    /// All `n + k + 3` data: every `y_{r,l}`, then `x_1..x_k`, then `c`, `d`, `p`.
    pub fn data_ids(&self) -> &[DatumId] {
        &self.data_ids
    }

    pub fn is_valid_datum(&self, id: DatumId) -> bool {
        match id {
            DatumId::Y { r, l } => (1..=self.k()).contains(&l) && r < self.multiplicity(l),
            DatumId::X(l) => (1..=self.k()).contains(&l),
            DatumId::C | DatumId::D | DatumId::P => true,
        }
    }

    /// Largest magnitude among the `y_{i,j}`.
    pub fn data_scale(&self) -> f64 {
        self.data_flat.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn datum_value(&self, id: DatumId) -> f64 {
        match id {
            DatumId::Y { r, l } => self.data_flat[self.data_index(r, l)],
            DatumId::X(l) => self.point(l),
            DatumId::C => self.spec.c,
            DatumId::D => self.spec.d,
            DatumId::P => self.spec.p,
        }
    }

    /// Copy of the problem with one datum replaced. Fails with
    /// [`Error::PerturbationInfeasible`] if the result breaks an ordering constraint.
    pub fn with_datum(&self, id: DatumId, value: f64) -> Result<ValidatedProblem> {
        if !self.is_valid_datum(id) {
            return Err(Error::PerturbationInfeasible {
                datum: id.to_string(),
                reason: "no such datum".into(),
            });
        }
        let mut spec = self.spec.clone();
        match id {
            DatumId::Y { r, l } => spec.data[l - 1][r] = value,
            DatumId::X(l) => spec.points[l - 1] = value,
            DatumId::C => spec.c = value,
            DatumId::D => spec.d = value,
            DatumId::P => spec.p = value,
        }
        validate(spec).map_err(|e| Error::PerturbationInfeasible {
            datum: id.to_string(),
            reason: e.to_string(),
        })
    }
}

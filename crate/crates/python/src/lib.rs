use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use intbvp::config::load_config;
use intbvp::expr::parse_expr;
use intbvp::ivp::Tolerance;
use intbvp::oracle::{verify as verify_all, VerifyOptions};
use intbvp::problem::validate;
use intbvp::sens::{sensitivities_for, SignConvention};
use intbvp::shoot::newton_solve;
use intbvp::{DatumId, Error, ProblemSpec, SolverOptions, ValidatedProblem};

pyo3::create_exception!(intbvp, SolverError, PyRuntimeError);
pyo3::create_exception!(intbvp, DisconjugacyViolation, SolverError);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Parse(_) | Error::InvalidProblem(_) | Error::Config(_) | Error::PerturbationInfeasible { .. } => {
            PyValueError::new_err(e.to_string())
        }
        Error::DisconjugacyViolation { .. } => DisconjugacyViolation::new_err(e.to_string()),
        _ => SolverError::new_err(e.to_string()),
    }
}

fn datum(s: &str) -> PyResult<DatumId> {
    s.parse().map_err(to_py)
}

fn options(tol: f64, quad_nodes: usize, max_iter: usize, guess: Option<Vec<f64>>) -> SolverOptions {
    SolverOptions {
        tol: Tolerance::uniform(tol),
        quad_nodes,
        max_iter,
        guess,
        cover: None,
    }
}

fn signs(paper_signs: bool) -> SignConvention {
    if paper_signs {
        SignConvention::Printed
    } else {
        SignConvention::Leibniz
    }
}

/// A parsed right-hand side expression in `x, y0, y1, ...`.
#[pyclass(frozen, name = "Expr")]
struct PyExpr(intbvp::Expr);

#[pymethods]
impl PyExpr {
    #[new]
    fn new(src: &str) -> PyResult<Self> {
        parse_expr(src).map(Self).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[pyo3(signature = (x, y=Vec::new()))]
    fn eval(&self, x: f64, y: Vec<f64>) -> PyResult<f64> {
        self.0
            .eval_real(&intbvp::EvalEnv { x, y: &y })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Expr('{}')", self.0)
    }
}

/// A validated boundary value problem.
#[pyclass(frozen, name = "Problem")]
struct PyProblem(ValidatedProblem);

#[pymethods]
impl PyProblem {
    #[new]
    #[pyo3(signature = (n, interval, points, multiplicities, data, p, c, d, rhs))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        n: usize,
        interval: (f64, f64),
        points: Vec<f64>,
        multiplicities: Vec<usize>,
        data: Vec<Vec<f64>>,
        p: f64,
        c: f64,
        d: f64,
        rhs: String,
    ) -> PyResult<Self> {
        let spec = ProblemSpec { n, interval, points, multiplicities, data, p, c, d, rhs };
        validate(spec).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        let spec = ProblemSpec::builtin(name)
            .ok_or_else(|| PyValueError::new_err(format!("unknown builtin problem {name:?}")))?;
        validate(spec).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        load_config(text).map(Self).map_err(to_py)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn k(&self) -> usize {
        self.0.k()
    }

    /// Datum names in the order used by `sensitivities`.
    #[getter]
    fn data_ids(&self) -> Vec<String> {
        self.0.data_ids().iter().map(|d| d.to_string()).collect()
    }

    fn datum_value(&self, name: &str) -> PyResult<f64> {
        let id = datum(name)?;
        if !self.0.is_valid_datum(id) {
            return Err(PyValueError::new_err(format!("datum {id} does not exist in this problem")));
        }
        Ok(self.0.datum_value(id))
    }

    fn __repr__(&self) -> String {
        let s = self.0.spec();
        format!("Problem(n={}, points={:?}, p={}, rhs='{}')", s.n, s.points, s.p, s.rhs)
    }
}

#[pyclass(frozen, name = "Solution")]
struct PySolution(intbvp::Solution);

#[pymethods]
impl PySolution {
    #[pyo3(signature = (x, order=0))]
    fn u(&self, x: f64, order: usize) -> PyResult<f64> {
        if order >= self.0.problem().n() {
            return Err(PyValueError::new_err(format!("order {order} not below n")));
        }
        self.0.u(x, order).map_err(to_py)
    }

    #[getter]
    fn unknowns(&self) -> Vec<f64> {
        self.0.unknowns().to_vec()
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.0.iterations()
    }

    #[getter]
    fn residual_norm(&self) -> f64 {
        self.0.residual_norm()
    }
}

/// Sensitivities of the solution to every boundary datum.
#[pyclass(frozen, name = "Sensitivities")]
struct PySensitivities(intbvp::SensitivityTable);

#[pymethods]
impl PySensitivities {
    /// `det M` of the boundary functionals applied to the fundamental basis.
    #[getter]
    fn det(&self) -> f64 {
        self.0.matrix.det
    }

    #[getter]
    fn data_ids(&self) -> Vec<String> {
        self.0.entries().iter().map(|s| s.datum.to_string()).collect()
    }

    #[pyo3(signature = (name, x, order=0))]
    fn eval(&self, name: &str, x: f64, order: usize) -> PyResult<f64> {
        let id = datum(name)?;
        let s = self
            .0
            .get(id)
            .ok_or_else(|| PyValueError::new_err(format!("datum {id} does not exist in this problem")))?;
        if order >= s.coeffs.len() {
            return Err(PyValueError::new_err(format!("order {order} not below n")));
        }
        s.eval(x, order).map_err(to_py)
    }

    fn coefficients(&self, name: &str) -> PyResult<Vec<f64>> {
        let id = datum(name)?;
        self.0
            .get(id)
            .map(|s| s.coeffs.clone())
            .ok_or_else(|| PyValueError::new_err(format!("datum {id} does not exist in this problem")))
    }
}

#[pyfunction]
#[pyo3(signature = (problem, tol=1e-10, quad_nodes=5, max_iter=50, guess=None))]
fn solve(
    py: Python<'_>,
    problem: &PyProblem,
    tol: f64,
    quad_nodes: usize,
    max_iter: usize,
    guess: Option<Vec<f64>>,
) -> PyResult<PySolution> {
    let opts = options(tol, quad_nodes, max_iter, guess);
    py.detach(|| newton_solve(&problem.0, &opts)).map(PySolution).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (problem, paper_signs=false, tol=1e-10, quad_nodes=5, max_iter=50, guess=None))]
fn sensitivities(
    py: Python<'_>,
    problem: &PyProblem,
    paper_signs: bool,
    tol: f64,
    quad_nodes: usize,
    max_iter: usize,
    guess: Option<Vec<f64>>,
) -> PyResult<(PySolution, PySensitivities)> {
    let opts = options(tol, quad_nodes, max_iter, guess);
    let (sol, table) = py
        .detach(|| sensitivities_for(&problem.0, &opts, signs(paper_signs)))
        .map_err(to_py)?;
    Ok((PySolution(sol), PySensitivities(table)))
}

/// Finite-difference verification; returns the report as a JSON string.
#[pyfunction]
#[pyo3(signature = (problem, paper_signs=false, h0=None, tol_rel=1e-5, tol=1e-10))]
fn verify(py: Python<'_>, problem: &PyProblem, paper_signs: bool, h0: Option<f64>, tol_rel: f64, tol: f64) -> PyResult<String> {
    let opts = options(tol, 5, 50, None);
    let vopts = VerifyOptions { h0, tol_rel, signs: signs(paper_signs), ..VerifyOptions::default() };
    let report = py.detach(|| verify_all(&problem.0, &opts, &vopts)).map_err(to_py)?;
    Ok(serde_json::to_string(&report).expect("report serializes"))
}

#[pymodule(name = "intbvp")]
fn intbvp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyExpr>()?;
    m.add_class::<PyProblem>()?;
    m.add_class::<PySolution>()?;
    m.add_class::<PySensitivities>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(sensitivities, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add("SolverError", m.py().get_type::<SolverError>())?;
    m.add("DisconjugacyViolation", m.py().get_type::<DisconjugacyViolation>())?;
    Ok(())
}

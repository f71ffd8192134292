//! Arithmetic expressions for the right-hand side `f(x, y0, ..., y{n-1})`.
//!
//! Expressions are parsed from text, evaluated in double precision, and
//! differentiated exactly in forward mode with dual numbers. Only smooth
//! functions are admitted so that every partial `df/dy_i` is continuous on
//! the domain of the expression.

mod dual;
mod parse;

use std::fmt;

use thiserror::Error;

pub use dual::Dual;
pub use parse::parse_expr;

/// Independent variable `x` or the derivative slot `y<j>` (`y^(j)`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    X,
    Y(usize),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X => f.write_str("x"),
            Var::Y(j) => write!(f, "y{j}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

/// The admitted elementary functions; all are smooth on their domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    pub const ALL: [Func; 6] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at offset {offset}: {kind}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("empty expression")]
    Empty,
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("unexpected character {0:?}")]
    UnexpectedChar(char),
    #[error("unexpected token {0:?}")]
    UnexpectedToken(String),
    #[error("malformed number {0:?}")]
    InvalidNumber(String),
    #[error("unknown function {0:?}")]
    UnknownFunction(String),
    #[error("unknown variable {0:?} (expected x or y<j>)")]
    UnknownVariable(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound variable {0}")]
    UnboundVariable(String),
    #[error("domain error: {0}")]
    Domain(String),
}

/// Point at which an expression is evaluated: `x` and `(y, y', ..., y^(n-1))`.
#[derive(Debug, Clone, Copy)]
pub struct EvalEnv<'a> {
    pub x: f64,
    pub y: &'a [f64],
}

impl<'a> EvalEnv<'a> {
    pub fn new(x: f64, y: &'a [f64]) -> Self {
        Self { x, y }
    }

    fn lookup(&self, var: Var) -> Result<f64, EvalError> {
        match var {
            Var::X => Ok(self.x),
            Var::Y(j) => self
                .y
                .get(j)
                .copied()
                .ok_or_else(|| EvalError::UnboundVariable(var.to_string())),
        }
    }
}

/// Largest integer literal exponent expanded by repeated multiplication.
const MAX_INT_EXPONENT: f64 = 1024.0;

impl Expr {
    pub fn num(v: f64) -> Self {
        Expr::Num(v)
    }

    pub fn var(v: Var) -> Self {
        Expr::Var(v)
    }

    pub fn bin(op: BinOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::Bin(op, Box::new(lhs), Box::new(rhs))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(e: Expr) -> Self {
        Expr::Neg(Box::new(e))
    }

    pub fn call(f: Func, arg: Expr) -> Self {
        Expr::Call(f, Box::new(arg))
    }

    /// Highest `j` among the `y<j>` nodes, if any.
    pub fn max_y_index(&self) -> Option<usize> {
        match self {
            Expr::Num(_) | Expr::Var(Var::X) => None,
            Expr::Var(Var::Y(j)) => Some(*j),
            Expr::Neg(e) | Expr::Call(_, e) => e.max_y_index(),
            Expr::Bin(_, l, r) => match (l.max_y_index(), r.max_y_index()) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, b) => a.or(b),
            },
        }
    }

    pub fn eval_real(&self, env: &EvalEnv<'_>) -> Result<f64, EvalError> {
        self.eval_generic(&|v| env.lookup(v))
    }

    /// Value and partial derivative with respect to `wrt`, by one dual sweep.
    pub fn eval_with_partial(&self, env: &EvalEnv<'_>, wrt: Var) -> Result<(f64, f64), EvalError> {
        env.lookup(wrt)?;
        let d = self.eval_generic(&|v| {
            let re = env.lookup(v)?;
            Ok(if v == wrt { Dual::variable(re) } else { Dual::constant(re) })
        })?;
        Ok((d.re, d.eps))
    }

    /// `f` together with `df/dy_i` for `i = 0..env.y.len()`, written into `grad`.
    pub fn eval_with_gradient(&self, env: &EvalEnv<'_>, grad: &mut [f64]) -> Result<f64, EvalError> {
        debug_assert_eq!(grad.len(), env.y.len());
        let value = self.eval_real(env)?;
        for (i, g) in grad.iter_mut().enumerate() {
            *g = self.eval_with_partial(env, Var::Y(i))?.1;
        }
        Ok(value)
    }

    fn eval_generic<S: dual::Scalar>(
        &self,
        lookup: &dyn Fn(Var) -> Result<S, EvalError>,
    ) -> Result<S, EvalError> {
        match self {
            Expr::Num(v) => Ok(S::constant(*v)),
            Expr::Var(v) => lookup(*v),
            Expr::Neg(e) => Ok(-e.eval_generic(lookup)?),
            Expr::Call(f, e) => {
                let a = e.eval_generic(lookup)?;
                apply_func(*f, a)
            }
            Expr::Bin(op, l, r) => {
                if *op == BinOp::Pow {
                    if let Some(k) = r.integer_literal() {
                        let base = l.eval_generic(lookup)?;
                        return int_pow(base, k);
                    }
                }
                let a = l.eval_generic(lookup)?;
                let b = r.eval_generic(lookup)?;
                match op {
                    BinOp::Add => Ok(a + b),
                    BinOp::Sub => Ok(a - b),
                    BinOp::Mul => Ok(a * b),
                    BinOp::Div => {
                        if b.re() == 0.0 {
                            Err(EvalError::Domain("division by zero".into()))
                        } else {
                            Ok(a / b)
                        }
                    }
                    BinOp::Pow => {
                        if a.re() <= 0.0 {
                            Err(EvalError::Domain(format!(
                                "non-integer power of nonpositive base {}",
                                a.re()
                            )))
                        } else {
                            Ok(a.powf(b))
                        }
                    }
                }
            }
        }
    }

    /// Exponent given as an integer literal, possibly negated.
    fn integer_literal(&self) -> Option<i32> {
        let (v, sign) = match self {
            Expr::Num(v) => (*v, 1),
            Expr::Neg(e) => match e.as_ref() {
                Expr::Num(v) => (*v, -1),
                _ => return None,
            },
            _ => return None,
        };
        (v.fract() == 0.0 && v.abs() <= MAX_INT_EXPONENT).then(|| sign * v as i32)
    }
}

fn apply_func<S: dual::Scalar>(f: Func, a: S) -> Result<S, EvalError> {
    match f {
        Func::Sin => Ok(a.sin()),
        Func::Cos => Ok(a.cos()),
        Func::Tan => Ok(a.tan()),
        Func::Exp => Ok(a.exp()),
        Func::Log => {
            if a.re() <= 0.0 {
                Err(EvalError::Domain(format!("log of nonpositive value {}", a.re())))
            } else {
                Ok(a.ln())
            }
        }
        Func::Sqrt => {
            if a.re() < 0.0 {
                Err(EvalError::Domain(format!("sqrt of negative value {}", a.re())))
            } else {
                Ok(a.sqrt())
            }
        }
    }
}

fn int_pow<S: dual::Scalar>(base: S, k: i32) -> Result<S, EvalError> {
    if k == 0 {
        return Ok(S::constant(1.0));
    }
    let mut acc = base;
    for _ in 1..k.unsigned_abs() {
        acc = acc * base;
    }
    if k > 0 {
        Ok(acc)
    } else if acc.re() == 0.0 {
        Err(EvalError::Domain("division by zero in negative power".into()))
    } else {
        Ok(S::constant(1.0) / acc)
    }
}

/// Fully parenthesized rendering; re-parses to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
        }
    }
}

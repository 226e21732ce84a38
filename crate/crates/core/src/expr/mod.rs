//! Scalar expressions over phase-space variables.
//!
//! Expressions are small immutable trees. Variables are stored as indices
//! into a [`VarContext`]; the context is only needed to parse and to print.
//! The constructors [`Expr::add`], [`Expr::mul`], ... fold constants and apply
//! the 0/1 identities, which is all the simplification the crate does.
//! Two expressions are compared by evaluating them, never structurally.

mod diff;
mod display;
mod parser;

use std::fmt;
use std::ops;

use thiserror::Error;

use crate::space::{PhasePoint, VarContext};

pub use display::ExprDisplay;
pub use parser::{parse, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl UnaryOp {
    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
        }
    }

    pub(crate) fn from_function_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "sqrt" => UnaryOp::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    pub fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
        }
    }
}

/// Expression tree. `Pow` carries a constant exponent.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    LogNonPositive,
    SqrtNegative,
    DivisionByZero,
    FractionalPowerOfNegative,
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DomainKind::LogNonPositive => "log of a non-positive value",
            DomainKind::SqrtNegative => "sqrt of a negative value",
            DomainKind::DivisionByZero => "division by zero",
            DomainKind::FractionalPowerOfNegative => "fractional power of a negative value",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    /// The offending subexpression is kept so callers holding a context can
    /// render it with real variable names.
    #[error("{kind} ({value}) in `{}`", ExprDisplay::positional(subexpr))]
    Domain {
        kind: DomainKind,
        value: f64,
        subexpr: Box<Expr>,
    },
    #[error("variable index {index} is outside a point of dimension {dim}")]
    Dimension { index: usize, dim: usize },
}

impl EvalError {
    /// Human-readable message using the variable names of `ctx`.
    pub fn render(&self, ctx: &VarContext) -> String {
        match self {
            EvalError::Domain {
                kind,
                value,
                subexpr,
            } => format!("{kind} ({value}) in `{}`", subexpr.display(ctx)),
            other => other.to_string(),
        }
    }
}

fn is_const(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Const(c) if *c == v)
}

impl Expr {
    pub fn constant(c: f64) -> Self {
        Expr::Const(c)
    }

    pub fn var(index: usize) -> Self {
        Expr::Var(index)
    }

    pub fn zero() -> Self {
        Expr::Const(0.0)
    }

    pub fn one() -> Self {
        Expr::Const(1.0)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        is_const(self, 0.0)
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
            (a, b) if a.is_zero() => b,
            (a, b) if b.is_zero() => a,
            (a, Expr::Unary(UnaryOp::Neg, b)) => Expr::Binary(BinaryOp::Sub, Box::new(a), b),
            (a, b) => Expr::Binary(BinaryOp::Add, Box::new(a), Box::new(b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
            (a, b) if b.is_zero() => a,
            (a, b) if a.is_zero() => Expr::neg(b),
            (a, Expr::Unary(UnaryOp::Neg, b)) => Expr::Binary(BinaryOp::Add, Box::new(a), b),
            (a, b) => Expr::Binary(BinaryOp::Sub, Box::new(a), Box::new(b)),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y + 0.0),
            (a, b) if a.is_zero() || b.is_zero() => Expr::zero(),
            (a, b) if is_const(&a, 1.0) => b,
            (a, b) if is_const(&b, 1.0) => a,
            (a, b) if is_const(&a, -1.0) => Expr::neg(b),
            (a, b) if is_const(&b, -1.0) => Expr::neg(a),
            // constants are kept on the left so they can merge
            (a, b @ Expr::Const(_)) => Expr::mul(b, a),
            (Expr::Const(c), Expr::Binary(BinaryOp::Mul, l, r)) if l.as_const().is_some() => {
                Expr::mul(Expr::Const(c * l.as_const().unwrap_or(1.0)), *r)
            }
            (Expr::Const(c), Expr::Unary(UnaryOp::Neg, inner)) => Expr::mul(Expr::Const(-c), *inner),
            (a, b) => Expr::Binary(BinaryOp::Mul, Box::new(a), Box::new(b)),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Const(x), Expr::Const(y)) if y != 0.0 => Expr::Const(x / y),
            (a, b) if a.is_zero() && !b.is_zero() => Expr::zero(),
            (a, b) if is_const(&b, 1.0) => a,
            (Expr::Binary(BinaryOp::Mul, l, r), Expr::Const(c)) if c != 0.0 && l.as_const().is_some() => {
                Expr::mul(Expr::Const(l.as_const().unwrap_or(1.0) / c), *r)
            }
            (a, b) => Expr::Binary(BinaryOp::Div, Box::new(a), Box::new(b)),
        }
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            // adding 0.0 turns -0.0 into 0.0
            Expr::Const(c) => Expr::Const(-c + 0.0),
            Expr::Unary(UnaryOp::Neg, inner) => *inner,
            Expr::Binary(BinaryOp::Mul, l, r) if l.as_const().is_some() => {
                Expr::mul(Expr::Const(-l.as_const().unwrap_or(1.0)), *r)
            }
            a => Expr::Unary(UnaryOp::Neg, Box::new(a)),
        }
    }

    pub fn pow(base: Expr, exponent: f64) -> Expr {
        if exponent == 0.0 {
            return Expr::one();
        }
        if exponent == 1.0 {
            return base;
        }
        if let Expr::Const(c) = base {
            let v = real_pow(c, exponent);
            if v.is_finite() {
                return Expr::Const(v);
            }
        }
        Expr::Pow(Box::new(base), exponent)
    }

    /// Applies a named function, folding constant arguments inside the domain.
    pub fn apply(op: UnaryOp, a: Expr) -> Expr {
        if op == UnaryOp::Neg {
            return Expr::neg(a);
        }
        if let Expr::Const(c) = a {
            if let Ok(v) = eval_unary(op, c) {
                if v.is_finite() {
                    return Expr::Const(v);
                }
            }
        }
        Expr::Unary(op, Box::new(a))
    }

    pub fn sin(self) -> Expr {
        Expr::apply(UnaryOp::Sin, self)
    }

    pub fn cos(self) -> Expr {
        Expr::apply(UnaryOp::Cos, self)
    }

    pub fn exp(self) -> Expr {
        Expr::apply(UnaryOp::Exp, self)
    }

    pub fn ln(self) -> Expr {
        Expr::apply(UnaryOp::Log, self)
    }

    pub fn sqrt(self) -> Expr {
        Expr::apply(UnaryOp::Sqrt, self)
    }

    /// Sum of an iterator of expressions, `0` when empty.
    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        terms.into_iter().fold(Expr::zero(), Expr::add)
    }

    /// Total number of nodes in the tree.
    pub fn node_count(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Unary(_, a) | Expr::Pow(a, _) => 1 + a.node_count(),
            Expr::Binary(_, a, b) => 1 + a.node_count() + b.node_count(),
        }
    }

    pub fn depends_on(&self, index: usize) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(i) => *i == index,
            Expr::Unary(_, a) | Expr::Pow(a, _) => a.depends_on(index),
            Expr::Binary(_, a, b) => a.depends_on(index) || b.depends_on(index),
        }
    }

    /// Sorted, deduplicated variable indices referenced by the tree.
    pub fn variables(&self) -> Vec<usize> {
        fn walk(e: &Expr, out: &mut Vec<usize>) {
            match e {
                Expr::Const(_) => {}
                Expr::Var(i) => out.push(*i),
                Expr::Unary(_, a) | Expr::Pow(a, _) => walk(a, out),
                Expr::Binary(_, a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Largest variable index plus one, or 0 for a constant expression.
    pub fn min_dim(&self) -> usize {
        self.variables().last().map_or(0, |i| i + 1)
    }

    pub fn eval(&self, z: &[f64]) -> Result<f64, EvalError> {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Var(i) => z.get(*i).copied().ok_or(EvalError::Dimension {
                index: *i,
                dim: z.len(),
            }),
            Expr::Unary(op, a) => {
                let v = a.eval(z)?;
                eval_unary(*op, v).map_err(|kind| self.domain_error(kind, v))
            }
            Expr::Binary(op, a, b) => {
                let l = a.eval(z)?;
                let r = b.eval(z)?;
                Ok(match op {
                    BinaryOp::Add => l + r,
                    BinaryOp::Sub => l - r,
                    BinaryOp::Mul => l * r,
                    BinaryOp::Div => {
                        if r == 0.0 {
                            return Err(self.domain_error(DomainKind::DivisionByZero, r));
                        }
                        l / r
                    }
                })
            }
            Expr::Pow(a, c) => {
                let v = a.eval(z)?;
                if v < 0.0 && c.fract() != 0.0 {
                    return Err(self.domain_error(DomainKind::FractionalPowerOfNegative, v));
                }
                if v == 0.0 && *c < 0.0 {
                    return Err(self.domain_error(DomainKind::DivisionByZero, v));
                }
                Ok(real_pow(v, *c))
            }
        }
    }

    pub fn eval_at(&self, z: &PhasePoint) -> Result<f64, EvalError> {
        self.eval(z.coords())
    }

    fn domain_error(&self, kind: DomainKind, value: f64) -> EvalError {
        EvalError::Domain {
            kind,
            value,
            subexpr: Box::new(self.clone()),
        }
    }

    /// Exact derivative with respect to the variable at `index`.
    pub fn diff(&self, index: usize) -> Expr {
        diff::diff(self, index)
    }

    /// Derivative with respect to a named variable of `ctx`.
    pub fn diff_named(&self, name: &str, ctx: &VarContext) -> Result<Expr, ParseError> {
        let index = ctx.lookup(name).ok_or_else(|| ParseError::UnknownIdentifier {
            name: name.to_string(),
            column: 1,
        })?;
        Ok(self.diff(index))
    }

    /// Derivatives in the canonical variable order of `ctx`.
    pub fn gradient(&self, ctx: &VarContext) -> Vec<Expr> {
        (0..ctx.dim()).map(|i| self.diff(i)).collect()
    }

    pub fn display<'a>(&'a self, ctx: &'a VarContext) -> ExprDisplay<'a> {
        ExprDisplay::new(self, ctx)
    }
}

fn real_pow(v: f64, c: f64) -> f64 {
    if c.fract() == 0.0 && c.abs() <= 64.0 {
        v.powi(c as i32)
    } else {
        v.powf(c)
    }
}

fn eval_unary(op: UnaryOp, v: f64) -> Result<f64, DomainKind> {
    Ok(match op {
        UnaryOp::Neg => -v,
        UnaryOp::Sin => v.sin(),
        UnaryOp::Cos => v.cos(),
        UnaryOp::Exp => v.exp(),
        UnaryOp::Log => {
            if v <= 0.0 {
                return Err(DomainKind::LogNonPositive);
            }
            v.ln()
        }
        UnaryOp::Sqrt => {
            if v < 0.0 {
                return Err(DomainKind::SqrtNegative);
            }
            v.sqrt()
        }
    })
}

impl ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::add(self, rhs)
    }
}

impl ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::sub(self, rhs)
    }
}

impl ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::mul(self, rhs)
    }
}

impl ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::div(self, rhs)
    }
}

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Self {
        Expr::Const(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn red1() -> VarContext {
        VarContext::reduced(1)
    }

    #[test]
    fn parse_counts_nodes() {
        // Add, Mul, p1, x1, sin, x1
        let e = parse("p1*x1 + sin(x1)", &red1()).unwrap();
        assert_eq!(e.node_count(), 6);
    }

    #[test]
    fn eval_examples() {
        let e = parse("p1*x1", &red1()).unwrap();
        assert_eq!(e.eval(&[2.0, 3.0]).unwrap(), 6.0);
        let e = parse("sin(x1)", &red1()).unwrap();
        assert_eq!(e.eval(&[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn eval_domain_errors_name_the_subexpression() {
        let ctx = red1();
        let e = parse("1 + log(x1)", &ctx).unwrap();
        let err = e.eval(&[-1.0, 0.0]).unwrap_err();
        match &err {
            EvalError::Domain { kind, subexpr, .. } => {
                assert_eq!(*kind, DomainKind::LogNonPositive);
                assert_eq!(subexpr.display(&ctx).to_string(), "log(x1)");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.render(&ctx).contains("log(x1)"));

        let e = parse("x1/p1", &ctx).unwrap();
        assert!(matches!(
            e.eval(&[1.0, 0.0]),
            Err(EvalError::Domain {
                kind: DomainKind::DivisionByZero,
                ..
            })
        ));
        let e = parse("sqrt(x1)", &ctx).unwrap();
        assert!(e.eval(&[-0.5, 0.0]).is_err());
        let e = parse("x1^0.5", &ctx).unwrap();
        assert!(e.eval(&[-0.5, 0.0]).is_err());
    }

    #[test]
    fn eval_dimension_error() {
        let e = Expr::var(3);
        assert_eq!(e.eval(&[1.0]), Err(EvalError::Dimension { index: 3, dim: 1 }));
    }

    #[test]
    fn constructors_fold() {
        let x = Expr::var(0);
        assert_eq!(Expr::add(Expr::zero(), x.clone()), x);
        assert_eq!(Expr::mul(Expr::one(), x.clone()), x);
        assert!(Expr::mul(Expr::zero(), x.clone()).is_zero());
        assert_eq!(Expr::mul(Expr::Const(2.0), Expr::Const(3.0)), Expr::Const(6.0));
        assert_eq!(Expr::neg(Expr::neg(x.clone())), x);
        assert_eq!(Expr::pow(x.clone(), 1.0), x);
        assert_eq!(Expr::pow(x.clone(), 0.0), Expr::one());
        assert_eq!(Expr::div(Expr::mul(Expr::Const(2.0), x.clone()), Expr::Const(2.0)), x);
        // out-of-domain constants stay symbolic
        assert!(matches!(Expr::Const(-1.0).ln(), Expr::Unary(UnaryOp::Log, _)));
    }

    #[test]
    fn variables_are_collected() {
        let ctx = VarContext::full(2);
        let e = parse("u*p2 + x1 - x1", &ctx).unwrap();
        assert_eq!(e.variables(), vec![0, 3, 4]);
        assert_eq!(e.min_dim(), 5);
        assert!(e.depends_on(4));
        assert!(!e.depends_on(1));
    }
}

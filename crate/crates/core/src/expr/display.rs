use std::fmt;

use super::{BinaryOp, Expr, UnaryOp};
use crate::space::VarContext;

/// Prints an expression in the DSL syntax it was parsed from.
///
/// The output re-parses to the same tree, so parenthesization follows the
/// tree structure rather than algebraic associativity.
pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    ctx: Option<&'a VarContext>,
}

impl<'a> ExprDisplay<'a> {
    pub fn new(expr: &'a Expr, ctx: &'a VarContext) -> Self {
        Self {
            expr,
            ctx: Some(ctx),
        }
    }

    /// Uses `z[i]` for variables when no context is at hand.
    pub fn positional(expr: &'a Expr) -> Self {
        Self { expr, ctx: None }
    }
}

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Const(_) | Expr::Var(_) => PREC_ATOM,
        Expr::Unary(UnaryOp::Neg, _) => PREC_NEG,
        Expr::Unary(..) => PREC_ATOM,
        Expr::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => PREC_ADD,
        Expr::Binary(..) => PREC_MUL,
        Expr::Pow(..) => PREC_POW,
    }
}

pub(crate) fn format_number(c: f64) -> String {
    let body = if c.fract() == 0.0 && c.abs() < 1e15 {
        format!("{}", c.abs())
    } else {
        format!("{:?}", c.abs())
    };
    if c.is_sign_negative() {
        format!("(-{body})")
    } else {
        body
    }
}

impl ExprDisplay<'_> {
    fn write(&self, e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match e {
            Expr::Const(c) => f.write_str(&format_number(*c)),
            Expr::Var(i) => match self.ctx {
                Some(ctx) if *i < ctx.dim() => f.write_str(&ctx.var_name(*i)),
                _ => write!(f, "z[{i}]"),
            },
            Expr::Unary(UnaryOp::Neg, a) => {
                f.write_str("-")?;
                // "-3" would read back as a single constant
                let bare_number = matches!(**a, Expr::Const(c) if !c.is_sign_negative());
                self.child(a, bare_number || precedence(a) < PREC_NEG, f)
            }
            Expr::Unary(op, a) => {
                write!(f, "{}(", op.name())?;
                self.write(a, f)?;
                f.write_str(")")
            }
            Expr::Binary(op, a, b) => {
                let p = precedence(e);
                self.child(a, precedence(a) < p, f)?;
                write!(f, " {} ", op.symbol())?;
                self.child(b, precedence(b) <= p, f)
            }
            Expr::Pow(a, c) => {
                self.child(a, precedence(a) <= PREC_POW, f)?;
                write!(f, "^{}", format_number(*c))
            }
        }
    }

    fn child(&self, e: &Expr, parens: bool, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if parens {
            f.write_str("(")?;
            self.write(e, f)?;
            f.write_str(")")
        } else {
            self.write(e, f)
        }
    }
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(self.expr, f)
    }
}

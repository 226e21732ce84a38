use super::{BinaryOp, Expr, UnaryOp};

pub(super) fn diff(e: &Expr, v: usize) -> Expr {
    match e {
        Expr::Const(_) => Expr::zero(),
        Expr::Var(i) => {
            if *i == v {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Expr::Unary(op, a) => {
            let da = diff(a, v);
            if da.is_zero() {
                return Expr::zero();
            }
            let a = (**a).clone();
            match op {
                UnaryOp::Neg => Expr::neg(da),
                UnaryOp::Sin => Expr::mul(a.cos(), da),
                UnaryOp::Cos => Expr::mul(Expr::neg(a.sin()), da),
                UnaryOp::Exp => Expr::mul(a.exp(), da),
                UnaryOp::Log => Expr::div(da, a),
                UnaryOp::Sqrt => Expr::div(da, Expr::mul(Expr::Const(2.0), a.sqrt())),
            }
        }
        Expr::Binary(op, a, b) => {
            let da = diff(a, v);
            let db = diff(b, v);
            match op {
                BinaryOp::Add => Expr::add(da, db),
                BinaryOp::Sub => Expr::sub(da, db),
                BinaryOp::Mul => Expr::add(
                    Expr::mul(da, (**b).clone()),
                    Expr::mul((**a).clone(), db),
                ),
                BinaryOp::Div => {
                    if db.is_zero() {
                        Expr::div(da, (**b).clone())
                    } else {
                        Expr::div(
                            Expr::sub(
                                Expr::mul(da, (**b).clone()),
                                Expr::mul((**a).clone(), db),
                            ),
                            Expr::pow((**b).clone(), 2.0),
                        )
                    }
                }
            }
        }
        Expr::Pow(a, c) => {
            let da = diff(a, v);
            if da.is_zero() {
                return Expr::zero();
            }
            Expr::mul(
                Expr::mul(Expr::Const(*c), Expr::pow((**a).clone(), c - 1.0)),
                da,
            )
        }
    }
}

//! Characteristic fields of Hamiltonians and Poisson brackets.
//!
//! In the full case a Hamiltonian `H(x, p, u)` has the characteristic field
//! `Z_H = T(p) ∂_z H`, with
//!
//! ```text
//!         ⎡  0    Iₙ   0 ⎤
//! T(p) =  ⎢ -Iₙ   0   -p ⎥
//!         ⎣  0ᵀ   pᵀ   0 ⎦
//! ```
//!
//! i.e. `X = ∂_p H`, `P = -(∂_x H + p ∂_u H)`, `U = ⟨p, ∂_p H⟩`. In the reduced
//! case `H(x, p)` uses the symplectic matrix `T̂ = [[0, I], [-I, 0]]`.
//!
//! The Poisson bracket is `{H₁, H₂}(z) = ⟨∂_z H₂(z), Z₁(z)⟩`: the gradient of
//! the second argument paired with the field of the first.

use std::ops::Deref;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::expr::{parse, Expr, ParseError};
use crate::field::{FieldError, VectorField};
use crate::space::{Kind, PhasePoint, VarContext};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CharError {
    #[error("Hamiltonians live on phase space, not on {0}")]
    NotPhaseSpace(VarContext),
    #[error("context mismatch: {left} vs {right}")]
    ContextMismatch { left: VarContext, right: VarContext },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("expression references a variable outside {0}")]
    VariableOutOfRange(VarContext),
    #[error("evaluation failed: {0}")]
    Eval(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("sample grid is empty")]
    EmptyGrid,
}

/// The `(2n+1)×(2n+1)` matrix `T(p)`.
pub fn t_matrix(p: &[f64]) -> DMatrix<f64> {
    let n = p.len();
    let mut t = DMatrix::zeros(2 * n + 1, 2 * n + 1);
    for i in 0..n {
        t[(i, n + i)] = 1.0;
        t[(n + i, i)] = -1.0;
        t[(n + i, 2 * n)] = -p[i];
        t[(2 * n, n + i)] = p[i];
    }
    t
}

/// The `2n×2n` symplectic matrix `T̂`.
pub fn t_hat(n: usize) -> DMatrix<f64> {
    let mut t = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        t[(i, n + i)] = 1.0;
        t[(n + i, i)] = -1.0;
    }
    t
}

/// Applies `T(p)` (full) or `T̂` (reduced) to a gradient vector at `z`.
pub fn apply_structure(ctx: &VarContext, z: &[f64], grad: &[f64]) -> Vec<f64> {
    let n = ctx.n();
    let mut out = vec![0.0; ctx.dim()];
    match ctx.kind() {
        Kind::Reduced => {
            for i in 0..n {
                out[i] = grad[n + i];
                out[n + i] = -grad[i];
            }
        }
        Kind::Full => {
            let gu = grad[2 * n];
            let mut u_dot = 0.0;
            for i in 0..n {
                let p = z[n + i];
                out[i] = grad[n + i];
                out[n + i] = -(grad[i] + p * gu);
                u_dot += p * grad[n + i];
            }
            out[2 * n] = u_dot;
        }
        _ => panic!("structure matrix requested on {ctx}"),
    }
    out
}

/// A scalar function on phase space with its cached symbolic gradient.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    ctx: VarContext,
    expr: Expr,
    gradient: Vec<Expr>,
}

impl Hamiltonian {
    pub fn new(ctx: VarContext, expr: Expr) -> Result<Self, CharError> {
        if !ctx.is_phase_space() {
            return Err(CharError::NotPhaseSpace(ctx));
        }
        if expr.min_dim() > ctx.dim() {
            return Err(CharError::VariableOutOfRange(ctx));
        }
        let gradient = expr.gradient(&ctx);
        Ok(Self {
            ctx,
            expr,
            gradient,
        })
    }

    pub fn parse(source: &str, ctx: VarContext) -> Result<Self, CharError> {
        Self::new(ctx, parse(source, &ctx)?)
    }

    pub fn ctx(&self) -> VarContext {
        self.ctx
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn gradient(&self) -> &[Expr] {
        &self.gradient
    }

    pub fn value(&self, z: &[f64]) -> Result<f64, CharError> {
        self.expr
            .eval(z)
            .map_err(|e| CharError::Eval(e.render(&self.ctx)))
    }

    pub fn value_at(&self, z: &PhasePoint) -> Result<f64, CharError> {
        self.check_point(z)?;
        self.value(z.coords())
    }

    pub fn gradient_at(&self, z: &[f64]) -> Result<Vec<f64>, CharError> {
        self.gradient
            .iter()
            .map(|g| g.eval(z).map_err(|e| CharError::Eval(e.render(&self.ctx))))
            .collect()
    }

    fn check_point(&self, z: &PhasePoint) -> Result<(), CharError> {
        if z.ctx() != self.ctx {
            return Err(CharError::ContextMismatch {
                left: self.ctx,
                right: z.ctx(),
            });
        }
        Ok(())
    }

    /// Max deviation of the symbolic gradient from central differences.
    pub fn gradient_fd_error(&self, z: &[f64], step: f64) -> Result<f64, CharError> {
        let exact = self.gradient_at(z)?;
        let fd = fd_gradient(|w| self.value(w), z, step)?;
        Ok(exact
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Adds `extra` to the Hamiltonian.
    pub fn plus(&self, extra: Expr) -> Hamiltonian {
        Hamiltonian::new(self.ctx, Expr::add(self.expr.clone(), extra)).expect("same context")
    }

    /// The expression printed in DSL syntax.
    pub fn source(&self) -> String {
        self.expr.display(&self.ctx).to_string()
    }
}

pub(crate) fn fd_gradient<E>(
    f: impl Fn(&[f64]) -> Result<f64, E>,
    z: &[f64],
    step: f64,
) -> Result<Vec<f64>, E> {
    let mut w = z.to_vec();
    (0..z.len())
        .map(|j| {
            let h = step * z[j].abs().max(1.0);
            w[j] = z[j] + h;
            let fp = f(&w)?;
            w[j] = z[j] - h;
            let fm = f(&w)?;
            w[j] = z[j];
            Ok((fp - fm) / (2.0 * h))
        })
        .collect()
}

/// Where a characteristic field came from.
#[derive(Debug, Clone)]
pub enum FieldSource {
    Hamiltonian(Box<Hamiltonian>),
    Raw,
}

/// A vector field tagged with its generating Hamiltonian, if any.
#[derive(Debug, Clone)]
pub struct CharField {
    field: VectorField,
    source: FieldSource,
}

impl CharField {
    pub fn raw(field: VectorField) -> Self {
        Self {
            field,
            source: FieldSource::Raw,
        }
    }

    pub fn field(&self) -> &VectorField {
        &self.field
    }

    pub fn into_field(self) -> VectorField {
        self.field
    }

    pub fn source(&self) -> &FieldSource {
        &self.source
    }

    pub fn hamiltonian(&self) -> Option<&Hamiltonian> {
        match &self.source {
            FieldSource::Hamiltonian(h) => Some(h),
            FieldSource::Raw => None,
        }
    }
}

impl Deref for CharField {
    type Target = VectorField;

    fn deref(&self) -> &VectorField {
        &self.field
    }
}

/// Symbolic characteristic field of `h`.
pub fn char_field(h: &Hamiltonian) -> CharField {
    let ctx = h.ctx();
    let n = ctx.n();
    let g = h.gradient();
    let grad_x = &g[..n];
    let grad_p = &g[n..2 * n];
    let mut comps: Vec<Expr> = grad_p.to_vec();
    match ctx.kind() {
        Kind::Reduced => {
            comps.extend(grad_x.iter().map(|gx| Expr::neg(gx.clone())));
        }
        Kind::Full => {
            let grad_u = &g[2 * n];
            for i in 0..n {
                let p_i = Expr::var(ctx.p_index(i));
                comps.push(Expr::neg(Expr::add(
                    grad_x[i].clone(),
                    Expr::mul(p_i, grad_u.clone()),
                )));
            }
            comps.push(Expr::sum(
                (0..n).map(|i| Expr::mul(Expr::var(ctx.p_index(i)), grad_p[i].clone())),
            ));
        }
        _ => unreachable!("Hamiltonian contexts are phase spaces"),
    }
    CharField {
        field: VectorField::new(ctx, comps).expect("one component per variable"),
        source: FieldSource::Hamiltonian(Box::new(h.clone())),
    }
}

fn same_ctx(a: VarContext, b: VarContext) -> Result<(), CharError> {
    if a != b {
        return Err(CharError::ContextMismatch { left: a, right: b });
    }
    Ok(())
}

/// `{H₁, H₂}(z) = ⟨∂_z H₂(z), T ∂_z H₁(z)⟩`, evaluated numerically.
pub fn poisson(h1: &Hamiltonian, h2: &Hamiltonian, z: &PhasePoint) -> Result<f64, CharError> {
    same_ctx(h1.ctx(), h2.ctx())?;
    h1.check_point(z)?;
    let c = z.coords();
    let z1 = apply_structure(&h1.ctx(), c, &h1.gradient_at(c)?);
    let g2 = h2.gradient_at(c)?;
    Ok(g2.iter().zip(&z1).map(|(a, b)| a * b).sum())
}

/// The bracket `{H₁, H₂}` as a new symbolic Hamiltonian.
pub fn poisson_bracket(h1: &Hamiltonian, h2: &Hamiltonian) -> Result<Hamiltonian, CharError> {
    same_ctx(h1.ctx(), h2.ctx())?;
    let z1 = char_field(h1);
    let expr = Expr::sum(
        h2.gradient()
            .iter()
            .zip(z1.components())
            .map(|(g, c)| Expr::mul(g.clone(), c.clone())),
    );
    Hamiltonian::new(h1.ctx(), expr)
}

/// Outcome of a first-integral test over a sample grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstIntegralReport {
    /// max over the grid of |⟨∂_z H, Z₀⟩|
    pub max_residual: f64,
    pub worst_point: Vec<f64>,
    pub tolerance: f64,
    pub samples: usize,
    pub pass: bool,
}

/// Checks `⟨∂_z H, Z₀⟩ = 0` on every grid point.
pub fn is_first_integral(
    h: &Hamiltonian,
    z0: &VectorField,
    grid: &[PhasePoint],
    tol: f64,
) -> Result<FirstIntegralReport, CharError> {
    same_ctx(h.ctx(), z0.ctx())?;
    if grid.is_empty() {
        return Err(CharError::EmptyGrid);
    }
    let mut max_residual = 0.0f64;
    let mut worst_point = grid[0].coords().to_vec();
    for z in grid {
        h.check_point(z)?;
        let c = z.coords();
        let g = h.gradient_at(c)?;
        let f = z0.eval(c)?;
        let r = g.iter().zip(&f).map(|(a, b)| a * b).sum::<f64>().abs();
        if r > max_residual || r.is_nan() {
            max_residual = r;
            worst_point = c.to_vec();
        }
    }
    Ok(FirstIntegralReport {
        max_residual,
        worst_point,
        tolerance: tol,
        samples: grid.len(),
        pass: max_residual <= tol,
    })
}

//! Vector fields given by symbolic components.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::expr::{parse, Expr, ParseError};
use crate::space::VarContext;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("field on {ctx} needs {expected} components, got {got}")]
    ComponentCount {
        ctx: VarContext,
        expected: usize,
        got: usize,
    },
    #[error("component {component}: {source}")]
    Parse {
        component: usize,
        #[source]
        source: ParseError,
    },
    #[error("point has dimension {got}, field expects {expected}")]
    PointDimension { expected: usize, got: usize },
    #[error("component {component} failed to evaluate: {message}")]
    Eval { component: usize, message: String },
    #[error("fields live on different contexts ({left} vs {right})")]
    ContextMismatch { left: VarContext, right: VarContext },
}

/// A smooth map ℝᵈ → ℝᵈ with a lazily built symbolic Jacobian.
#[derive(Debug, Clone)]
pub struct VectorField {
    ctx: VarContext,
    components: Vec<Expr>,
    jacobian: OnceLock<Vec<Vec<Expr>>>,
}

impl VectorField {
    pub fn new(ctx: VarContext, components: Vec<Expr>) -> Result<Self, FieldError> {
        if components.len() != ctx.dim() {
            return Err(FieldError::ComponentCount {
                ctx,
                expected: ctx.dim(),
                got: components.len(),
            });
        }
        Ok(Self {
            ctx,
            components,
            jacobian: OnceLock::new(),
        })
    }

    pub fn parse<S: AsRef<str>>(ctx: VarContext, sources: &[S]) -> Result<Self, FieldError> {
        let components = sources
            .iter()
            .enumerate()
            .map(|(component, s)| parse(s.as_ref(), &ctx).map_err(|source| FieldError::Parse { component, source }))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(ctx, components)
    }

    pub fn zero(ctx: VarContext) -> Self {
        Self::new(ctx, vec![Expr::zero(); ctx.dim()]).expect("dimension matches by construction")
    }

    pub fn ctx(&self) -> VarContext {
        self.ctx
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    /// `jacobian()[i][j] = ∂ component_i / ∂ z_j`.
    pub fn jacobian(&self) -> &[Vec<Expr>] {
        self.jacobian.get_or_init(|| {
            self.components
                .iter()
                .map(|c| (0..self.dim()).map(|j| c.diff(j)).collect())
                .collect()
        })
    }

    fn check_point(&self, z: &[f64]) -> Result<(), FieldError> {
        if z.len() != self.dim() {
            return Err(FieldError::PointDimension {
                expected: self.dim(),
                got: z.len(),
            });
        }
        Ok(())
    }

    pub fn eval_into(&self, z: &[f64], out: &mut [f64]) -> Result<(), FieldError> {
        self.check_point(z)?;
        for (component, (c, slot)) in self.components.iter().zip(out.iter_mut()).enumerate() {
            *slot = c.eval(z).map_err(|e| FieldError::Eval {
                component,
                message: e.render(&self.ctx),
            })?;
        }
        Ok(())
    }

    pub fn eval(&self, z: &[f64]) -> Result<Vec<f64>, FieldError> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(z, &mut out)?;
        Ok(out)
    }

    pub fn eval_vector(&self, z: &[f64]) -> Result<DVector<f64>, FieldError> {
        self.eval(z).map(DVector::from_vec)
    }

    pub fn jacobian_at(&self, z: &[f64]) -> Result<DMatrix<f64>, FieldError> {
        self.check_point(z)?;
        let d = self.dim();
        let jac = self.jacobian();
        let mut m = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = jac[i][j].eval(z).map_err(|e| FieldError::Eval {
                    component: i,
                    message: e.render(&self.ctx),
                })?;
            }
        }
        Ok(m)
    }

    /// Largest deviation between the symbolic Jacobian and central differences.
    pub fn jacobian_fd_error(&self, z: &[f64], step: f64) -> Result<f64, FieldError> {
        let exact = self.jacobian_at(z)?;
        let mut worst = 0.0f64;
        let mut zp = z.to_vec();
        for j in 0..self.dim() {
            let h = step * z[j].abs().max(1.0);
            zp[j] = z[j] + h;
            let fp = self.eval(&zp)?;
            zp[j] = z[j] - h;
            let fm = self.eval(&zp)?;
            zp[j] = z[j];
            for i in 0..self.dim() {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                worst = worst.max((fd - exact[(i, j)]).abs());
            }
        }
        Ok(worst)
    }

    fn same_ctx(&self, other: &VectorField) -> Result<(), FieldError> {
        if self.ctx != other.ctx {
            return Err(FieldError::ContextMismatch {
                left: self.ctx,
                right: other.ctx,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &VectorField) -> Result<VectorField, FieldError> {
        self.same_ctx(other)?;
        let comps = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| Expr::add(a.clone(), b.clone()))
            .collect();
        VectorField::new(self.ctx, comps)
    }

    pub fn scale(&self, factor: f64) -> VectorField {
        let comps = self
            .components
            .iter()
            .map(|c| Expr::mul(Expr::Const(factor), c.clone()))
            .collect();
        VectorField::new(self.ctx, comps).expect("same dimension")
    }

    /// Copy of the field with `extra` added to one component.
    pub fn perturbed(&self, component: usize, extra: Expr) -> VectorField {
        let mut comps = self.components.clone();
        comps[component] = Expr::add(comps[component].clone(), extra);
        VectorField::new(self.ctx, comps).expect("same dimension")
    }

    /// Components printed in DSL syntax.
    pub fn to_strings(&self) -> Vec<String> {
        self.components
            .iter()
            .map(|c| c.display(&self.ctx).to_string())
            .collect()
    }
}

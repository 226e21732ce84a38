//! Lie brackets of vector fields, cotangent lifts and finite-type closure.
//!
//! The bracket convention is `[Z₁, Z₂] = (∂_z Z₂) Z₁ − (∂_z Z₁) Z₂`. With it,
//! in the reduced case the map `H ↦ T̂ ∂_z H` sends Poisson brackets to Lie
//! brackets: `[Z₁, Z₂] = T̂ ∂_z {H₁, H₂}`. For a linear-in-momentum
//! Hamiltonian `⟨p, f(x)⟩` the characteristic field is the cotangent lift
//! `(f(x), −(∂_x f)ᵀ p)`, and the lift of `[f_i, f_j]` is `[Z_i, Z_j]`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::charfield::{apply_structure, char_field, poisson_bracket, CharError, Hamiltonian};
use crate::expr::{parse, Expr, ParseError};
use crate::field::{FieldError, VectorField};
use crate::linalg::{lstsq, numeric_rank, singular_values, DEFAULT_RCOND};
use crate::space::{Kind, VarContext};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LieError {
    #[error("fields live on different contexts ({left} vs {right})")]
    ContextMismatch { left: VarContext, right: VarContext },
    #[error("base field component {component} references `{variable}`; only x variables are allowed")]
    NotBaseField { component: usize, variable: String },
    #[error("expected a field on the base space, got one on {0}")]
    ExpectedBase(VarContext),
    #[error("need at least one generator")]
    NoGenerators,
    #[error("sample grid is empty")]
    EmptyGrid,
    #[error("the Poisson/Lie correspondence is only exact in the reduced case, not on {0}")]
    NotReduced(VarContext),
    #[error("component {component}: {source}")]
    Parse {
        component: usize,
        #[source]
        source: ParseError,
    },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Char(#[from] CharError),
}

fn same_ctx(a: &VectorField, b: &VectorField) -> Result<(), LieError> {
    if a.ctx() != b.ctx() {
        return Err(LieError::ContextMismatch {
            left: a.ctx(),
            right: b.ctx(),
        });
    }
    Ok(())
}

/// Symbolic `[Z₁, Z₂] = (∂Z₂) Z₁ − (∂Z₁) Z₂`.
pub fn lie_bracket(z1: &VectorField, z2: &VectorField) -> Result<VectorField, LieError> {
    same_ctx(z1, z2)?;
    let j1 = z1.jacobian();
    let j2 = z2.jacobian();
    let c1 = z1.components();
    let c2 = z2.components();
    let comps = (0..z1.dim())
        .map(|i| {
            let forward = Expr::sum((0..z1.dim()).map(|j| Expr::mul(j2[i][j].clone(), c1[j].clone())));
            let backward = Expr::sum((0..z1.dim()).map(|j| Expr::mul(j1[i][j].clone(), c2[j].clone())));
            Expr::sub(forward, backward)
        })
        .collect();
    Ok(VectorField::new(z1.ctx(), comps)?)
}

/// Parses an x-only field in a phase-space context and returns it on the
/// base space ℝⁿ. Components that mention `p` or `u` are rejected.
pub fn base_field<S: AsRef<str>>(phase_ctx: VarContext, sources: &[S]) -> Result<VectorField, LieError> {
    let n = phase_ctx.n();
    let base = VarContext::base(n);
    if sources.len() != n {
        return Err(FieldError::ComponentCount {
            ctx: base,
            expected: n,
            got: sources.len(),
        }
        .into());
    }
    let mut comps = Vec::with_capacity(n);
    for (component, src) in sources.iter().enumerate() {
        let e = parse(src.as_ref(), &phase_ctx).map_err(|source| LieError::Parse { component, source })?;
        if let Some(&v) = e.variables().iter().find(|&&v| v >= n) {
            return Err(LieError::NotBaseField {
                component,
                variable: phase_ctx.var_name(v),
            });
        }
        comps.push(e);
    }
    Ok(VectorField::new(base, comps)?)
}

fn require_base(f: &VectorField) -> Result<usize, LieError> {
    if f.ctx().kind() != Kind::Base {
        return Err(LieError::ExpectedBase(f.ctx()));
    }
    Ok(f.ctx().n())
}

/// Cotangent lift `Z(x, p) = (f(x), −(∂_x f(x))ᵀ p)` on the reduced space.
pub fn cotangent_lift(f: &VectorField) -> Result<VectorField, LieError> {
    let n = require_base(f)?;
    let ctx = VarContext::reduced(n);
    let jac = f.jacobian();
    let mut comps: Vec<Expr> = f.components().to_vec();
    for i in 0..n {
        let pulled = Expr::sum((0..n).map(|j| Expr::mul(jac[j][i].clone(), Expr::var(ctx.p_index(j)))));
        comps.push(Expr::neg(pulled));
    }
    Ok(VectorField::new(ctx, comps)?)
}

/// The linear-in-momentum Hamiltonian `⟨p, f(x)⟩`.
pub fn momentum_hamiltonian(f: &VectorField) -> Result<Hamiltonian, LieError> {
    let n = require_base(f)?;
    let ctx = VarContext::reduced(n);
    let expr = Expr::sum(
        f.components()
            .iter()
            .enumerate()
            .map(|(i, c)| Expr::mul(Expr::var(ctx.p_index(i)), c.clone())),
    );
    Ok(Hamiltonian::new(ctx, expr)?)
}

/// Max over `points` of ‖[Z₁, Z₂](z) − T̂ ∂_z {H₁, H₂}(z)‖ for reduced Hamiltonians.
pub fn bracket_homomorphism_defect<P: AsRef<[f64]>>(
    h1: &Hamiltonian,
    h2: &Hamiltonian,
    points: &[P],
) -> Result<f64, LieError> {
    if h1.ctx().kind() != Kind::Reduced {
        return Err(LieError::NotReduced(h1.ctx()));
    }
    let bracket = lie_bracket(&char_field(h1), &char_field(h2))?;
    let h12 = poisson_bracket(h1, h2)?;
    let ctx = h1.ctx();
    let mut worst = 0.0f64;
    for z in points {
        let z = z.as_ref();
        let lhs = bracket.eval(z)?;
        let rhs = apply_structure(&ctx, z, &h12.gradient_at(z)?);
        worst = worst.max(norm_diff(&lhs, &rhs));
    }
    Ok(worst)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// How the structure coefficients α_ij^k may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClosureMode {
    /// one real α_ij per pair, shared by every sample point
    Constants,
    /// a separate fit at each sample point
    Pointwise,
}

impl fmt::Display for ClosureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClosureMode::Constants => "constants",
            ClosureMode::Pointwise => "pointwise",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Coefficients {
    Constant(Vec<f64>),
    /// one row of α_ij^k per sample point
    Pointwise(Vec<Vec<f64>>),
}

/// Closure fit for one generator pair `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairClosure {
    pub i: usize,
    pub j: usize,
    pub coefficients: Coefficients,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosureReport {
    pub generators: usize,
    pub mode: ClosureMode,
    pub pairs: Vec<PairClosure>,
    /// max over pairs and points of ‖defect‖ / max(1, ‖[Z_i, Z_j]‖)
    pub max_residual: f64,
    pub tolerance: f64,
    pub samples: usize,
    /// points where `[Z_1(z) … Z_m(z)]` has rank below m
    pub rank_deficient_points: usize,
    pub pass: bool,
}

impl ClosureReport {
    /// More than half of the grid has a rank-deficient generator matrix.
    pub fn degenerate_span(&self) -> bool {
        2 * self.rank_deficient_points > self.samples
    }

    /// Constant-mode α_ij^k for any ordered pair (0-based), using antisymmetry.
    pub fn alpha(&self, i: usize, j: usize, k: usize) -> Option<f64> {
        if i == j {
            return Some(0.0);
        }
        let (a, b, sign) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
        self.pairs
            .iter()
            .find(|p| p.i == a && p.j == b)
            .and_then(|p| match &p.coefficients {
                Coefficients::Constant(c) => c.get(k).map(|v| sign * v),
                Coefficients::Pointwise(_) => None,
            })
    }
}

/// `M(z) = [Z₁(z) … Zₘ(z)]`, one column per field.
pub fn generator_matrix(fields: &[VectorField], z: &[f64]) -> Result<DMatrix<f64>, FieldError> {
    let d = fields[0].dim();
    let mut m = DMatrix::zeros(d, fields.len());
    for (k, f) in fields.iter().enumerate() {
        m.set_column(k, &f.eval_vector(z)?);
    }
    Ok(m)
}

/// Tests whether every `[Z_i, Z_j]` lies in the span of the generators.
pub fn check_closure<P: AsRef<[f64]>>(
    fields: &[VectorField],
    mode: ClosureMode,
    grid: &[P],
    tol: f64,
) -> Result<ClosureReport, LieError> {
    let Some(first) = fields.first() else {
        return Err(LieError::NoGenerators);
    };
    for f in &fields[1..] {
        same_ctx(first, f)?;
    }
    if grid.is_empty() {
        return Err(LieError::EmptyGrid);
    }
    let m = fields.len();
    let d = first.dim();
    let gens: Vec<DMatrix<f64>> = grid
        .iter()
        .map(|z| generator_matrix(fields, z.as_ref()))
        .collect::<Result<_, _>>()?;
    let rank_deficient_points = gens
        .iter()
        .filter(|g| numeric_rank(&singular_values(g), DEFAULT_RCOND) < m)
        .count();

    let mut pairs = Vec::new();
    let mut max_residual = 0.0f64;
    for i in 0..m {
        for j in (i + 1)..m {
            let bracket = lie_bracket(&fields[i], &fields[j])?;
            let values: Vec<DVector<f64>> = grid
                .iter()
                .map(|z| bracket.eval_vector(z.as_ref()))
                .collect::<Result<_, _>>()?;
            let fits: Vec<DVector<f64>> = match mode {
                ClosureMode::Constants => {
                    let rows = d * grid.len();
                    let mut a = DMatrix::zeros(rows, m);
                    let mut b = DMatrix::zeros(rows, 1);
                    for (s, (g, v)) in gens.iter().zip(&values).enumerate() {
                        a.view_mut((s * d, 0), (d, m)).copy_from(g);
                        b.view_mut((s * d, 0), (d, 1)).copy_from(v);
                    }
                    let alpha = lstsq(&a, &b, DEFAULT_RCOND).solution.column(0).into_owned();
                    vec![alpha; grid.len()]
                }
                ClosureMode::Pointwise => gens
                    .iter()
                    .zip(&values)
                    .map(|(g, v)| {
                        let b = DMatrix::from_column_slice(d, 1, v.as_slice());
                        lstsq(g, &b, DEFAULT_RCOND).solution.column(0).into_owned()
                    })
                    .collect(),
            };
            let mut pair_max = 0.0f64;
            for ((g, v), alpha) in gens.iter().zip(&values).zip(&fits) {
                let defect = v - g * alpha;
                let rel = defect.norm() / norm(v.as_slice()).max(1.0);
                pair_max = pair_max.max(rel);
            }
            max_residual = max_residual.max(pair_max);
            let coefficients = match mode {
                ClosureMode::Constants => Coefficients::Constant(fits[0].iter().copied().collect()),
                ClosureMode::Pointwise => {
                    Coefficients::Pointwise(fits.iter().map(|a| a.iter().copied().collect()).collect())
                }
            };
            pairs.push(PairClosure {
                i,
                j,
                coefficients,
                max_residual: pair_max,
            });
        }
    }
    Ok(ClosureReport {
        generators: m,
        mode,
        pairs,
        max_residual,
        tolerance: tol,
        samples: grid.len(),
        rank_deficient_points,
        pass: max_residual <= tol,
    })
}

/// Outcome of the linear-in-momentum generator checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Lemma1Report {
    /// max ‖[f₀, f_i](x)‖ over generators and grid
    pub commute_residual: f64,
    pub commute_pass: bool,
    /// closure of the base fields over ℝ
    pub closure: ClosureReport,
    /// max ‖[Z_i, Z_j](z) − lift([f_i, f_j])(z)‖ over pairs and grid
    pub lift_residual: f64,
    pub lift_pass: bool,
    pub tolerance: f64,
    pub pass: bool,
}

/// Checks that `f₀` commutes with each `f_i`, that the `f_i` close over ℝ,
/// and that lifted brackets are lifts of brackets. `grid` holds reduced
/// phase-space points; the base checks use their `x` part.
pub fn check_lemma1<P: AsRef<[f64]>>(
    fields: &[VectorField],
    f0: &VectorField,
    grid: &[P],
    tol: f64,
) -> Result<Lemma1Report, LieError> {
    let n = require_base(f0)?;
    for f in fields {
        require_base(f)?;
        same_ctx(f0, f)?;
    }
    if fields.is_empty() {
        return Err(LieError::NoGenerators);
    }
    if grid.is_empty() {
        return Err(LieError::EmptyGrid);
    }
    let xs: Vec<&[f64]> = grid.iter().map(|z| &z.as_ref()[..n]).collect();

    let mut commute_residual = 0.0f64;
    for f in fields {
        let b = lie_bracket(f0, f)?;
        for x in &xs {
            commute_residual = commute_residual.max(norm(&b.eval(x)?));
        }
    }

    let closure = check_closure(fields, ClosureMode::Constants, &xs, tol)?;

    let lifts: Vec<VectorField> = fields.iter().map(cotangent_lift).collect::<Result<_, _>>()?;
    let mut lift_residual = 0.0f64;
    for i in 0..fields.len() {
        for j in (i + 1)..fields.len() {
            let lifted_bracket = lie_bracket(&lifts[i], &lifts[j])?;
            let bracket_lift = cotangent_lift(&lie_bracket(&fields[i], &fields[j])?)?;
            for z in grid {
                let z = z.as_ref();
                lift_residual = lift_residual.max(norm_diff(&lifted_bracket.eval(z)?, &bracket_lift.eval(z)?));
            }
        }
    }

    let commute_pass = commute_residual <= tol;
    let lift_pass = lift_residual <= tol;
    Ok(Lemma1Report {
        commute_residual,
        commute_pass,
        pass: commute_pass && closure.pass && lift_pass,
        closure,
        lift_residual,
        lift_pass,
        tolerance: tol,
    })
}

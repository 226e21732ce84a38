//! Cauchy-data checks for classical stationary solutions.
//!
//! Data `λ ↦ (x̂₀(λ), p̂₀(λ), û₀(λ))` with `λ ∈ ℝⁿ⁻¹` seeds the
//! characteristic strips. It must satisfy the strip (compatibility)
//! condition, lie on the level set of `H₀`, and be transversal to the
//! projected characteristic direction `∂_pH₀`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::charfield::{CharError, Hamiltonian};
use crate::expr::{parse, EvalError, Expr, ParseError};
use crate::linalg::singular_values;
use crate::sampling::{box_grid, GridError};
use crate::space::{Kind, PhasePoint, VarContext};

pub const DEFAULT_POINTS_PER_AXIS: usize = 21;
pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_TRANSVERSALITY_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StationaryError {
    #[error("Cauchy data needs n ≥ 1")]
    ZeroDimension,
    #[error("{name} needs {expected} components, got {got}")]
    ComponentCount {
        name: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{name}[{index}]: {source}")]
    Parse {
        name: &'static str,
        index: usize,
        #[source]
        source: ParseError,
    },
    #[error("{expected} parameter box radii expected, got {got}")]
    RadiiCount { expected: usize, got: usize },
    #[error("Cauchy data has n = {data}, H₀ has n = {hamiltonian}")]
    DimensionMismatch { data: usize, hamiltonian: usize },
    #[error("evaluation failed at λ = {lambda:?}: {message}")]
    Eval { lambda: Vec<f64>, message: String },
    #[error(transparent)]
    Char(#[from] CharError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Parameterized initial data on `Π[−aᵢ, aᵢ] ⊂ ℝⁿ⁻¹`.
#[derive(Debug, Clone)]
pub struct CauchyData {
    n: usize,
    params: VarContext,
    x0: Vec<Expr>,
    p0: Vec<Expr>,
    u0: Expr,
    radii: Vec<f64>,
}

impl CauchyData {
    pub fn new(x0: Vec<Expr>, p0: Vec<Expr>, u0: Expr, radii: Vec<f64>) -> Result<Self, StationaryError> {
        let n = x0.len();
        if n == 0 {
            return Err(StationaryError::ZeroDimension);
        }
        if p0.len() != n {
            return Err(StationaryError::ComponentCount {
                name: "p0",
                expected: n,
                got: p0.len(),
            });
        }
        if radii.len() != n - 1 {
            return Err(StationaryError::RadiiCount {
                expected: n - 1,
                got: radii.len(),
            });
        }
        Ok(Self {
            n,
            params: VarContext::params(n - 1),
            x0,
            p0,
            u0,
            radii,
        })
    }

    /// Parses components written in the parameters `l1..l(n−1)`.
    pub fn parse<S: AsRef<str>>(x0: &[S], p0: &[S], u0: &str, radii: Vec<f64>) -> Result<Self, StationaryError> {
        let params = VarContext::params(x0.len().saturating_sub(1));
        let parse_all = |name: &'static str, src: &[S]| -> Result<Vec<Expr>, StationaryError> {
            src.iter()
                .enumerate()
                .map(|(index, s)| {
                    parse(s.as_ref(), &params).map_err(|source| StationaryError::Parse { name, index, source })
                })
                .collect()
        };
        let x = parse_all("x0", x0)?;
        let p = parse_all("p0", p0)?;
        let u = parse(u0, &params).map_err(|source| StationaryError::Parse {
            name: "u0",
            index: 0,
            source,
        })?;
        Self::new(x, p, u, radii)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn params(&self) -> VarContext {
        self.params
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn grid(&self, points_per_axis: usize) -> Result<Vec<Vec<f64>>, GridError> {
        box_grid(&self.radii, points_per_axis)
    }

    fn eval(&self, e: &Expr, lambda: &[f64]) -> Result<f64, StationaryError> {
        e.eval(lambda).map_err(|err: EvalError| StationaryError::Eval {
            lambda: lambda.to_vec(),
            message: err.render(&self.params),
        })
    }

    fn eval_all(&self, es: &[Expr], lambda: &[f64]) -> Result<Vec<f64>, StationaryError> {
        es.iter().map(|e| self.eval(e, lambda)).collect()
    }

    /// ẑ₀(λ) in the layout of `ctx` (u is dropped for reduced contexts).
    pub fn point(&self, ctx: VarContext, lambda: &[f64]) -> Result<PhasePoint, StationaryError> {
        if ctx.n() != self.n || !ctx.is_phase_space() {
            return Err(StationaryError::DimensionMismatch {
                data: self.n,
                hamiltonian: ctx.n(),
            });
        }
        let mut coords = self.eval_all(&self.x0, lambda)?;
        coords.extend(self.eval_all(&self.p0, lambda)?);
        if ctx.kind() == Kind::Full {
            coords.push(self.eval(&self.u0, lambda)?);
        }
        PhasePoint::new(ctx, coords).map_err(|e| StationaryError::Eval {
            lambda: lambda.to_vec(),
            message: e.to_string(),
        })
    }

    /// `∂x̂₀/∂λᵢ` as `[j][i]`.
    fn x_tangents(&self) -> Vec<Vec<Expr>> {
        self.x0.iter().map(|x| (0..self.n - 1).map(|i| x.diff(i)).collect()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub max_residual: f64,
    /// λ where the maximum is attained.
    pub worst: Vec<f64>,
    pub tolerance: f64,
    pub samples: usize,
    pub pass: bool,
}

fn max_over<F>(grid: &[Vec<f64>], tol: f64, f: F) -> Result<ResidualReport, StationaryError>
where
    F: Fn(&[f64]) -> Result<f64, StationaryError> + Sync,
{
    let values: Vec<f64> = grid.par_iter().map(|l| f(l)).collect::<Result<_, _>>()?;
    let (mut worst, mut max_residual) = (0, 0.0f64);
    for (i, &v) in values.iter().enumerate() {
        if v > max_residual || v.is_nan() {
            worst = i;
            max_residual = v;
        }
    }
    Ok(ResidualReport {
        max_residual,
        worst: grid.get(worst).cloned().unwrap_or_default(),
        tolerance: tol,
        samples: grid.len(),
        pass: max_residual <= tol,
    })
}

/// max over the grid and i of `|∂_{λᵢ}û₀ − ⟨p̂₀, ∂_{λᵢ}x̂₀⟩|`.
pub fn check_compatibility(c: &CauchyData, grid: &[Vec<f64>], tol: f64) -> Result<ResidualReport, StationaryError> {
    let du: Vec<Expr> = (0..c.n - 1).map(|i| c.u0.diff(i)).collect();
    let dx = c.x_tangents();
    max_over(grid, tol, |lambda| {
        let p = c.eval_all(&c.p0, lambda)?;
        let mut worst = 0.0f64;
        for (i, dui) in du.iter().enumerate() {
            let mut strip = 0.0;
            for (j, pj) in p.iter().enumerate() {
                strip += pj * c.eval(&dx[j][i], lambda)?;
            }
            worst = worst.max((c.eval(dui, lambda)? - strip).abs());
        }
        Ok(worst)
    })
}

/// max over the grid of `|H₀(ẑ₀(λ)) − H₀(z₀)|`.
pub fn check_level(
    c: &CauchyData,
    h0: &Hamiltonian,
    z0: &PhasePoint,
    grid: &[Vec<f64>],
    tol: f64,
) -> Result<ResidualReport, StationaryError> {
    let level = h0.value_at(z0)?;
    max_over(grid, tol, |lambda| {
        let z = c.point(h0.ctx(), lambda)?;
        Ok((h0.value(z.coords())? - level).abs())
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransversalityReport {
    pub min_abs_det: f64,
    pub min_sigma: f64,
    /// λ where σ_min is smallest.
    pub worst: Vec<f64>,
    pub threshold: f64,
    pub samples: usize,
    pub pass: bool,
}

/// The n×n matrix `[∂_pH₀(ẑ₀(λ)) | ∂_{λ₁}x̂₀ | … | ∂_{λₙ₋₁}x̂₀]`.
pub fn transversality_matrix(c: &CauchyData, h0: &Hamiltonian, lambda: &[f64]) -> Result<DMatrix<f64>, StationaryError> {
    let ctx = h0.ctx();
    let z = c.point(ctx, lambda)?;
    let grad = h0.gradient_at(z.coords())?;
    let n = c.n;
    let dx = c.x_tangents();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        m[(j, 0)] = grad[ctx.p_index(j)];
        for i in 0..n - 1 {
            m[(j, i + 1)] = c.eval(&dx[j][i], lambda)?;
        }
    }
    Ok(m)
}

pub fn check_transversality(
    c: &CauchyData,
    h0: &Hamiltonian,
    grid: &[Vec<f64>],
    threshold: f64,
) -> Result<TransversalityReport, StationaryError> {
    if h0.ctx().n() != c.n {
        return Err(StationaryError::DimensionMismatch {
            data: c.n,
            hamiltonian: h0.ctx().n(),
        });
    }
    let per_point: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|lambda| {
            let m = transversality_matrix(c, h0, lambda)?;
            let sigma = singular_values(&m).last().copied().unwrap_or(0.0);
            Ok((m.determinant().abs(), sigma))
        })
        .collect::<Result<_, StationaryError>>()?;
    let mut min_abs_det = f64::INFINITY;
    let mut min_sigma = f64::INFINITY;
    let mut worst = 0;
    for (i, &(det, sigma)) in per_point.iter().enumerate() {
        min_abs_det = min_abs_det.min(det);
        if sigma < min_sigma {
            min_sigma = sigma;
            worst = i;
        }
    }
    Ok(TransversalityReport {
        min_abs_det,
        min_sigma,
        worst: grid.get(worst).cloned().unwrap_or_default(),
        threshold,
        samples: grid.len(),
        pass: min_sigma >= threshold,
    })
}

//! Local flows of vector fields and their compositions into orbits.
//!
//! An orbit with generators `Z₁..Zₘ` based at `z₀` is the map
//!
//! ```text
//! ẑ(λ, z₀) = G₁(t₁) ∘ G₂(t₂) ∘ … ∘ Gₘ(tₘ) [z₀],   λ = (t₁, …, tₘ) ∈ Π[−aᵢ, aᵢ]
//! ```
//!
//! where `Gᵢ(σ)` is the flow of `Zᵢ`. Composition reads right to left: the
//! flow of `Zₘ` acts on `z₀` first and the flow of `Z₁` acts last.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::field::{FieldError, VectorField};
use crate::sampling::{box_grid, GridError};
use crate::space::PhasePoint;

/// A trajectory is declared divergent once ‖z‖ exceeds this.
pub const DIVERGENCE_NORM: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Method {
    /// Classical RK4 with `⌈|t|/step⌉` equal steps.
    Rk4 { step: f64 },
    /// Dormand–Prince 5(4) with error control.
    Rk45 { abs_tol: f64, rel_tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratorConfig {
    #[serde(flatten)]
    pub method: Method,
    /// Step budget per unit of flow time.
    pub max_steps_per_unit: usize,
    /// Largest |t| a single flow may be asked for.
    pub horizon: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self::rk4(1e-3)
    }
}

impl IntegratorConfig {
    pub fn rk4(step: f64) -> Self {
        Self {
            method: Method::Rk4 { step },
            max_steps_per_unit: 1_000_000,
            horizon: 1e3,
        }
    }

    pub fn rk45(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            method: Method::Rk45 { abs_tol, rel_tol },
            max_steps_per_unit: 1_000_000,
            horizon: 1e3,
        }
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let ok = match self.method {
            Method::Rk4 { step } => positive(step),
            Method::Rk45 { abs_tol, rel_tol } => positive(abs_tol) && positive(rel_tol),
        };
        if !ok {
            return Err(FlowError::BadConfig(format!("{:?}", self.method)));
        }
        if !positive(self.horizon) || self.max_steps_per_unit == 0 {
            return Err(FlowError::BadConfig(format!(
                "horizon {} / max steps per unit {}",
                self.horizon, self.max_steps_per_unit
            )));
        }
        Ok(())
    }

    fn step_budget(&self, t: f64) -> usize {
        let budget = self.max_steps_per_unit as f64 * t.abs().max(1.0);
        budget.min(usize::MAX as f64) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("invalid integrator settings: {0}")]
    BadConfig(String),
    #[error("flow time {t} exceeds the horizon {horizon}")]
    Horizon { t: f64, horizon: f64 },
    #[error("trajectory diverged at σ = {reached} (‖z‖ = {norm:e})")]
    Divergence { reached: f64, norm: f64 },
    #[error("field evaluation failed at σ = {reached}: {message}")]
    Eval { reached: f64, message: String },
    #[error("step budget of {steps} exhausted at σ = {reached}")]
    StepLimit { reached: f64, steps: usize },
    #[error("adaptive step size underflow at σ = {reached}")]
    StepUnderflow { reached: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
}

fn field_eval(z: &VectorField, y: &[f64], out: &mut [f64], sigma: f64) -> Result<(), FlowError> {
    z.eval_into(y, out).map_err(|e| match e {
        FieldError::Eval { .. } => FlowError::Eval {
            reached: sigma,
            message: e.to_string(),
        },
        other => FlowError::Field(other),
    })
}

fn check_state(y: &[f64], sigma: f64) -> Result<(), FlowError> {
    let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !norm.is_finite() || norm > DIVERGENCE_NORM {
        return Err(FlowError::Divergence { reached: sigma, norm });
    }
    Ok(())
}

/// Integrates `dz/dσ = Z(z)`, `z(0) = y` up to `σ = t`.
pub fn flow_coords(z: &VectorField, t: f64, y: &[f64], cfg: &IntegratorConfig) -> Result<Vec<f64>, FlowError> {
    cfg.validate()?;
    if y.len() != z.dim() {
        return Err(FieldError::PointDimension {
            expected: z.dim(),
            got: y.len(),
        }
        .into());
    }
    if t == 0.0 {
        return Ok(y.to_vec());
    }
    if !t.is_finite() || t.abs() > cfg.horizon {
        return Err(FlowError::Horizon {
            t,
            horizon: cfg.horizon,
        });
    }
    match cfg.method {
        Method::Rk4 { step } => rk4(z, t, y, step, cfg.step_budget(t)),
        Method::Rk45 { abs_tol, rel_tol } => dopri5(z, t, y, abs_tol, rel_tol, cfg.step_budget(t)),
    }
}

/// [`flow_coords`] on a [`PhasePoint`].
pub fn flow(z: &VectorField, t: f64, y: &PhasePoint, cfg: &IntegratorConfig) -> Result<PhasePoint, FlowError> {
    let out = flow_coords(z, t, y.coords(), cfg)?;
    PhasePoint::new(y.ctx(), out).map_err(|_| FlowError::Divergence {
        reached: t,
        norm: f64::NAN,
    })
}

fn rk4(z: &VectorField, t: f64, y0: &[f64], step: f64, budget: usize) -> Result<Vec<f64>, FlowError> {
    let steps_f = (t.abs() / step).ceil().max(1.0);
    if steps_f > budget as f64 {
        return Err(FlowError::StepLimit {
            reached: 0.0,
            steps: budget,
        });
    }
    let steps = steps_f as usize;
    let h = t / steps as f64;
    let d = y0.len();
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; d];
    let mut k2 = vec![0.0; d];
    let mut k3 = vec![0.0; d];
    let mut k4 = vec![0.0; d];
    let mut tmp = vec![0.0; d];
    for s in 0..steps {
        let sigma = s as f64 * h;
        field_eval(z, &y, &mut k1, sigma)?;
        for i in 0..d {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        field_eval(z, &tmp, &mut k2, sigma)?;
        for i in 0..d {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        field_eval(z, &tmp, &mut k3, sigma)?;
        for i in 0..d {
            tmp[i] = y[i] + h * k3[i];
        }
        field_eval(z, &tmp, &mut k4, sigma)?;
        for i in 0..d {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        check_state(&y, (s + 1) as f64 * h)?;
    }
    Ok(y)
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn dopri5(
    z: &VectorField,
    t: f64,
    y0: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    budget: usize,
) -> Result<Vec<f64>, FlowError> {
    let d = y0.len();
    let dir = t.signum();
    let span = t.abs();
    let mut y = y0.to_vec();
    let mut k = vec![vec![0.0; d]; 7];
    let mut stage = vec![0.0; d];
    let mut y5 = vec![0.0; d];
    let mut sigma = 0.0f64;
    let mut h = (0.01 * span).min(0.1).max(1e-6_f64.min(span));
    let mut steps = 0usize;
    field_eval(z, &y, &mut k[0], 0.0)?;
    while sigma < span {
        if steps >= budget {
            return Err(FlowError::StepLimit {
                reached: dir * sigma,
                steps: budget,
            });
        }
        steps += 1;
        let last = sigma + h >= span;
        let hh = if last { span - sigma } else { h };
        let hs = dir * hh;
        for s in 1..7 {
            for i in 0..d {
                let mut acc = y[i];
                for (r, a) in A[s][..s].iter().enumerate() {
                    acc += hs * a * k[r][i];
                }
                stage[i] = acc;
            }
            let (head, tail) = k.split_at_mut(s);
            let _ = head;
            field_eval(z, &stage, &mut tail[0], dir * (sigma + C[s] * hh))?;
        }
        let mut err = 0.0f64;
        for i in 0..d {
            let mut v5 = y[i];
            let mut v4 = y[i];
            for s in 0..7 {
                v5 += hs * B5[s] * k[s][i];
                v4 += hs * B4[s] * k[s][i];
            }
            y5[i] = v5;
            let scale = abs_tol + rel_tol * y[i].abs().max(v5.abs());
            err += ((v5 - v4) / scale).powi(2);
        }
        let err = (err / d as f64).sqrt();
        if err <= 1.0 || !err.is_finite() && hh <= f64::EPSILON * span {
            sigma = if last { span } else { sigma + hh };
            y.copy_from_slice(&y5);
            check_state(&y, dir * sigma)?;
            // FSAL: the last stage is the derivative at the new point
            let (first, rest) = k.split_at_mut(1);
            first[0].copy_from_slice(&rest[5]);
        }
        let factor = if err == 0.0 {
            5.0
        } else if err.is_finite() {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            0.2
        };
        h = hh * factor;
        if h < f64::EPSILON * span.max(1.0) && sigma < span {
            return Err(FlowError::StepUnderflow { reached: dir * sigma });
        }
    }
    Ok(y)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OrbitError {
    #[error("an orbit needs at least one generator")]
    NoGenerators,
    #[error("{generators} generators but {radii} box radii")]
    RadiiCount { generators: usize, radii: usize },
    #[error("box radius a{index} = {value} must be positive")]
    BadRadius { index: usize, value: f64 },
    #[error("generator {index} lives on a different space than the base point")]
    ContextMismatch { index: usize },
    #[error("λ has {got} entries, expected {expected}")]
    LambdaDimension { expected: usize, got: usize },
    #[error("t{index} = {value} lies outside [-{radius}, {radius}]")]
    OutOfBox { index: usize, value: f64, radius: f64 },
    #[error("flow of generator {generator} failed: {source}")]
    Flow {
        generator: usize,
        #[source]
        source: FlowError,
    },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Config(FlowError),
}

/// A composition of generator flows anchored at a base point.
#[derive(Debug, Clone)]
pub struct Orbit {
    generators: Vec<VectorField>,
    base: PhasePoint,
    radii: Vec<f64>,
    integrator: IntegratorConfig,
}

/// One row of an orbit grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitRow {
    pub lambda: Vec<f64>,
    pub point: Result<PhasePoint, OrbitError>,
}

impl Orbit {
    pub fn new(
        generators: Vec<VectorField>,
        base: PhasePoint,
        radii: Vec<f64>,
        integrator: IntegratorConfig,
    ) -> Result<Self, OrbitError> {
        if generators.is_empty() {
            return Err(OrbitError::NoGenerators);
        }
        if radii.len() != generators.len() {
            return Err(OrbitError::RadiiCount {
                generators: generators.len(),
                radii: radii.len(),
            });
        }
        if let Some((i, &a)) = radii.iter().enumerate().find(|(_, a)| !(a.is_finite() && **a > 0.0)) {
            return Err(OrbitError::BadRadius { index: i + 1, value: a });
        }
        if let Some(i) = generators.iter().position(|g| g.ctx() != base.ctx()) {
            return Err(OrbitError::ContextMismatch { index: i + 1 });
        }
        integrator.validate().map_err(OrbitError::Config)?;
        Ok(Self {
            generators,
            base,
            radii,
            integrator,
        })
    }

    pub fn generators(&self) -> &[VectorField] {
        &self.generators
    }

    pub fn base(&self) -> &PhasePoint {
        &self.base
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn integrator(&self) -> &IntegratorConfig {
        &self.integrator
    }

    /// Number of generators `m`.
    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    /// Same orbit with other box radii.
    pub fn with_radii(&self, radii: Vec<f64>) -> Result<Self, OrbitError> {
        Self::new(self.generators.clone(), self.base.clone(), radii, self.integrator)
    }

    fn check_lambda(&self, lambda: &[f64]) -> Result<(), OrbitError> {
        if lambda.len() != self.rank() {
            return Err(OrbitError::LambdaDimension {
                expected: self.rank(),
                got: lambda.len(),
            });
        }
        for (i, (&t, &a)) in lambda.iter().zip(&self.radii).enumerate() {
            if !(t.abs() <= a) {
                return Err(OrbitError::OutOfBox {
                    index: i + 1,
                    value: t,
                    radius: a,
                });
            }
        }
        Ok(())
    }

    /// ẑ(λ, z₀). Returns `z₀` bit-for-bit at λ = 0.
    pub fn point(&self, lambda: &[f64]) -> Result<PhasePoint, OrbitError> {
        self.check_lambda(lambda)?;
        let coords = self.compose(lambda)?;
        PhasePoint::new(self.base.ctx(), coords).map_err(|_| OrbitError::Flow {
            generator: 1,
            source: FlowError::Divergence {
                reached: lambda[0],
                norm: f64::NAN,
            },
        })
    }

    pub(crate) fn compose(&self, lambda: &[f64]) -> Result<Vec<f64>, OrbitError> {
        let mut z = self.base.coords().to_vec();
        for (i, (gen, &t)) in self.generators.iter().zip(lambda).enumerate().rev() {
            if t != 0.0 {
                z = flow_coords(gen, t, &z, &self.integrator).map_err(|source| OrbitError::Flow {
                    generator: i + 1,
                    source,
                })?;
            }
        }
        Ok(z)
    }

    /// ẑ on a uniform `k^m` grid over Λ, rows in lexicographic axis order.
    /// Rows are computed in parallel; failures stay in their row.
    pub fn grid(&self, points_per_axis: usize) -> Result<Vec<OrbitRow>, OrbitError> {
        let lambdas = lambda_grid(&self.radii, points_per_axis)?;
        Ok(lambdas
            .into_par_iter()
            .map(|lambda| {
                let point = self.point(&lambda);
                OrbitRow { lambda, point }
            })
            .collect())
    }
}

/// Uniform λ-grid with an odd node count per axis so that λ = 0 is included.
pub fn lambda_grid(radii: &[f64], k: usize) -> Result<Vec<Vec<f64>>, GridError> {
    if k < 2 {
        return Err(GridError::TooFewPoints(k));
    }
    if k.is_multiple_of(2) {
        return Err(GridError::EvenPoints(k));
    }
    box_grid(radii, k)
}

//! The gradient system of an orbit and the stationarity certificate.
//!
//! For an orbit `ẑ(λ)` with generators `Z₁..Zₘ` the λ-Jacobian `J = ∂_λẑ`
//! factors through the generator matrix `M = [Z₁(ẑ) … Zₘ(ẑ)]` as `J = M·A`,
//! with `A(0) = I`. Dual vectors `qᵢ` solve `J·qᵢ = Zᵢ(ẑ)`; given them,
//! `⟨∂_λH₀(ẑ), qᵢ⟩ = ⟨∂_zH₀, Zᵢ⟩`, which vanishes when every generator
//! conserves `H₀`, and independence of the `qᵢ` then forces `∂_λH₀(ẑ) = 0`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::charfield::{CharError, Hamiltonian};
use crate::field::FieldError;
use crate::flow::{flow_coords, lambda_grid, Orbit, OrbitError};
use crate::lie::generator_matrix;
use crate::linalg::{condition_number, lstsq, singular_values, DEFAULT_RCOND};

pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Minimal σ(A) below which the dual vectors are not trusted.
pub const DEFAULT_RANK_THRESHOLD: f64 = 1e-8;

/// σ_min(A) above which `J·qᵢ = Zᵢ` is expected to hold tightly.
pub const COHERENCE_SIGMA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GradsysError {
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Char(#[from] CharError),
    #[error("generator matrix is rank deficient at λ = {lambda:?} (σ_min = {sigma_min:e}, σ_max = {sigma_max:e})")]
    RankDeficient {
        lambda: Vec<f64>,
        sigma_min: f64,
        sigma_max: f64,
    },
    #[error("finite-difference step {0} must be positive")]
    BadStep(f64),
    #[error("H₀ lives on {h0}, the orbit on {orbit}")]
    ContextMismatch { h0: String, orbit: String },
}

/// `wᵢ = Gᵢ(tᵢ)∘…∘Gₘ(tₘ)[z₀]` for `i = 1..m`, with `z₀` appended last.
fn partial_orbits(orbit: &Orbit, lambda: &[f64]) -> Result<Vec<Vec<f64>>, OrbitError> {
    orbit.point(lambda)?;
    let m = orbit.rank();
    let mut w = vec![Vec::new(); m + 1];
    w[m] = orbit.base().coords().to_vec();
    for i in (0..m).rev() {
        w[i] = run(orbit, i, lambda[i], &w[i + 1])?;
    }
    Ok(w)
}

fn run(orbit: &Orbit, i: usize, t: f64, y: &[f64]) -> Result<Vec<f64>, OrbitError> {
    if t == 0.0 {
        return Ok(y.to_vec());
    }
    flow_coords(&orbit.generators()[i], t, y, orbit.integrator()).map_err(|source| OrbitError::Flow {
        generator: i + 1,
        source,
    })
}

/// Applies `G₁(t₁)∘…∘G_{i}(t_{i})` (generators before index `i`) to `y`.
fn outer(orbit: &Orbit, i: usize, lambda: &[f64], y: Vec<f64>) -> Result<Vec<f64>, OrbitError> {
    (0..i).rev().try_fold(y, |y, j| run(orbit, j, lambda[j], &y))
}

/// `∂_λẑ(λ, z₀)` by central differences, one column per generator.
///
/// The displaced points use the group law `Gᵢ(tᵢ ± h) = Gᵢ(±h)∘Gᵢ(tᵢ)`, so
/// both sides share the integrator's step sequence and the difference
/// carries no step-count jitter. At the faces of Λ the displaced times sit
/// `h` outside the box.
pub fn lambda_jacobian(orbit: &Orbit, lambda: &[f64], fd_step: f64) -> Result<DMatrix<f64>, GradsysError> {
    if !(fd_step.is_finite() && fd_step > 0.0) {
        return Err(GradsysError::BadStep(fd_step));
    }
    let w = partial_orbits(orbit, lambda)?;
    let m = orbit.rank();
    let d = orbit.base().dim();
    let mut jac = DMatrix::zeros(d, m);
    for i in 0..m {
        let plus = outer(orbit, i, lambda, run(orbit, i, fd_step, &w[i])?)?;
        let minus = outer(orbit, i, lambda, run(orbit, i, -fd_step, &w[i])?)?;
        for r in 0..d {
            jac[(r, i)] = (plus[r] - minus[r]) / (2.0 * fd_step);
        }
    }
    Ok(jac)
}

/// The algebraic representation at one λ.
#[derive(Debug, Clone)]
pub struct GradientRep {
    pub lambda: Vec<f64>,
    /// ẑ(λ, z₀).
    pub point: Vec<f64>,
    /// ∂_λẑ, d×m.
    pub jacobian: DMatrix<f64>,
    /// Generator matrix at ẑ, d×m.
    pub generators: DMatrix<f64>,
    /// A with J ≈ M·A, m×m.
    pub a: DMatrix<f64>,
    /// Columns are the dual vectors qᵢ.
    pub q: DMatrix<f64>,
    pub sigma_min_a: f64,
    pub cond_a: f64,
    /// ‖J·qᵢ − Zᵢ(ẑ)‖.
    pub defects: Vec<f64>,
    /// ‖M·A·qᵢ − Zᵢ(ẑ)‖.
    pub coherence: Vec<f64>,
    /// ‖J − M·A‖_F.
    pub ls_residual: f64,
}

impl GradientRep {
    pub fn max_defect(&self) -> f64 {
        self.defects.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_coherence(&self) -> f64 {
        self.coherence.iter().copied().fold(0.0, f64::max)
    }

    /// max |A − I| entrywise.
    pub fn identity_error(&self) -> f64 {
        let m = self.a.nrows();
        (self.a.clone() - DMatrix::identity(m, m)).amax()
    }

    pub fn sigma_min_q(&self) -> f64 {
        singular_values(&self.q).last().copied().unwrap_or(0.0)
    }
}

pub fn representation(orbit: &Orbit, lambda: &[f64]) -> Result<GradientRep, GradsysError> {
    representation_with_step(orbit, lambda, DEFAULT_FD_STEP)
}

pub fn representation_with_step(orbit: &Orbit, lambda: &[f64], fd_step: f64) -> Result<GradientRep, GradsysError> {
    let jacobian = lambda_jacobian(orbit, lambda, fd_step)?;
    let point = orbit.point(lambda)?.into_coords();
    let gens = generator_matrix(orbit.generators(), &point)?;
    let m = orbit.rank();

    let fit = lstsq(&gens, &jacobian, DEFAULT_RCOND);
    if fit.rank < m {
        return Err(GradsysError::RankDeficient {
            lambda: lambda.to_vec(),
            sigma_min: fit.sigma_min(),
            sigma_max: fit.sigma_max(),
        });
    }
    let a = fit.solution;
    let q = lstsq(&jacobian, &gens, DEFAULT_RCOND).solution;

    let jq = &jacobian * &q;
    let maq = &gens * &a * &q;
    let col_err = |prod: &DMatrix<f64>| -> Vec<f64> { (0..m).map(|i| (prod.column(i) - gens.column(i)).norm()).collect() };
    let defects = col_err(&jq);
    let coherence = col_err(&maq);
    let ls_residual = (&jacobian - &gens * &a).norm();
    let sv = singular_values(&a);

    Ok(GradientRep {
        lambda: lambda.to_vec(),
        point,
        jacobian,
        generators: gens,
        sigma_min_a: sv.last().copied().unwrap_or(0.0),
        cond_a: condition_number(&sv),
        a,
        q,
        defects,
        coherence,
        ls_residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertifyOptions {
    pub points_per_axis: usize,
    /// Bound on directional derivatives and on the drift of H₀.
    pub tolerance: f64,
    /// Minimal accepted σ_min(A).
    pub rank_threshold: f64,
    pub fd_step: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            points_per_axis: 11,
            tolerance: 1e-6,
            rank_threshold: DEFAULT_RANK_THRESHOLD,
            fd_step: DEFAULT_FD_STEP,
        }
    }
}

/// Per-λ quantities of the certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertRow {
    pub lambda: Vec<f64>,
    /// max_i |⟨∂_λH₀(ẑ), qᵢ⟩|.
    pub directional: f64,
    /// ‖∂_λH₀(ẑ)‖.
    pub gradient_norm: f64,
    /// Bound on ‖∂_λH₀‖ implied by the directional bound and σ_min(Q).
    pub gradient_bound: f64,
    /// H₀(ẑ) − H₀(z₀).
    pub drift: f64,
    pub sigma_min_a: f64,
    pub cond_a: f64,
    pub max_defect: f64,
    pub max_coherence: f64,
    pub failures: Vec<&'static str>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub points: usize,
    pub tolerance: f64,
    pub rank_threshold: f64,
    pub max_directional: f64,
    pub max_gradient_norm: f64,
    /// max over the grid of ‖∂_λH₀‖ / bound; ≤ 1 means (ii) holds everywhere.
    pub max_gradient_ratio: f64,
    pub max_drift: f64,
    pub min_sigma_a: f64,
    pub max_cond_a: f64,
    pub max_defect: f64,
    /// max defect over points with σ_min(A) > [`COHERENCE_SIGMA`].
    pub max_coherent_defect: f64,
    /// max |A(0) − I|, present when λ = 0 is a grid node.
    pub identity_error: Option<f64>,
    pub rows: Vec<CertRow>,
    pub pass: bool,
}

impl Certificate {
    pub fn failures(&self) -> impl Iterator<Item = &CertRow> {
        self.rows.iter().filter(|r| !r.failures.is_empty())
    }
}

fn certify_point(orbit: &Orbit, h0: &Hamiltonian, level: f64, lambda: Vec<f64>, opts: &CertifyOptions) -> Result<(CertRow, Option<f64>), GradsysError> {
    let rep = representation_with_step(orbit, &lambda, opts.fd_step)?;
    let m = orbit.rank();
    let grad_z = DVector::from_vec(h0.gradient_at(&rep.point)?);
    let grad_lambda = rep.jacobian.transpose() * grad_z;
    let directional = (0..m)
        .map(|i| grad_lambda.dot(&rep.q.column(i)).abs())
        .fold(0.0, f64::max);
    let gradient_norm = grad_lambda.norm();
    let gradient_bound = opts.tolerance * (m as f64).sqrt() / rep.sigma_min_q().min(1.0);
    let drift = h0.value(&rep.point)? - level;

    let mut failures = Vec::new();
    if !(directional <= opts.tolerance) {
        failures.push("directional derivative");
    }
    if !(gradient_norm <= gradient_bound) {
        failures.push("gradient norm");
    }
    if !(drift.abs() <= opts.tolerance) {
        failures.push("drift");
    }
    if !(rep.sigma_min_a >= opts.rank_threshold) {
        failures.push("singular A");
    }
    let identity = lambda.iter().all(|&t| t == 0.0).then(|| rep.identity_error());
    let row = CertRow {
        lambda,
        directional,
        gradient_norm,
        gradient_bound,
        drift,
        sigma_min_a: rep.sigma_min_a,
        cond_a: rep.cond_a,
        max_defect: rep.max_defect(),
        max_coherence: rep.max_coherence(),
        failures,
    };
    Ok((row, identity))
}

/// Certifies `H₀(ẑ(λ, z₀)) = H₀(z₀)` over a uniform λ-grid.
///
/// Points are processed in parallel; the first error in grid order is
/// returned.
pub fn certify_stationarity(orbit: &Orbit, h0: &Hamiltonian, opts: &CertifyOptions) -> Result<Certificate, GradsysError> {
    if h0.ctx() != orbit.base().ctx() {
        return Err(GradsysError::ContextMismatch {
            h0: h0.ctx().to_string(),
            orbit: orbit.base().ctx().to_string(),
        });
    }
    let level = h0.value_at(orbit.base())?;
    let grid = lambda_grid(orbit.radii(), opts.points_per_axis).map_err(OrbitError::from)?;
    let results: Vec<_> = grid
        .into_par_iter()
        .map(|lambda| certify_point(orbit, h0, level, lambda, opts))
        .collect();

    let mut rows = Vec::with_capacity(results.len());
    let mut identity_error = None;
    for r in results {
        let (row, id) = r?;
        identity_error = identity_error.or(id);
        rows.push(row);
    }
    let max = |f: fn(&CertRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    let max_directional = max(|r| r.directional);
    let max_gradient_norm = max(|r| r.gradient_norm);
    let max_gradient_ratio = max(|r| r.gradient_norm / r.gradient_bound);
    let max_drift = max(|r| r.drift.abs());
    let max_cond_a = max(|r| r.cond_a);
    let max_defect = max(|r| r.max_defect);
    let min_sigma_a = rows.iter().map(|r| r.sigma_min_a).fold(f64::INFINITY, f64::min);
    let max_coherent_defect = rows
        .iter()
        .filter(|r| r.sigma_min_a > COHERENCE_SIGMA)
        .map(|r| r.max_defect)
        .fold(0.0, f64::max);
    let pass = rows.iter().all(|r| r.failures.is_empty());
    Ok(Certificate {
        points: rows.len(),
        tolerance: opts.tolerance,
        rank_threshold: opts.rank_threshold,
        max_directional,
        max_gradient_norm,
        max_gradient_ratio,
        max_drift,
        min_sigma_a,
        max_cond_a,
        max_defect,
        max_coherent_defect,
        identity_error,
        rows,
        pass,
    })
}

/// Outcome of [`probe_radii`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Probe {
    pub radii: Vec<f64>,
    pub halvings: usize,
    pub min_sigma_a: f64,
}

/// Halves the box radii until every grid point integrates and A stays
/// nonsingular, giving up after `max_halvings`.
pub fn probe_radii(orbit: &Orbit, opts: &CertifyOptions, max_halvings: usize) -> Option<Probe> {
    let mut radii = orbit.radii().to_vec();
    for halvings in 0..=max_halvings {
        let candidate = orbit.with_radii(radii.clone()).ok()?;
        if let Ok(min_sigma_a) = min_sigma_on_grid(&candidate, opts) {
            if min_sigma_a >= opts.rank_threshold {
                return Some(Probe {
                    radii,
                    halvings,
                    min_sigma_a,
                });
            }
        }
        radii.iter_mut().for_each(|a| *a /= 2.0);
    }
    None
}

fn min_sigma_on_grid(orbit: &Orbit, opts: &CertifyOptions) -> Result<f64, GradsysError> {
    let grid = lambda_grid(orbit.radii(), opts.points_per_axis).map_err(OrbitError::from)?;
    grid.into_par_iter()
        .map(|lambda| representation_with_step(orbit, &lambda, opts.fd_step).map(|r| r.sigma_min_a))
        .collect::<Result<Vec<_>, _>>()
        .map(|v| v.into_iter().fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charfield::char_field;
    use crate::field::VectorField;
    use crate::flow::IntegratorConfig;
    use crate::space::{PhasePoint, VarContext};

    fn oscillator_orbit(z0: [f64; 4], broken: bool) -> (Orbit, Hamiltonian) {
        let ctx = VarContext::reduced(2);
        let h0 = Hamiltonian::parse("(p1^2+p2^2+x1^2+x2^2)/2", ctx).unwrap();
        let l = if broken { "x1*p2 - x2*p1 + 0.1*x1" } else { "x1*p2 - x2*p1" };
        let h2 = Hamiltonian::parse(l, ctx).unwrap();
        let gens = vec![char_field(&h0).into_field(), char_field(&h2).into_field()];
        let base = PhasePoint::new(ctx, z0.to_vec()).unwrap();
        let orbit = Orbit::new(gens, base, vec![0.5, 0.5], IntegratorConfig::default()).unwrap();
        (orbit, h0)
    }

    #[test]
    fn identity_at_origin() {
        let (orbit, _) = oscillator_orbit([1.0, 0.0, 0.0, 0.5], false);
        let rep = representation(&orbit, &[0.0, 0.0]).unwrap();
        assert!(rep.identity_error() < 1e-6, "{}", rep.a);
        assert!((rep.q.clone() - DMatrix::identity(2, 2)).amax() < 1e-6);
        assert!(rep.max_defect() < 1e-6);
        let z = orbit.base().coords();
        for i in 0..2 {
            let zi = orbit.generators()[i].eval_vector(z).unwrap();
            assert!((rep.jacobian.column(i) - zi).amax() < 1e-6);
        }
    }

    #[test]
    fn interior_point_is_coherent() {
        let (orbit, _) = oscillator_orbit([1.0, 0.0, 0.0, 0.5], false);
        let rep = representation(&orbit, &[0.3, -0.2]).unwrap();
        assert!(rep.max_defect() <= 1e-5, "{:?}", rep.defects);
        assert!(rep.sigma_min_a > 0.1, "{}", rep.sigma_min_a);
    }

    #[test]
    fn single_generator_column_is_the_field() {
        let ctx = VarContext::reduced(1);
        let z = VectorField::parse(ctx, &["p1", "-x1"]).unwrap();
        let base = PhasePoint::reduced(&[1.0], &[0.0]).unwrap();
        let orbit = Orbit::new(vec![z.clone()], base, vec![1.0], IntegratorConfig::default()).unwrap();
        let jac = lambda_jacobian(&orbit, &[0.7], DEFAULT_FD_STEP).unwrap();
        let zt = orbit.point(&[0.7]).unwrap();
        let expect = z.eval(zt.coords()).unwrap();
        assert!((jac[(0, 0)] - expect[0]).abs() < 1e-6);
        assert!((jac[(1, 0)] - expect[1]).abs() < 1e-6);
    }

    #[test]
    fn dependent_generators_are_rejected() {
        let ctx = VarContext::reduced(1);
        let z = VectorField::parse(ctx, &["p1", "-x1"]).unwrap();
        let base = PhasePoint::reduced(&[1.0], &[0.0]).unwrap();
        let orbit = Orbit::new(vec![z.clone(), z.scale(2.0)], base, vec![0.5, 0.5], IntegratorConfig::default()).unwrap();
        assert!(matches!(
            representation(&orbit, &[0.1, 0.2]),
            Err(GradsysError::RankDeficient { .. })
        ));
    }

    #[test]
    fn certificate_passes_and_mutation_fails() {
        let opts = CertifyOptions {
            points_per_axis: 5,
            ..CertifyOptions::default()
        };
        let (orbit, h0) = oscillator_orbit([1.0, 0.0, 0.0, 0.5], false);
        let cert = certify_stationarity(&orbit, &h0, &opts).unwrap();
        assert!(cert.pass, "{cert:#?}");
        assert!(cert.identity_error.unwrap() < 1e-6);
        let origin = &cert.rows[cert.rows.len() / 2];
        assert_eq!(origin.lambda, vec![0.0, 0.0]);
        assert!(origin.directional < 1e-9 && origin.drift.abs() < 1e-9);

        let (orbit, h0) = oscillator_orbit([1.0, 0.0, 0.0, 0.5], true);
        let cert = certify_stationarity(&orbit, &h0, &opts).unwrap();
        assert!(!cert.pass);
        assert!(cert.max_drift > 1e-3, "{}", cert.max_drift);
    }

    #[test]
    fn probe_keeps_good_radii() {
        let (orbit, _) = oscillator_orbit([1.0, 0.0, 0.0, 0.5], false);
        let opts = CertifyOptions {
            points_per_axis: 3,
            ..CertifyOptions::default()
        };
        let probe = probe_radii(&orbit, &opts, 4).unwrap();
        assert_eq!(probe.halvings, 0);
        assert_eq!(probe.radii, vec![0.5, 0.5]);
    }
}

//! Problem files.
//!
//! A problem is a TOML document:
//!
//! ```toml
//! [problem]
//! n = 2
//! kind = "reduced"        # or "full"
//! rho = 1.0               # sample ball radius is 2·rho
//! z0 = [1.0, 0.0, 0.0, 0.5]
//!
//! [hamiltonian]
//! h0 = "(p1^2 + p2^2 + x1^2 + x2^2)/2"
//!
//! [generators]
//! hams = ["(p1^2 + p2^2 + x1^2 + x2^2)/2", "x1*p2 - x2*p1"]
//! # or: base_fields = [["x1", "0"], ["0", "x2"]]   (lifted to ⟨p, f⟩)
//!
//! [box]
//! a = [0.5, 0.5]
//!
//! [integrator]
//! method = "rk4"          # or "rk45" with abs_tol / rel_tol
//! step = 1e-3
//! ```
//!
//! Optional tables: `[tolerances]`, `[sampling]` and `[cauchy]`. Unknown
//! keys are rejected.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::charfield::{char_field, CharError, Hamiltonian};
use crate::field::VectorField;
use crate::flow::{IntegratorConfig, Method, Orbit, OrbitError};
use crate::lie::{base_field, momentum_hamiltonian, ClosureMode, LieError};
use crate::sampling::{ball_points, DEFAULT_SEED};
use crate::space::{Kind, PhasePoint, VarContext};
use crate::stationary::{CauchyData, StationaryError, DEFAULT_POINTS_PER_AXIS};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("TOML error at line {line}, column {column}: {message}")]
    Toml { line: usize, column: usize, message: String },
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("[hamiltonian] h0: {0}")]
    Hamiltonian(CharError),
    #[error("[generators] entry {index}: {message}")]
    Generator { index: usize, message: String },
    #[error("[cauchy]: {0}")]
    Cauchy(StationaryError),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    problem: RawHeader,
    hamiltonian: RawHamiltonian,
    generators: RawGenerators,
    #[serde(rename = "box")]
    bounds: Option<RawBox>,
    integrator: Option<RawIntegrator>,
    #[serde(default)]
    tolerances: Tolerances,
    #[serde(default)]
    sampling: Sampling,
    cauchy: Option<RawCauchy>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHeader {
    name: Option<String>,
    n: usize,
    kind: String,
    #[serde(default = "default_rho")]
    rho: f64,
    z0: Vec<f64>,
}

fn default_rho() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHamiltonian {
    h0: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGenerators {
    hams: Option<Vec<String>>,
    base_fields: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBox {
    a: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntegrator {
    #[serde(default = "default_method")]
    method: String,
    step: Option<f64>,
    abs_tol: Option<f64>,
    rel_tol: Option<f64>,
    max_steps_per_unit: Option<usize>,
    horizon: Option<f64>,
}

fn default_method() -> String {
    "rk4".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCauchy {
    x0: Vec<String>,
    p0: Vec<String>,
    #[serde(default = "default_u0")]
    u0: String,
    #[serde(rename = "box")]
    bounds: Option<Vec<f64>>,
    points_per_axis: Option<usize>,
}

fn default_u0() -> String {
    "0".into()
}

/// Check tolerances; every field has a default.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub first_integral: f64,
    pub closure: f64,
    pub stationarity: f64,
    /// Minimal σ_min(A) accepted by the certificate.
    pub rank: f64,
    /// Bound on ‖J·qᵢ − Zᵢ‖ where σ_min(A) > 0.1.
    pub defect: f64,
    pub cauchy: f64,
    pub transversality: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            first_integral: 1e-9,
            closure: 1e-8,
            stationarity: 1e-6,
            rank: 1e-8,
            defect: 1e-5,
            cauchy: 1e-9,
            transversality: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sampling {
    pub points: usize,
    pub seed: u64,
    pub closure_mode: ClosureMode,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            points: 50,
            seed: DEFAULT_SEED,
            closure_mode: ClosureMode::Constants,
        }
    }
}

/// How the generators were given.
#[derive(Debug, Clone)]
pub enum GeneratorSource {
    Hamiltonians,
    /// x-only fields, kept for reference; the generators are their lifts.
    BaseFields(Vec<VectorField>),
}

#[derive(Debug, Clone)]
pub struct CauchySection {
    pub data: CauchyData,
    pub points_per_axis: usize,
}

/// A validated problem.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: Option<String>,
    pub ctx: VarContext,
    pub rho: f64,
    pub z0: PhasePoint,
    pub h0: Hamiltonian,
    /// One Hamiltonian per generator.
    pub generators: Vec<Hamiltonian>,
    pub source: GeneratorSource,
    pub radii: Vec<f64>,
    pub integrator: IntegratorConfig,
    pub tolerances: Tolerances,
    pub sampling: Sampling,
    pub cauchy: Option<CauchySection>,
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.chars().count(), |i| before[i + 1..].chars().count()) + 1;
    (line, column)
}

fn positive(name: &str, v: f64) -> Result<f64, ProblemError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(ProblemError::Invalid(format!("{name} must be positive, got {v}")))
    }
}

impl Problem {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ProblemError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ProblemError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, ProblemError> {
        let raw: RawProblem = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((1, 1), |s| line_column(text, s.start));
            ProblemError::Toml {
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawProblem) -> Result<Self, ProblemError> {
        let kind = match raw.problem.kind.as_str() {
            "reduced" => Kind::Reduced,
            "full" => Kind::Full,
            other => {
                return Err(ProblemError::Invalid(format!(
                    "[problem] kind must be \"reduced\" or \"full\", got {other:?}"
                )))
            }
        };
        let ctx = VarContext::new(raw.problem.n, kind).map_err(|e| ProblemError::Invalid(format!("[problem] n: {e}")))?;
        let z0 = PhasePoint::new(ctx, raw.problem.z0).map_err(|e| ProblemError::Invalid(format!("[problem] z0: {e}")))?;
        let rho = positive("[problem] rho", raw.problem.rho)?;
        let h0 = Hamiltonian::parse(&raw.hamiltonian.h0, ctx).map_err(ProblemError::Hamiltonian)?;

        let (generators, source) = match (raw.generators.hams, raw.generators.base_fields) {
            (Some(hams), None) => {
                let gens = hams
                    .iter()
                    .enumerate()
                    .map(|(i, src)| {
                        Hamiltonian::parse(src, ctx).map_err(|e| ProblemError::Generator {
                            index: i + 1,
                            message: e.to_string(),
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                (gens, GeneratorSource::Hamiltonians)
            }
            (None, Some(fields)) => {
                let mut bases = Vec::with_capacity(fields.len());
                let mut gens = Vec::with_capacity(fields.len());
                for (i, srcs) in fields.iter().enumerate() {
                    let wrap = |e: LieError| ProblemError::Generator {
                        index: i + 1,
                        message: e.to_string(),
                    };
                    let f = base_field(ctx, srcs).map_err(wrap)?;
                    let lifted = momentum_hamiltonian(&f).map_err(wrap)?;
                    gens.push(Hamiltonian::new(ctx, lifted.expr().clone()).map_err(|e| wrap(e.into()))?);
                    bases.push(f);
                }
                (gens, GeneratorSource::BaseFields(bases))
            }
            _ => {
                return Err(ProblemError::Invalid(
                    "[generators] needs exactly one of `hams` or `base_fields`".into(),
                ))
            }
        };
        if generators.is_empty() {
            return Err(ProblemError::Invalid("[generators] list is empty".into()));
        }

        let m = generators.len();
        let radii = raw.bounds.map_or_else(|| vec![0.5; m], |b| b.a);
        if radii.len() != m {
            return Err(ProblemError::Invalid(format!(
                "[box] a has {} entries for {m} generators",
                radii.len()
            )));
        }
        for (i, &a) in radii.iter().enumerate() {
            positive(&format!("[box] a[{}]", i + 1), a)?;
        }

        let integrator = match raw.integrator {
            None => IntegratorConfig::default(),
            Some(ri) => {
                let mut cfg = match ri.method.as_str() {
                    "rk4" => {
                        if ri.abs_tol.is_some() || ri.rel_tol.is_some() {
                            return Err(ProblemError::Invalid("[integrator] rk4 takes `step`, not tolerances".into()));
                        }
                        IntegratorConfig::rk4(ri.step.unwrap_or(1e-3))
                    }
                    "rk45" => {
                        if ri.step.is_some() {
                            return Err(ProblemError::Invalid("[integrator] rk45 takes tolerances, not `step`".into()));
                        }
                        IntegratorConfig::rk45(ri.abs_tol.unwrap_or(1e-10), ri.rel_tol.unwrap_or(1e-9))
                    }
                    other => {
                        return Err(ProblemError::Invalid(format!(
                            "[integrator] method must be \"rk4\" or \"rk45\", got {other:?}"
                        )))
                    }
                };
                if let Some(s) = ri.max_steps_per_unit {
                    cfg.max_steps_per_unit = s;
                }
                if let Some(h) = ri.horizon {
                    cfg.horizon = h;
                }
                cfg.validate()
                    .map_err(|e| ProblemError::Invalid(format!("[integrator] {e}")))?;
                cfg
            }
        };

        let t = raw.tolerances;
        for (name, v) in [
            ("first_integral", t.first_integral),
            ("closure", t.closure),
            ("stationarity", t.stationarity),
            ("rank", t.rank),
            ("defect", t.defect),
            ("cauchy", t.cauchy),
            ("transversality", t.transversality),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ProblemError::Invalid(format!("[tolerances] {name} must be non-negative, got {v}")));
            }
        }
        if raw.sampling.points == 0 {
            return Err(ProblemError::Invalid("[sampling] points must be positive".into()));
        }

        let cauchy = raw
            .cauchy
            .map(|c| {
                let n = ctx.n();
                let bounds = c.bounds.unwrap_or_else(|| vec![0.5; n.saturating_sub(1)]);
                let data = CauchyData::parse(&c.x0, &c.p0, &c.u0, bounds).map_err(ProblemError::Cauchy)?;
                if data.n() != n {
                    return Err(ProblemError::Cauchy(StationaryError::DimensionMismatch {
                        data: data.n(),
                        hamiltonian: n,
                    }));
                }
                let points_per_axis = c.points_per_axis.unwrap_or(DEFAULT_POINTS_PER_AXIS);
                if points_per_axis < 2 {
                    return Err(ProblemError::Invalid("[cauchy] points_per_axis must be at least 2".into()));
                }
                Ok(CauchySection { data, points_per_axis })
            })
            .transpose()?;

        Ok(Self {
            name: raw.problem.name,
            ctx,
            rho,
            z0,
            h0,
            generators,
            source,
            radii,
            integrator,
            tolerances: t,
            sampling: raw.sampling,
            cauchy,
        })
    }

    /// Characteristic field of H₀.
    pub fn base_field(&self) -> VectorField {
        char_field(&self.h0).into_field()
    }

    /// Characteristic fields of the generators, in file order.
    pub fn generator_fields(&self) -> Vec<VectorField> {
        self.generators.iter().map(|h| char_field(h).into_field()).collect()
    }

    pub fn orbit(&self) -> Result<Orbit, ProblemError> {
        Ok(Orbit::new(
            self.generator_fields(),
            self.z0.clone(),
            self.radii.clone(),
            self.integrator,
        )?)
    }

    /// Uniform samples in the working ball `B(z₀, 2ρ)`.
    pub fn sample_grid(&self) -> Vec<PhasePoint> {
        ball_points(&self.z0, 2.0 * self.rho, self.sampling.points, self.sampling.seed)
    }

    pub fn method_name(&self) -> &'static str {
        match self.integrator.method {
            Method::Rk4 { .. } => "rk4",
            Method::Rk45 { .. } => "rk45",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const OSCILLATOR: &str = r#"
[problem]
n = 2
kind = "reduced"
z0 = [1.0, 0.0, 0.0, 0.5]

[hamiltonian]
h0 = "(p1^2 + p2^2 + x1^2 + x2^2)/2"

[generators]
hams = ["(p1^2 + p2^2 + x1^2 + x2^2)/2", "x1*p2 - x2*p1"]
"#;

    #[test]
    fn defaults_fill_in() {
        let p = Problem::from_toml(OSCILLATOR).unwrap();
        assert_eq!(p.radii, vec![0.5, 0.5]);
        assert_eq!(p.integrator, IntegratorConfig::rk4(1e-3));
        assert_eq!(p.tolerances, Tolerances::default());
        assert_eq!(p.sampling.points, 50);
        assert_eq!(p.rho, 1.0);
        assert!(p.cauchy.is_none());
        assert_eq!(p.sample_grid().len(), 50);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = OSCILLATOR.replace("kind = \"reduced\"", "kind = \"reduced\"\nflavour = 3");
        match Problem::from_toml(&text) {
            Err(ProblemError::Toml { line, message, .. }) => {
                assert_eq!(line, 5);
                assert!(message.contains("flavour"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = Problem::from_toml("[problem]\nn = = 2\n").unwrap_err();
        match err {
            ProblemError::Toml { line, column, .. } => assert_eq!((line, column), (2, 5)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn validation_errors() {
        let bad_z0 = OSCILLATOR.replace("[1.0, 0.0, 0.0, 0.5]", "[1.0, 0.0]");
        assert!(matches!(Problem::from_toml(&bad_z0), Err(ProblemError::Invalid(_))));
        let bad_gen = OSCILLATOR.replace("x1*p2 - x2*p1", "x1*q2");
        assert!(matches!(
            Problem::from_toml(&bad_gen),
            Err(ProblemError::Generator { index: 2, .. })
        ));
        let bad_box = format!("{OSCILLATOR}\n[box]\na = [0.5]\n");
        assert!(matches!(Problem::from_toml(&bad_box), Err(ProblemError::Invalid(_))));
        let both = OSCILLATOR.replace("[generators]", "[generators]\nbase_fields = [[\"x1\", \"x2\"]]");
        assert!(matches!(Problem::from_toml(&both), Err(ProblemError::Invalid(_))));
        let mixed = format!("{OSCILLATOR}\n[integrator]\nmethod = \"rk4\"\nabs_tol = 1e-9\n");
        assert!(matches!(Problem::from_toml(&mixed), Err(ProblemError::Invalid(_))));
    }

    #[test]
    fn base_fields_are_lifted() {
        let text = r#"
[problem]
n = 2
kind = "reduced"
z0 = [1.0, 1.0, 0.5, 0.5]
[hamiltonian]
h0 = "p1*x1 + p2*x2"
[generators]
base_fields = [["x1", "0"], ["0", "x2"]]
"#;
        let p = Problem::from_toml(text).unwrap();
        assert_eq!(p.generators[0].source(), "p1 * x1");
        assert_eq!(p.generator_fields()[1].to_strings(), ["0", "x2", "0", "-p2"]);
        assert!(matches!(p.source, GeneratorSource::BaseFields(ref f) if f.len() == 2));
        let with_p = text.replace("[\"0\", \"x2\"]", "[\"0\", \"p2\"]");
        assert!(matches!(Problem::from_toml(&with_p), Err(ProblemError::Generator { index: 2, .. })));
    }

    #[test]
    fn cauchy_section() {
        let text = format!("{OSCILLATOR}\n[cauchy]\nx0 = [\"l1\", \"0\"]\np0 = [\"0\", \"1\"]\n");
        let p = Problem::from_toml(&text).unwrap();
        let c = p.cauchy.unwrap();
        assert_eq!(c.points_per_axis, 21);
        assert_eq!(c.data.radii(), [0.5]);
        let wrong_n = format!("{OSCILLATOR}\n[cauchy]\nx0 = [\"l1\"]\np0 = [\"0\"]\n");
        assert!(matches!(Problem::from_toml(&wrong_n), Err(ProblemError::Cauchy(_))));
    }
}

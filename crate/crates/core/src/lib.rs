//! Characteristic fields, Lie brackets and flow orbits for stationary
//! solutions of first-order PDEs `H(x, p, u) = 0`.
//!
//! The pipeline, module by module:
//!
//! - [`expr`]: a small expression language with symbolic derivatives.
//! - [`charfield`]: Hamiltonians, their characteristic fields and Poisson
//!   brackets.
//! - [`lie`]: Lie brackets, closure of a generator set, cotangent lifts.
//! - [`flow`]: RK integrators and orbits `ẑ(λ, z₀)` built from generator flows.
//! - [`gradsys`]: the λ-Jacobian, the representation `J = M·A` and the
//!   stationarity certificate.
//! - [`stationary`]: compatibility, level and transversality of Cauchy data.
//! - [`problem`], [`report`], [`cli`]: problem files, deterministic reports and
//!   the `charflow` command.
//!
//! ```
//! use charflow::charfield::{char_field, Hamiltonian};
//! use charflow::flow::{Orbit, IntegratorConfig};
//! use charflow::space::{PhasePoint, VarContext};
//!
//! let ctx = VarContext::reduced(1);
//! let h0 = Hamiltonian::parse("(p1^2 + x1^2)/2", ctx).unwrap();
//! let z0 = PhasePoint::reduced(&[1.0], &[0.0]).unwrap();
//! let orbit = Orbit::new(vec![char_field(&h0).into_field()], z0.clone(), vec![0.5], IntegratorConfig::default()).unwrap();
//! let z = orbit.point(&[0.5]).unwrap();
//! assert!((h0.value_at(&z).unwrap() - h0.value_at(&z0).unwrap()).abs() < 1e-9);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::should_implement_trait)]

pub mod charfield;
pub mod cli;
pub mod expr;
pub mod field;
pub mod flow;
pub mod gradsys;
pub mod lie;
pub mod linalg;
pub mod problem;
pub mod report;
pub mod sampling;
pub mod space;
pub mod stationary;

pub use charfield::{char_field, poisson, poisson_bracket, CharField, Hamiltonian};
pub use expr::{parse, Expr};
pub use field::VectorField;
pub use flow::{flow, IntegratorConfig, Orbit};
pub use gradsys::{certify_stationarity, representation, CertifyOptions};
pub use lie::{check_closure, cotangent_lift, lie_bracket, ClosureMode};
pub use problem::Problem;
pub use space::{Kind, PhasePoint, VarContext};
pub use stationary::CauchyData;

//! Variable contexts and phase-space points.
//!
//! Every expression is interpreted against a [`VarContext`], which fixes the
//! variable names and, more importantly, their order. The order is the
//! layout of gradients and Jacobians everywhere in the crate:
//! `x1..xn, p1..pn` followed by `u` in the full case.

use std::fmt;

use thiserror::Error;

/// Which variables a context declares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    /// `x1..xn` only: base-space vector fields on ℝⁿ.
    Base,
    /// `x1..xn, p1..pn` (dimension 2n).
    Reduced,
    /// `x1..xn, p1..pn, u` (dimension 2n+1).
    Full,
    /// Cauchy-data parameters `l1..ln`.
    Params,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Base => "base",
            Kind::Reduced => "reduced",
            Kind::Full => "full",
            Kind::Params => "params",
        }
    }
}

/// The variable set an expression may reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VarContext {
    n: usize,
    kind: Kind,
}

#[derive(Debug, Error, PartialEq)]
pub enum SpaceError {
    #[error("state dimension must be positive")]
    ZeroDimension,
    #[error("expected {expected} coordinates for a {kind} point, got {got}")]
    DimensionMismatch {
        kind: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("coordinate {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("context {0} has no phase-space layout")]
    NotPhaseSpace(&'static str),
}

impl VarContext {
    pub fn new(n: usize, kind: Kind) -> Result<Self, SpaceError> {
        if n == 0 && kind != Kind::Params {
            return Err(SpaceError::ZeroDimension);
        }
        Ok(Self { n, kind })
    }

    pub fn reduced(n: usize) -> Self {
        Self::new(n, Kind::Reduced).expect("n must be positive")
    }

    pub fn full(n: usize) -> Self {
        Self::new(n, Kind::Full).expect("n must be positive")
    }

    pub fn base(n: usize) -> Self {
        Self::new(n, Kind::Base).expect("n must be positive")
    }

    /// Parameter context `l1..lk`; `k = 0` is allowed (constant data).
    pub fn params(k: usize) -> Self {
        Self {
            n: k,
            kind: Kind::Params,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    /// Number of variables.
    pub fn dim(&self) -> usize {
        match self.kind {
            Kind::Base | Kind::Params => self.n,
            Kind::Reduced => 2 * self.n,
            Kind::Full => 2 * self.n + 1,
        }
    }

    pub fn is_phase_space(&self) -> bool {
        matches!(self.kind, Kind::Reduced | Kind::Full)
    }

    pub fn x_index(&self, i: usize) -> usize {
        debug_assert!(i < self.n);
        i
    }

    pub fn p_index(&self, i: usize) -> usize {
        debug_assert!(i < self.n && self.is_phase_space());
        self.n + i
    }

    pub fn u_index(&self) -> Option<usize> {
        (self.kind == Kind::Full).then_some(2 * self.n)
    }

    /// Name of the variable at `index` in the canonical order.
    pub fn var_name(&self, index: usize) -> String {
        let n = self.n;
        match self.kind {
            Kind::Params => format!("l{}", index + 1),
            _ if index < n => format!("x{}", index + 1),
            Kind::Reduced | Kind::Full if index < 2 * n => format!("p{}", index - n + 1),
            Kind::Full if index == 2 * n => "u".to_string(),
            _ => panic!("variable index {index} out of range for {self}"),
        }
    }

    pub fn var_names(&self) -> Vec<String> {
        (0..self.dim()).map(|i| self.var_name(i)).collect()
    }

    /// Looks a name up in this context.
    pub fn lookup(&self, name: &str) -> Option<usize> {
        if name == "u" {
            return self.u_index();
        }
        let (prefix, digits) = name.split_at(1.min(name.len()));
        if digits.is_empty() || digits.starts_with('0') || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let k: usize = digits.parse().ok()?;
        if k == 0 || k > self.n {
            return None;
        }
        match (prefix, self.kind) {
            ("l", Kind::Params) => Some(k - 1),
            ("x", Kind::Base | Kind::Reduced | Kind::Full) => Some(k - 1),
            ("p", Kind::Reduced | Kind::Full) => Some(self.n + k - 1),
            _ => None,
        }
    }
}

impl fmt::Display for VarContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(n={})", self.kind.as_str(), self.n)
    }
}

/// A point `z = (x, p)` or `z = (x, p, u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    ctx: VarContext,
    coords: Vec<f64>,
}

impl PhasePoint {
    pub fn new(ctx: VarContext, coords: Vec<f64>) -> Result<Self, SpaceError> {
        if !ctx.is_phase_space() {
            return Err(SpaceError::NotPhaseSpace(ctx.kind().as_str()));
        }
        if coords.len() != ctx.dim() {
            return Err(SpaceError::DimensionMismatch {
                kind: ctx.kind().as_str(),
                expected: ctx.dim(),
                got: coords.len(),
            });
        }
        if let Some((index, &value)) = coords.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(SpaceError::NonFinite { index, value });
        }
        Ok(Self { ctx, coords })
    }

    pub fn reduced(x: &[f64], p: &[f64]) -> Result<Self, SpaceError> {
        if x.len() != p.len() {
            return Err(SpaceError::DimensionMismatch {
                kind: "reduced",
                expected: 2 * x.len(),
                got: x.len() + p.len(),
            });
        }
        let ctx = VarContext::new(x.len(), Kind::Reduced)?;
        Self::new(ctx, [x, p].concat())
    }

    pub fn full(x: &[f64], p: &[f64], u: f64) -> Result<Self, SpaceError> {
        if x.len() != p.len() {
            return Err(SpaceError::DimensionMismatch {
                kind: "full",
                expected: 2 * x.len() + 1,
                got: x.len() + p.len() + 1,
            });
        }
        let ctx = VarContext::new(x.len(), Kind::Full)?;
        Self::new(ctx, [x, p, &[u]].concat())
    }

    pub fn ctx(&self) -> VarContext {
        self.ctx
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn x(&self) -> &[f64] {
        &self.coords[..self.ctx.n()]
    }

    pub fn p(&self) -> &[f64] {
        let n = self.ctx.n();
        &self.coords[n..2 * n]
    }

    pub fn u(&self) -> Option<f64> {
        self.ctx.u_index().map(|i| self.coords[i])
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Euclidean distance to another point of the same context.
    pub fn distance(&self, other: &PhasePoint) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl AsRef<[f64]> for PhasePoint {
    fn as_ref(&self) -> &[f64] {
        &self.coords
    }
}

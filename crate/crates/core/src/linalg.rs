//! Rank-revealing least squares on small dense matrices.

use nalgebra::{DMatrix, SVD};

/// Relative singular-value cutoff used for rank decisions.
pub const DEFAULT_RCOND: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct LeastSquares {
    /// Minimum-norm minimizer of ‖A·X − B‖_F.
    pub solution: DMatrix<f64>,
    pub rank: usize,
    /// Singular values of A, descending.
    pub singular_values: Vec<f64>,
}

impl LeastSquares {
    pub fn sigma_max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    pub fn sigma_min(&self) -> f64 {
        self.singular_values.last().copied().unwrap_or(0.0)
    }

    pub fn full_column_rank(&self, cols: usize) -> bool {
        self.rank == cols
    }
}

/// Singular values sorted in descending order.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = a.singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

pub fn numeric_rank(sv: &[f64], rcond: f64) -> usize {
    let top = sv.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s >= rcond * top).count()
}

/// Condition number σ_max/σ_min (infinite when singular).
pub fn condition_number(sv: &[f64]) -> f64 {
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Solves min ‖A·X − B‖ with singular values below `rcond·σ_max` dropped.
pub fn lstsq(a: &DMatrix<f64>, b: &DMatrix<f64>, rcond: f64) -> LeastSquares {
    assert_eq!(a.nrows(), b.nrows(), "row mismatch in least squares");
    let svd = SVD::new(a.clone(), true, true);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    let rank = numeric_rank(&sv, rcond);
    let cutoff = rcond * sv.first().copied().unwrap_or(0.0);
    let solution = if rank == 0 {
        DMatrix::zeros(a.ncols(), b.ncols())
    } else {
        // cutoff is strictly positive here, which is all solve() can fail on
        svd.solve(b, cutoff.max(f64::MIN_POSITIVE))
            .expect("SVD computed with both singular vector sets")
    };
    LeastSquares {
        solution,
        rank,
        singular_values: sv,
    }
}

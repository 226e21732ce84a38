//! Deterministic sample sets: random points in a ball and uniform boxes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::space::PhasePoint;

pub const DEFAULT_SEED: u64 = 0x5eed_c4a2_f10e_0001;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid needs at least 2 points per axis, got {0}")]
    TooFewPoints(usize),
    #[error("orbit grids need an odd number of points per axis so that 0 is a node, got {0}")]
    EvenPoints(usize),
    #[error("box radius {0} must be positive and finite")]
    BadRadius(f64),
}

/// `count` points uniformly distributed in the ball `B(center, radius)`.
pub fn ball(center: &[f64], radius: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let d = center.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let dir: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
            center
                .iter()
                .zip(&dir)
                .map(|(c, v)| c + r * v / norm)
                .collect()
        })
        .collect()
}

/// Ball samples around a phase point, kept in its context.
pub fn ball_points(center: &PhasePoint, radius: f64, count: usize, seed: u64) -> Vec<PhasePoint> {
    ball(center.coords(), radius, count, seed)
        .into_iter()
        .map(|c| PhasePoint::new(center.ctx(), c).expect("finite sample in the same context"))
        .collect()
}

/// `k` equally spaced nodes on `[-a, a]`; endpoints are exact and the middle
/// node is exactly zero when `k` is odd.
pub fn axis_nodes(a: f64, k: usize) -> Vec<f64> {
    let last = (k - 1) as f64;
    (0..k)
        .map(|i| a * (2.0 * i as f64 - last) / last)
        .collect()
}

/// Tensor grid over `Π[-aᵢ, aᵢ]` in lexicographic order of axis indices
/// (the last axis varies fastest). An empty `radii` gives one empty point.
pub fn box_grid(radii: &[f64], k: usize) -> Result<Vec<Vec<f64>>, GridError> {
    if k < 2 {
        return Err(GridError::TooFewPoints(k));
    }
    if let Some(&a) = radii.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
        return Err(GridError::BadRadius(a));
    }
    let axes: Vec<Vec<f64>> = radii.iter().map(|&a| axis_nodes(a, k)).collect();
    let mut rows = vec![Vec::with_capacity(radii.len())];
    for axis in &axes {
        rows = rows
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut row = prefix.clone();
                    row.push(v);
                    row
                })
            })
            .collect();
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_is_deterministic_and_inside() {
        let c = [1.0, -2.0, 0.5];
        let a = ball(&c, 2.0, 50, 7);
        let b = ball(&c, 2.0, 50, 7);
        assert_eq!(a, b);
        for p in &a {
            let r: f64 = p.iter().zip(&c).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            assert!(r <= 2.0 + 1e-12);
        }
        assert_ne!(a, ball(&c, 2.0, 50, 8));
    }

    #[test]
    fn axis_nodes_hit_zero_and_ends() {
        let n = axis_nodes(0.5, 11);
        assert_eq!(n[0], -0.5);
        assert_eq!(n[5], 0.0);
        assert_eq!(n[10], 0.5);
        assert_eq!(axis_nodes(1.0, 3), vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn box_grid_order() {
        let g = box_grid(&[1.0, 2.0], 3).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], vec![-1.0, -2.0]);
        assert_eq!(g[1], vec![-1.0, 0.0]);
        assert_eq!(g[4], vec![0.0, 0.0]);
        assert_eq!(g[8], vec![1.0, 2.0]);
        assert_eq!(box_grid(&[], 5).unwrap(), vec![Vec::<f64>::new()]);
        assert_eq!(box_grid(&[1.0], 1), Err(GridError::TooFewPoints(1)));
        assert!(box_grid(&[0.0], 3).is_err());
    }
}

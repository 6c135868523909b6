//! Helpers shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use std::sync::Arc;

use l1dg::assembly::CoefficientField;
use l1dg::linalg::{self, SparseMatrix};
use l1dg::problems::{Problem, ProblemKind, Quadratic};
use rand::rngs::StdRng;
use rand::Rng;

/// Stopping tolerance for the exact-reproduction runs. The energy floor set by
/// rounding in `L x - d` grows with N; 1e-12 is reachable up to N = 4 in 2D.
pub const MANUFACTURED_TOLERANCE: f64 = 1e-16;

/// Global quadratics with their test meshes on each domain.
pub fn manufactured() -> Vec<(Problem, Vec<usize>)> {
    let u = Arc::new(Quadratic([0.3, -1.0, 0.5, 1.25, -0.5, 0.75]));
    let a = CoefficientField::constant([[3.0, -1.0], [-1.0, 2.0]]);
    vec![
        (Problem::new(ProblemKind::SquareQuadratic), vec![2, 4]),
        (Problem::custom(ProblemKind::LshapeConstant, a, u.clone()), vec![2, 4]),
        (Problem::custom(ProblemKind::Kink1d, CoefficientField::constant([[0.5, 0.0], [0.0, 0.0]]), u), vec![2, 4, 8]),
    ]
}

/// Random symmetric PSD matrix made of dense diagonal blocks (possibly several).
pub fn random_psd(rng: &mut StdRng, n: usize) -> Vec<Vec<f64>> {
    let mut b = vec![vec![0.0; n]; n];
    let mut start = 0;
    while start < n {
        let len = rng.gen_range(1..=n - start);
        let rank = rng.gen_range(1..=len + 1);
        let m: Vec<Vec<f64>> = (0..rank).map(|_| (0..len).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        for i in 0..len {
            for j in 0..len {
                b[start + i][start + j] = (0..rank).map(|k| m[k][i] * m[k][j]).sum();
            }
        }
        start += len;
    }
    b
}

pub fn to_sparse(b: &[Vec<f64>]) -> SparseMatrix {
    let n = b.len();
    let mut trip = Vec::new();
    for i in 0..n {
        for j in 0..n {
            // keep explicit diagonal entries so every unknown has a block
            if b[i][j] != 0.0 || i == j {
                trip.push((i, j, b[i][j]));
            }
        }
    }
    linalg::from_triplets(n, n, &trip)
}

/// Gauss-Seidel on alpha (u^T B u + b^T u) + lambda/2 |u - x|^2.
pub fn prox_quadratic_oracle(b: &[Vec<f64>], bv: &[f64], alpha: f64, lambda: f64, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut u = x.to_vec();
    for _ in 0..100_000 {
        let mut change: f64 = 0.0;
        for i in 0..n {
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| b[i][j] * u[j]).sum();
            let new = (lambda * x[i] - alpha * bv[i] - 2.0 * alpha * off) / (lambda + 2.0 * alpha * b[i][i]);
            change = change.max((new - u[i]).abs());
            u[i] = new;
        }
        if change < 1e-15 {
            break;
        }
    }
    u
}

/// Coordinatewise argmin over |u| <= alpha of d u + q/2 (u - y)^2, the conjugate of
/// alpha |. - d|_1 being d u on [-alpha, alpha]; bisection on the derivative.
pub fn prox_conjugate_oracle(y: &[f64], alpha: f64, q: &[f64], d: &[f64]) -> Vec<f64> {
    (0..y.len())
        .map(|i| {
            let slope = |u: f64| d[i] + q[i] * (u - y[i]);
            if slope(-alpha) >= 0.0 {
                return -alpha;
            }
            if slope(alpha) <= 0.0 {
                return alpha;
            }
            let (mut lo, mut hi) = (-alpha, alpha);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if slope(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

/// Reference errors `[L2, H1, H2, q]` for N = 4, 8, 16, 32, 64.
pub type ReferenceTable = [[f64; 4]; 5];

pub const SQUARE_CONSTANT: ReferenceTable = [
    [4.92e-2, 2.58e-1, 3.52e0, 2.59e-1],
    [1.42e-2, 7.49e-2, 1.76e0, 7.59e-2],
    [3.80e-3, 2.01e-2, 8.61e-1, 2.02e-2],
    [9.75e-4, 5.16e-3, 4.23e-1, 5.14e-3],
    [2.46e-4, 1.30e-3, 2.10e-1, 1.29e-3],
];

pub const SQUARE_CONTINUOUS: ReferenceTable = [
    [4.48e-2, 2.44e-1, 3.55e0, 2.51e-1],
    [1.21e-2, 6.59e-2, 1.75e0, 6.68e-2],
    [3.18e-3, 1.72e-2, 8.56e-1, 1.72e-2],
    [8.08e-4, 4.36e-3, 4.23e-1, 4.30e-3],
    [2.02e-4, 1.09e-3, 2.10e-1, 1.07e-3],
];

pub const SQUARE_DISCONTINUOUS: ReferenceTable = [
    [4.89e-2, 2.56e-1, 3.50e0, 2.52e-1],
    [1.33e-2, 7.04e-2, 1.75e0, 7.02e-2],
    [3.58e-3, 1.88e-2, 8.57e-1, 1.88e-2],
    [9.38e-4, 4.88e-3, 4.23e-1, 4.84e-3],
    [2.40e-4, 1.24e-3, 2.10e-1, 1.23e-3],
];

pub const LSHAPE_CONSTANT: ReferenceTable = [
    [9.32e-3, 7.93e-2, 1.08e0, 7.99e-2],
    [6.86e-3, 3.45e-2, 8.67e-1, 3.64e-2],
    [5.29e-3, 1.99e-2, 7.08e-1, 2.08e-2],
    [3.46e-3, 1.21e-2, 5.89e-1, 1.23e-2],
    [2.34e-3, 7.80e-3, 4.85e-1, 7.88e-3],
];

/// Reference orders `[L2, H1, H2, q]` at N = 64 on the L-shape, constant coefficient.
pub const LSHAPE_CONSTANT_ORDERS: [f64; 4] = [0.57, 0.63, 0.28, 0.65];

//! Gauss-Legendre rules on `[0,1]` and collapsed (Duffy) Gauss rules on the
//! reference triangle `(0,0),(1,0),(0,1)`.

use crate::error::{Error, Result};
use crate::mesh::Point;

use super::CellKind;

pub const MAX_INTERVAL_DEGREE: usize = 10;
pub const MAX_TRIANGLE_DEGREE: usize = 8;

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    /// Rule on the reference cell that integrates polynomials of total degree
    /// `degree` exactly.
    pub fn new(kind: CellKind, degree: usize) -> Result<Self> {
        match kind {
            CellKind::Interval => Self::interval(degree),
            CellKind::Triangle => Self::triangle(degree),
        }
    }

    pub fn interval(degree: usize) -> Result<Self> {
        if degree > MAX_INTERVAL_DEGREE {
            return Err(Error::Unsupported(format!("interval quadrature of degree {degree}")));
        }
        let n = degree / 2 + 1;
        let (x, w) = gauss_legendre_unit(n);
        Ok(Self { points: x.iter().map(|&t| [t, 0.0]).collect(), weights: w, degree })
    }

    /// An `n x n` Gauss product rule pulled back through `(s,t) -> (s, t(1-s))`;
    /// the extra factor `(1-s)` costs one degree, so `n = (degree + 3) / 2` points per direction.
    pub fn triangle(degree: usize) -> Result<Self> {
        if degree > MAX_TRIANGLE_DEGREE {
            return Err(Error::Unsupported(format!("triangle quadrature of degree {degree}")));
        }
        let n = (degree + 3) / 2;
        let (x, w) = gauss_legendre_unit(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (s, ws) in x.iter().zip(&w) {
            for (t, wt) in x.iter().zip(&w) {
                points.push([*s, t * (1.0 - s)]);
                weights.push(ws * wt * (1.0 - s));
            }
        }
        Ok(Self { points, weights, degree })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule mapped to `[0,1]`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        nodes[n - 1 - i] = 0.5 * (x + 1.0);
        weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

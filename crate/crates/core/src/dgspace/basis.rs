//! Nodal Lagrange bases of degree 1 and 2 on the reference interval `[0,1]`
//! and the reference triangle.
//!
//! Node order: interval P1 `{0, 1}`, interval P2 `{0, 1/2, 1}`; triangle P1
//! the three vertices, triangle P2 the vertices followed by the midpoints of
//! edges `(0,1)`, `(1,2)`, `(2,0)`.

use crate::error::{Error, Result};
use crate::mesh::Point;

use super::CellKind;

pub type Mat2 = [[f64; 2]; 2];

/// Values, reference gradients and reference Hessians of every basis function at one point.
#[derive(Debug, Clone, Default)]
pub struct ShapeValues {
    pub values: Vec<f64>,
    pub gradients: Vec<[f64; 2]>,
    pub hessians: Vec<Mat2>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lagrange {
    cell: CellKind,
    degree: usize,
}

const BARY_GRAD: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
const EDGES: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];

impl Lagrange {
    pub fn new(cell: CellKind, degree: usize) -> Result<Self> {
        if !(1..=2).contains(&degree) {
            return Err(Error::Unsupported(format!("Lagrange degree {degree}")));
        }
        Ok(Self { cell, degree })
    }

    pub fn cell(&self) -> CellKind {
        self.cell
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        match (self.cell, self.degree) {
            (CellKind::Interval, d) => d + 1,
            (CellKind::Triangle, 1) => 3,
            (CellKind::Triangle, _) => 6,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> Vec<Point> {
        match (self.cell, self.degree) {
            (CellKind::Interval, 1) => vec![[0.0, 0.0], [1.0, 0.0]],
            (CellKind::Interval, _) => vec![[0.0, 0.0], [0.5, 0.0], [1.0, 0.0]],
            (CellKind::Triangle, 1) => vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            (CellKind::Triangle, _) => vec![
                [0.0, 0.0],
                [1.0, 0.0],
                [0.0, 1.0],
                [0.5, 0.0],
                [0.5, 0.5],
                [0.0, 0.5],
            ],
        }
    }

    pub fn eval(&self, xi: Point) -> ShapeValues {
        match self.cell {
            CellKind::Interval => self.eval_interval(xi[0]),
            CellKind::Triangle => self.eval_triangle(xi),
        }
    }

    fn eval_interval(&self, t: f64) -> ShapeValues {
        let zero = [[0.0; 2]; 2];
        let d2 = |v: f64| [[v, 0.0], [0.0, 0.0]];
        if self.degree == 1 {
            ShapeValues {
                values: vec![1.0 - t, t],
                gradients: vec![[-1.0, 0.0], [1.0, 0.0]],
                hessians: vec![zero; 2],
            }
        } else {
            ShapeValues {
                values: vec![(1.0 - t) * (1.0 - 2.0 * t), 4.0 * t * (1.0 - t), t * (2.0 * t - 1.0)],
                gradients: vec![[4.0 * t - 3.0, 0.0], [4.0 - 8.0 * t, 0.0], [4.0 * t - 1.0, 0.0]],
                hessians: vec![d2(4.0), d2(-8.0), d2(4.0)],
            }
        }
    }

    fn eval_triangle(&self, xi: Point) -> ShapeValues {
        let l = [1.0 - xi[0] - xi[1], xi[0], xi[1]];
        let g = BARY_GRAD;
        if self.degree == 1 {
            return ShapeValues {
                values: l.to_vec(),
                gradients: g.to_vec(),
                hessians: vec![[[0.0; 2]; 2]; 3],
            };
        }
        let outer = |a: [f64; 2], b: [f64; 2]| [[a[0] * b[0], a[0] * b[1]], [a[1] * b[0], a[1] * b[1]]];
        let mut s = ShapeValues::default();
        for i in 0..3 {
            s.values.push(l[i] * (2.0 * l[i] - 1.0));
            let c = 4.0 * l[i] - 1.0;
            s.gradients.push([c * g[i][0], c * g[i][1]]);
            let o = outer(g[i], g[i]);
            s.hessians.push([[4.0 * o[0][0], 4.0 * o[0][1]], [4.0 * o[1][0], 4.0 * o[1][1]]]);
        }
        for &(i, j) in &EDGES {
            s.values.push(4.0 * l[i] * l[j]);
            s.gradients.push([
                4.0 * (l[i] * g[j][0] + l[j] * g[i][0]),
                4.0 * (l[i] * g[j][1] + l[j] * g[i][1]),
            ]);
            let (a, b) = (outer(g[i], g[j]), outer(g[j], g[i]));
            s.hessians.push([
                [4.0 * (a[0][0] + b[0][0]), 4.0 * (a[0][1] + b[0][1])],
                [4.0 * (a[1][0] + b[1][0]), 4.0 * (a[1][1] + b[1][1])],
            ]);
        }
        s
    }
}

/// Local P2 node index of the midpoint of local edge `e` of a triangle.
pub fn triangle_edge_midpoint_node(e: usize) -> usize {
    3 + e
}

/// Local vertex indices joined by local edge `e`.
pub fn triangle_edge(e: usize) -> (usize, usize) {
    EDGES[e]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn all() -> Vec<Lagrange> {
        let mut v = Vec::new();
        for cell in [CellKind::Interval, CellKind::Triangle] {
            for d in 1..=2 {
                v.push(Lagrange::new(cell, d).unwrap());
            }
        }
        v
    }

    #[test]
    fn delta_property() {
        for b in all() {
            for (j, node) in b.nodes().iter().enumerate() {
                let s = b.eval(*node);
                for (i, v) in s.values.iter().enumerate() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((v - expect).abs() < 1e-13, "{b:?} basis {i} node {j}");
                }
            }
        }
    }

    #[test]
    fn partition_of_unity() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for b in all() {
            for _ in 0..20 {
                let (x, y): (f64, f64) = (rng.gen(), rng.gen());
                let p = if b.cell() == CellKind::Triangle && x + y > 1.0 { [1.0 - x, 1.0 - y] } else { [x, y] };
                let s = b.eval(p);
                assert!((s.values.iter().sum::<f64>() - 1.0).abs() < 1e-14);
                let gx: f64 = s.gradients.iter().map(|g| g[0]).sum();
                let gy: f64 = s.gradients.iter().map(|g| g[1]).sum();
                assert!(gx.abs() < 1e-13 && gy.abs() < 1e-13);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let b = Lagrange::new(CellKind::Triangle, 2).unwrap();
        let p = [0.21, 0.33];
        let e = 1e-6;
        let s = b.eval(p);
        let sx = b.eval([p[0] + e, p[1]]);
        let sy = b.eval([p[0], p[1] + e]);
        for i in 0..6 {
            assert!(((sx.values[i] - s.values[i]) / e - s.gradients[i][0]).abs() < 1e-5);
            assert!(((sy.values[i] - s.values[i]) / e - s.gradients[i][1]).abs() < 1e-5);
            assert!(((sx.gradients[i][1] - s.gradients[i][1]) / e - s.hessians[i][0][1]).abs() < 1e-5);
            assert!(((sy.gradients[i][1] - s.gradients[i][1]) / e - s.hessians[i][1][1]).abs() < 1e-5);
        }
    }

    #[test]
    fn unsupported_degree() {
        assert!(Lagrange::new(CellKind::Triangle, 3).is_err());
        assert!(Lagrange::new(CellKind::Interval, 0).is_err());
    }
}

//! Broken polynomial spaces: scalar P2 for `w`, vector P1 for `v`.
//!
//! Coefficients are ordered `x = (x_w, x_v)`. On element `e` the scalar block
//! holds the values of `w` at the P2 nodes, the vector block holds the
//! components of `v` at the P1 nodes, component fastest.

pub mod basis;
pub mod quadrature;

use crate::error::{Error, Result};
use crate::mesh::{Face, FaceKind, Mesh, Point};

pub use basis::{Lagrange, Mat2, ShapeValues};
pub use quadrature::QuadratureRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Interval,
    Triangle,
}

impl CellKind {
    pub fn for_dimension(dim: usize) -> Self {
        if dim == 1 {
            CellKind::Interval
        } else {
            CellKind::Triangle
        }
    }
}

/// Polynomial degree of the scalar space.
pub const DEGREE: usize = 2;

/// Affine map from the reference cell. In 1D the map is embedded as
/// `diag(b - a, 1)` so that 2-vectors can be used throughout.
#[derive(Debug, Clone, Copy)]
pub struct ElementMap {
    pub origin: Point,
    pub jacobian: Mat2,
    pub inverse: Mat2,
    /// Element measure over reference measure.
    pub det: f64,
}

impl ElementMap {
    pub fn new(vertices: &[Point]) -> Self {
        let o = vertices[0];
        let jacobian = if vertices.len() == 2 {
            [[vertices[1][0] - o[0], 0.0], [0.0, 1.0]]
        } else {
            [
                [vertices[1][0] - o[0], vertices[2][0] - o[0]],
                [vertices[1][1] - o[1], vertices[2][1] - o[1]],
            ]
        };
        let det = jacobian[0][0] * jacobian[1][1] - jacobian[0][1] * jacobian[1][0];
        let inverse = [
            [jacobian[1][1] / det, -jacobian[0][1] / det],
            [-jacobian[1][0] / det, jacobian[0][0] / det],
        ];
        Self { origin: o, jacobian, inverse, det }
    }

    pub fn to_physical(&self, xi: Point) -> Point {
        let j = &self.jacobian;
        [
            self.origin[0] + j[0][0] * xi[0] + j[0][1] * xi[1],
            self.origin[1] + j[1][0] * xi[0] + j[1][1] * xi[1],
        ]
    }

    pub fn to_reference(&self, x: Point) -> Point {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        let m = &self.inverse;
        [m[0][0] * d[0] + m[0][1] * d[1], m[1][0] * d[0] + m[1][1] * d[1]]
    }

    /// Physical gradient `J^{-T} g`.
    pub fn gradient(&self, g: [f64; 2]) -> [f64; 2] {
        let m = &self.inverse;
        [m[0][0] * g[0] + m[1][0] * g[1], m[0][1] * g[0] + m[1][1] * g[1]]
    }

    /// Physical Hessian `J^{-T} H J^{-1}`.
    pub fn hessian(&self, h: &Mat2) -> Mat2 {
        let m = &self.inverse;
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, o) in row.iter_mut().enumerate() {
                let mut s = 0.0;
                for a in 0..2 {
                    for b in 0..2 {
                        s += m[a][i] * h[a][b] * m[b][j];
                    }
                }
                *o = s;
            }
        }
        out
    }
}

/// Global numbering of the broken P2 x [P1]^d degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofLayout {
    pub dim: usize,
    pub num_elements: usize,
    pub w_per_element: usize,
    pub v_nodes_per_element: usize,
}

impl DofLayout {
    pub fn new(mesh: &Mesh) -> Self {
        let dim = mesh.dimension();
        let (w_per_element, v_nodes_per_element) = if dim == 1 { (3, 2) } else { (6, 3) };
        Self { dim, num_elements: mesh.num_elements(), w_per_element, v_nodes_per_element }
    }

    pub fn degree(&self) -> usize {
        DEGREE
    }

    pub fn n_w(&self) -> usize {
        self.num_elements * self.w_per_element
    }

    pub fn n_v(&self) -> usize {
        self.num_elements * self.v_nodes_per_element * self.dim
    }

    pub fn n(&self) -> usize {
        self.n_w() + self.n_v()
    }

    pub fn local_len(&self) -> usize {
        self.w_per_element + self.v_nodes_per_element * self.dim
    }

    pub fn w_index(&self, element: usize, node: usize) -> usize {
        element * self.w_per_element + node
    }

    pub fn v_index(&self, element: usize, node: usize, component: usize) -> usize {
        self.n_w() + (element * self.v_nodes_per_element + node) * self.dim + component
    }

    /// Global indices of element `e`: its `w` block followed by its `v` block.
    pub fn element_dofs(&self, e: usize) -> Vec<usize> {
        let mut dofs: Vec<usize> = (0..self.w_per_element).map(|a| self.w_index(e, a)).collect();
        for a in 0..self.v_nodes_per_element {
            for c in 0..self.dim {
                dofs.push(self.v_index(e, a, c));
            }
        }
        dofs
    }

    /// Local P2 node sitting on local vertex `vertex`.
    pub fn w_node_at_vertex(&self, vertex: usize) -> usize {
        if self.dim == 1 {
            2 * vertex
        } else {
            vertex
        }
    }
}

/// Point values of `(w, v)` and their derivatives.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FieldValue {
    pub w: f64,
    pub grad_w: [f64; 2],
    pub hess_w: Mat2,
    pub v: [f64; 2],
    /// `jac_v[i][j] = d v_i / d x_j`.
    pub jac_v: Mat2,
}

/// Jump data on one face, at the nodes of `Mesh::face_nodes`.
#[derive(Debug, Clone, PartialEq)]
pub enum FaceTrace {
    Interior {
        /// `[[v.n]] = v_L.n - v_R.n` at the face endpoints.
        vn_jumps: Vec<f64>,
        /// `w_L - w_R` at endpoints and midpoint.
        w_jumps: Vec<f64>,
    },
    Boundary {
        /// `w` at endpoints and midpoint.
        w_values: Vec<f64>,
    },
}

/// A mesh together with its DG layout, bases and element maps.
#[derive(Debug, Clone)]
pub struct DgSpace {
    mesh: Mesh,
    layout: DofLayout,
    w_basis: Lagrange,
    v_basis: Lagrange,
    maps: Vec<ElementMap>,
}

impl DgSpace {
    pub fn new(mesh: Mesh) -> Self {
        let cell = CellKind::for_dimension(mesh.dimension());
        let layout = DofLayout::new(&mesh);
        let maps = (0..mesh.num_elements()).map(|k| ElementMap::new(&mesh.element_vertices(k))).collect();
        Self {
            w_basis: Lagrange::new(cell, DEGREE).expect("P2 is supported"),
            v_basis: Lagrange::new(cell, DEGREE - 1).expect("P1 is supported"),
            mesh,
            layout,
            maps,
        }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn layout(&self) -> &DofLayout {
        &self.layout
    }

    pub fn cell(&self) -> CellKind {
        self.w_basis.cell()
    }

    pub fn w_basis(&self) -> &Lagrange {
        &self.w_basis
    }

    pub fn v_basis(&self) -> &Lagrange {
        &self.v_basis
    }

    pub fn map(&self, element: usize) -> &ElementMap {
        &self.maps[element]
    }

    /// Quadrature rule on the reference cell of this space.
    pub fn quadrature(&self, degree: usize) -> Result<QuadratureRule> {
        QuadratureRule::new(self.cell(), degree)
    }

    /// Evaluates `(w, v)` encoded by `x` at reference point `xi` of `element`.
    pub fn evaluate_field(&self, x: &[f64], element: usize, xi: Point) -> Result<FieldValue> {
        if x.len() != self.layout.n() {
            return Err(Error::DimensionMismatch(format!(
                "coefficient vector has length {}, layout expects {}",
                x.len(),
                self.layout.n()
            )));
        }
        if element >= self.layout.num_elements {
            return Err(Error::InvalidInput(format!("element {element} out of range")));
        }
        let sw = self.w_basis.eval(xi);
        let sv = self.v_basis.eval(xi);
        Ok(self.combine(x, element, &sw, &sv))
    }

    /// Same as `evaluate_field` with pre-tabulated shape values.
    pub fn combine(&self, x: &[f64], element: usize, sw: &ShapeValues, sv: &ShapeValues) -> FieldValue {
        let map = &self.maps[element];
        let lay = &self.layout;
        let mut f = FieldValue::default();
        let mut gref = [0.0; 2];
        let mut href = [[0.0; 2]; 2];
        for a in 0..lay.w_per_element {
            let c = x[lay.w_index(element, a)];
            f.w += c * sw.values[a];
            for i in 0..2 {
                gref[i] += c * sw.gradients[a][i];
                for j in 0..2 {
                    href[i][j] += c * sw.hessians[a][i][j];
                }
            }
        }
        f.grad_w = map.gradient(gref);
        f.hess_w = map.hessian(&href);
        for a in 0..lay.v_nodes_per_element {
            let g = map.gradient(sv.gradients[a]);
            for comp in 0..lay.dim {
                let c = x[lay.v_index(element, a, comp)];
                f.v[comp] += c * sv.values[a];
                f.jac_v[comp][0] += c * g[0];
                f.jac_v[comp][1] += c * g[1];
            }
        }
        f
    }

    /// Evaluates the field at a physical point of `element`.
    pub fn evaluate_at(&self, x: &[f64], element: usize, p: Point) -> Result<FieldValue> {
        let xi = self.maps[element].to_reference(p);
        self.evaluate_field(x, element, xi)
    }

    /// Jumps of `v.n` and `w` across an interior face, or `w` on a boundary face,
    /// evaluated from each adjacent element's polynomial.
    pub fn face_trace_values(&self, x: &[f64], face: &Face) -> Result<FaceTrace> {
        let nodes = self.mesh.face_nodes(face);
        let n = face.normal;
        match face.kind {
            FaceKind::Interior { left, right } => {
                let mut vn_jumps = Vec::new();
                let mut w_jumps = Vec::new();
                for (i, p) in nodes.iter().enumerate() {
                    let l = self.evaluate_at(x, left, *p)?;
                    let r = self.evaluate_at(x, right, *p)?;
                    if i < face.vertices.len() {
                        let vl = l.v[0] * n[0] + l.v[1] * n[1];
                        let vr = r.v[0] * n[0] + r.v[1] * n[1];
                        vn_jumps.push(vl - vr);
                    }
                    w_jumps.push(l.w - r.w);
                }
                Ok(FaceTrace::Interior { vn_jumps, w_jumps })
            }
            FaceKind::Boundary { element } => {
                let w_values = nodes
                    .iter()
                    .map(|p| self.evaluate_at(x, element, *p).map(|f| f.w))
                    .collect::<Result<Vec<_>>>()?;
                Ok(FaceTrace::Boundary { w_values })
            }
        }
    }

    /// Nodal interpolant of `w = u`, `v = grad u`.
    pub fn interpolate(&self, u: impl Fn(Point) -> f64, grad: impl Fn(Point) -> [f64; 2]) -> Vec<f64> {
        let lay = &self.layout;
        let mut x = vec![0.0; lay.n()];
        let wn = self.w_basis.nodes();
        let vn = self.v_basis.nodes();
        for e in 0..lay.num_elements {
            let map = &self.maps[e];
            for (a, xi) in wn.iter().enumerate() {
                x[lay.w_index(e, a)] = u(map.to_physical(*xi));
            }
            for (a, xi) in vn.iter().enumerate() {
                let g = grad(map.to_physical(*xi));
                for c in 0..lay.dim {
                    x[lay.v_index(e, a, c)] = g[c];
                }
            }
        }
        x
    }
}

//! Assembly of the optimization data `(B, b, L, d)`:
//!
//! ```text
//! x^T B x + b^T x + |f|^2 = |A:grad v - f|^2 + h^-2 |v - grad w|^2
//! |L x - d|_1            = tau * (face jump and boundary penalties)
//! ```

use std::sync::Arc;

use crate::dgspace::{basis, DgSpace, Mat2, QuadratureRule};
use crate::error::{Error, Result};
use crate::linalg::{self, SparseMatrix};
use crate::mesh::{FaceKind, Point};

/// Quadrature exactness used for the volume terms.
pub const ASSEMBLY_DEGREE: usize = 6;

pub type ScalarField = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Smoothness {
    Constant,
    Continuous,
    /// Discontinuous only across mesh lines.
    Piecewise,
}

/// Symmetric coefficient matrix `A(x)`. In 1D only `A[0][0]` is used.
#[derive(Clone)]
pub struct CoefficientField {
    smoothness: Smoothness,
    eval: Arc<dyn Fn(Point) -> Mat2 + Send + Sync>,
}

impl std::fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoefficientField").field("smoothness", &self.smoothness).finish()
    }
}

impl CoefficientField {
    pub fn constant(a: Mat2) -> Self {
        Self { smoothness: Smoothness::Constant, eval: Arc::new(move |_| a) }
    }

    pub fn identity() -> Self {
        Self::constant([[1.0, 0.0], [0.0, 1.0]])
    }

    pub fn from_fn(smoothness: Smoothness, f: impl Fn(Point) -> Mat2 + Send + Sync + 'static) -> Self {
        Self { smoothness, eval: Arc::new(f) }
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    pub fn eval(&self, p: Point) -> Mat2 {
        (self.eval)(p)
    }

    /// `A : D` for a (possibly non-symmetric) matrix `D`.
    pub fn contract(&self, p: Point, d: &Mat2) -> f64 {
        let a = self.eval(p);
        a[0][0] * d[0][0] + a[0][1] * d[0][1] + a[1][0] * d[1][0] + a[1][1] * d[1][1]
    }
}

/// Powers of `1/h` multiplying the three penalty blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PenaltyScaling {
    pub normal_jump: i32,
    pub value_jump: i32,
    pub boundary: i32,
}

impl PenaltyScaling {
    /// `h^-1` on `[[v.n]]`, `h^-2` on `[[w]]` and on `w - g`.
    pub const STABILIZATION: Self = Self { normal_jump: 1, value_jump: 2, boundary: 2 };
    /// `h^-1` on both jump blocks, `h^-2` on the boundary block.
    pub const EQUAL_JUMPS: Self = Self { normal_jump: 1, value_jump: 1, boundary: 2 };
}

impl Default for PenaltyScaling {
    fn default() -> Self {
        Self::STABILIZATION
    }
}

/// Row counts of the three penalty blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct PenaltyBlocks {
    pub normal_jump: usize,
    pub value_jump: usize,
    pub boundary: usize,
}

impl PenaltyBlocks {
    pub fn total(&self) -> usize {
        self.normal_jump + self.value_jump + self.boundary
    }
}

/// `min_x x^T B x + b^T x + |L x - d|_1` plus the data needed to interpret it.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub b_mat: SparseMatrix,
    pub b_vec: Vec<f64>,
    pub l_mat: SparseMatrix,
    pub d_vec: Vec<f64>,
    pub h: f64,
    pub tau: f64,
    pub n_w: usize,
    pub n_v: usize,
    pub blocks: PenaltyBlocks,
    pub scaling: PenaltyScaling,
    /// `|f|^2` with the assembly quadrature, so that `objective + f_norm_sq = J_h`.
    pub f_norm_sq: f64,
}

impl AssembledSystem {
    pub fn n(&self) -> usize {
        self.n_w + self.n_v
    }

    pub fn m(&self) -> usize {
        self.d_vec.len()
    }

    /// `x^T B x + b^T x + |L x - d|_1`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let bx = linalg::mul(&self.b_mat, x);
        let lx = linalg::mul(&self.l_mat, x);
        let quad: f64 = x.iter().zip(&bx).zip(&self.b_vec).map(|((xi, bxi), bi)| xi * bxi + bi * xi).sum();
        let pen: f64 = lx.iter().zip(&self.d_vec).map(|(a, b)| (a - b).abs()).sum();
        quad + pen
    }

    /// The discrete energy `J_h` (objective plus `|f|^2`).
    pub fn energy(&self, x: &[f64]) -> f64 {
        self.objective(x) + self.f_norm_sq
    }
}

fn check_layout(space: &DgSpace) -> Result<()> {
    if space.layout().num_elements != space.mesh().num_elements() {
        return Err(Error::DimensionMismatch("layout does not match mesh".into()));
    }
    Ok(())
}

/// Per-quadrature-point rows: `A:grad v` and `h^-1 (v - grad w)` as linear
/// functionals of the local coefficients.
struct LocalOperator {
    rows: Vec<Vec<f64>>,
}

fn local_operator(space: &DgSpace, element: usize, a: &Mat2, sw: &basis::ShapeValues, sv: &basis::ShapeValues, h_inv: f64) -> LocalOperator {
    let lay = space.layout();
    let map = space.map(element);
    let dim = lay.dim;
    let nloc = lay.local_len();
    let nw = lay.w_per_element;
    let mut rows = vec![vec![0.0; nloc]; 1 + dim];
    for m in 0..nw {
        let g = map.gradient(sw.gradients[m]);
        for c in 0..dim {
            rows[1 + c][m] = -h_inv * g[c];
        }
    }
    for node in 0..lay.v_nodes_per_element {
        let g = map.gradient(sv.gradients[node]);
        for c in 0..dim {
            let col = nw + node * dim + c;
            // v = phi e_c  =>  A:grad v = sum_j A[c][j] d_j phi
            rows[0][col] = (0..dim).map(|j| a[c][j] * g[j]).sum();
            rows[1 + c][col] = h_inv * sv.values[node];
        }
    }
    LocalOperator { rows }
}

struct VolumeData {
    triplets: Vec<(usize, usize, f64)>,
    b_vec: Vec<f64>,
    f_norm_sq: f64,
}

fn assemble_volume(space: &DgSpace, a: &CoefficientField, f: Option<&(dyn Fn(Point) -> f64 + Sync)>) -> Result<VolumeData> {
    check_layout(space)?;
    let lay = space.layout();
    let rule: QuadratureRule = space.quadrature(ASSEMBLY_DEGREE)?;
    let h_inv = 1.0 / space.mesh().h();
    let tab_w: Vec<_> = rule.points.iter().map(|p| space.w_basis().eval(*p)).collect();
    let tab_v: Vec<_> = rule.points.iter().map(|p| space.v_basis().eval(*p)).collect();
    let nloc = lay.local_len();
    let mut triplets = Vec::with_capacity(lay.num_elements * nloc * nloc);
    let mut b_vec = vec![0.0; lay.n()];
    let mut f_norm_sq = 0.0;
    let mut local = vec![0.0; nloc * nloc];
    let mut local_b = vec![0.0; nloc];
    for e in 0..lay.num_elements {
        let map = space.map(e);
        local.iter_mut().for_each(|v| *v = 0.0);
        local_b.iter_mut().for_each(|v| *v = 0.0);
        for (q, xi) in rule.points.iter().enumerate() {
            let p = map.to_physical(*xi);
            let wq = rule.weights[q] * map.det.abs();
            let op = local_operator(space, e, &a.eval(p), &tab_w[q], &tab_v[q], h_inv);
            for r in &op.rows {
                for i in 0..nloc {
                    if r[i] == 0.0 {
                        continue;
                    }
                    for j in 0..nloc {
                        local[i * nloc + j] += wq * r[i] * r[j];
                    }
                }
            }
            if let Some(f) = f {
                let fv = f(p);
                f_norm_sq += wq * fv * fv;
                for i in 0..nloc {
                    local_b[i] -= 2.0 * wq * fv * op.rows[0][i];
                }
            }
        }
        let dofs = lay.element_dofs(e);
        for i in 0..nloc {
            for j in 0..nloc {
                let v = local[i * nloc + j];
                if v != 0.0 {
                    triplets.push((dofs[i], dofs[j], v));
                }
            }
            b_vec[dofs[i]] += local_b[i];
        }
    }
    Ok(VolumeData { triplets, b_vec, f_norm_sq })
}

/// The quadratic matrix `B = [[B11, B12], [B12^T, B22]]`.
pub fn assemble_b_matrix(space: &DgSpace, a: &CoefficientField) -> Result<SparseMatrix> {
    let vol = assemble_volume(space, a, None)?;
    let n = space.layout().n();
    Ok(linalg::from_triplets(n, n, &vol.triplets))
}

/// The linear term `b`: zero on the `w` block, `-2 (A:grad v_j, f)` on the `v` block.
pub fn assemble_b_vector(space: &DgSpace, a: &CoefficientField, f: &(dyn Fn(Point) -> f64 + Sync)) -> Result<Vec<f64>> {
    Ok(assemble_volume(space, a, Some(f))?.b_vec)
}

/// `|A:grad v - f|^2 + h^-2 |v - grad w|^2` summed as squares with the assembly
/// quadrature. Equal to `x^T B x + b^T x + |f|^2` but free of cancellation near zero.
pub fn quadratic_residual(space: &DgSpace, a: &CoefficientField, f: &(dyn Fn(Point) -> f64 + Sync), x: &[f64]) -> Result<f64> {
    check_layout(space)?;
    let lay = space.layout();
    if x.len() != lay.n() {
        return Err(Error::DimensionMismatch(format!("x has length {}, expected {}", x.len(), lay.n())));
    }
    let rule = space.quadrature(ASSEMBLY_DEGREE)?;
    let h_inv = 1.0 / space.mesh().h();
    let tab_w: Vec<_> = rule.points.iter().map(|p| space.w_basis().eval(*p)).collect();
    let tab_v: Vec<_> = rule.points.iter().map(|p| space.v_basis().eval(*p)).collect();
    let mut total = 0.0;
    for e in 0..lay.num_elements {
        let map = space.map(e);
        let local: Vec<f64> = lay.element_dofs(e).iter().map(|&i| x[i]).collect();
        for (q, xi) in rule.points.iter().enumerate() {
            let p = map.to_physical(*xi);
            let op = local_operator(space, e, &a.eval(p), &tab_w[q], &tab_v[q], h_inv);
            let mut sum = 0.0;
            for (r, row) in op.rows.iter().enumerate() {
                let mut v: f64 = row.iter().zip(&local).map(|(c, u)| c * u).sum();
                if r == 0 {
                    v -= f(p);
                }
                sum += v * v;
            }
            total += rule.weights[q] * map.det.abs() * sum;
        }
    }
    Ok(total)
}

/// Penalty matrix `L` and offset `d`. Rows: `[[v.n]]` at endpoints of interior
/// faces, `[[w]]` at endpoints and midpoints of interior faces, then `w` at
/// endpoints and midpoints of boundary faces.
pub fn assemble_penalty(
    space: &DgSpace,
    tau: f64,
    g: &(dyn Fn(Point) -> f64 + Sync),
    scaling: PenaltyScaling,
) -> Result<(SparseMatrix, Vec<f64>, PenaltyBlocks)> {
    check_layout(space)?;
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    let mesh = space.mesh();
    let lay = space.layout();
    let h = mesh.h();
    let s1 = tau * h.powi(-scaling.normal_jump);
    let s2 = tau * h.powi(-scaling.value_jump);
    let s3 = tau * h.powi(-scaling.boundary);
    let dim = lay.dim;
    let local_vertex = |e: usize, v: usize| mesh.element(e).iter().position(|&u| u == v).expect("face vertex belongs to element");
    // w node of element `e` at face node `i` (endpoints first, then midpoint)
    let w_node = |e: usize, local_face: usize, face_vertices: &[usize], i: usize| {
        if i < face_vertices.len() {
            lay.w_index(e, lay.w_node_at_vertex(local_vertex(e, face_vertices[i])))
        } else {
            lay.w_index(e, basis::triangle_edge_midpoint_node(local_face))
        }
    };
    let nodes_per_face = if dim == 1 { 1 } else { 3 };

    let mut trip = Vec::new();
    let mut d = Vec::new();
    let mut row = 0;
    let mut blocks = PenaltyBlocks { normal_jump: 0, value_jump: 0, boundary: 0 };

    for face in mesh.faces() {
        if let FaceKind::Interior { left, right } = face.kind {
            for &v in &face.vertices {
                let (al, ar) = (local_vertex(left, v), local_vertex(right, v));
                for c in 0..dim {
                    trip.push((row, lay.v_index(left, al, c), s1 * face.normal[c]));
                    trip.push((row, lay.v_index(right, ar, c), -s1 * face.normal[c]));
                }
                d.push(0.0);
                row += 1;
                blocks.normal_jump += 1;
            }
        }
    }
    for face in mesh.faces() {
        if let FaceKind::Interior { left, right } = face.kind {
            for i in 0..nodes_per_face {
                trip.push((row, w_node(left, face.local_index[0], &face.vertices, i), s2));
                trip.push((row, w_node(right, face.local_index[1], &face.vertices, i), -s2));
                d.push(0.0);
                row += 1;
                blocks.value_jump += 1;
            }
        }
    }
    for face in mesh.faces() {
        if let FaceKind::Boundary { element } = face.kind {
            let nodes = mesh.face_nodes(face);
            for (i, p) in nodes.iter().enumerate() {
                trip.push((row, w_node(element, face.local_index[0], &face.vertices, i), s3));
                d.push(s3 * g(*p));
                row += 1;
                blocks.boundary += 1;
            }
        }
    }
    Ok((linalg::from_triplets(row, lay.n(), &trip), d, blocks))
}

/// Assembles every piece of the minimization problem.
pub fn assemble_system(
    space: &DgSpace,
    a: &CoefficientField,
    f: &(dyn Fn(Point) -> f64 + Sync),
    g: &(dyn Fn(Point) -> f64 + Sync),
    tau: f64,
    scaling: PenaltyScaling,
) -> Result<AssembledSystem> {
    let vol = assemble_volume(space, a, Some(f))?;
    let n = space.layout().n();
    let b_mat = linalg::from_triplets(n, n, &vol.triplets);
    let (l_mat, d_vec, blocks) = assemble_penalty(space, tau, g, scaling)?;
    Ok(AssembledSystem {
        b_mat,
        b_vec: vol.b_vec,
        l_mat,
        d_vec,
        h: space.mesh().h(),
        tau,
        n_w: space.layout().n_w(),
        n_v: space.layout().n_v(),
        blocks,
        scaling,
        f_norm_sq: vol.f_norm_sq,
    })
}

//! Structured simplicial meshes of the unit interval, the unit square and the
//! L-shaped domain `[-1,1]^2 \ (0,1] x [-1,0)`.
//!
//! Coordinates are always stored as 2-vectors; 1D meshes keep `y = 0`.

use std::collections::HashMap;
use std::io::Write;

use crate::error::{invalid_parameter, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Domain {
    UnitInterval,
    UnitSquare,
    LShape,
}

impl Domain {
    pub fn dimension(self) -> usize {
        match self {
            Domain::UnitInterval => 1,
            Domain::UnitSquare | Domain::LShape => 2,
        }
    }

    pub fn measure(self) -> f64 {
        match self {
            Domain::UnitInterval | Domain::UnitSquare => 1.0,
            Domain::LShape => 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceKind {
    Interior { left: usize, right: usize },
    Boundary { element: usize },
}

/// A mesh facet: a point in 1D, an edge in 2D.
#[derive(Debug, Clone)]
pub struct Face {
    /// One vertex in 1D, the two edge endpoints in 2D.
    pub vertices: Vec<usize>,
    pub kind: FaceKind,
    /// Unit normal pointing out of the first-listed element.
    pub normal: Point,
    /// Edge length in 2D; 1 in 1D.
    pub measure: f64,
    /// Local facet index inside the first element, and inside the second for interior faces.
    pub local_index: [usize; 2],
}

impl Face {
    pub fn is_interior(&self) -> bool {
        matches!(self.kind, FaceKind::Interior { .. })
    }

    /// The element the normal points out of.
    pub fn first_element(&self) -> usize {
        match self.kind {
            FaceKind::Interior { left, .. } => left,
            FaceKind::Boundary { element } => element,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    domain: Domain,
    n: usize,
    vertices: Vec<Point>,
    /// Flat connectivity, `nodes_per_element` entries per element.
    cells: Vec<usize>,
    nodes_per_element: usize,
    faces: Vec<Face>,
    /// Faces of each element, indexed by local facet.
    element_faces: Vec<usize>,
    h: f64,
}

impl Mesh {
    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn dimension(&self) -> usize {
        self.domain.dimension()
    }

    /// Subdivision parameter: cells per unit length.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Largest element diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn num_elements(&self) -> usize {
        self.cells.len() / self.nodes_per_element
    }

    pub fn element(&self, k: usize) -> &[usize] {
        let m = self.nodes_per_element;
        &self.cells[k * m..(k + 1) * m]
    }

    pub fn element_vertices(&self, k: usize) -> Vec<Point> {
        self.element(k).iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn num_interior_faces(&self) -> usize {
        self.faces.iter().filter(|f| f.is_interior()).count()
    }

    pub fn num_boundary_faces(&self) -> usize {
        self.faces.len() - self.num_interior_faces()
    }

    /// Faces of element `k` in local facet order.
    pub fn faces_of(&self, k: usize) -> &[usize] {
        let m = self.nodes_per_element;
        &self.element_faces[k * m..(k + 1) * m]
    }

    /// Length of an interval or area of a triangle (positive for valid meshes).
    pub fn element_measure(&self, k: usize) -> f64 {
        let v = self.element_vertices(k);
        match self.dimension() {
            1 => v[1][0] - v[0][0],
            _ => signed_area(v[0], v[1], v[2]),
        }
    }

    pub fn centroid(&self, k: usize) -> Point {
        let v = self.element_vertices(k);
        let s = v.len() as f64;
        let (x, y) = v.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p[0], acc.1 + p[1]));
        [x / s, y / s]
    }

    /// Evaluation nodes of a face: the point in 1D, endpoints then midpoint in 2D.
    pub fn face_nodes(&self, face: &Face) -> Vec<Point> {
        match self.dimension() {
            1 => vec![self.vertices[face.vertices[0]]],
            _ => {
                let a = self.vertices[face.vertices[0]];
                let b = self.vertices[face.vertices[1]];
                vec![a, b, [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0]]
            }
        }
    }

    /// Writes vertices, elements and faces as plain text.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# domain {:?} dim {} n {} h {:.17e}", self.domain, self.dimension(), self.n, self.h)?;
        writeln!(out, "vertices {}", self.vertices.len())?;
        for p in &self.vertices {
            if self.dimension() == 1 {
                writeln!(out, "{:.17e}", p[0])?;
            } else {
                writeln!(out, "{:.17e} {:.17e}", p[0], p[1])?;
            }
        }
        writeln!(out, "elements {}", self.num_elements())?;
        for k in 0..self.num_elements() {
            let ids: Vec<String> = self.element(k).iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", ids.join(" "))?;
        }
        writeln!(out, "faces {}", self.faces.len())?;
        for f in &self.faces {
            let ids: Vec<String> = f.vertices.iter().map(|v| v.to_string()).collect();
            let kind = match f.kind {
                FaceKind::Interior { left, right } => format!("interior {left} {right}"),
                FaceKind::Boundary { element } => format!("boundary {element}"),
            };
            writeln!(out, "{kind} {} {:.17e} {:.17e}", ids.join(" "), f.normal[0], f.normal[1])?;
        }
        Ok(())
    }
}

pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Uniform mesh of `[0,1]` with `n` intervals.
pub fn build_interval_mesh(n: usize) -> Result<Mesh> {
    if n < 2 {
        return Err(invalid_parameter(format!("interval mesh needs n >= 2, got {n}")));
    }
    let vertices: Vec<Point> = (0..=n).map(|i| [i as f64 / n as f64, 0.0]).collect();
    let cells: Vec<usize> = (0..n).flat_map(|i| [i, i + 1]).collect();
    let mut faces = Vec::with_capacity(n + 1);
    let mut element_faces = vec![0; 2 * n];
    for i in 0..=n {
        let (kind, normal, local_index) = if i == 0 {
            (FaceKind::Boundary { element: 0 }, [-1.0, 0.0], [0, 0])
        } else if i == n {
            (FaceKind::Boundary { element: n - 1 }, [1.0, 0.0], [1, 0])
        } else {
            (FaceKind::Interior { left: i - 1, right: i }, [1.0, 0.0], [1, 0])
        };
        if i > 0 {
            element_faces[2 * (i - 1) + 1] = i;
        }
        if i < n {
            element_faces[2 * i] = i;
        }
        faces.push(Face { vertices: vec![i], kind, normal, measure: 1.0, local_index });
    }
    Ok(Mesh {
        domain: Domain::UnitInterval,
        n,
        vertices,
        cells,
        nodes_per_element: 2,
        faces,
        element_faces,
        h: 1.0 / n as f64,
    })
}

fn check_even(n: usize, what: &str) -> Result<()> {
    if n < 2 || n % 2 != 0 {
        return Err(invalid_parameter(format!("{what} mesh needs an even n >= 2, got {n}")));
    }
    Ok(())
}

/// `n x n` grid on the unit square, every cell split along its (0,0)-(1,1) diagonal.
pub fn build_square_mesh(n: usize) -> Result<Mesh> {
    check_even(n, "square")?;
    let s = 1.0 / n as f64;
    triangulate_grid(Domain::UnitSquare, n, [0.0, 0.0], n, s, |_, _| true)
}

/// L-shaped domain on a `2n x 2n` grid of cells of side `1/n`; the lower-right
/// quadrant is removed so the reentrant corner `(0,0)` is a vertex.
pub fn build_lshape_mesh(n: usize) -> Result<Mesh> {
    check_even(n, "L-shape")?;
    let s = 1.0 / n as f64;
    triangulate_grid(Domain::LShape, n, [-1.0, -1.0], 2 * n, s, |i, j| !(i >= n && j < n))
}

fn triangulate_grid(
    domain: Domain,
    n: usize,
    origin: Point,
    cells_per_side: usize,
    side: f64,
    keep: impl Fn(usize, usize) -> bool,
) -> Result<Mesh> {
    let m = cells_per_side;
    let grid_id = |i: usize, j: usize| j * (m + 1) + i;
    let mut remap = vec![usize::MAX; (m + 1) * (m + 1)];
    let mut vertices = Vec::new();
    let mut cells = Vec::new();
    let mut vid = |i: usize, j: usize, vertices: &mut Vec<Point>| {
        let g = grid_id(i, j);
        if remap[g] == usize::MAX {
            remap[g] = vertices.len();
            vertices.push([origin[0] + i as f64 * side, origin[1] + j as f64 * side]);
        }
        remap[g]
    };
    for j in 0..m {
        for i in 0..m {
            if !keep(i, j) {
                continue;
            }
            let v00 = vid(i, j, &mut vertices);
            let v10 = vid(i + 1, j, &mut vertices);
            let v11 = vid(i + 1, j + 1, &mut vertices);
            let v01 = vid(i, j + 1, &mut vertices);
            cells.extend_from_slice(&[v00, v10, v11]);
            cells.extend_from_slice(&[v00, v11, v01]);
        }
    }
    let (faces, element_faces) = build_edges(&vertices, &cells);
    let mut h: f64 = 0.0;
    for t in cells.chunks(3) {
        for a in 0..3 {
            let p = vertices[t[a]];
            let q = vertices[t[(a + 1) % 3]];
            h = h.max(((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt());
        }
    }
    Ok(Mesh { domain, n, vertices, cells, nodes_per_element: 3, faces, element_faces, h })
}

/// Local edge `a` of a triangle joins local vertices `a` and `a+1 (mod 3)`.
fn build_edges(vertices: &[Point], cells: &[usize]) -> (Vec<Face>, Vec<usize>) {
    let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
    let mut faces: Vec<Face> = Vec::new();
    let mut element_faces = vec![0; cells.len()];
    for (k, t) in cells.chunks(3).enumerate() {
        for a in 0..3 {
            let (p, q) = (t[a], t[(a + 1) % 3]);
            let key = (p.min(q), p.max(q));
            match lookup.get(&key) {
                Some(&fi) => {
                    let face = &mut faces[fi];
                    if let FaceKind::Boundary { element } = face.kind {
                        face.kind = FaceKind::Interior { left: element, right: k };
                        face.local_index[1] = a;
                    }
                    element_faces[3 * k + a] = fi;
                }
                None => {
                    let (pa, pb) = (vertices[p], vertices[q]);
                    let (dx, dy) = (pb[0] - pa[0], pb[1] - pa[1]);
                    let len = (dx * dx + dy * dy).sqrt();
                    // counter-clockwise triangle: outward normal is the edge direction rotated clockwise
                    let normal = [dy / len, -dx / len];
                    lookup.insert(key, faces.len());
                    element_faces[3 * k + a] = faces.len();
                    faces.push(Face {
                        vertices: vec![p, q],
                        kind: FaceKind::Boundary { element: k },
                        normal,
                        measure: len,
                        local_index: [a, 0],
                    });
                }
            }
        }
    }
    (faces, element_faces)
}

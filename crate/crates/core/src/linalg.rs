//! Sparse products and a block-wise Cholesky factorization.
//!
//! The quadratic matrix of the DG system only couples unknowns of one element,
//! so `lambda I + 2 alpha B` splits into independent dense blocks once its
//! sparsity graph is partitioned into connected components.

use std::io::Write;

use sprs::{CsMat, TriMat};

use crate::error::{Error, Result};

pub type SparseMatrix = CsMat<f64>;

/// `y = A x` for a CSR matrix.
pub fn mul_vec(a: &SparseMatrix, x: &[f64], y: &mut [f64]) {
    debug_assert!(a.is_csr());
    debug_assert_eq!(a.cols(), x.len());
    let ip = a.indptr();
    let (idx, val) = (a.indices(), a.data());
    for (i, yi) in y.iter_mut().enumerate().take(a.rows()) {
        let r = ip.outer_inds_sz(i);
        let mut s = 0.0;
        for k in r {
            s += val[k] * x[idx[k]];
        }
        *yi = s;
    }
}

pub fn mul(a: &SparseMatrix, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; a.rows()];
    mul_vec(a, x, &mut y);
    y
}

/// `x^T A x`.
pub fn quadratic_form(a: &SparseMatrix, x: &[f64]) -> f64 {
    mul(a, x).iter().zip(x).map(|(ax, xi)| ax * xi).sum()
}

pub fn transpose_csr(a: &SparseMatrix) -> SparseMatrix {
    a.transpose_view().to_csr()
}

pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> SparseMatrix {
    let mut t = TriMat::with_capacity((rows, cols), triplets.len());
    for &(i, j, v) in triplets {
        t.add_triplet(i, j, v);
    }
    t.to_csr()
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn norm1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Writes `row col value` lines (zero-based), preceded by a `rows cols nnz` header.
pub fn write_coordinates<W: Write>(a: &SparseMatrix, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{} {} {}", a.rows(), a.cols(), a.nnz())?;
    for (v, (i, j)) in a.iter() {
        writeln!(out, "{i} {j} {v:.17e}")?;
    }
    Ok(())
}

pub fn write_vector<W: Write>(x: &[f64], mut out: W) -> std::io::Result<()> {
    for v in x {
        writeln!(out, "{v:.17e}")?;
    }
    Ok(())
}

/// Reads the format of [`write_coordinates`].
pub fn read_coordinates(text: &str) -> Result<SparseMatrix> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::InvalidInput("empty matrix file".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| Error::InvalidInput(format!("bad header {header:?}"))))
        .collect::<Result<_>>()?;
    if dims.len() != 3 {
        return Err(Error::InvalidInput(format!("bad header {header:?}")));
    }
    let mut trip = Vec::with_capacity(dims[2]);
    for line in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::InvalidInput(format!("bad entry {line:?}"));
        if f.len() != 3 {
            return Err(bad());
        }
        let i: usize = f[0].parse().map_err(|_| bad())?;
        let j: usize = f[1].parse().map_err(|_| bad())?;
        let v: f64 = f[2].parse().map_err(|_| bad())?;
        trip.push((i, j, v));
    }
    Ok(from_triplets(dims[0], dims[1], &trip))
}

/// Cholesky factors of the connected components of a symmetric positive
/// definite sparse matrix.
#[derive(Debug, Clone)]
pub struct BlockCholesky {
    n: usize,
    blocks: Vec<Block>,
}

#[derive(Debug, Clone)]
struct Block {
    dofs: Vec<usize>,
    /// Row-major lower factor.
    factor: Vec<f64>,
}

impl BlockCholesky {
    /// Factors `shift * I + scale * A`.
    pub fn new(a: &SparseMatrix, shift: f64, scale: f64) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::DimensionMismatch("matrix is not square".into()));
        }
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for (_, (i, j)) in a.iter() {
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj {
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
        let mut block_of = vec![usize::MAX; n];
        let mut members: Vec<Vec<usize>> = Vec::new();
        for i in 0..n {
            let r = find(&mut parent, i);
            if block_of[r] == usize::MAX {
                block_of[r] = members.len();
                members.push(Vec::new());
            }
            members[block_of[r]].push(i);
        }
        let mut local = vec![0usize; n];
        let mut blocks = Vec::with_capacity(members.len());
        for (bi, dofs) in members.into_iter().enumerate() {
            let m = dofs.len();
            for (k, &d) in dofs.iter().enumerate() {
                local[d] = k;
            }
            let mut dense = vec![0.0; m * m];
            for (k, &d) in dofs.iter().enumerate() {
                dense[k * m + k] = shift;
                if let Some(row) = a.outer_view(d) {
                    for (j, v) in row.iter() {
                        dense[k * m + local[j]] += scale * v;
                    }
                }
            }
            cholesky_in_place(&mut dense, m).map_err(|_| Error::Factorization { block: bi })?;
            blocks.push(Block { dofs, factor: dense });
        }
        Ok(Self { n, blocks })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn largest_block(&self) -> usize {
        self.blocks.iter().map(|b| b.dofs.len()).max().unwrap_or(0)
    }

    /// Solves in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let mut buf = Vec::new();
        for b in &self.blocks {
            buf.clear();
            buf.extend(b.dofs.iter().map(|&d| x[d]));
            b.substitute(&mut buf);
            for (k, &d) in b.dofs.iter().enumerate() {
                x[d] = buf[k];
            }
        }
    }

    /// Explicit inverses of the factored blocks.
    pub fn inverse(&self) -> BlockInverse {
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let m = b.dofs.len();
                let mut inv = vec![0.0; m * m];
                let mut col = vec![0.0; m];
                for j in 0..m {
                    col.iter_mut().for_each(|v| *v = 0.0);
                    col[j] = 1.0;
                    b.substitute(&mut col);
                    for i in 0..m {
                        inv[i * m + j] = col[i];
                    }
                }
                Block { dofs: b.dofs.clone(), factor: inv }
            })
            .collect();
        BlockInverse { n: self.n, blocks }
    }
}

impl Block {
    /// Forward and back substitution with the lower factor.
    fn substitute(&self, buf: &mut [f64]) {
        let m = self.dofs.len();
        let l = &self.factor;
        for i in 0..m {
            let mut s = buf[i];
            for k in 0..i {
                s -= l[i * m + k] * buf[k];
            }
            buf[i] = s / l[i * m + i];
        }
        for i in (0..m).rev() {
            let mut s = buf[i];
            for k in i + 1..m {
                s -= l[k * m + i] * buf[k];
            }
            buf[i] = s / l[i * m + i];
        }
    }
}

/// Block-diagonal inverse stored as dense row-major blocks; applying it is a
/// gather, a small dense product and a scatter per block.
#[derive(Debug, Clone)]
pub struct BlockInverse {
    n: usize,
    blocks: Vec<Block>,
}

impl BlockInverse {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// `(dofs, row-major inverse)` of every block.
    pub fn blocks(&self) -> impl Iterator<Item = (&[usize], &[f64])> {
        self.blocks.iter().map(|b| (b.dofs.as_slice(), b.factor.as_slice()))
    }

    pub fn apply_in_place(&self, x: &mut [f64]) {
        let mut buf = [0.0; 32];
        let mut heap = Vec::new();
        for b in &self.blocks {
            let m = b.dofs.len();
            let src: &mut [f64] = if m <= 16 {
                &mut buf[..2 * m]
            } else {
                heap.resize(2 * m, 0.0);
                &mut heap[..]
            };
            let (inp, out) = src.split_at_mut(m);
            for (k, &d) in b.dofs.iter().enumerate() {
                inp[k] = x[d];
            }
            for (i, row) in b.factor.chunks_exact(m).enumerate() {
                out[i] = row.iter().zip(inp.iter()).map(|(a, v)| a * v).sum();
            }
            for (k, &d) in b.dofs.iter().enumerate() {
                x[d] = out[k];
            }
        }
    }
}

fn cholesky_in_place(a: &mut [f64], m: usize) -> std::result::Result<(), ()> {
    for j in 0..m {
        let mut d = a[j * m + j];
        for k in 0..j {
            d -= a[j * m + k] * a[j * m + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(());
        }
        let d = d.sqrt();
        a[j * m + j] = d;
        for i in j + 1..m {
            let mut s = a[i * m + j];
            for k in 0..j {
                s -= a[i * m + k] * a[j * m + k];
            }
            a[i * m + j] = s / d;
        }
        for k in j + 1..m {
            a[j * m + k] = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn block_cholesky_solves_block_diagonal_system() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        // two coupled pairs and an isolated unknown, interleaved
        let trip = vec![
            (0, 0, 2.0),
            (0, 3, 0.5),
            (3, 0, 0.5),
            (3, 3, 1.0),
            (1, 1, 4.0),
            (1, 2, -1.0),
            (2, 1, -1.0),
            (2, 2, 3.0),
        ];
        let a = from_triplets(5, 5, &trip);
        let f = BlockCholesky::new(&a, 0.25, 2.0).unwrap();
        assert_eq!(f.num_blocks(), 3);
        let b: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut x = b.clone();
        f.solve_in_place(&mut x);
        let ax = mul(&a, &x);
        for i in 0..5 {
            assert!((0.25 * x[i] + 2.0 * ax[i] - b[i]).abs() < 1e-13);
        }
        let mut z = b.clone();
        f.inverse().apply_in_place(&mut z);
        for i in 0..5 {
            assert!((z[i] - x[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn indefinite_block_is_rejected() {
        let a = from_triplets(2, 2, &[(0, 0, -1.0), (1, 1, 1.0)]);
        assert!(matches!(BlockCholesky::new(&a, 0.5, 1.0), Err(Error::Factorization { .. })));
    }

    #[test]
    fn coordinate_round_trip() {
        let a = from_triplets(3, 4, &[(0, 1, 1.5), (2, 3, -2.0), (1, 0, 1e-300)]);
        let mut buf = Vec::new();
        write_coordinates(&a, &mut buf).unwrap();
        let b = read_coordinates(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}

//! Explicit fixed-point proximity algorithm for
//!
//! ```text
//! min_x  x^T B x + b^T x + |L x - d|_1
//! ```
//!
//! with `P = lambda I` and `Q = diag(q)`. One step reads
//!
//! ```text
//! y+ = clamp(y + (L x - d) / q, -alpha, alpha)
//! x+ = (P + 2 alpha B)^-1 (L^T (y - 2 y+) + P x - alpha b)
//! ```
//!
//! and converges whenever `|Q^-1/2 L P^-1/2| <= 1`.

use std::collections::HashMap;
use std::io::Write;

use serde::Serialize;

use crate::assembly::AssembledSystem;
use crate::error::{Error, Result};
use crate::linalg::{self, BlockCholesky, BlockInverse, SparseMatrix};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITERATIONS: usize = 200_000;

#[derive(Debug, Clone, Serialize)]
pub struct FppaConfig {
    pub alpha: f64,
    /// `P = lambda I`.
    pub lambda: f64,
    /// Diagonal of `Q`.
    #[serde(skip)]
    pub q: Vec<f64>,
    pub max_iterations: usize,
    /// Relative successive-change threshold.
    pub tolerance: f64,
    /// Record the objective every this many iterations (0 disables).
    pub monitor_interval: usize,
    /// Estimate `|Q^-1/2 L P^-1/2|` before iterating.
    pub check_condition: bool,
}

impl FppaConfig {
    pub fn new(alpha: f64, lambda: f64, q: Vec<f64>) -> Self {
        Self {
            alpha,
            lambda,
            q,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            tolerance: DEFAULT_TOLERANCE,
            monitor_interval: 1000,
            check_condition: true,
        }
    }

    /// Parameters from [`select_parameters`] with the given step balance `alpha`.
    pub fn auto(system: &AssembledSystem, strategy: &ParameterStrategy, alpha: f64) -> Result<Self> {
        let (lambda, q) = select_parameters(&system.l_mat, system.tau, system.h, strategy)?;
        Ok(Self::new(alpha, lambda, q))
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if !(self.alpha > 0.0) || !(self.lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha and lambda must be positive (alpha = {}, lambda = {})",
                self.alpha, self.lambda
            )));
        }
        if self.q.len() != m {
            return Err(Error::DimensionMismatch(format!("q has length {}, L has {m} rows", self.q.len())));
        }
        if let Some(i) = self.q.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::InvalidParameter(format!("q[{i}] = {} is not positive", self.q[i])));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParameterStrategy {
    /// `q_i = sum_j |L_ij|`, `lambda = |Q^-1/2 L|_1 |Q^-1/2 L|_inf`.
    RowSum,
    /// The one-dimensional rule with caller-supplied `q`: the last two rows of
    /// `L` are the boundary rows, every other row has two entries `+-tau/h`.
    OneDimensional { q: Vec<f64> },
}

/// Picks `(lambda, q)` such that `|Q^-1/2 L P^-1/2| <= 1`.
pub fn select_parameters(l: &SparseMatrix, tau: f64, h: f64, strategy: &ParameterStrategy) -> Result<(f64, Vec<f64>)> {
    match strategy {
        ParameterStrategy::RowSum => {
            let m = l.rows();
            let mut q = vec![0.0; m];
            for (i, row) in l.outer_iterator().enumerate() {
                q[i] = row.iter().map(|(_, v)| v.abs()).sum();
                if !(q[i] > 0.0) {
                    return Err(Error::InvalidInput(format!("row {i} of L is empty")));
                }
            }
            Ok((row_column_bound(l, &q), q))
        }
        ParameterStrategy::OneDimensional { q } => {
            let m = l.rows();
            if q.len() != m || m < 2 {
                return Err(Error::DimensionMismatch(format!("q has length {}, L has {m} rows", q.len())));
            }
            if q.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::InvalidParameter("q must be positive".into()));
            }
            let interior = q[..m - 2].iter().map(|v| 1.0 / v).fold(0.0, f64::max);
            let bound = (2.0 * h * h * interior).max(1.0 / q[m - 2]).max(1.0 / q[m - 1]);
            Ok((tau * tau / h.powi(4) * bound, q.clone()))
        }
    }
}

/// `|Q^-1/2 L|_1 |Q^-1/2 L|_inf`, an upper bound of `|Q^-1/2 L|^2` and hence the
/// smallest `lambda` this bound certifies for the given `q`.
pub fn row_column_bound(l: &SparseMatrix, q: &[f64]) -> f64 {
    let mut col = vec![0.0; l.cols()];
    let mut row_max: f64 = 0.0;
    for (i, row) in l.outer_iterator().enumerate() {
        let s = 1.0 / q[i].sqrt();
        let mut r = 0.0;
        for (j, v) in row.iter() {
            col[j] += v.abs() * s;
            r += v.abs() * s;
        }
        row_max = row_max.max(r);
    }
    let col_max = col.iter().cloned().fold(0.0, f64::max);
    col_max * row_max
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `|Q^-1/2 L P^-1/2|` by power iteration on `Q^-1/2 L P^-1 L^T Q^-1/2`.
/// The Rayleigh quotient never exceeds the true value.
pub fn operator_norm_estimate(l: &SparseMatrix, lambda: f64, q: &[f64]) -> NormEstimate {
    const MAX_ITER: usize = 20_000;
    const REL_TOL: f64 = 1e-13;
    let m = l.rows();
    if m == 0 || l.nnz() == 0 {
        return NormEstimate { value: 0.0, iterations: 0, converged: true };
    }
    let lt = linalg::transpose_csr(l);
    let sq: Vec<f64> = q.iter().map(|v| 1.0 / v.sqrt()).collect();
    // deterministic start with no special structure
    let mut v: Vec<f64> = (0..m).map(|i| 1.0 + ((i * 7919) % 101) as f64 / 101.0).collect();
    let nv = linalg::norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut tmp_m = vec![0.0; m];
    let mut tmp_n = vec![0.0; l.cols()];
    let mut w = vec![0.0; m];
    let mut mu = 0.0;
    let mut stable = 0;
    for it in 1..=MAX_ITER {
        for i in 0..m {
            tmp_m[i] = v[i] * sq[i];
        }
        linalg::mul_vec(&lt, &tmp_m, &mut tmp_n);
        linalg::mul_vec(l, &tmp_n, &mut w);
        for i in 0..m {
            w[i] *= sq[i] / lambda;
        }
        let new_mu = linalg::dot(&v, &w);
        let nw = linalg::norm2(&w);
        if nw == 0.0 {
            return NormEstimate { value: 0.0, iterations: it, converged: true };
        }
        for i in 0..m {
            v[i] = w[i] / nw;
        }
        if (new_mu - mu).abs() <= REL_TOL * new_mu {
            stable += 1;
        } else {
            stable = 0;
        }
        mu = new_mu;
        if stable >= 5 {
            return NormEstimate { value: mu.sqrt(), iterations: it, converged: true };
        }
    }
    NormEstimate { value: mu.sqrt(), iterations: MAX_ITER, converged: false }
}

/// `prox_{alpha g, lambda I}` for `g(u) = u^T B u + b^T u`, with `(lambda I + 2 alpha B)`
/// factored once.
#[derive(Debug, Clone)]
pub struct QuadraticProx {
    factor: BlockInverse,
    alpha: f64,
    lambda: f64,
    b: Vec<f64>,
}

impl QuadraticProx {
    pub fn new(b_mat: &SparseMatrix, b_vec: &[f64], alpha: f64, lambda: f64) -> Result<Self> {
        if !(alpha > 0.0) || !(lambda > 0.0) {
            return Err(Error::InvalidParameter("alpha and lambda must be positive".into()));
        }
        if b_vec.len() != b_mat.rows() {
            return Err(Error::DimensionMismatch("b does not match B".into()));
        }
        let factor = BlockCholesky::new(b_mat, lambda, 2.0 * alpha)?.inverse();
        Ok(Self { factor, alpha, lambda, b: b_vec.to_vec() })
    }

    /// `(P + 2 alpha B)^-1 (P x - alpha b)`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut r: Vec<f64> = x.iter().zip(&self.b).map(|(xi, bi)| self.lambda * xi - self.alpha * bi).collect();
        self.factor.apply_in_place(&mut r);
        r
    }

    /// `(P + 2 alpha B)^-1 r` in place.
    pub fn solve_in_place(&self, r: &mut [f64]) {
        self.factor.apply_in_place(r);
    }
}

/// The iteration with unknowns permuted so that every block of
/// `(P + 2 alpha B)^-1` is contiguous, and `L`, `L^T` stored with compact
/// indices in that ordering.
struct Kernel {
    /// `perm[new] = old`.
    perm: Vec<usize>,
    l_ptr: Vec<u32>,
    l_idx: Vec<u32>,
    l_val: Vec<f64>,
    lt_ptr: Vec<u32>,
    lt_idx: Vec<u32>,
    lt_val: Vec<f64>,
    block_ptr: Vec<usize>,
    /// Offset into `inv` of each block's inverse; identical inverses are stored once.
    inv_of_block: Vec<usize>,
    inv: Vec<f64>,
    inv_q: Vec<f64>,
    d_over_q: Vec<f64>,
    alpha_b: Vec<f64>,
    alpha: f64,
    lambda: f64,
}

/// `out = A r` for a symmetric `K x K` block, accumulated column by column.
#[inline(always)]
fn block_product<const K: usize>(a: &[f64], r: &[f64], out: &mut [f64]) {
    let mut acc = [0.0; K];
    for (col, rk) in a.chunks_exact(K).zip(&r[..K]) {
        for i in 0..K {
            acc[i] += col[i] * rk;
        }
    }
    out[..K].copy_from_slice(&acc);
}

/// Squared norms gathered during one step.
#[derive(Default)]
struct StepNorms {
    dx2: f64,
    x2: f64,
    dy2: f64,
    y2: f64,
}

impl Kernel {
    fn new(system: &AssembledSystem, config: &FppaConfig, prox: &QuadraticProx) -> Self {
        let n = system.n();
        let mut perm = Vec::with_capacity(n);
        let mut block_ptr = vec![0];
        let mut inv_of_block = Vec::new();
        let mut inv = Vec::new();
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
        for (dofs, block) in prox.factor.blocks() {
            perm.extend_from_slice(dofs);
            block_ptr.push(perm.len());
            let key: Vec<u64> = block.iter().map(|v| v.to_bits()).collect();
            let offset = *seen.entry(key).or_insert_with(|| {
                inv.extend_from_slice(block);
                inv.len() - block.len()
            });
            inv_of_block.push(offset);
        }
        let mut new_of = vec![0usize; n];
        for (k, &old) in perm.iter().enumerate() {
            new_of[old] = k;
        }
        let compact = |a: &SparseMatrix, map_cols: bool| {
            let mut ptr = vec![0u32];
            let mut idx = Vec::with_capacity(a.nnz());
            let mut val = Vec::with_capacity(a.nnz());
            for row in a.outer_iterator() {
                for (j, v) in row.iter() {
                    idx.push(if map_cols { new_of[j] } else { j } as u32);
                    val.push(*v);
                }
                ptr.push(idx.len() as u32);
            }
            (ptr, idx, val)
        };
        let (l_ptr, l_idx, l_val) = compact(&system.l_mat, true);
        let lt = linalg::transpose_csr(&system.l_mat);
        let (lt_rows_ptr, lt_rows_idx, lt_rows_val) = compact(&lt, false);
        // rows of L^T in permuted order
        let mut lt_ptr = vec![0];
        let mut lt_idx = Vec::with_capacity(lt_rows_idx.len());
        let mut lt_val = Vec::with_capacity(lt_rows_val.len());
        for &old in &perm {
            let r = lt_rows_ptr[old] as usize..lt_rows_ptr[old + 1] as usize;
            lt_idx.extend_from_slice(&lt_rows_idx[r.clone()]);
            lt_val.extend_from_slice(&lt_rows_val[r]);
            lt_ptr.push(lt_idx.len() as u32);
        }
        let inv_q: Vec<f64> = config.q.iter().map(|v| 1.0 / v).collect();
        let d_over_q = system.d_vec.iter().zip(&inv_q).map(|(d, iq)| d * iq).collect();
        let alpha_b = perm.iter().map(|&old| config.alpha * system.b_vec[old]).collect();
        Self {
            perm,
            l_ptr,
            l_idx,
            l_val,
            lt_ptr,
            lt_idx,
            lt_val,
            block_ptr,
            inv_of_block,
            inv,
            inv_q,
            d_over_q,
            alpha_b,
            alpha: config.alpha,
            lambda: config.lambda,
        }
    }

    fn permute(&self, x: &[f64]) -> Vec<f64> {
        self.perm.iter().map(|&old| x[old]).collect()
    }

    fn unpermute(&self, xp: &[f64], out: &mut [f64]) {
        for (k, &old) in self.perm.iter().enumerate() {
            out[old] = xp[k];
        }
    }

    /// One step on permuted `x`, updating `x` and `y` in place; `t` is scratch of length `M`.
    fn step(&self, x: &mut [f64], y: &mut [f64], t: &mut [f64]) -> StepNorms {
        assert!(x.len() == self.perm.len() && y.len() == self.inv_q.len() && t.len() == y.len());
        let mut s = StepNorms::default();
        let alpha = self.alpha;
        // SAFETY: `Kernel::new` builds every index array from `L` and its
        // transpose, so column indices are < N, row indices are < M and the
        // pointer arrays are monotone with final entries equal to the lengths
        // of the index arrays; the lengths of x, y, t are asserted above.
        unsafe {
            for i in 0..y.len() {
                let (lo, hi) = (*self.l_ptr.get_unchecked(i) as usize, *self.l_ptr.get_unchecked(i + 1) as usize);
                let mut lx = 0.0;
                for k in lo..hi {
                    lx += self.l_val.get_unchecked(k) * x.get_unchecked(*self.l_idx.get_unchecked(k) as usize);
                }
                let old = *y.get_unchecked(i);
                let new = (old + lx * self.inv_q.get_unchecked(i) - self.d_over_q.get_unchecked(i)).clamp(-alpha, alpha);
                s.dy2 += (new - old) * (new - old);
                s.y2 += old * old;
                *t.get_unchecked_mut(i) = old - 2.0 * new;
                *y.get_unchecked_mut(i) = new;
            }
        }
        let mut rhs = vec![0.0; 32];
        let mut out = vec![0.0; 32];
        for b in 0..self.block_ptr.len() - 1 {
            let (lo, hi) = (self.block_ptr[b], self.block_ptr[b + 1]);
            let m = hi - lo;
            if m > rhs.len() {
                rhs.resize(m, 0.0);
                out.resize(m, 0.0);
            }
            // SAFETY: as above; `lo..hi` lies inside `0..N`.
            unsafe {
                for (k, j) in (lo..hi).enumerate() {
                    let (a, e) = (*self.lt_ptr.get_unchecked(j) as usize, *self.lt_ptr.get_unchecked(j + 1) as usize);
                    let mut acc = self.lambda * x.get_unchecked(j) - self.alpha_b.get_unchecked(j);
                    for k2 in a..e {
                        acc += self.lt_val.get_unchecked(k2) * t.get_unchecked(*self.lt_idx.get_unchecked(k2) as usize);
                    }
                    *rhs.get_unchecked_mut(k) = acc;
                }
            }
            let inv = &self.inv[self.inv_of_block[b]..self.inv_of_block[b] + m * m];
            match m {
                12 => block_product::<12>(inv, &rhs, &mut out),
                5 => block_product::<5>(inv, &rhs, &mut out),
                _ => {
                    for (k, row) in inv.chunks_exact(m).enumerate() {
                        out[k] = row.iter().zip(&rhs[..m]).map(|(a, v)| a * v).sum();
                    }
                }
            }
            for (xj, &new) in x[lo..hi].iter_mut().zip(&out[..m]) {
                let old = *xj;
                s.dx2 += (new - old) * (new - old);
                s.x2 += old * old;
                *xj = new;
            }
        }
        s
    }
}

/// One-shot form of [`QuadraticProx::apply`].
pub fn prox_quadratic(x: &[f64], alpha: f64, lambda: f64, b_mat: &SparseMatrix, b_vec: &[f64]) -> Result<Vec<f64>> {
    Ok(QuadraticProx::new(b_mat, b_vec, alpha, lambda)?.apply(x))
}

/// `prox_{(alpha |. - d|_1)^*, Q}(y)_i = clamp(y_i - d_i / q_i, -alpha, alpha)`.
pub fn prox_conjugate_l1(y: &[f64], alpha: f64, q: &[f64], d: &[f64]) -> Vec<f64> {
    y.iter().zip(q).zip(d).map(|((yi, qi), di)| (yi - di / qi).clamp(-alpha, alpha)).collect()
}

/// Objective `x^T B x + b^T x + |L x - d|_1`.
pub fn objective(system: &AssembledSystem, x: &[f64]) -> f64 {
    system.objective(x)
}

#[derive(Debug, Clone, Serialize)]
pub struct FppaState {
    #[serde(skip)]
    pub x: Vec<f64>,
    #[serde(skip)]
    pub y: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `(iteration, objective)` at the monitor interval.
    pub objective_history: Vec<(usize, f64)>,
    /// Relative successive change of each iteration.
    #[serde(skip)]
    pub change_history: Vec<f64>,
    pub final_change: f64,
    /// Fixed-point residual of the returned pair.
    pub residual: f64,
    pub factorizations: usize,
    pub condition: Option<NormEstimate>,
}

impl FppaState {
    /// `|Q^-1/2 L P^-1/2| <= 1` held (up to rounding), or was not checked.
    pub fn condition_satisfied(&self) -> bool {
        self.condition.map_or(true, |c| c.value <= 1.0 + 1e-9)
    }

    pub fn z_norm(&self) -> f64 {
        (linalg::norm2(&self.x).powi(2) + linalg::norm2(&self.y).powi(2)).sqrt()
    }
}

/// `|x - prox_g(x - P^-1 L^T y)| + |y - prox_h*(y + Q^-1 L x)|`.
pub fn fixed_point_residual(system: &AssembledSystem, config: &FppaConfig, prox: &QuadraticProx, x: &[f64], y: &[f64]) -> f64 {
    let lty = linalg::mul(&linalg::transpose_csr(&system.l_mat), y);
    let shifted: Vec<f64> = x.iter().zip(&lty).map(|(xi, li)| xi - li / config.lambda).collect();
    let px = prox.apply(&shifted);
    let rx: f64 = x.iter().zip(&px).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let lx = linalg::mul(&system.l_mat, x);
    let arg: Vec<f64> = y.iter().zip(&lx).zip(&config.q).map(|((yi, li), qi)| yi + li / qi).collect();
    let py = prox_conjugate_l1(&arg, config.alpha, &config.q, &system.d_vec);
    let ry: f64 = y.iter().zip(&py).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    rx + ry
}

/// Runs the iteration from `(x0, y0)` (zeros when `None`).
pub fn solve(system: &AssembledSystem, config: &FppaConfig, x0: Option<&[f64]>, y0: Option<&[f64]>) -> Result<(Vec<f64>, FppaState)> {
    solve_with_log(system, config, x0, y0, None)
}

/// As [`solve`], streaming `iteration,objective,change,residual` CSV rows at
/// the monitor interval.
pub fn solve_with_log(
    system: &AssembledSystem,
    config: &FppaConfig,
    x0: Option<&[f64]>,
    y0: Option<&[f64]>,
    mut log: Option<&mut dyn Write>,
) -> Result<(Vec<f64>, FppaState)> {
    let (n, m) = (system.n(), system.m());
    config.validate(m)?;
    let mut x = match x0 {
        Some(v) if v.len() != n => return Err(Error::DimensionMismatch(format!("x0 has length {}, expected {n}", v.len()))),
        Some(v) => v.to_vec(),
        None => vec![0.0; n],
    };
    let mut y = match y0 {
        Some(v) if v.len() != m => return Err(Error::DimensionMismatch(format!("y0 has length {}, expected {m}", v.len()))),
        Some(v) => v.to_vec(),
        None => vec![0.0; m],
    };
    let condition = config.check_condition.then(|| operator_norm_estimate(&system.l_mat, config.lambda, &config.q));
    let prox = QuadraticProx::new(&system.b_mat, &system.b_vec, config.alpha, config.lambda)?;
    let kernel = Kernel::new(system, config, &prox);
    let mut xp = kernel.permute(&x);
    let mut t = vec![0.0; m];
    let mut state = FppaState {
        x: Vec::new(),
        y: Vec::new(),
        iterations: 0,
        converged: false,
        objective_history: Vec::new(),
        change_history: Vec::new(),
        final_change: f64::INFINITY,
        residual: f64::NAN,
        factorizations: 1,
        condition,
    };
    if let Some(w) = log.as_deref_mut() {
        writeln!(w, "iteration,objective,change,residual")?;
    }

    for k in 1..=config.max_iterations {
        let s = kernel.step(&mut xp, &mut y, &mut t);
        let change = (s.dx2 + s.dy2).sqrt() / (s.x2 + s.y2).sqrt().max(1.0);
        state.change_history.push(change);
        state.final_change = change;
        state.iterations = k;
        let done = change < config.tolerance;
        if config.monitor_interval > 0 && (k % config.monitor_interval == 0 || done) {
            kernel.unpermute(&xp, &mut x);
            let obj = system.objective(&x);
            state.objective_history.push((k, obj));
            if let Some(w) = log.as_deref_mut() {
                let res = fixed_point_residual(system, config, &prox, &x, &y);
                writeln!(w, "{k},{obj:.17e},{change:.17e},{res:.17e}")?;
            }
        }
        if done {
            state.converged = true;
            break;
        }
    }
    kernel.unpermute(&xp, &mut x);
    state.residual = fixed_point_residual(system, config, &prox, &x, &y);
    state.x = x.clone();
    state.y = y;
    Ok((x, state))
}

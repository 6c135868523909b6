//! Multiscale piecewise quadratic basis on `[0, 1]` and truncation study.
//!
//! `X_0` is spanned by the orthonormal Legendre quadratics, `W_1` by three
//! piecewise quadratics on the halves of `[0, 1]` orthogonal to `X_0`. Level
//! `n >= 2` functions are `m(2^{n-1} x - k)` for every `W_1` generator `m` and
//! `k = 0..2^{n-1}`, i.e. repeated application of `tau_0 f = f(2x)` and
//! `tau_1 f = f(2x - 1)` without renormalization.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector, Dyn, LU};
use serde::{Deserialize, Serialize};

use crate::assembly::PenaltyScaling;
use crate::error::{invalid_parameter, Error, Result};
use crate::experiment::{self, SolverOptions};
use crate::norms;
use crate::problems::{Problem, KINK_N, KINK_T};

pub use crate::problems::KinkSolution;

/// `u`, `q = u'` and `f = u''` of the kink problem.
pub fn kink_solution(t: f64, n: f64) -> Result<KinkSolution> {
    KinkSolution::new(t, n)
}

/// Monomial coefficients `[c0, c1, c2]` on the left and right half of `[0, 1]`.
type Generator = [[f64; 3]; 2];

fn x0_generators() -> [Generator; 3] {
    let s3 = 3f64.sqrt();
    let s5 = 5f64.sqrt();
    let p1 = [-s3, 2.0 * s3, 0.0];
    let p2 = [s5, -6.0 * s5, 6.0 * s5];
    [[[1.0, 0.0, 0.0]; 2], [p1, p1], [p2, p2]]
}

fn w1_generators() -> [Generator; 3] {
    let c = 91f64.sqrt() / 31.0;
    [
        [[1.0, -6.0, 0.0], [5.0, -6.0, 0.0]],
        [[9.0 * c, -116.0 * c, 240.0 * c], [3.0 * c, -4.0 * c, 0.0]],
        [[-c, 4.0 * c, 0.0], [133.0 * c, -364.0 * c, 240.0 * c]],
    ]
}

fn poly(c: &[f64; 3], s: f64) -> f64 {
    c[0] + s * (c[1] + s * c[2])
}

/// One multiscale function: generator `generator` of `X_0` (level 0) or of
/// `W_1` dilated to `level` and shifted by `shift`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BasisFunction {
    pub level: u32,
    pub shift: usize,
    pub generator: usize,
}

fn eval_function(f: BasisFunction, level: u32, normalized: bool, cell: usize, x: f64) -> f64 {
    if f.level == 0 {
        return poly(&x0_generators()[f.generator][0], x);
    }
    let scale = (1u64 << (f.level - 1)) as f64;
    let mid = (cell as f64 + 0.5) / (1u64 << level) as f64;
    let sm = scale * mid - f.shift as f64;
    if !(sm > 0.0 && sm < 1.0) {
        return 0.0;
    }
    let piece = usize::from(sm > 0.5);
    let norm = if normalized { scale.sqrt() } else { 1.0 };
    norm * poly(&w1_generators()[f.generator][piece], scale * x - f.shift as f64)
}

/// The multiscale basis of the level-`J` P2 space together with its
/// factored change-of-basis matrix.
pub struct MultiscaleBasis {
    level: u32,
    normalized: bool,
    functions: Vec<BasisFunction>,
    transform: DMatrix<f64>,
    lu: LU<f64, Dyn, Dyn>,
}

impl std::fmt::Debug for MultiscaleBasis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MultiscaleBasis").field("level", &self.level).field("normalized", &self.normalized).finish()
    }
}

impl MultiscaleBasis {
    pub fn new(level: u32) -> Result<Self> {
        Self::with_normalization(level, false)
    }

    /// With `normalized`, level-`n` functions are scaled by `2^{(n-1)/2}` to unit `L^2` norm.
    pub fn with_normalization(level: u32, normalized: bool) -> Result<Self> {
        if level < 1 {
            return Err(invalid_parameter("multiscale level must be at least 1"));
        }
        if level > 20 {
            return Err(invalid_parameter(format!("multiscale level {level} is too large")));
        }
        let mut functions: Vec<BasisFunction> = (0..3).map(|g| BasisFunction { level: 0, shift: 0, generator: g }).collect();
        for n in 1..=level {
            for k in 0..1usize << (n - 1) {
                for g in 0..3 {
                    functions.push(BasisFunction { level: n, shift: k, generator: g });
                }
            }
        }
        let cells = 1usize << level;
        let h = 1.0 / cells as f64;
        let mut transform = DMatrix::zeros(3 * cells, functions.len());
        for (j, f) in functions.iter().enumerate() {
            for cell in 0..cells {
                let a = cell as f64 * h;
                for (node, x) in [a, a + 0.5 * h, a + h].into_iter().enumerate() {
                    transform[(3 * cell + node, j)] = eval_function(*f, level, normalized, cell, x);
                }
            }
        }
        let lu = transform.clone().lu();
        if !lu.is_invertible() {
            return Err(Error::SingularTransform);
        }
        Ok(Self { level, normalized, functions, transform, lu })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn functions(&self) -> &[BasisFunction] {
        &self.functions
    }

    /// Columns are the nodal P2 coefficients of the multiscale functions.
    pub fn transform(&self) -> &DMatrix<f64> {
        &self.transform
    }

    /// Support `[a, b]` of function `i`.
    pub fn support(&self, i: usize) -> (f64, f64) {
        let f = self.functions[i];
        if f.level == 0 {
            return (0.0, 1.0);
        }
        let w = 1.0 / (1u64 << (f.level - 1)) as f64;
        (f.shift as f64 * w, (f.shift + 1) as f64 * w)
    }

    /// Function `i` at `x`, using the polynomial piece that lives on level-`J` cell `cell`
    /// (so values at cell ends are one-sided limits).
    pub fn eval_on_cell(&self, i: usize, cell: usize, x: f64) -> f64 {
        eval_function(self.functions[i], self.level, self.normalized, cell, x)
    }

    /// Function `i` at `x`, right-continuous except at `x = 1`.
    pub fn eval(&self, i: usize, x: f64) -> f64 {
        let cells = 1usize << self.level;
        let cell = ((x * cells as f64).floor() as usize).min(cells - 1);
        self.eval_on_cell(i, cell, x)
    }

    /// Solves `T c = x_w`.
    pub fn to_multiscale(&self, xw: &[f64]) -> Result<Vec<f64>> {
        if xw.len() != self.len() {
            return Err(Error::DimensionMismatch(format!("{} coefficients for a basis of size {}", xw.len(), self.len())));
        }
        let c = self.lu.solve(&DVector::from_column_slice(xw)).ok_or(Error::SingularTransform)?;
        Ok(c.as_slice().to_vec())
    }

    /// `x_w = T c`.
    pub fn from_multiscale(&self, c: &[f64]) -> Result<Vec<f64>> {
        if c.len() != self.len() {
            return Err(Error::DimensionMismatch(format!("{} coefficients for a basis of size {}", c.len(), self.len())));
        }
        Ok((&self.transform * DVector::from_column_slice(c)).as_slice().to_vec())
    }
}

/// Change-of-basis matrix of [`MultiscaleBasis::new`].
pub fn build_transform(level: u32) -> Result<DMatrix<f64>> {
    Ok(MultiscaleBasis::new(level)?.transform.clone())
}

/// Zeroes every coefficient with `|c_i| < threshold`; returns the percentage of zeros.
pub fn truncate(c: &[f64], threshold: f64) -> (Vec<f64>, f64) {
    let out: Vec<f64> = c.iter().map(|&v| if v.abs() < threshold { 0.0 } else { v }).collect();
    let zeros = out.iter().filter(|v| **v == 0.0).count();
    let sparsity = if out.is_empty() { 0.0 } else { 100.0 * zeros as f64 / out.len() as f64 };
    (out, sparsity)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationReport {
    pub threshold: f64,
    pub l2: f64,
    pub sparsity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MultiscaleSpec {
    pub t: f64,
    pub n: f64,
    pub level: u32,
    pub thresholds: Vec<f64>,
    pub tau: f64,
    pub normalized: bool,
    pub solver: SolverOptions,
}

impl Default for MultiscaleSpec {
    fn default() -> Self {
        Self {
            t: KINK_T,
            n: KINK_N,
            level: 7,
            thresholds: vec![1e-2, 1e-3, 1e-4],
            tau: 1.0,
            normalized: false,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MultiscaleRun {
    pub spec: MultiscaleSpec,
    pub single_scale_l2: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Fixed-point residual and `|(x, y)|` of the solve.
    pub residual: f64,
    pub z_norm: f64,
    pub rows: Vec<TruncationReport>,
    /// Multiscale coefficients of the computed `w`.
    pub coefficients: Vec<f64>,
    /// Nodal coefficients of the computed `w`.
    pub single_scale: Vec<f64>,
}

impl MultiscaleRun {
    pub fn to_table(&self) -> String {
        let mut s = format!("{:>14} {:>10} {:>10}\n", "threshold", "L2", "sparsity");
        s.push_str(&format!("{:>14} {:>10.3e} {:>9.2}%\n", "single-scale", self.single_scale_l2, 0.0));
        for r in &self.rows {
            s.push_str(&format!("{:>14.1e} {:>10.3e} {:>9.2}%\n", r.threshold, r.l2, r.sparsity));
        }
        s
    }

    /// Writes `multiscale.csv`, `coefficients.csv` and `multiscale.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(dir.join("multiscale.csv"))?));
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        let mut c = BufWriter::new(File::create(dir.join("coefficients.csv"))?);
        writeln!(c, "index,multiscale,single_scale")?;
        for (i, (m, s)) in self.coefficients.iter().zip(&self.single_scale).enumerate() {
            writeln!(c, "{i},{:.17e},{:.17e}", m.abs(), s.abs())?;
        }
        c.flush()?;
        fs::write(dir.join("multiscale.json"), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Solves the kink problem on the level-`J` mesh and measures the effect of
/// truncating its multiscale coefficients.
pub fn run_multiscale(spec: &MultiscaleSpec) -> Result<MultiscaleRun> {
    if spec.level < 2 {
        return Err(invalid_parameter(format!("multiscale study needs level >= 2, got {}", spec.level)));
    }
    if let Some(t) = spec.thresholds.iter().find(|t| !(**t >= 0.0)) {
        return Err(invalid_parameter(format!("threshold {t} is negative")));
    }
    let problem = Problem::kink(spec.t, spec.n)?;
    let n = 1usize << spec.level;
    let sol = experiment::solve_level(&problem, n, spec.tau, PenaltyScaling::default(), &spec.solver, norms::DEFAULT_LINF_SAMPLES, None)?;
    let basis = MultiscaleBasis::with_normalization(spec.level, spec.normalized)?;
    let n_w = sol.system.n_w;
    let xw = &sol.x[..n_w];
    let coefficients = basis.to_multiscale(xw)?;
    let mut rows = Vec::with_capacity(spec.thresholds.len());
    let mut x = sol.x.clone();
    for &th in &spec.thresholds {
        let (ct, sparsity) = truncate(&coefficients, th);
        let back = basis.from_multiscale(&ct)?;
        x[..n_w].copy_from_slice(&back);
        let l2 = norms::broken_error(&sol.space, &x, problem.exact.as_ref(), 0)?;
        rows.push(TruncationReport { threshold: th, l2, sparsity });
    }
    Ok(MultiscaleRun {
        spec: spec.clone(),
        single_scale_l2: sol.info.errors.l2,
        iterations: sol.state.iterations,
        converged: sol.state.converged,
        residual: sol.info.residual,
        z_norm: sol.info.z_norm,
        rows,
        coefficients,
        single_scale: xw.to_vec(),
    })
}

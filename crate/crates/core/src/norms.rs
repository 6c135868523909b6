//! Broken Sobolev errors against an exact solution and experimental orders.
//!
//! `|e|_{k,2}` sums the squared derivatives of all orders `0..=k`, one term per
//! multi-index (so the mixed second derivative is counted once).

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dgspace::{CellKind, DgSpace, FieldValue, ShapeValues};
use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::problems::ExactSolution;

/// Quadrature degree for error measurement.
pub const ERROR_DEGREE_TRIANGLE: usize = 8;
pub const ERROR_DEGREE_INTERVAL: usize = 10;
/// Default lattice resolution per dimension for the sampled maximum error.
pub const DEFAULT_LINF_SAMPLES: usize = 5;

/// Squared error contributions at one point: `[order0, order1, order2, q]`.
fn pointwise(f: &FieldValue, exact: &dyn ExactSolution, p: Point, dim: usize) -> [f64; 4] {
    let g = exact.gradient(p);
    let h = exact.hessian(p);
    let e0 = exact.value(p) - f.w;
    let mut e1 = 0.0;
    let mut eq = 0.0;
    for i in 0..dim {
        e1 += (g[i] - f.grad_w[i]).powi(2);
        eq += (g[i] - f.v[i]).powi(2);
    }
    let e2 = if dim == 1 {
        (h[0][0] - f.hess_w[0][0]).powi(2)
    } else {
        (h[0][0] - f.hess_w[0][0]).powi(2) + (h[0][1] - f.hess_w[0][1]).powi(2) + (h[1][1] - f.hess_w[1][1]).powi(2)
    };
    [e0 * e0, e1, e2, eq]
}

/// All quadrature-based error norms of one discrete solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrokenErrors {
    pub l2: f64,
    pub h1: f64,
    pub h2: f64,
    pub q: f64,
}

struct Tabulated {
    points: Vec<Point>,
    weights: Vec<f64>,
    sw: Vec<ShapeValues>,
    sv: Vec<ShapeValues>,
}

fn tabulate(space: &DgSpace) -> Result<Tabulated> {
    let degree = match space.cell() {
        CellKind::Interval => ERROR_DEGREE_INTERVAL,
        CellKind::Triangle => ERROR_DEGREE_TRIANGLE,
    };
    let rule = space.quadrature(degree)?;
    let sw = rule.points.iter().map(|xi| space.w_basis().eval(*xi)).collect();
    let sv = rule.points.iter().map(|xi| space.v_basis().eval(*xi)).collect();
    Ok(Tabulated { points: rule.points, weights: rule.weights, sw, sv })
}

fn check_len(space: &DgSpace, x: &[f64]) -> Result<()> {
    if x.len() != space.layout().n() {
        return Err(Error::DimensionMismatch(format!(
            "coefficient vector has length {}, layout expects {}",
            x.len(),
            space.layout().n()
        )));
    }
    Ok(())
}

/// Computes `|u - w_h|_{0,2}`, `|u - w_h|_{1,2}`, `|u - w_h|_{2,2}` and `|q - v_h|_2`
/// in one sweep over the elements.
pub fn broken_errors(space: &DgSpace, x: &[f64], exact: &dyn ExactSolution) -> Result<BrokenErrors> {
    check_len(space, x)?;
    let tab = tabulate(space)?;
    let dim = space.mesh().dimension();
    let mut acc = [0.0; 4];
    for e in 0..space.mesh().num_elements() {
        let map = space.map(e);
        let det = map.det.abs();
        let mut local = [0.0; 4];
        for k in 0..tab.points.len() {
            let f = space.combine(x, e, &tab.sw[k], &tab.sv[k]);
            let p = map.to_physical(tab.points[k]);
            let c = pointwise(&f, exact, p, dim);
            for i in 0..4 {
                local[i] += tab.weights[k] * c[i];
            }
        }
        for i in 0..4 {
            acc[i] += det * local[i];
        }
    }
    Ok(BrokenErrors {
        l2: acc[0].sqrt(),
        h1: (acc[0] + acc[1]).sqrt(),
        h2: (acc[0] + acc[1] + acc[2]).sqrt(),
        q: acc[3].sqrt(),
    })
}

/// `|u - w_h|_{l,2,T_h}` for `l` in `0..=2`.
pub fn broken_error(space: &DgSpace, x: &[f64], exact: &dyn ExactSolution, order: usize) -> Result<f64> {
    let e = broken_errors(space, x, exact)?;
    match order {
        0 => Ok(e.l2),
        1 => Ok(e.h1),
        2 => Ok(e.h2),
        _ => Err(Error::InvalidParameter(format!("derivative order {order} exceeds 2"))),
    }
}

/// `|q - v_h|_2`.
pub fn q_error(space: &DgSpace, x: &[f64], exact: &dyn ExactSolution) -> Result<f64> {
    Ok(broken_errors(space, x, exact)?.q)
}

/// Reference-cell sample lattice with `samples` points per dimension.
pub fn sample_lattice(cell: CellKind, samples: usize) -> Vec<Point> {
    let s = (samples - 1) as f64;
    match cell {
        CellKind::Interval => (0..samples).map(|i| [i as f64 / s, 0.0]).collect(),
        CellKind::Triangle => {
            let mut pts = Vec::new();
            for j in 0..samples {
                for i in 0..samples - j {
                    pts.push([i as f64 / s, j as f64 / s]);
                }
            }
            pts
        }
    }
}

/// Maximum of `|u - w_h|` over a fixed lattice of points in every element.
pub fn linf_error(space: &DgSpace, x: &[f64], exact: &dyn ExactSolution, samples: usize) -> Result<f64> {
    check_len(space, x)?;
    if samples < 3 {
        return Err(Error::InvalidParameter(format!("need at least 3 samples per dimension, got {samples}")));
    }
    let pts = sample_lattice(space.cell(), samples);
    let sw: Vec<ShapeValues> = pts.iter().map(|xi| space.w_basis().eval(*xi)).collect();
    let sv: Vec<ShapeValues> = pts.iter().map(|xi| space.v_basis().eval(*xi)).collect();
    let mut max = 0.0f64;
    for e in 0..space.mesh().num_elements() {
        let map = space.map(e);
        for k in 0..pts.len() {
            let f = space.combine(x, e, &sw[k], &sv[k]);
            let p = map.to_physical(pts[k]);
            max = max.max((exact.value(p) - f.w).abs());
        }
    }
    Ok(max)
}

/// `order_i = log2(e_{i-1} / e_i)`; the first entry is `None`.
pub fn convergence_orders(errors: &[f64], ns: &[usize]) -> Result<Vec<Option<f64>>> {
    if errors.len() != ns.len() {
        return Err(Error::DimensionMismatch(format!("{} errors for {} mesh sizes", errors.len(), ns.len())));
    }
    if let Some(w) = ns.windows(2).find(|w| w[1] != 2 * w[0]) {
        return Err(Error::InvalidInput(format!("mesh sizes must double, got {} then {}", w[0], w[1])));
    }
    Ok((0..errors.len()).map(|i| if i == 0 { None } else { Some((errors[i - 1] / errors[i]).log2()) }).collect())
}

/// One refinement level of a convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub n: usize,
    pub l2: f64,
    pub h1: f64,
    pub h2: f64,
    pub q: f64,
    pub linf: f64,
    pub iterations: usize,
    pub converged: bool,
    pub l2_order: Option<f64>,
    pub h1_order: Option<f64>,
    pub h2_order: Option<f64>,
    pub q_order: Option<f64>,
    pub linf_order: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub rows: Vec<ErrorRow>,
}

/// Errors and solver outcome of one level, before orders are known.
#[derive(Debug, Clone, Copy)]
pub struct LevelResult {
    pub n: usize,
    pub errors: BrokenErrors,
    pub linf: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl ErrorReport {
    pub fn from_levels(levels: &[LevelResult]) -> Result<Self> {
        let ns: Vec<usize> = levels.iter().map(|l| l.n).collect();
        let col = |f: &dyn Fn(&LevelResult) -> f64| -> Result<Vec<Option<f64>>> {
            let e: Vec<f64> = levels.iter().map(f).collect();
            convergence_orders(&e, &ns)
        };
        let l2 = col(&|l| l.errors.l2)?;
        let h1 = col(&|l| l.errors.h1)?;
        let h2 = col(&|l| l.errors.h2)?;
        let q = col(&|l| l.errors.q)?;
        let li = col(&|l| l.linf)?;
        let rows = levels
            .iter()
            .enumerate()
            .map(|(i, l)| ErrorRow {
                n: l.n,
                l2: l.errors.l2,
                h1: l.errors.h1,
                h2: l.errors.h2,
                q: l.errors.q,
                linf: l.linf,
                iterations: l.iterations,
                converged: l.converged,
                l2_order: l2[i],
                h1_order: h1[i],
                h2_order: h2[i],
                q_order: q[i],
                linf_order: li[i],
            })
            .collect();
        Ok(Self { rows })
    }

    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Plain-text table in the usual error/order layout.
    pub fn to_table(&self) -> String {
        let ord = |o: Option<f64>| o.map_or_else(|| "     -".to_string(), |v| format!("{v:6.2}"));
        let mut s = format!(
            "{:>5} {:>10} {:>6} {:>10} {:>6} {:>10} {:>6} {:>10} {:>6} {:>10} {:>6} {:>8}\n",
            "N", "L2", "order", "H1", "order", "H2", "order", "q", "order", "Linf", "order", "iters"
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{:>5} {:>10.3e} {} {:>10.3e} {} {:>10.3e} {} {:>10.3e} {} {:>10.3e} {} {:>8}{}\n",
                r.n,
                r.l2,
                ord(r.l2_order),
                r.h1,
                ord(r.h1_order),
                r.h2,
                ord(r.h2_order),
                r.q,
                ord(r.q_order),
                r.linf,
                ord(r.linf_order),
                r.iterations,
                if r.converged { "" } else { " (not converged)" }
            ));
        }
        s
    }
}

//! Model problems: exact solutions, coefficient fields and the experiment roster.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::assembly::{CoefficientField, Smoothness};
use crate::dgspace::Mat2;
use crate::error::{invalid_parameter, Error, Result};
use crate::mesh::{self, Domain, Mesh, Point};

/// A smooth-enough function with closed-form first and second derivatives.
pub trait ExactSolution: Send + Sync {
    fn value(&self, p: Point) -> f64;
    fn gradient(&self, p: Point) -> [f64; 2];
    fn hessian(&self, p: Point) -> Mat2;
}

/// `sin(pi x) sin(pi y)`.
#[derive(Debug, Clone, Copy)]
pub struct SineProduct;

impl ExactSolution for SineProduct {
    fn value(&self, p: Point) -> f64 {
        (PI * p[0]).sin() * (PI * p[1]).sin()
    }

    fn gradient(&self, p: Point) -> [f64; 2] {
        let (sx, cx) = (PI * p[0]).sin_cos();
        let (sy, cy) = (PI * p[1]).sin_cos();
        [PI * cx * sy, PI * sx * cy]
    }

    fn hessian(&self, p: Point) -> Mat2 {
        let (sx, cx) = (PI * p[0]).sin_cos();
        let (sy, cy) = (PI * p[1]).sin_cos();
        let pp = PI * PI;
        [[-pp * sx * sy, pp * cx * cy], [pp * cx * cy, -pp * sx * sy]]
    }
}

/// `r^{2/3} sin(2 theta / 3)` with `theta` in `[0, 2 pi)`: the corner singularity
/// of the L-shaped domain. Equals `Im z^{2/3}`.
#[derive(Debug, Clone, Copy)]
pub struct CornerSingularity;

impl CornerSingularity {
    fn polar(p: Point) -> (f64, f64) {
        let r = p[0].hypot(p[1]);
        let mut theta = p[1].atan2(p[0]);
        if theta < 0.0 {
            theta += 2.0 * PI;
        }
        (r, theta)
    }
}

impl ExactSolution for CornerSingularity {
    fn value(&self, p: Point) -> f64 {
        let (r, t) = Self::polar(p);
        r.powf(2.0 / 3.0) * (2.0 * t / 3.0).sin()
    }

    fn gradient(&self, p: Point) -> [f64; 2] {
        let (r, t) = Self::polar(p);
        let c = 2.0 / 3.0 * r.powf(-1.0 / 3.0);
        [-c * (t / 3.0).sin(), c * (t / 3.0).cos()]
    }

    fn hessian(&self, p: Point) -> Mat2 {
        let (r, t) = Self::polar(p);
        let c = 2.0 / 9.0 * r.powf(-4.0 / 3.0);
        let (s4, c4) = (4.0 * t / 3.0).sin_cos();
        [[c * s4, -c * c4], [-c * c4, -c * s4]]
    }
}

/// One-dimensional solution with a kink in its derivative at `x = t`:
/// `t((x/t)^{n+1} - x/t)` left of `t`, `(1-t)(s - s^{n+1})`, `s = (1-x)/(1-t)`, right of it.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KinkSolution {
    pub t: f64,
    pub n: f64,
}

impl KinkSolution {
    pub fn new(t: f64, n: f64) -> Result<Self> {
        if !(t > 0.0 && t < 1.0) {
            return Err(invalid_parameter(format!("kink location t must lie in (0,1), got {t}")));
        }
        if !(n > 0.0) {
            return Err(invalid_parameter(format!("kink exponent n must be positive, got {n}")));
        }
        Ok(Self { t, n })
    }

    /// `q = u'`.
    pub fn derivative(&self, x: f64) -> f64 {
        let (t, n) = (self.t, self.n);
        if x <= t {
            (n + 1.0) * (x / t).powf(n) - 1.0
        } else {
            (n + 1.0) * ((1.0 - x) / (1.0 - t)).powf(n) - 1.0
        }
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        let (t, n) = (self.t, self.n);
        if x <= t {
            (n + 1.0) * n * (x / t).powf(n - 1.0) / t
        } else {
            -(n + 1.0) * n * ((1.0 - x) / (1.0 - t)).powf(n - 1.0) / (1.0 - t)
        }
    }
}

impl ExactSolution for KinkSolution {
    fn value(&self, p: Point) -> f64 {
        let (t, n, x) = (self.t, self.n, p[0]);
        if x <= t {
            t * ((x / t).powf(n + 1.0) - x / t)
        } else {
            let s = (1.0 - x) / (1.0 - t);
            (1.0 - t) * (s - s.powf(n + 1.0))
        }
    }

    fn gradient(&self, p: Point) -> [f64; 2] {
        [self.derivative(p[0]), 0.0]
    }

    fn hessian(&self, p: Point) -> Mat2 {
        [[self.second_derivative(p[0]), 0.0], [0.0, 0.0]]
    }
}

/// `c0 + c1 x + c2 y + c3 x^2 + c4 x y + c5 y^2`.
#[derive(Debug, Clone, Copy)]
pub struct Quadratic(pub [f64; 6]);

impl ExactSolution for Quadratic {
    fn value(&self, p: Point) -> f64 {
        let c = &self.0;
        c[0] + c[1] * p[0] + c[2] * p[1] + c[3] * p[0] * p[0] + c[4] * p[0] * p[1] + c[5] * p[1] * p[1]
    }

    fn gradient(&self, p: Point) -> [f64; 2] {
        let c = &self.0;
        [c[1] + 2.0 * c[3] * p[0] + c[4] * p[1], c[2] + c[4] * p[0] + 2.0 * c[5] * p[1]]
    }

    fn hessian(&self, _: Point) -> Mat2 {
        let c = &self.0;
        [[2.0 * c[3], c[4]], [c[4], 2.0 * c[5]]]
    }
}

fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// The named experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    SquareConstant,
    SquareContinuous,
    SquareDiscontinuous,
    LshapeConstant,
    LshapeContinuous,
    LshapeDiscontinuous,
    Kink1d,
    /// Quadratic exact solution on the square; reproduced exactly by the method.
    SquareQuadratic,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 8] = [
        ProblemKind::SquareConstant,
        ProblemKind::SquareContinuous,
        ProblemKind::SquareDiscontinuous,
        ProblemKind::LshapeConstant,
        ProblemKind::LshapeContinuous,
        ProblemKind::LshapeDiscontinuous,
        ProblemKind::Kink1d,
        ProblemKind::SquareQuadratic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::SquareConstant => "square-constant",
            ProblemKind::SquareContinuous => "square-continuous",
            ProblemKind::SquareDiscontinuous => "square-discontinuous",
            ProblemKind::LshapeConstant => "lshape-constant",
            ProblemKind::LshapeContinuous => "lshape-continuous",
            ProblemKind::LshapeDiscontinuous => "lshape-discontinuous",
            ProblemKind::Kink1d => "kink-1d",
            ProblemKind::SquareQuadratic => "square-quadratic",
        }
    }

    pub fn domain(self) -> Domain {
        match self {
            ProblemKind::SquareConstant
            | ProblemKind::SquareContinuous
            | ProblemKind::SquareDiscontinuous
            | ProblemKind::SquareQuadratic => Domain::UnitSquare,
            ProblemKind::LshapeConstant | ProblemKind::LshapeContinuous | ProblemKind::LshapeDiscontinuous => Domain::LShape,
            ProblemKind::Kink1d => Domain::UnitInterval,
        }
    }

    /// Coefficient `c` of the mesh-scaled step balance `alpha = c N^2`, tuned per problem family.
    pub fn alpha_scale(self) -> f64 {
        match self {
            ProblemKind::SquareConstant | ProblemKind::SquareDiscontinuous => 0.8,
            ProblemKind::SquareContinuous | ProblemKind::SquareQuadratic => 0.5,
            ProblemKind::LshapeConstant => 0.25,
            ProblemKind::LshapeContinuous => 0.6,
            ProblemKind::LshapeDiscontinuous => 1.0,
            ProblemKind::Kink1d => 0.002,
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProblemKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown problem {s:?}")))
    }
}

/// Coefficients, data and exact solution of one experiment.
#[derive(Clone)]
pub struct Problem {
    pub kind: ProblemKind,
    pub coefficient: CoefficientField,
    pub exact: Arc<dyn ExactSolution>,
    /// `f = A : D^2 u` unless the solution is known to make it vanish.
    harmonic: bool,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem").field("kind", &self.kind).field("coefficient", &self.coefficient).finish()
    }
}

/// Default kink location and exponent.
pub const KINK_T: f64 = 1.0 / 6.0;
pub const KINK_N: f64 = 3.0;

impl Problem {
    pub fn new(kind: ProblemKind) -> Self {
        let c = |a: Mat2| CoefficientField::constant(a);
        let (coefficient, exact, harmonic): (CoefficientField, Arc<dyn ExactSolution>, bool) = match kind {
            ProblemKind::SquareConstant => (c([[2.0, 1.0], [1.0, 2.0]]), Arc::new(SineProduct), false),
            ProblemKind::SquareContinuous => (
                CoefficientField::from_fn(Smoothness::Continuous, |p| {
                    let m = (p[0] * p[1]).sqrt();
                    [[1.0 + p[0], m], [m, 1.0 + p[1]]]
                }),
                Arc::new(SineProduct),
                false,
            ),
            ProblemKind::SquareDiscontinuous => (
                CoefficientField::from_fn(Smoothness::Piecewise, |p| {
                    let s = sgn((p[0] - 0.5) * (p[1] - 0.5));
                    [[2.0, s], [s, 2.0]]
                }),
                Arc::new(SineProduct),
                false,
            ),
            ProblemKind::LshapeConstant => (CoefficientField::identity(), Arc::new(CornerSingularity), true),
            ProblemKind::LshapeContinuous => (
                CoefficientField::from_fn(Smoothness::Continuous, |p| {
                    let m = (p[0] * p[1]).abs().sqrt();
                    [[1.0 + p[0].abs(), m], [m, 1.0 + p[1].abs()]]
                }),
                Arc::new(CornerSingularity),
                false,
            ),
            ProblemKind::LshapeDiscontinuous => (
                CoefficientField::from_fn(Smoothness::Piecewise, |p| {
                    let s = sgn(p[0] * p[1]);
                    [[2.0, s], [s, 2.0]]
                }),
                Arc::new(CornerSingularity),
                false,
            ),
            ProblemKind::Kink1d => (CoefficientField::identity(), Arc::new(KinkSolution { t: KINK_T, n: KINK_N }), false),
            ProblemKind::SquareQuadratic => (
                c([[2.0, 1.0], [1.0, 2.0]]),
                Arc::new(Quadratic([0.5, -1.0, 2.0, 1.5, -2.0, 0.75])),
                false,
            ),
        };
        Self { kind, coefficient, exact, harmonic }
    }

    pub fn kink(t: f64, n: f64) -> Result<Self> {
        let exact = KinkSolution::new(t, n)?;
        Ok(Self { kind: ProblemKind::Kink1d, coefficient: CoefficientField::identity(), exact: Arc::new(exact), harmonic: false })
    }

    /// Any exact solution and coefficient on a named domain.
    pub fn custom(kind: ProblemKind, coefficient: CoefficientField, exact: Arc<dyn ExactSolution>) -> Self {
        Self { kind, coefficient, exact, harmonic: false }
    }

    pub fn domain(&self) -> Domain {
        self.kind.domain()
    }

    pub fn mesh(&self, n: usize) -> Result<Mesh> {
        match self.domain() {
            Domain::UnitInterval => mesh::build_interval_mesh(n),
            Domain::UnitSquare => mesh::build_square_mesh(n),
            Domain::LShape => mesh::build_lshape_mesh(n),
        }
    }

    pub fn source(&self, p: Point) -> f64 {
        if self.harmonic {
            return 0.0;
        }
        let h = self.exact.hessian(p);
        if self.domain() == Domain::UnitInterval {
            self.coefficient.eval(p)[0][0] * h[0][0]
        } else {
            self.coefficient.contract(p, &h)
        }
    }

    pub fn boundary(&self, p: Point) -> f64 {
        self.exact.value(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_derivatives(u: &dyn ExactSolution, p: Point) {
        let e = 1e-6;
        let g = u.gradient(p);
        let hs = u.hessian(p);
        for i in 0..2 {
            let mut a = p;
            let mut b = p;
            a[i] += e;
            b[i] -= e;
            let fd = (u.value(a) - u.value(b)) / (2.0 * e);
            assert!((fd - g[i]).abs() < 1e-6 * (1.0 + g[i].abs()), "grad {i}: {fd} vs {}", g[i]);
            let (ga, gb) = (u.gradient(a), u.gradient(b));
            for j in 0..2 {
                let fd2 = (ga[j] - gb[j]) / (2.0 * e);
                assert!((fd2 - hs[j][i]).abs() < 1e-5 * (1.0 + hs[j][i].abs()), "hess {j}{i}: {fd2} vs {}", hs[j][i]);
            }
        }
    }

    #[test]
    fn corner_singularity_derivatives() {
        for p in [[0.3, 0.4], [-0.5, 0.2], [-0.3, -0.7], [0.6, 0.01], [0.01, -0.6]] {
            check_derivatives(&CornerSingularity, p);
            let h = CornerSingularity.hessian(p);
            assert!((h[0][0] + h[1][1]).abs() < 1e-12);
        }
        // vanishes on both edges of the reentrant corner
        assert!(CornerSingularity.value([0.5, 0.0]).abs() < 1e-15);
        assert!(CornerSingularity.value([0.0, -0.5]).abs() < 1e-12);
    }

    #[test]
    fn sine_and_quadratic_derivatives() {
        check_derivatives(&SineProduct, [0.3, 0.8]);
        check_derivatives(&Quadratic([0.5, -1.0, 2.0, 1.5, -2.0, 0.75]), [0.3, 0.8]);
    }

    #[test]
    fn kink_continuity_and_jumps() {
        let k = KinkSolution::new(1.0 / 6.0, 3.0).unwrap();
        let t = k.t;
        let e = 1e-12;
        assert!((k.value([t - e, 0.0]) - k.value([t + e, 0.0])).abs() < 1e-10);
        assert!((k.derivative(t) - 3.0).abs() < 1e-14);
        assert!((k.derivative(t + e) - 3.0).abs() < 1e-9);
        let n = k.n;
        assert!((k.second_derivative(t) - n * (n + 1.0) / t).abs() < 1e-10);
        assert!((k.second_derivative(t + 1e-14) + n * (n + 1.0) / (1.0 - t)).abs() < 1e-8);
        assert_eq!(k.value([0.0, 0.0]), 0.0);
        assert!(k.value([1.0, 0.0]).abs() < 1e-15);
        check_derivatives(&k, [0.1, 0.0]);
        check_derivatives(&k, [0.7, 0.0]);
        assert!(KinkSolution::new(1.0, 3.0).is_err());
        assert!(KinkSolution::new(0.5, 0.0).is_err());
    }

    #[test]
    fn names_round_trip() {
        for k in ProblemKind::ALL {
            assert_eq!(k.name().parse::<ProblemKind>().unwrap(), k);
        }
        assert!("square".parse::<ProblemKind>().is_err());
    }

    #[test]
    fn coefficients_are_symmetric_positive() {
        for k in ProblemKind::ALL {
            let p = Problem::new(k);
            let pts: &[Point] = match k.domain() {
                Domain::LShape => &[[0.1, 0.2], [-0.4, 0.6], [-0.2, -0.9], [0.7, -0.3]],
                _ => &[[0.1, 0.2], [0.7, 0.3], [0.45, 0.9]],
            };
            for &pt in pts {
                let a = p.coefficient.eval(pt);
                assert_eq!(a[0][1], a[1][0]);
                let tr = a[0][0] + a[1][1];
                let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
                assert!(tr > 0.0 && det > 0.0, "{k} at {pt:?}");
            }
        }
    }
}

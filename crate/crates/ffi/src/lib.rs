//! C interface to the solver: opaque system and solution handles, status codes
//! and a per-thread message for the last failure.
//!
//! Every function returning [`L1dgStatus`] leaves its out-parameters untouched
//! on failure. Handles must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use l1dg::assembly::{AssembledSystem, PenaltyScaling};
use l1dg::dgspace::DgSpace;
use l1dg::experiment::{self, LevelSolution, SolverOptions};
use l1dg::fppa;
use l1dg::norms;
use l1dg::problems::{Problem, ProblemKind};
use l1dg::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum L1dgStatus {
    Ok = 0,
    InvalidParameter = 1,
    InvalidInput = 2,
    DimensionMismatch = 3,
    Unsupported = 4,
    Numerical = 5,
    Io = 6,
    NullPointer = 7,
    Panic = 8,
}

/// An assembled problem on one mesh.
pub struct L1dgSystem {
    problem: Problem,
    n: usize,
    space: DgSpace,
    system: AssembledSystem,
}

/// The result of [`l1dg_solve`].
pub struct L1dgSolution {
    level: LevelSolution,
}

/// Solver settings. Non-positive `alpha` selects the mesh-scaled default,
/// non-positive `tolerance` and zero `max_iterations` the library defaults.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct L1dgSolverOptions {
    pub alpha: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct L1dgSolveInfo {
    pub iterations: usize,
    pub converged: bool,
    pub alpha: f64,
    pub lambda: f64,
    pub objective: f64,
    pub energy: f64,
    pub residual: f64,
    pub error_l2: f64,
    pub error_h1: f64,
    pub error_h2: f64,
    pub error_q: f64,
    pub error_linf: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> L1dgStatus {
    match err {
        Error::InvalidParameter(_) => L1dgStatus::InvalidParameter,
        Error::InvalidInput(_) | Error::Csv(_) | Error::Json(_) => L1dgStatus::InvalidInput,
        Error::DimensionMismatch(_) => L1dgStatus::DimensionMismatch,
        Error::Unsupported(_) => L1dgStatus::Unsupported,
        Error::Factorization { .. } | Error::PowerIteration { .. } | Error::SingularTransform => L1dgStatus::Numerical,
        Error::Io(_) => L1dgStatus::Io,
    }
}

struct Failure(L1dgStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(L1dgStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> L1dgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => L1dgStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            L1dgStatus::Panic
        }
    }
}

/// # Safety
/// `ptr` must be null or valid for `len` reads.
unsafe fn slice<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn l1dg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty if none. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn l1dg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn l1dg_default_options() -> L1dgSolverOptions {
    L1dgSolverOptions { alpha: 0.0, tolerance: fppa::DEFAULT_TOLERANCE, max_iterations: experiment::EXPERIMENT_MAX_ITERATIONS }
}

/// Assembles the named problem (e.g. `"square-constant"`) with `n` cells per side.
///
/// # Safety
/// `problem` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn l1dg_system_new(
    problem: *const c_char,
    n: usize,
    tau: f64,
    equal_jumps: bool,
    out: *mut *mut L1dgSystem,
) -> L1dgStatus {
    guard(|| {
        if problem.is_null() {
            return Err(null("problem"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let name = CStr::from_ptr(problem)
            .to_str()
            .map_err(|_| Failure(L1dgStatus::InvalidInput, "problem name is not UTF-8".into()))?;
        let kind: ProblemKind = name.parse()?;
        let problem = Problem::new(kind);
        let scaling = if equal_jumps { PenaltyScaling::EQUAL_JUMPS } else { PenaltyScaling::STABILIZATION };
        let (space, system) = experiment::assemble_problem(&problem, n, tau, scaling)?;
        *out = Box::into_raw(Box::new(L1dgSystem { problem, n, space, system }));
        Ok(())
    })
}

/// # Safety
/// `system` must be null or a handle from [`l1dg_system_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn l1dg_system_free(system: *mut L1dgSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

/// Number of unknowns and of penalty rows.
///
/// # Safety
/// `system` must be a live handle; `unknowns` and `rows` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn l1dg_system_size(system: *const L1dgSystem, unknowns: *mut usize, rows: *mut usize) -> L1dgStatus {
    guard(|| {
        let s = system.as_ref().ok_or_else(|| null("system"))?;
        if unknowns.is_null() || rows.is_null() {
            return Err(null("output"));
        }
        *unknowns = s.system.n();
        *rows = s.system.m();
        Ok(())
    })
}

/// `x^T B x + b^T x + |L x - d|_1` at `x` of length `len`.
///
/// # Safety
/// `system` must be a live handle, `x` valid for `len` reads, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn l1dg_system_objective(system: *const L1dgSystem, x: *const f64, len: usize, out: *mut f64) -> L1dgStatus {
    guard(|| {
        let s = system.as_ref().ok_or_else(|| null("system"))?;
        let x = slice(x, len, "x")?;
        if out.is_null() {
            return Err(null("out"));
        }
        if len != s.system.n() {
            return Err(Failure(L1dgStatus::DimensionMismatch, format!("x has length {len}, expected {}", s.system.n())));
        }
        *out = s.system.objective(x);
        Ok(())
    })
}

/// Runs the solver from zero. A run that hits the iteration cap still
/// succeeds; check `converged` in [`l1dg_solution_info`].
///
/// # Safety
/// `system` must be a live handle, `options` null or valid, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn l1dg_solve(system: *const L1dgSystem, options: *const L1dgSolverOptions, out: *mut *mut L1dgSolution) -> L1dgStatus {
    guard(|| {
        let s = system.as_ref().ok_or_else(|| null("system"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let o = options.as_ref().copied().unwrap_or_else(|| l1dg_default_options());
        let mut opts = SolverOptions::default();
        if o.alpha > 0.0 {
            opts.alpha = Some(o.alpha);
        }
        if o.tolerance > 0.0 {
            opts.tolerance = o.tolerance;
        }
        if o.max_iterations > 0 {
            opts.max_iterations = o.max_iterations;
        }
        let level = experiment::solve_assembled(
            &s.problem,
            s.n,
            s.space.clone(),
            s.system.clone(),
            &opts,
            norms::DEFAULT_LINF_SAMPLES,
            None,
        )?;
        *out = Box::into_raw(Box::new(L1dgSolution { level }));
        Ok(())
    })
}

/// # Safety
/// `solution` must be null or a handle from [`l1dg_solve`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn l1dg_solution_free(solution: *mut L1dgSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// # Safety
/// `solution` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn l1dg_solution_info(solution: *const L1dgSolution, out: *mut L1dgSolveInfo) -> L1dgStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let i = &s.level.info;
        *out = L1dgSolveInfo {
            iterations: i.iterations,
            converged: i.converged,
            alpha: i.alpha,
            lambda: i.lambda,
            objective: i.objective,
            energy: i.energy,
            residual: i.residual,
            error_l2: i.errors.l2,
            error_h1: i.errors.h1,
            error_h2: i.errors.h2,
            error_q: i.errors.q,
            error_linf: i.linf,
        };
        Ok(())
    })
}

/// Copies the solution vector `(x_w, x_v)` into `buf`, which must hold exactly
/// the number of unknowns.
///
/// # Safety
/// `solution` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn l1dg_solution_copy_x(solution: *const L1dgSolution, buf: *mut f64, len: usize) -> L1dgStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let x = &s.level.x;
        if len != x.len() {
            return Err(Failure(L1dgStatus::DimensionMismatch, format!("buffer has length {len}, expected {}", x.len())));
        }
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(x);
        Ok(())
    })
}

/// `out_i = clamp(y_i - d_i / q_i, -alpha, alpha)`.
///
/// # Safety
/// `y`, `q`, `d` must be valid for `len` reads and `out` for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn l1dg_prox_conjugate_l1(
    y: *const f64,
    q: *const f64,
    d: *const f64,
    len: usize,
    alpha: f64,
    out: *mut f64,
) -> L1dgStatus {
    guard(|| {
        let (y, q, d) = (slice(y, len, "y")?, slice(q, len, "q")?, slice(d, len, "d")?);
        if out.is_null() {
            return Err(null("out"));
        }
        if !(alpha > 0.0) || q.iter().any(|v| !(*v > 0.0)) {
            return Err(Failure(L1dgStatus::InvalidParameter, "alpha and q must be positive".into()));
        }
        let p = fppa::prox_conjugate_l1(y, alpha, q, d);
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(&p);
        Ok(())
    })
}

//! Experiment runs: convergence studies and system dumps.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assembly::{self, AssembledSystem, PenaltyScaling};
use crate::dgspace::DgSpace;
use crate::error::{Error, Result};
use crate::fppa::{self, FppaConfig, FppaState, NormEstimate, ParameterStrategy};
use crate::linalg;
use crate::mesh::Domain;
use crate::norms::{self, BrokenErrors, ErrorReport, LevelResult};
use crate::problems::{Problem, ProblemKind, KINK_N, KINK_T};

/// How the diagonal of `Q` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QStrategy {
    /// Row sums of `|L|`, `lambda` from the row/column sum bound.
    RowSum,
    /// `q = 1` with the one-dimensional `lambda` rule (interval meshes only).
    Unit,
}

/// Iteration cap used by experiments; the finest meshes need more than the solver default.
pub const EXPERIMENT_MAX_ITERATIONS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Fixed `alpha`; when unset, `alpha = alpha_scale * N^2`.
    pub alpha: Option<f64>,
    /// Overrides the per-problem coefficient of the mesh-scaled `alpha`.
    pub alpha_scale: Option<f64>,
    /// Overrides the automatically selected `lambda`.
    pub lambda: Option<f64>,
    pub q_strategy: QStrategy,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub monitor_interval: usize,
    pub check_condition: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            alpha: None,
            alpha_scale: None,
            lambda: None,
            q_strategy: QStrategy::RowSum,
            tolerance: fppa::DEFAULT_TOLERANCE,
            max_iterations: EXPERIMENT_MAX_ITERATIONS,
            monitor_interval: 1000,
            check_condition: true,
        }
    }
}

impl SolverOptions {
    pub fn alpha_for(&self, kind: ProblemKind, n: usize) -> f64 {
        self.alpha.unwrap_or_else(|| {
            let c = self.alpha_scale.unwrap_or_else(|| kind.alpha_scale());
            (c * (n * n) as f64).max(1.0)
        })
    }

    pub fn config(&self, system: &AssembledSystem, dimension: usize, alpha: f64) -> Result<FppaConfig> {
        let strategy = match self.q_strategy {
            QStrategy::RowSum => ParameterStrategy::RowSum,
            QStrategy::Unit => {
                if dimension != 1 {
                    return Err(Error::Unsupported("unit q strategy is only defined on interval meshes".into()));
                }
                ParameterStrategy::OneDimensional { q: vec![1.0; system.m()] }
            }
        };
        let mut cfg = FppaConfig::auto(system, &strategy, alpha)?;
        if let Some(l) = self.lambda {
            cfg.lambda = l;
        }
        cfg.tolerance = self.tolerance;
        cfg.max_iterations = self.max_iterations;
        cfg.monitor_interval = self.monitor_interval;
        cfg.check_condition = self.check_condition;
        Ok(cfg)
    }
}

/// A convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub problem: ProblemKind,
    pub ns: Vec<usize>,
    pub tau: f64,
    pub scaling: PenaltyScaling,
    pub solver: SolverOptions,
    pub linf_samples: usize,
    /// Kink location and exponent (kink problem only).
    pub kink_t: f64,
    pub kink_n: f64,
    /// Directory for per-level iteration logs.
    pub log_dir: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            problem: ProblemKind::SquareConstant,
            ns: vec![4, 8, 16, 32, 64],
            tau: 1.0,
            scaling: PenaltyScaling::default(),
            solver: SolverOptions::default(),
            linf_samples: norms::DEFAULT_LINF_SAMPLES,
            kink_t: KINK_T,
            kink_n: KINK_N,
            log_dir: None,
        }
    }
}

impl ExperimentSpec {
    pub fn new(problem: ProblemKind, ns: Vec<usize>) -> Self {
        Self { problem, ns, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ns.is_empty() {
            return Err(Error::InvalidInput("no mesh sizes given".into()));
        }
        if let Some(w) = self.ns.windows(2).find(|w| w[1] != 2 * w[0]) {
            return Err(Error::InvalidInput(format!("mesh sizes must double, got {} then {}", w[0], w[1])));
        }
        if !(self.tau > 0.0) {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {}", self.tau)));
        }
        Ok(())
    }

    pub fn problem(&self) -> Result<Problem> {
        match self.problem {
            ProblemKind::Kink1d => Problem::kink(self.kink_t, self.kink_n),
            k => Ok(Problem::new(k)),
        }
    }
}

/// Solver metadata of one level.
#[derive(Debug, Clone, Serialize)]
pub struct LevelInfo {
    pub n: usize,
    pub h: f64,
    pub unknowns: usize,
    pub constraints: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_change: f64,
    pub residual: f64,
    /// `|(x, y)|` of the returned pair.
    pub z_norm: f64,
    pub objective: f64,
    /// `J_h` with the quadratic part summed as squares.
    pub energy: f64,
    pub condition: Option<NormEstimate>,
    pub seconds: f64,
    pub errors: BrokenErrors,
    pub linf: f64,
}

/// Everything produced by solving one mesh level.
pub struct LevelSolution {
    pub space: DgSpace,
    pub system: AssembledSystem,
    pub config: FppaConfig,
    pub x: Vec<f64>,
    pub state: FppaState,
    pub info: LevelInfo,
}

pub fn assemble_problem(problem: &Problem, n: usize, tau: f64, scaling: PenaltyScaling) -> Result<(DgSpace, AssembledSystem)> {
    let space = DgSpace::new(problem.mesh(n)?);
    let f = |p| problem.source(p);
    let g = |p| problem.boundary(p);
    let system = assembly::assemble_system(&space, &problem.coefficient, &f, &g, tau, scaling)?;
    Ok((space, system))
}

/// Builds, solves and measures one level.
pub fn solve_level(
    problem: &Problem,
    n: usize,
    tau: f64,
    scaling: PenaltyScaling,
    opts: &SolverOptions,
    linf_samples: usize,
    log: Option<&Path>,
) -> Result<LevelSolution> {
    let start = Instant::now();
    let (space, system) = assemble_problem(problem, n, tau, scaling)?;
    let mut sol = solve_assembled(problem, n, space, system, opts, linf_samples, log)?;
    sol.info.seconds = start.elapsed().as_secs_f64();
    Ok(sol)
}

/// Solves an already assembled level of `problem` and measures its errors.
/// `seconds` covers the solve only.
pub fn solve_assembled(
    problem: &Problem,
    n: usize,
    space: DgSpace,
    system: AssembledSystem,
    opts: &SolverOptions,
    linf_samples: usize,
    log: Option<&Path>,
) -> Result<LevelSolution> {
    let start = Instant::now();
    let config = opts.config(&system, space.mesh().dimension(), opts.alpha_for(problem.kind, n))?;
    let (x, state) = match log {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            fppa::solve_with_log(&system, &config, None, None, Some(&mut w))?
        }
        None => fppa::solve(&system, &config, None, None)?,
    };
    let seconds = start.elapsed().as_secs_f64();
    let errors = norms::broken_errors(&space, &x, problem.exact.as_ref())?;
    let linf = norms::linf_error(&space, &x, problem.exact.as_ref(), linf_samples)?;
    let objective = system.objective(&x);
    let lx = linalg::mul(&system.l_mat, &x);
    let penalty: f64 = lx.iter().zip(&system.d_vec).map(|(a, b)| (a - b).abs()).sum();
    let energy = assembly::quadratic_residual(&space, &problem.coefficient, &|p| problem.source(p), &x)? + penalty;
    let info = LevelInfo {
        n,
        h: system.h,
        unknowns: system.n(),
        constraints: system.m(),
        alpha: config.alpha,
        lambda: config.lambda,
        iterations: state.iterations,
        converged: state.converged,
        final_change: state.final_change,
        residual: state.residual,
        z_norm: state.z_norm(),
        objective,
        energy,
        condition: state.condition,
        seconds,
        errors,
        linf,
    };
    Ok(LevelSolution { space, system, config, x, state, info })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRun {
    pub spec: ExperimentSpec,
    pub report: ErrorReport,
    pub levels: Vec<LevelInfo>,
}

impl ConvergenceRun {
    pub fn all_converged(&self) -> bool {
        self.report.all_converged()
    }

    /// Writes `<problem>.csv` and `<problem>.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let name = self.spec.problem.name();
        self.report.write_csv(BufWriter::new(File::create(dir.join(format!("{name}.csv")))?))?;
        fs::write(dir.join(format!("{name}.json")), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Solves the problem on every mesh size and tabulates errors and orders.
pub fn run_convergence(spec: &ExperimentSpec) -> Result<ConvergenceRun> {
    run_convergence_with(spec, |_| {})
}

/// As [`run_convergence`], reporting each finished level.
pub fn run_convergence_with(spec: &ExperimentSpec, mut on_level: impl FnMut(&LevelInfo)) -> Result<ConvergenceRun> {
    spec.validate()?;
    let problem = spec.problem()?;
    let mut levels = Vec::with_capacity(spec.ns.len());
    for &n in &spec.ns {
        let log = match &spec.log_dir {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                Some(dir.join(format!("{}-{n}.log.csv", spec.problem.name())))
            }
            None => None,
        };
        let sol = solve_level(&problem, n, spec.tau, spec.scaling, &spec.solver, spec.linf_samples, log.as_deref())?;
        on_level(&sol.info);
        levels.push(sol.info);
    }
    let results: Vec<LevelResult> = levels
        .iter()
        .map(|l| LevelResult { n: l.n, errors: l.errors, linf: l.linf, iterations: l.iterations, converged: l.converged })
        .collect();
    let report = ErrorReport::from_levels(&results)?;
    Ok(ConvergenceRun { spec: spec.clone(), report, levels })
}

/// Writes the mesh, `B`, `L` (coordinate format) and `b`, `d` for external checks.
pub fn dump_problem(problem: &Problem, n: usize, tau: f64, scaling: PenaltyScaling, dir: &Path) -> Result<AssembledSystem> {
    let (space, system) = assemble_problem(problem, n, tau, scaling)?;
    fs::create_dir_all(dir)?;
    space.mesh().write_text(BufWriter::new(File::create(dir.join("mesh.txt"))?))?;
    linalg::write_coordinates(&system.b_mat, BufWriter::new(File::create(dir.join("B.txt"))?))?;
    linalg::write_coordinates(&system.l_mat, BufWriter::new(File::create(dir.join("L.txt"))?))?;
    linalg::write_vector(&system.b_vec, BufWriter::new(File::create(dir.join("b.txt"))?))?;
    linalg::write_vector(&system.d_vec, BufWriter::new(File::create(dir.join("d.txt"))?))?;
    let meta = serde_json::json!({
        "problem": problem.kind.name(),
        "n": n,
        "h": system.h,
        "tau": tau,
        "scaling": scaling,
        "n_w": system.n_w,
        "n_v": system.n_v,
        "blocks": system.blocks,
        "f_norm_sq": system.f_norm_sq,
        "dimension": match problem.domain() { Domain::UnitInterval => 1, _ => 2 },
    });
    fs::write(dir.join("system.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(system)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_doubling_sizes_rejected() {
        let spec = ExperimentSpec::new(ProblemKind::SquareConstant, vec![4, 6]);
        assert!(matches!(run_convergence(&spec), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn unit_strategy_needs_interval() {
        let mut spec = ExperimentSpec::new(ProblemKind::SquareConstant, vec![2]);
        spec.solver.q_strategy = QStrategy::Unit;
        assert!(matches!(run_convergence(&spec), Err(Error::Unsupported(_))));
    }

    #[test]
    fn spec_json_defaults() {
        let s: ExperimentSpec = serde_json::from_str(r#"{"problem":"lshape-constant","ns":[4,8]}"#).unwrap();
        assert_eq!(s.problem, ProblemKind::LshapeConstant);
        assert_eq!(s.tau, 1.0);
        assert_eq!(s.solver.alpha, None);
        assert_eq!(s.solver.max_iterations, EXPERIMENT_MAX_ITERATIONS);
    }

    #[test]
    fn alpha_rule() {
        let mut o = SolverOptions::default();
        assert_eq!(o.alpha_for(ProblemKind::SquareConstant, 10), 80.0);
        assert_eq!(o.alpha_for(ProblemKind::Kink1d, 4), 1.0);
        o.alpha_scale = Some(2.0);
        assert_eq!(o.alpha_for(ProblemKind::SquareConstant, 4), 32.0);
        o.alpha = Some(3.0);
        assert_eq!(o.alpha_for(ProblemKind::SquareConstant, 4), 3.0);
    }
}

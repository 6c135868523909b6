mod common;

use common::{manufactured, MANUFACTURED_TOLERANCE};
use l1dg::assembly::PenaltyScaling;
use l1dg::experiment::{self, SolverOptions};
use l1dg::fppa;
use l1dg::problems::{Problem, ProblemKind};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

#[test]
fn global_quadratics_are_reproduced() {
    let opts = SolverOptions { tolerance: MANUFACTURED_TOLERANCE, ..SolverOptions::default() };
    for (problem, ns) in manufactured() {
        for n in ns {
            let sol = experiment::solve_level(&problem, n, 1.0, PenaltyScaling::default(), &opts, 5, None).unwrap();
            let info = &sol.info;
            assert!(info.converged, "{} N={n}", problem.kind);
            assert!(info.energy <= 1e-12, "{} N={n}: energy {}", problem.kind, info.energy);
            let e = info.errors;
            for (name, v) in [("L2", e.l2), ("H1", e.h1), ("H2", e.h2), ("q", e.q), ("Linf", info.linf)] {
                assert!(v <= 1e-6, "{} N={n}: {name} error {v}", problem.kind);
            }
        }
    }
}

#[test]
fn warm_starts_reach_the_same_objective() {
    let problem = Problem::new(ProblemKind::SquareContinuous);
    let (_, sys) = experiment::assemble_problem(&problem, 4, 1.0, PenaltyScaling::default()).unwrap();
    let opts = SolverOptions::default();
    let cfg = opts.config(&sys, 2, opts.alpha_for(problem.kind, 4)).unwrap();
    let (x0, s0) = fppa::solve(&sys, &cfg, None, None).unwrap();
    let mut rng = StdRng::seed_from_u64(5);
    let xs: Vec<f64> = (0..sys.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let ys: Vec<f64> = (0..sys.m()).map(|_| rng.gen_range(-cfg.alpha..cfg.alpha)).collect();
    let (x1, s1) = fppa::solve(&sys, &cfg, Some(&xs), Some(&ys)).unwrap();
    assert!(s0.converged && s1.converged);
    let (o0, o1) = (sys.objective(&x0), sys.objective(&x1));
    assert!((o0 - o1).abs() <= 1e-8 * o0.abs().max(1.0), "{o0} vs {o1}");
    for s in [&s0, &s1] {
        assert!(s.residual <= 10.0 * cfg.tolerance * (1.0 + s.z_norm()), "residual {}", s.residual);
        assert!(s.condition_satisfied());
    }
}

#[test]
fn solver_is_deterministic() {
    let problem = Problem::new(ProblemKind::LshapeDiscontinuous);
    let opts = SolverOptions { max_iterations: 500, ..SolverOptions::default() };
    let a = experiment::solve_level(&problem, 2, 1.0, PenaltyScaling::default(), &opts, 5, None).unwrap();
    let b = experiment::solve_level(&problem, 2, 1.0, PenaltyScaling::default(), &opts, 5, None).unwrap();
    assert_eq!(a.x, b.x);
    assert_eq!(a.state.y, b.state.y);
}

#[test]
fn objective_history_decreases_overall() {
    let problem = Problem::new(ProblemKind::SquareConstant);
    let opts = SolverOptions { monitor_interval: 100, ..SolverOptions::default() };
    let sol = experiment::solve_level(&problem, 4, 1.0, PenaltyScaling::default(), &opts, 5, None).unwrap();
    let hist = &sol.state.objective_history;
    assert!(hist.len() > 2);
    let zero = sol.system.objective(&vec![0.0; sol.system.n()]);
    let last = hist.last().unwrap().1;
    assert!(last < zero);
    assert!((last - sol.info.objective).abs() <= 1e-12 * last.abs().max(1.0));
}

#[test]
fn iteration_log_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.csv");
    let problem = Problem::new(ProblemKind::Kink1d);
    let opts = SolverOptions { monitor_interval: 50, ..SolverOptions::default() };
    let sol = experiment::solve_level(&problem, 8, 1.0, PenaltyScaling::default(), &opts, 5, Some(&path)).unwrap();
    let mut reader = csv::Reader::from_path(&path).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["iteration", "objective", "change", "residual"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    let last: usize = rows.last().unwrap()[0].parse().unwrap();
    assert_eq!(last, sol.info.iterations);
}

#[test]
fn rejects_bad_starts() {
    let problem = Problem::new(ProblemKind::Kink1d);
    let (_, sys) = experiment::assemble_problem(&problem, 4, 1.0, PenaltyScaling::default()).unwrap();
    let opts = SolverOptions::default();
    let cfg = opts.config(&sys, 1, 1.0).unwrap();
    assert!(fppa::solve(&sys, &cfg, Some(&[0.0; 3]), None).is_err());
    assert!(fppa::solve(&sys, &cfg, None, Some(&[0.0; 3])).is_err());
    let mut bad = cfg.clone();
    bad.alpha = -1.0;
    assert!(fppa::solve(&sys, &bad, None, None).is_err());
}

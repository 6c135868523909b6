use l1dg::assembly::{self, assemble_system, AssembledSystem, CoefficientField, PenaltyScaling};
use l1dg::dgspace::{DgSpace, FaceTrace};
use l1dg::experiment;
use l1dg::fppa::{operator_norm_estimate, select_parameters, ParameterStrategy};
use l1dg::linalg;
use l1dg::mesh::{build_interval_mesh, build_lshape_mesh, build_square_mesh, Mesh, Point};
use l1dg::problems::{Problem, ProblemKind};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn source(p: Point) -> f64 {
    1.0 + p[0] - 2.0 * p[1] + p[0] * p[1]
}

fn boundary(p: Point) -> f64 {
    (2.0 * p[0]).sin() + p[1] * p[1]
}

fn meshes() -> Vec<Mesh> {
    vec![build_interval_mesh(4).unwrap(), build_square_mesh(2).unwrap(), build_lshape_mesh(2).unwrap()]
}

fn coefficient(mesh: &Mesh) -> CoefficientField {
    if mesh.dimension() == 1 {
        CoefficientField::constant([[1.5, 0.0], [0.0, 0.0]])
    } else {
        CoefficientField::constant([[2.0, 1.0], [1.0, 3.0]])
    }
}

fn system(space: &DgSpace, scaling: PenaltyScaling) -> AssembledSystem {
    assemble_system(space, &coefficient(space.mesh()), &source, &boundary, 0.7, scaling).unwrap()
}

fn random_vector(rng: &mut StdRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// |A:grad v - f|^2 + h^-2 |v - grad w|^2 by direct quadrature of the fields.
fn quadratic_energy(space: &DgSpace, a: &CoefficientField, x: &[f64]) -> f64 {
    let dim = space.mesh().dimension();
    let rule = space.quadrature(if dim == 1 { 10 } else { 8 }).unwrap();
    let h = space.mesh().h();
    let mut total = 0.0;
    for e in 0..space.mesh().num_elements() {
        let map = space.map(e);
        for (xi, w) in rule.points.iter().zip(&rule.weights) {
            let p = map.to_physical(*xi);
            let fv = space.evaluate_field(x, e, *xi).unwrap();
            let am = a.eval(p);
            let mut contraction = 0.0;
            for i in 0..dim {
                for j in 0..dim {
                    contraction += am[i][j] * fv.jac_v[i][j];
                }
            }
            let mut value = (contraction - source(p)).powi(2);
            for c in 0..dim {
                value += (fv.v[c] - fv.grad_w[c]).powi(2) / (h * h);
            }
            total += w * map.det.abs() * value;
        }
    }
    total
}

/// sum of scaled jump magnitudes over the faces.
fn penalty_from_traces(space: &DgSpace, x: &[f64], tau: f64, scaling: PenaltyScaling) -> f64 {
    let mesh = space.mesh();
    let h = mesh.h();
    let s = |p: i32| tau * h.powi(-p);
    let mut total = 0.0;
    for face in mesh.faces() {
        match space.face_trace_values(x, face).unwrap() {
            FaceTrace::Interior { vn_jumps, w_jumps } => {
                total += s(scaling.normal_jump) * vn_jumps.iter().map(|v| v.abs()).sum::<f64>();
                total += s(scaling.value_jump) * w_jumps.iter().map(|v| v.abs()).sum::<f64>();
            }
            FaceTrace::Boundary { w_values } => {
                let nodes = mesh.face_nodes(face);
                total += s(scaling.boundary) * w_values.iter().zip(&nodes).map(|(w, p)| (w - boundary(*p)).abs()).sum::<f64>();
            }
        }
    }
    total
}

#[test]
fn quadratic_part_matches_field_quadrature() {
    let mut rng = StdRng::seed_from_u64(3);
    for mesh in meshes() {
        let space = DgSpace::new(mesh);
        let sys = system(&space, PenaltyScaling::default());
        for _ in 0..5 {
            let x = random_vector(&mut rng, sys.n());
            let bx = linalg::mul(&sys.b_mat, &x);
            let algebraic = linalg::dot(&x, &bx) + linalg::dot(&sys.b_vec, &x) + sys.f_norm_sq;
            let direct = quadratic_energy(&space, &coefficient(space.mesh()), &x);
            assert!((algebraic - direct).abs() <= 1e-10 * direct.max(1.0), "{algebraic} vs {direct}");
            let squares = assembly::quadratic_residual(&space, &coefficient(space.mesh()), &source, &x).unwrap();
            assert!((squares - direct).abs() <= 1e-10 * direct.max(1.0), "{squares} vs {direct}");
        }
    }
}

#[test]
fn penalty_matches_face_traces() {
    let mut rng = StdRng::seed_from_u64(4);
    for mesh in meshes() {
        let space = DgSpace::new(mesh);
        for scaling in [PenaltyScaling::STABILIZATION, PenaltyScaling::EQUAL_JUMPS] {
            let sys = system(&space, scaling);
            for _ in 0..5 {
                let x = random_vector(&mut rng, sys.n());
                let lx = linalg::mul(&sys.l_mat, &x);
                let algebraic: f64 = lx.iter().zip(&sys.d_vec).map(|(a, b)| (a - b).abs()).sum();
                let direct = penalty_from_traces(&space, &x, sys.tau, scaling);
                assert!((algebraic - direct).abs() <= 1e-11 * direct, "{algebraic} vs {direct}");
            }
        }
    }
}

#[test]
fn b_is_symmetric() {
    for kind in [ProblemKind::SquareDiscontinuous, ProblemKind::LshapeContinuous, ProblemKind::Kink1d] {
        let problem = Problem::new(kind);
        let (_, sys) = experiment::assemble_problem(&problem, 4, 1.0, PenaltyScaling::default()).unwrap();
        for (v, (i, j)) in sys.b_mat.iter() {
            let t = sys.b_mat.get(j, i).copied().unwrap_or(0.0);
            assert!((v - t).abs() <= 1e-12 * v.abs().max(1.0), "B[{i},{j}] = {v}, B[{j},{i}] = {t}");
        }
    }
}

#[test]
fn global_quadratic_has_zero_energy() {
    let problem = Problem::new(ProblemKind::SquareQuadratic);
    for n in [2, 4] {
        let (space, sys) = experiment::assemble_problem(&problem, n, 1.0, PenaltyScaling::default()).unwrap();
        let u = problem.exact.clone();
        let x = space.interpolate(|p| u.value(p), |p| u.gradient(p));
        assert!(sys.energy(&x).abs() < 1e-10, "energy {}", sys.energy(&x));
    }
}

#[test]
fn one_dimensional_llt_identity() {
    // rows: n-1 normal jumps (+-tau/h), n-1 value jumps (+-tau/h), 2 boundary rows (tau/h^2)
    for (n, tau) in [(4, 1.0), (8, 1.0), (16, 0.3)] {
        let space = DgSpace::new(build_interval_mesh(n).unwrap());
        let sys = assemble_system(&space, &CoefficientField::identity(), &|_| 0.0, &|_| 0.0, tau, PenaltyScaling::EQUAL_JUMPS).unwrap();
        let h = 1.0 / n as f64;
        let m = sys.m();
        assert_eq!(m, 2 * (n - 1) + 2);
        let dense: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let mut row = vec![0.0; sys.n()];
                for (j, v) in sys.l_mat.outer_view(i).unwrap().iter() {
                    row[j] = *v;
                }
                row
            })
            .collect();
        let scale = tau * tau / h.powi(4);
        for i in 0..m {
            for j in 0..m {
                let llt: f64 = dense[i].iter().zip(&dense[j]).map(|(a, b)| a * b).sum();
                let want = if i != j {
                    0.0
                } else if i < m - 2 {
                    scale * 2.0 * h * h
                } else {
                    scale
                };
                assert!((llt - want).abs() < 1e-12 * scale, "(LL^T)[{i},{j}] = {llt}, want {want}");
            }
        }
    }
}

#[test]
fn one_dimensional_equality_parameters_give_unit_norm() {
    let space = DgSpace::new(build_interval_mesh(8).unwrap());
    let sys = assemble_system(&space, &CoefficientField::identity(), &|_| 0.0, &|_| 0.0, 1.0, PenaltyScaling::EQUAL_JUMPS).unwrap();
    let q = vec![1.0; sys.m()];
    let (lambda, q) = select_parameters(&sys.l_mat, sys.tau, sys.h, &ParameterStrategy::OneDimensional { q }).unwrap();
    assert!((lambda - 4096.0).abs() < 1e-9);
    let est = operator_norm_estimate(&sys.l_mat, lambda, &q);
    assert!(est.converged);
    assert!((est.value - 1.0).abs() < 1e-6, "norm {}", est.value);
}

#[test]
fn row_sum_parameters_satisfy_condition() {
    for kind in [ProblemKind::SquareConstant, ProblemKind::LshapeConstant, ProblemKind::Kink1d] {
        let (_, sys) = experiment::assemble_problem(&Problem::new(kind), 4, 1.0, PenaltyScaling::default()).unwrap();
        let (lambda, q) = select_parameters(&sys.l_mat, sys.tau, sys.h, &ParameterStrategy::RowSum).unwrap();
        let est = operator_norm_estimate(&sys.l_mat, lambda, &q);
        assert!(est.value <= 1.0 + 1e-9, "{kind}: {}", est.value);
    }
}

#[test]
fn dump_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let problem = Problem::new(ProblemKind::Kink1d);
    let sys = experiment::dump_problem(&problem, 8, 1.0, PenaltyScaling::default(), dir.path()).unwrap();
    let b = linalg::read_coordinates(&std::fs::read_to_string(dir.path().join("B.txt")).unwrap()).unwrap();
    let l = linalg::read_coordinates(&std::fs::read_to_string(dir.path().join("L.txt")).unwrap()).unwrap();
    assert_eq!(b.shape(), sys.b_mat.shape());
    assert_eq!(l.shape(), sys.l_mat.shape());
    for (v, (i, j)) in l.iter() {
        assert_eq!(*v, *sys.l_mat.get(i, j).unwrap());
    }
    // interior rows carry +-s, boundary rows a single entry
    let m = l.rows();
    for i in 0..m {
        let row: Vec<f64> = l.outer_view(i).unwrap().iter().map(|(_, v)| *v).collect();
        if i < m - 2 {
            assert_eq!(row.len(), 2);
            assert_eq!(row[0], -row[1]);
        } else {
            assert_eq!(row.len(), 1);
        }
    }
    for (v, (i, j)) in b.iter() {
        assert!((v - b.get(j, i).unwrap()).abs() <= 1e-12 * v.abs());
    }
    let zero = vec![0.0; sys.n()];
    assert!((sys.objective(&zero) - linalg::norm1(&sys.d_vec)).abs() < 1e-12);
    let mesh_text = std::fs::read_to_string(dir.path().join("mesh.txt")).unwrap();
    assert!(!mesh_text.is_empty());
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("system.json")).unwrap()).unwrap();
    assert_eq!(meta["n_w"], 24);
    assert_eq!(meta["n_v"], 16);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn energy_is_nonnegative(seed in 0u64..100_000, kind_index in 0usize..3) {
        let kind = [ProblemKind::SquareDiscontinuous, ProblemKind::LshapeConstant, ProblemKind::Kink1d][kind_index];
        let (_, sys) = experiment::assemble_problem(&Problem::new(kind), 2, 1.0, PenaltyScaling::default()).unwrap();
        let mut rng = StdRng::seed_from_u64(seed);
        let x = random_vector(&mut rng, sys.n());
        let bx = linalg::mul(&sys.b_mat, &x);
        prop_assert!(linalg::dot(&x, &bx) >= -1e-10 * linalg::dot(&x, &x));
        prop_assert!(sys.energy(&x) >= -1e-10);
    }

    #[test]
    fn objective_is_convex_along_segments(seed in 0u64..100_000, t in 0.0f64..1.0) {
        let (_, sys) = experiment::assemble_problem(&Problem::new(ProblemKind::SquareContinuous), 2, 1.0, PenaltyScaling::default()).unwrap();
        let mut rng = StdRng::seed_from_u64(seed);
        let a = random_vector(&mut rng, sys.n());
        let b = random_vector(&mut rng, sys.n());
        let mid: Vec<f64> = a.iter().zip(&b).map(|(u, v)| (1.0 - t) * u + t * v).collect();
        let bound = (1.0 - t) * sys.objective(&a) + t * sys.objective(&b);
        prop_assert!(sys.objective(&mid) <= bound + 1e-9 * bound.abs().max(1.0));
    }
}


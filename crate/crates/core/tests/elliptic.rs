use nlch_core::elliptic::{
    norm_comparison_check, CoupledField, CoupledSolver, EllipticParams, LinearSolverKind, MassKind, NeumannSolver, Side,
};
use nlch_core::energy::Coupling;
use nlch_core::mesh::{assemble_fem, build_disk_mesh, FemMatrices, TriMesh};
use nlch_core::sparse::CsrMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn setup(level: u32) -> (TriMesh, FemMatrices) {
    let mesh = build_disk_mesh(level).unwrap();
    let fem = assemble_fem(&mesh).unwrap();
    (mesh, fem)
}

fn random(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn sum_w(w: &[f64], v: &[f64]) -> f64 {
    w.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Random right-hand side satisfying the mean condition of `coupling`.
fn admissible_rhs(rng: &mut ChaCha8Rng, fem: &FemMatrices, beta: f64, coupling: Coupling) -> CoupledField {
    let (wb, ws) = (&fem.lumped_bulk, &fem.lumped_surf);
    let mut r = CoupledField::new(random(rng, wb.len()), random(rng, ws.len()));
    let (lb, ls) = (wb.iter().sum::<f64>(), ws.iter().sum::<f64>());
    match coupling {
        Coupling::Decoupled => {
            let (mb, ms) = (sum_w(wb, &r.bulk) / lb, sum_w(ws, &r.surf) / ls);
            r.bulk.iter_mut().for_each(|v| *v -= mb);
            r.surf.iter_mut().for_each(|v| *v -= ms);
        }
        _ => {
            let excess = beta * sum_w(wb, &r.bulk) + sum_w(ws, &r.surf);
            r.surf.iter_mut().for_each(|v| *v -= excess / ls);
        }
    }
    r
}

fn couplings() -> [Coupling; 4] {
    [Coupling::Robin { l: 1.0 }, Coupling::Robin { l: 0.01 }, Coupling::Dirichlet, Coupling::Decoupled]
}

fn test_pair(rng: &mut ChaCha8Rng, solver: &CoupledSolver, fem: &FemMatrices) -> CoupledField {
    match solver.params().coupling {
        Coupling::Dirichlet => solver.lift(&random(rng, fem.lumped_bulk.len())),
        _ => CoupledField::new(random(rng, fem.lumped_bulk.len()), random(rng, fem.lumped_surf.len())),
    }
}

#[test]
fn weak_form_holds_for_every_coupling_and_mass() {
    let (_, fem) = setup(3);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for coupling in couplings() {
        for mass in [MassKind::Lumped, MassKind::Consistent] {
            let mut params = EllipticParams::new(0.8, coupling);
            params.mass = mass;
            params.m_surf = 0.5;
            let solver = CoupledSolver::new(&fem, params).unwrap();
            let r = admissible_rhs(&mut rng, &fem, 0.8, coupling);
            let s = solver.solve(&r).unwrap();
            for m in solver.means(&s) {
                assert!(m.abs() < 1e-12, "{coupling:?}: solution mean {m:e}");
            }
            for _ in 0..30 {
                let z = test_pair(&mut rng, &solver, &fem);
                let (abs, _) = solver.weak_residual(&r, &s, &z);
                assert!(abs < 1e-10, "{coupling:?} {mass:?}: {abs:e}");
            }
        }
    }
}

#[test]
fn dirichlet_solution_satisfies_the_trace_relation() {
    let (_, fem) = setup(3);
    let beta = 1.7;
    let solver = CoupledSolver::new(&fem, EllipticParams::new(beta, Coupling::Dirichlet)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let s = solver.solve(&admissible_rhs(&mut rng, &fem, beta, Coupling::Dirichlet)).unwrap();
    let traced = fem.trace.apply(&s.bulk);
    for (t, v) in traced.iter().zip(&s.surf) {
        assert!((t - beta * v).abs() < 1e-14);
    }
}

#[test]
fn zero_data_and_mean_violations() {
    let (_, fem) = setup(2);
    for coupling in couplings() {
        let solver = CoupledSolver::new(&fem, EllipticParams::new(1.0, coupling)).unwrap();
        let zero = CoupledField::zeros(fem.lumped_bulk.len(), fem.lumped_surf.len());
        assert_eq!(solver.solve(&zero).unwrap().max_abs(), 0.0);
        let ones = CoupledField::new(vec![1.0; fem.lumped_bulk.len()], vec![1.0; fem.lumped_surf.len()]);
        assert!(solver.solve(&ones).is_err(), "{coupling:?}");
    }
}

#[test]
fn neumann_bulk_matches_a_dense_oracle() {
    let (_, fem) = setup(2);
    let n = fem.lumped_bulk.len();
    let m = 0.7;
    let solver = NeumannSolver::new(&fem, Side::Bulk, m, MassKind::Consistent, LinearSolverKind::Direct).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut r = random(&mut rng, n);
    let mean = sum_w(&fem.lumped_bulk, &r) / fem.lumped_bulk.iter().sum::<f64>();
    r.iter_mut().for_each(|v| *v -= mean);
    let u = solver.solve(&r).unwrap();

    // bordered system [mA w; wᵀ 0][u; λ] = [−Mr; 0] by Gaussian elimination
    let dense = |a: &CsrMatrix| -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            let (cols, vals) = a.row(i);
            for (c, v) in cols.iter().zip(vals) {
                row[*c] += v;
            }
        }
        d
    };
    let (a, mm) = (dense(&fem.stiffness_bulk), dense(&fem.mass_bulk));
    let mut sys = vec![vec![0.0; n + 2]; n + 1];
    for i in 0..n {
        for j in 0..n {
            sys[i][j] = m * a[i][j];
            sys[i][n + 1] -= mm[i][j] * r[j];
        }
        sys[i][n] = fem.lumped_bulk[i];
        sys[n][i] = fem.lumped_bulk[i];
    }
    for c in 0..=n {
        let p = (c..=n).max_by(|&x, &y| sys[x][c].abs().total_cmp(&sys[y][c].abs())).unwrap();
        sys.swap(c, p);
        for i in 0..=n {
            if i != c {
                let f = sys[i][c] / sys[c][c];
                for j in c..n + 2 {
                    sys[i][j] -= f * sys[c][j];
                }
            }
        }
    }
    for i in 0..n {
        let oracle = sys[i][n + 1] / sys[i][i];
        assert!((u[i] - oracle).abs() < 1e-11, "node {i}: {} vs {oracle}", u[i]);
    }
    assert!(solver.residual(&r, &u) < 1e-12);
}

#[test]
fn surface_sine_is_an_eigenfunction() {
    let (mesh, fem) = setup(5);
    let solver = NeumannSolver::new(&fem, Side::Surface, 1.0, MassKind::Consistent, LinearSolverKind::Direct).unwrap();
    let r: Vec<f64> = mesh.boundary_points().iter().map(|p| p[1].atan2(p[0]).sin()).collect();
    let u = solver.solve(&r).unwrap();
    let err = u.iter().zip(&r).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-3, "{err:e}");
}

#[test]
fn conjugate_gradient_agrees_with_direct() {
    let (_, fem) = setup(3);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for coupling in [Coupling::Robin { l: 0.5 }, Coupling::Decoupled] {
        let direct = CoupledSolver::new(&fem, EllipticParams::new(1.0, coupling)).unwrap();
        let mut params = EllipticParams::new(1.0, coupling);
        params.solver = LinearSolverKind::ConjugateGradient { tol: 1e-13, max_iter: 5000 };
        let cg = CoupledSolver::new(&fem, params).unwrap();
        let r = admissible_rhs(&mut rng, &fem, 1.0, coupling);
        let d = cg.solve(&r).unwrap().sub(&direct.solve(&r).unwrap()).max_abs();
        assert!(d < 1e-9, "{coupling:?}: {d:e}");
    }
}

#[test]
fn robin_dual_norm_is_controlled_by_the_h1_dual_norm() {
    let (_, fem) = setup(3);
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut samples: Vec<CoupledField> = (0..8).map(|_| admissible_rhs(&mut rng, &fem, 1.0, Coupling::Robin { l: 1.0 })).collect();
    samples.push(CoupledField::zeros(fem.lumped_bulk.len(), fem.lumped_surf.len()));
    let report = norm_comparison_check(&fem, 1.0, &[0.01, 1.0, 100.0, 0.1], &samples, MassKind::Lumped).unwrap();
    assert!(report.monotone, "{report:?}");
    assert!(report.rows.iter().all(|r| r.samples == 8));
    assert_eq!(report.rows.first().unwrap().l, 100.0);
    assert!(report.rows.iter().all(|r| r.best_ratio > 0.0 && r.worst_ratio.is_finite()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn solution_operator_is_linear_self_adjoint_and_negative(seed in any::<u64>(), which in 0usize..4, c in -3.0f64..3.0) {
        let (_, fem) = setup(2);
        let coupling = couplings()[which];
        let beta = 1.3;
        let solver = CoupledSolver::new(&fem, EllipticParams::new(beta, coupling)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r1 = admissible_rhs(&mut rng, &fem, beta, coupling);
        let r2 = admissible_rhs(&mut rng, &fem, beta, coupling);
        let (s1, s2) = (solver.solve(&r1).unwrap(), solver.solve(&r2).unwrap());

        let combo = solver.solve(&r1.axpy(c, &r2)).unwrap();
        prop_assert!(combo.sub(&s1.axpy(c, &s2)).max_abs() < 1e-10 * (1.0 + c.abs()));

        let a = solver.mass_pairing(&r1, &s2);
        let b = solver.mass_pairing(&r2, &s1);
        prop_assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()));

        let n = solver.norm(&r1).unwrap();
        prop_assert!(n > 0.0);
        prop_assert!((n * n + solver.mass_pairing(&r1, &s1)).abs() < 1e-10 * (1.0 + n * n));
        let n2 = solver.norm(&r1.scaled(2.0)).unwrap();
        prop_assert!((n2 - 2.0 * n).abs() < 1e-12 * (1.0 + n));
    }
}

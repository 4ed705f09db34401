use std::collections::HashMap;
use std::f64::consts::PI;

use nlch_core::mesh::{assemble_fem, build_disk_mesh};
use proptest::prelude::*;

#[test]
fn triangles_are_positive_and_boundary_edges_are_single() {
    for level in 0..=4 {
        let mesh = build_disk_mesh(level).unwrap();
        assert!((0..mesh.triangles().len()).all(|t| mesh.triangle_area(t) > 0.0));
        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        for t in mesh.triangles() {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let lp = mesh.boundary_loop();
        let mut boundary: Vec<(usize, usize)> = (0..lp.len())
            .map(|k| {
                let (a, b) = (lp[k], lp[(k + 1) % lp.len()]);
                (a.min(b), a.max(b))
            })
            .collect();
        for e in &boundary {
            assert_eq!(edges[e], 1, "boundary edge {e:?}");
        }
        let mut single: Vec<(usize, usize)> = edges.iter().filter(|(_, &c)| c == 1).map(|(e, _)| *e).collect();
        single.sort();
        boundary.sort();
        assert_eq!(single, boundary, "level {level}");
        assert!(edges.values().all(|&c| c <= 2));
    }
}

#[test]
fn area_converges_to_pi_at_second_order() {
    let errs: Vec<f64> = (0..=6)
        .map(|level| {
            let mesh = build_disk_mesh(level).unwrap();
            let err = PI - mesh.area();
            assert!(err > 0.0 && err < 10.0 / 4f64.powi(level as i32), "level {level}: {err}");
            assert!(mesh.boundary_length() < 2.0 * PI);
            err
        })
        .collect();
    for w in errs[2..].windows(2) {
        assert!(w[0] / w[1] >= 3.5, "ratio {}", w[0] / w[1]);
    }
}

#[test]
fn matrix_identities() {
    let mesh = build_disk_mesh(3).unwrap();
    let fem = assemble_fem(&mesh).unwrap();
    for m in [&fem.mass_bulk, &fem.stiffness_bulk, &fem.mass_surf, &fem.stiffness_surf] {
        assert!(m.asymmetry() < 1e-15);
    }
    let ones_b = vec![1.0; mesh.n_bulk()];
    let ones_s = vec![1.0; mesh.n_surface()];
    assert!(fem.stiffness_bulk.mul_vec(&ones_b).iter().all(|v| v.abs() < 1e-12));
    assert!(fem.stiffness_surf.mul_vec(&ones_s).iter().all(|v| v.abs() < 1e-12));
    let c = 1.7;
    let cb: Vec<f64> = ones_b.iter().map(|v| c * v).collect();
    assert!((fem.mass_bulk.bilinear(&cb, &cb) - c * c * mesh.area()).abs() < 1e-12);
    assert!(fem.stiffness_bulk.bilinear(&cb, &cb).abs() < 1e-12);

    // row sums of M are the per-node sums of element-area thirds
    let mut thirds = vec![0.0; mesh.n_bulk()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        for &v in tri {
            thirds[v] += mesh.triangle_area(t) / 3.0;
        }
    }
    for (r, t) in fem.mass_bulk.row_sums().iter().zip(&thirds) {
        assert!((r - t).abs() < 1e-15);
    }
    assert!((fem.lumped_bulk.iter().sum::<f64>() - mesh.area()).abs() < 1e-13);
    assert!((fem.lumped_surf.iter().sum::<f64>() - mesh.boundary_length()).abs() < 1e-13);
}

#[test]
fn linear_field_energy_equals_area() {
    for level in [1, 3, 4] {
        let mesh = build_disk_mesh(level).unwrap();
        let fem = assemble_fem(&mesh).unwrap();
        let x: Vec<f64> = mesh.vertices().iter().map(|v| v[0]).collect();
        let y: Vec<f64> = mesh.vertices().iter().map(|v| v[1] - 0.3 * v[0]).collect();
        assert!((fem.stiffness_bulk.bilinear(&x, &x) - mesh.area()).abs() < 1e-12);
        assert!((fem.stiffness_bulk.bilinear(&y, &y) - 1.09 * mesh.area()).abs() < 1e-12);
    }
}

#[test]
fn surface_energy_of_sine_tends_to_pi() {
    let mut prev = f64::INFINITY;
    for level in 2..=6 {
        let mesh = build_disk_mesh(level).unwrap();
        let fem = assemble_fem(&mesh).unwrap();
        let s: Vec<f64> = mesh.boundary_points().iter().map(|p| p[1].atan2(p[0]).sin()).collect();
        let err = (fem.stiffness_surf.bilinear(&s, &s) - PI).abs();
        assert!(err < prev, "level {level}");
        prev = err;
    }
    assert!(prev < 1e-3);
}

#[test]
fn trace_picks_boundary_values() {
    let mesh = build_disk_mesh(2).unwrap();
    let fem = assemble_fem(&mesh).unwrap();
    let u: Vec<f64> = (0..mesh.n_bulk()).map(|i| i as f64).collect();
    let t = fem.trace.apply(&u);
    assert_eq!(t, mesh.trace(&u));
    assert_eq!(t, mesh.boundary_loop().iter().map(|&i| i as f64).collect::<Vec<_>>());
    let csr = fem.trace.to_csr();
    assert_eq!(csr.mul_vec(&u), t);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mass_is_positive_and_stiffness_semidefinite(v in prop::collection::vec(-1.0f64..1.0, 61), s in prop::collection::vec(-1.0f64..1.0, 24)) {
        let mesh = build_disk_mesh(2).unwrap();
        let fem = assemble_fem(&mesh).unwrap();
        prop_assume!(v.iter().any(|x| *x != 0.0) && s.iter().any(|x| *x != 0.0));
        prop_assert!(fem.mass_bulk.bilinear(&v, &v) > 0.0);
        prop_assert!(fem.mass_surf.bilinear(&s, &s) > 0.0);
        prop_assert!(fem.stiffness_bulk.bilinear(&v, &v) >= -1e-14);
        prop_assert!(fem.stiffness_surf.bilinear(&s, &s) >= -1e-14);
    }
}

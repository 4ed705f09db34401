use std::f64::consts::PI;

use nlch_core::mesh::{build_disk_mesh, TriMesh};
use nlch_core::nonlocal::{
    assemble_bulk_convolution, assemble_surface_convolution, check_bulk_admissibility, eval_kernel,
    nonlocal_dirichlet_energy, KernelSpec,
};
use proptest::prelude::*;

fn smooth(c: &[f64; 5], p: [f64; 2]) -> f64 {
    c[0] + c[1] * p[0] + c[2] * p[1] + c[3] * (2.0 * p[0]).sin() * p[1].cos() + c[4] * (p[0] * p[0] - p[1] * p[1])
}

/// Midpoint rule on each triangle split into 16 similar pieces.
fn midpoint_oracle(mesh: &TriMesh, spec: &KernelSpec, f: impl Fn([f64; 2]) -> f64, x: [f64; 2]) -> f64 {
    let mut total = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let [a, b, c] = tri.map(|i| mesh.vertices()[i]);
        let area = mesh.triangle_area(t) / 16.0;
        let n = 4;
        for i in 0..n {
            for j in 0..(n - i) {
                let mut sub = vec![[i as f64 + 1.0 / 3.0, j as f64 + 1.0 / 3.0]];
                if i + j + 1 < n {
                    sub.push([i as f64 + 2.0 / 3.0, j as f64 + 2.0 / 3.0]);
                }
                for [u, v] in sub {
                    let (u, v) = (u / n as f64, v / n as f64);
                    let y = [
                        a[0] + u * (b[0] - a[0]) + v * (c[0] - a[0]),
                        a[1] + u * (b[1] - a[1]) + v * (c[1] - a[1]),
                    ];
                    total += area * eval_kernel(spec, [x[0] - y[0], x[1] - y[1]]).unwrap() * f(y);
                }
            }
        }
    }
    total
}

#[test]
fn bulk_convolution_matches_midpoint_oracle() {
    let mesh = build_disk_mesh(3).unwrap();
    let spec = KernelSpec::gaussian(1.0, 0.5);
    let op = assemble_bulk_convolution(&mesh, &spec).unwrap();
    let coeffs = [0.3, -0.7, 0.4, 0.9, -0.5];
    let phi: Vec<f64> = mesh.vertices().iter().map(|&p| smooth(&coeffs, p)).collect();
    let got = op.apply(&phi);
    let oracle: Vec<f64> = mesh.vertices().iter().map(|&x| midpoint_oracle(&mesh, &spec, |y| smooth(&coeffs, y), x)).collect();
    let scale = oracle.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let worst = got.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 0.05 * scale, "{worst} vs {scale}");
}

#[test]
fn surface_convolution_matches_trapezoid_oracle() {
    let mesh = build_disk_mesh(4).unwrap();
    let spec = KernelSpec::gaussian(1.0, 0.5);
    let op = assemble_surface_convolution(&mesh, &spec).unwrap();
    let pts = mesh.boundary_points();
    let psi: Vec<f64> = pts.iter().map(|p| p[1].atan2(p[0]).sin()).collect();
    let got = op.apply(&psi);
    let m = 4000;
    let scale_max = pts
        .iter()
        .zip(&got)
        .map(|(z, g)| {
            let exact: f64 = (0..m)
                .map(|k| {
                    let th = 2.0 * PI * k as f64 / m as f64;
                    let y = [th.cos(), th.sin()];
                    eval_kernel(&spec, [z[0] - y[0], z[1] - y[1]]).unwrap() * th.sin()
                })
                .sum::<f64>()
                * (2.0 * PI / m as f64);
            ((g - exact).abs(), exact.abs())
        })
        .fold((0.0f64, 0.0f64), |acc, (e, s)| (acc.0.max(e), acc.1.max(s)));
    assert!(scale_max.0 < 0.02 * scale_max.1, "{scale_max:?}");
}

#[test]
fn a_field_is_positive_and_below_plane_integral() {
    let mesh = build_disk_mesh(4).unwrap();
    let spec = KernelSpec::gaussian(1.0, 0.5);
    let op = assemble_bulk_convolution(&mesh, &spec).unwrap();
    assert!(op.a_min() > 0.0);
    let report = check_bulk_admissibility(&spec, &mesh).unwrap();
    assert!(report.passed());
    assert_eq!(report.within_upper_bound(), Some(true));
    assert_eq!(report.a_min.to_bits(), op.a_min().to_bits());
    assert!(report.analytic_lower_bound <= report.a_min);
}

#[test]
fn singular_bulk_kernels_assemble_with_positive_a() {
    let mesh = build_disk_mesh(3).unwrap();
    for spec in [KernelSpec::truncated_power(0.5), KernelSpec::riesz(1.5)] {
        let op = assemble_bulk_convolution(&mesh, &spec).unwrap();
        assert!(op.a_min() > 0.0 && op.a_max().is_finite(), "{}", spec.name());
        assert!(eval_kernel(&spec, [0.0, 0.0]).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn convolution_is_self_adjoint_and_linear(
        phi in prop::collection::vec(-2.0f64..2.0, 61),
        chi in prop::collection::vec(-2.0f64..2.0, 61),
        width in 0.2f64..2.0,
        c in -3.0f64..3.0,
    ) {
        let mesh = build_disk_mesh(2).unwrap();
        let op = assemble_bulk_convolution(&mesh, &KernelSpec::gaussian(1.0, width)).unwrap();
        let w = op.weights();
        for i in 0..op.len() {
            for j in 0..op.len() {
                prop_assert_eq!(op.symmetric_entry(i, j).to_bits(), op.symmetric_entry(j, i).to_bits());
                prop_assert_eq!(op.kernel_entry(i, j), op.kernel_entry(j, i));
            }
        }
        let wp = op.apply(&phi);
        let wc = op.apply(&chi);
        let lhs: f64 = (0..phi.len()).map(|i| w[i] * chi[i] * wp[i]).sum();
        let rhs: f64 = (0..phi.len()).map(|i| w[i] * phi[i] * wc[i]).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        let comb: Vec<f64> = phi.iter().zip(&chi).map(|(a, b)| a + c * b).collect();
        let wcomb = op.apply(&comb);
        for i in 0..phi.len() {
            prop_assert!((wcomb[i] - (wp[i] + c * wc[i])).abs() <= 1e-12 * (1.0 + wcomb[i].abs()));
        }
    }

    #[test]
    fn dirichlet_energy_identity(phi in prop::collection::vec(-2.0f64..2.0, 217)) {
        let mesh = build_disk_mesh(3).unwrap();
        let op = assemble_bulk_convolution(&mesh, &KernelSpec::gaussian(1.0, 0.5)).unwrap();
        let w = op.weights();
        let a = op.a_field();
        let wp = op.apply(&phi);
        let expected: f64 = (0..phi.len()).map(|i| 0.5 * w[i] * a[i] * phi[i] * phi[i] - 0.5 * w[i] * phi[i] * wp[i]).sum();
        let got = nonlocal_dirichlet_energy(&op, &phi);
        prop_assert!((got - expected).abs() <= 1e-12 * (1.0 + expected.abs()), "{} {}", got, expected);
        prop_assert!(got >= 0.0);
        let shifted: Vec<f64> = phi.iter().map(|p| p + 0.75).collect();
        let again = nonlocal_dirichlet_energy(&op, &shifted);
        prop_assert!((again - got).abs() <= 1e-10 * (1.0 + got));
    }

    #[test]
    fn kernels_are_even(x in -3.5f64..3.5, y in -3.5f64..3.5) {
        prop_assume!(x != 0.0 || y != 0.0);
        for spec in [KernelSpec::gaussian(1.3, 0.7), KernelSpec::truncated_power(0.4), KernelSpec::riesz(1.2)] {
            prop_assert_eq!(eval_kernel(&spec, [x, y]).unwrap(), eval_kernel(&spec, [-x, -y]).unwrap());
        }
    }
}

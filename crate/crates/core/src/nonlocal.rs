//! Interaction kernels and their dense nodal convolution operators.
//!
//! A convolution `(J * φ)(xᵢ) = ∫ J(xᵢ − y) φ(y) dy` is realized with the
//! lumped node weights as quadrature: `(Wφ)ᵢ = Σⱼ J(xᵢ − xⱼ) wⱼ φⱼ`. The
//! operator stores the symmetric kernel matrix `Kᵢⱼ = J(xᵢ − xⱼ)` and the
//! weights separately, so `wᵢ Kᵢⱼ wⱼ` is exactly symmetric.
//!
//! Singular kernels have no finite value at `xᵢ = xⱼ`. Their diagonal is
//! the exact integral of the singular part over the disk of radius
//! `rᵢ = (wᵢ / π)^½` centred at the node, divided by `wᵢ`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::mesh::TriMesh;
use crate::{Error, Result};

/// Default cap on the node count of a dense operator.
pub const DEFAULT_DENSE_LIMIT: usize = 6000;

/// Radial cutoff `ρ`: one on `[0, inner]`, zero on `[outer, ∞)` and a
/// cubic smoothstep in between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    pub inner: f64,
    pub outer: f64,
}

impl Default for Cutoff {
    /// `[2R, 3R]` for the unit disk.
    fn default() -> Self {
        Self {
            inner: 2.0,
            outer: 3.0,
        }
    }
}

impl Cutoff {
    pub fn value(&self, r: f64) -> f64 {
        if r <= self.inner {
            1.0
        } else if r >= self.outer {
            0.0
        } else {
            let t = (r - self.inner) / (self.outer - self.inner);
            1.0 - t * t * (3.0 - 2.0 * t)
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        if r <= self.inner || r >= self.outer {
            0.0
        } else {
            let width = self.outer - self.inner;
            let t = (r - self.inner) / width;
            -6.0 * t * (1.0 - t) / width
        }
    }
}

/// Radial interaction kernel families available in two dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// `amplitude · exp(−|x|² / width²)`. An infinite width gives the flat
    /// kernel `J ≡ amplitude`.
    Gaussian { amplitude: f64, width: f64 },
    /// `ρ(|x|) |x|^(−ω)` with `0 < ω < 1`.
    TruncatedPower { omega: f64, cutoff: Cutoff },
    /// Riesz potential with cutoff, `c_α |x|^(α−2) ρ(|x|)` with `1 < α < 2`.
    RieszCutoff {
        alpha: f64,
        constant: f64,
        cutoff: Cutoff,
    },
}

impl KernelSpec {
    pub fn gaussian(amplitude: f64, width: f64) -> Self {
        KernelSpec::Gaussian { amplitude, width }
    }

    pub fn truncated_power(omega: f64) -> Self {
        KernelSpec::TruncatedPower {
            omega,
            cutoff: Cutoff::default(),
        }
    }

    pub fn riesz(alpha: f64) -> Self {
        KernelSpec::RieszCutoff {
            alpha,
            constant: 1.0,
            cutoff: Cutoff::default(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::Gaussian { .. } => "gaussian",
            KernelSpec::TruncatedPower { .. } => "truncated_power",
            KernelSpec::RieszCutoff { .. } => "riesz_cutoff",
        }
    }

    pub fn is_singular(&self) -> bool {
        !matches!(self, KernelSpec::Gaussian { .. })
    }

    /// Checks the parameter ranges of the family (assumption A2 for d = 2).
    pub fn validate(&self) -> Result<()> {
        let cutoff_ok = |c: &Cutoff| c.inner > 0.0 && c.outer > c.inner && c.outer.is_finite();
        match *self {
            KernelSpec::Gaussian { amplitude, width } => {
                if !(amplitude >= 0.0 && amplitude.is_finite()) {
                    return Err(Error::assumption("A2", format!("gaussian amplitude {amplitude} must be finite and nonnegative")));
                }
                if !(width > 0.0) {
                    return Err(Error::assumption("A2", format!("gaussian width {width} must be positive")));
                }
            }
            KernelSpec::TruncatedPower { omega, cutoff } => {
                if !(omega > 0.0 && omega < 1.0) {
                    return Err(Error::assumption("A2", format!("truncated power exponent {omega} must lie in (0, d-1) = (0, 1)")));
                }
                if !cutoff_ok(&cutoff) {
                    return Err(Error::assumption("A2", "cutoff needs 0 < inner < outer < inf"));
                }
            }
            KernelSpec::RieszCutoff {
                alpha,
                constant,
                cutoff,
            } => {
                if !(alpha > 1.0 && alpha < 2.0) {
                    return Err(Error::assumption("A2", format!("Riesz order {alpha} must lie in (1, d) = (1, 2)")));
                }
                if !(constant > 0.0 && constant.is_finite()) {
                    return Err(Error::assumption("A2", "Riesz constant must be positive"));
                }
                if !cutoff_ok(&cutoff) {
                    return Err(Error::assumption("A2", "cutoff needs 0 < inner < outer < inf"));
                }
            }
        }
        Ok(())
    }

    /// `(scale, exponent, cutoff)` with `J(r) = scale · r^(−exponent) · ρ(r)`
    /// for the singular families.
    fn power_law(&self) -> Option<(f64, f64, Cutoff)> {
        match *self {
            KernelSpec::Gaussian { .. } => None,
            KernelSpec::TruncatedPower { omega, cutoff } => Some((1.0, omega, cutoff)),
            KernelSpec::RieszCutoff {
                alpha,
                constant,
                cutoff,
            } => Some((constant, 2.0 - alpha, cutoff)),
        }
    }

    /// Kernel value at radius `r > 0` (any `r ≥ 0` for bounded families).
    pub fn radial(&self, r: f64) -> f64 {
        match *self {
            KernelSpec::Gaussian { amplitude, width } => amplitude * libm::exp(-(r * r) / (width * width)),
            _ => {
                let (scale, exponent, cutoff) = self.power_law().expect("singular family");
                let rho = cutoff.value(r);
                if rho == 0.0 {
                    0.0
                } else {
                    scale * rho * libm::pow(r, -exponent)
                }
            }
        }
    }

    /// `dJ/dr` at radius `r > 0`.
    pub fn radial_derivative(&self, r: f64) -> f64 {
        match *self {
            KernelSpec::Gaussian { width, .. } => -2.0 * r / (width * width) * self.radial(r),
            _ => {
                let (scale, exponent, cutoff) = self.power_law().expect("singular family");
                scale
                    * (cutoff.derivative(r) * libm::pow(r, -exponent)
                        - exponent * cutoff.value(r) * libm::pow(r, -exponent - 1.0))
            }
        }
    }
}

/// `J(x)` for a planar offset `x`.
pub fn eval_kernel(spec: &KernelSpec, x: [f64; 2]) -> Result<f64> {
    let r = libm::hypot(x[0], x[1]);
    if r == 0.0 && spec.is_singular() {
        return Err(Error::KernelSingularity);
    }
    Ok(spec.radial(r))
}

/// How the self-interaction `Kᵢᵢ` was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiagRule {
    /// Bounded kernel: `Kᵢᵢ = J(0)`.
    PointValue,
    /// Singular kernel `scale · r^(−exponent) ρ(r)`: `Kᵢᵢ wᵢ` is the exact
    /// integral over the equal-area disk, `2π ρ(0) scale rᵢ^(2−exponent) / (2−exponent)`.
    EqualAreaDisk { exponent: f64 },
}

fn diagonal_value(spec: &KernelSpec, weight: f64) -> (f64, DiagRule) {
    match spec.power_law() {
        None => (spec.radial(0.0), DiagRule::PointValue),
        Some((scale, exponent, cutoff)) => {
            let r = libm::sqrt(weight / PI);
            let integral = 2.0 * PI * cutoff.value(0.0) * scale * libm::pow(r, 2.0 - exponent) / (2.0 - exponent);
            (integral / weight, DiagRule::EqualAreaDisk { exponent })
        }
    }
}

/// Integral of `|J'|` over the equal-area disk of a node (zero for the
/// bounded family, whose derivative vanishes at the origin).
fn diagonal_gradient_value(spec: &KernelSpec, weight: f64) -> f64 {
    match spec.power_law() {
        None => 0.0,
        Some((scale, exponent, cutoff)) => {
            let r = libm::sqrt(weight / PI);
            2.0 * PI * cutoff.value(0.0) * scale * exponent * libm::pow(r, 1.0 - exponent) / (1.0 - exponent)
        }
    }
}

/// Dense nodal realization of a convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionOperator {
    n: usize,
    kernel: Vec<f64>,
    weights: Vec<f64>,
    a_field: Vec<f64>,
    diag_rule: DiagRule,
}

impl ConvolutionOperator {
    /// Assembles the operator over arbitrary weighted nodes.
    pub fn assemble(points: &[[f64; 2]], weights: &[f64], spec: &KernelSpec, max_nodes: usize) -> Result<Self> {
        spec.validate()?;
        let n = points.len();
        Error::check_len("node weights", n, weights.len())?;
        if n > max_nodes {
            return Err(Error::Capacity {
                what: "dense convolution nodes",
                requested: n,
                limit: max_nodes,
            });
        }
        let mut kernel = vec![0.0; n * n];
        let mut diag_rule = DiagRule::PointValue;
        for i in 0..n {
            let (d, rule) = diagonal_value(spec, weights[i]);
            kernel[i * n + i] = d;
            diag_rule = rule;
            for j in (i + 1)..n {
                let r = libm::hypot(points[i][0] - points[j][0], points[i][1] - points[j][1]);
                if r == 0.0 {
                    return Err(Error::InvalidMesh(format!("nodes {i} and {j} coincide")));
                }
                let v = spec.radial(r);
                kernel[i * n + j] = v;
                kernel[j * n + i] = v;
            }
        }
        let mut op = Self {
            n,
            kernel,
            weights: weights.to_vec(),
            a_field: Vec::new(),
            diag_rule,
        };
        op.a_field = op.apply(&vec![1.0; n]);
        Ok(op)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `aᵢ = Σⱼ Kᵢⱼ wⱼ`, the nodal `J * 1`.
    pub fn a_field(&self) -> &[f64] {
        &self.a_field
    }

    pub fn a_min(&self) -> f64 {
        self.a_field.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn a_max(&self) -> f64 {
        self.a_field.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn diag_rule(&self) -> DiagRule {
        self.diag_rule
    }

    /// `Kᵢⱼ = J(xᵢ − xⱼ)` (desingularized on the diagonal).
    pub fn kernel_entry(&self, i: usize, j: usize) -> f64 {
        self.kernel[i * self.n + j]
    }

    /// Row `i` of the symmetric kernel matrix.
    pub fn kernel_row(&self, i: usize) -> &[f64] {
        &self.kernel[i * self.n..(i + 1) * self.n]
    }

    /// `Wᵢⱼ = Kᵢⱼ wⱼ`, so that `(Wφ)ᵢ = Σⱼ Wᵢⱼ φⱼ`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.kernel_entry(i, j) * self.weights[j]
    }

    /// `Kᵢⱼ (wᵢ wⱼ)`; bitwise symmetric in `(i, j)`.
    pub fn symmetric_entry(&self, i: usize, j: usize) -> f64 {
        self.kernel_entry(i, j) * (self.weights[i] * self.weights[j])
    }

    /// `(Wφ)ᵢ = Σⱼ Kᵢⱼ wⱼ φⱼ`.
    pub fn apply(&self, phi: &[f64]) -> Vec<f64> {
        assert_eq!(phi.len(), self.n, "field length must match the operator");
        let weighted: Vec<f64> = self.weights.iter().zip(phi).map(|(w, p)| w * p).collect();
        (0..self.n)
            .map(|i| self.kernel_row(i).iter().zip(&weighted).map(|(k, v)| k * v).sum())
            .collect()
    }

    /// The same operator with the kernel multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut op = Self {
            n: self.n,
            kernel: self.kernel.iter().map(|k| k * factor).collect(),
            weights: self.weights.clone(),
            a_field: Vec::new(),
            diag_rule: self.diag_rule,
        };
        op.a_field = op.apply(&vec![1.0; self.n]);
        op
    }
}

/// Bulk operator `φ ↦ J * φ` over the mesh vertices.
pub fn assemble_bulk_convolution(mesh: &TriMesh, spec: &KernelSpec) -> Result<ConvolutionOperator> {
    let op = ConvolutionOperator::assemble(mesh.vertices(), mesh.node_weights_bulk(), spec, DEFAULT_DENSE_LIMIT)?;
    require_positive(&op, "bulk")?;
    Ok(op)
}

/// Surface operator `ψ ↦ K ⊛ ψ` over the boundary loop, with the planar
/// offset `z − y` between boundary nodes.
///
/// In two dimensions only bounded surface kernels are admissible.
pub fn assemble_surface_convolution(mesh: &TriMesh, spec: &KernelSpec) -> Result<ConvolutionOperator> {
    if spec.is_singular() {
        return Err(Error::assumption(
            "A2",
            format!("singular surface kernel '{}' is not admissible in two dimensions; use a bounded kernel", spec.name()),
        ));
    }
    let op = ConvolutionOperator::assemble(&mesh.boundary_points(), mesh.node_weights_surface(), spec, DEFAULT_DENSE_LIMIT)?;
    require_positive(&op, "surface")?;
    Ok(op)
}

fn require_positive(op: &ConvolutionOperator, which: &str) -> Result<()> {
    let a_min = op.a_min();
    if a_min > 0.0 {
        Ok(())
    } else {
        Err(Error::assumption("A2", format!("{which} kernel has nodal a_* = {a_min:e}, positivity required")))
    }
}

/// `¼ Σᵢⱼ wᵢ Kᵢⱼ wⱼ (φᵢ − φⱼ)²`, evaluated directly from the differences.
pub fn nonlocal_dirichlet_energy(op: &ConvolutionOperator, phi: &[f64]) -> f64 {
    assert_eq!(phi.len(), op.len());
    let mut total = 0.0;
    for i in 0..op.len() {
        let row = op.kernel_row(i);
        let wi = op.weights[i];
        let mut acc = 0.0;
        for j in 0..op.len() {
            let d = phi[i] - phi[j];
            acc += row[j] * op.weights[j] * d * d;
        }
        total += wi * acc;
    }
    0.25 * total
}

/// Numerical estimates of the kernel constants of assumption A2.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub kernel: &'static str,
    /// Nodal `min aᵢ`, the surrogate for `a_*`.
    pub a_min: f64,
    /// Nodal `max aᵢ`, the surrogate for `a^*`.
    pub a_max: f64,
    /// Nodal `max Σⱼ |J'(|xᵢ − xⱼ|)| wⱼ`, the surrogate for `b^*`.
    pub b_max: f64,
    /// `min J` over offsets no longer than the node-set diameter.
    pub kernel_floor: f64,
    /// `kernel_floor · Σ w`, a guaranteed lower bound for `a_min`.
    pub analytic_lower_bound: f64,
    /// Whole-plane integral of `J` when it is finite and known in closed form.
    pub analytic_upper_bound: Option<f64>,
}

impl AdmissibilityReport {
    /// Positivity (`a_* > 0`) and finiteness of all estimates.
    pub fn passed(&self) -> bool {
        self.a_min > 0.0 && self.a_max.is_finite() && self.b_max.is_finite()
    }

    pub fn within_upper_bound(&self) -> Option<bool> {
        self.analytic_upper_bound.map(|u| self.a_max <= u)
    }
}

/// Streams over all node pairs without storing the dense operator.
pub fn check_admissibility(spec: &KernelSpec, points: &[[f64; 2]], weights: &[f64]) -> Result<AdmissibilityReport> {
    spec.validate()?;
    Error::check_len("node weights", points.len(), weights.len())?;
    let n = points.len();
    let (mut a_min, mut a_max, mut b_max, mut diameter) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, 0.0f64);
    for i in 0..n {
        let (d, _) = diagonal_value(spec, weights[i]);
        let mut a = d * weights[i];
        let mut b = diagonal_gradient_value(spec, weights[i]);
        for j in 0..n {
            if j == i {
                continue;
            }
            let r = libm::hypot(points[i][0] - points[j][0], points[i][1] - points[j][1]);
            diameter = diameter.max(r);
            a += spec.radial(r) * weights[j];
            b += spec.radial_derivative(r).abs() * weights[j];
        }
        a_min = a_min.min(a);
        a_max = a_max.max(a);
        b_max = b_max.max(b);
    }
    // every family is nonincreasing in r
    let kernel_floor = spec.radial(diameter);
    let measure: f64 = weights.iter().sum();
    let analytic_upper_bound = match *spec {
        KernelSpec::Gaussian { amplitude, width } if width.is_finite() => Some(amplitude * PI * width * width),
        _ => None,
    };
    Ok(AdmissibilityReport {
        kernel: spec.name(),
        a_min,
        a_max,
        b_max,
        kernel_floor,
        analytic_lower_bound: kernel_floor * measure,
        analytic_upper_bound,
    })
}

pub fn check_bulk_admissibility(spec: &KernelSpec, mesh: &TriMesh) -> Result<AdmissibilityReport> {
    check_admissibility(spec, mesh.vertices(), mesh.node_weights_bulk())
}

pub fn check_surface_admissibility(spec: &KernelSpec, mesh: &TriMesh) -> Result<AdmissibilityReport> {
    if spec.is_singular() {
        return Err(Error::assumption(
            "A2",
            format!("singular surface kernel '{}' is not admissible in two dimensions", spec.name()),
        ));
    }
    check_admissibility(spec, &mesh.boundary_points(), mesh.node_weights_surface())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_disk_mesh;

    #[test]
    fn kernel_point_values() {
        assert_eq!(eval_kernel(&KernelSpec::gaussian(1.0, 1.0), [0.0, 0.0]).unwrap(), 1.0);
        let tp = KernelSpec::truncated_power(0.5);
        assert_eq!(eval_kernel(&tp, [4.0, 0.0]).unwrap(), 0.0);
        assert_eq!(eval_kernel(&tp, [0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(eval_kernel(&tp, [0.0, 0.0]), Err(Error::KernelSingularity));
        assert_eq!(eval_kernel(&KernelSpec::riesz(1.5), [0.0, 0.0]), Err(Error::KernelSingularity));
    }

    #[test]
    fn kernel_is_even() {
        let specs = [KernelSpec::gaussian(1.3, 0.4), KernelSpec::truncated_power(0.3), KernelSpec::riesz(1.2)];
        for spec in &specs {
            for &(x, y) in &[(0.3, -0.2), (1.7, 0.9), (-2.1, 0.4), (0.01, 0.0)] {
                assert_eq!(eval_kernel(spec, [x, y]).unwrap(), eval_kernel(spec, [-x, -y]).unwrap());
            }
        }
    }

    #[test]
    fn cutoff_is_c1_and_monotone() {
        let c = Cutoff::default();
        assert_eq!(c.value(2.0), 1.0);
        assert_eq!(c.value(3.0), 0.0);
        assert!((c.value(2.5) - 0.5).abs() < 1e-15);
        assert_eq!(c.derivative(2.0), 0.0);
        assert_eq!(c.derivative(3.0), 0.0);
        let mut last = 1.0;
        for k in 0..=100 {
            let r = 2.0 + k as f64 / 100.0;
            assert!(c.value(r) <= last);
            last = c.value(r);
            let h = 1e-6;
            if r > 2.0 + h && r < 3.0 - h {
                let fd = (c.value(r + h) - c.value(r - h)) / (2.0 * h);
                assert!((fd - c.derivative(r)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn radial_derivative_matches_finite_differences() {
        let specs = [KernelSpec::gaussian(1.3, 0.4), KernelSpec::truncated_power(0.3), KernelSpec::riesz(1.2)];
        for spec in &specs {
            for &r in &[0.2, 0.9, 2.3, 2.8] {
                let h = 1e-6;
                let fd = (spec.radial(r + h) - spec.radial(r - h)) / (2.0 * h);
                assert!((fd - spec.radial_derivative(r)).abs() < 1e-6 * (1.0 + fd.abs()), "{spec:?} r={r}");
            }
        }
    }

    #[test]
    fn parameter_ranges_are_enforced() {
        assert!(KernelSpec::truncated_power(1.0).validate().is_err());
        assert!(KernelSpec::truncated_power(0.0).validate().is_err());
        assert!(KernelSpec::riesz(2.0).validate().is_err());
        assert!(KernelSpec::riesz(1.0).validate().is_err());
        assert!(KernelSpec::gaussian(1.0, 0.0).validate().is_err());
        assert!(KernelSpec::gaussian(1.0, f64::INFINITY).validate().is_ok());
    }

    #[test]
    fn flat_kernel_two_node_toy() {
        let op = ConvolutionOperator::assemble(
            &[[0.0, 0.0], [1.0, 0.0]],
            &[1.0, 1.0],
            &KernelSpec::gaussian(1.0, f64::INFINITY),
            10,
        )
        .unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(op.entry(i, j), 1.0);
            }
        }
        assert_eq!(op.apply(&[2.0, 5.0]), vec![7.0, 7.0]);
        assert_eq!(nonlocal_dirichlet_energy(&op, &[1.0, -1.0]), 2.0);
        assert_eq!(nonlocal_dirichlet_energy(&op, &[3.0, 3.0]), 0.0);
    }

    #[test]
    fn apply_one_is_a_field() {
        let mesh = build_disk_mesh(2).unwrap();
        let op = assemble_bulk_convolution(&mesh, &KernelSpec::truncated_power(0.5)).unwrap();
        assert_eq!(op.apply(&vec![1.0; op.len()]), op.a_field());
        assert!(matches!(op.diag_rule(), DiagRule::EqualAreaDisk { .. }));
    }

    #[test]
    fn dense_limit_is_enforced() {
        let mesh = build_disk_mesh(2).unwrap();
        let err = ConvolutionOperator::assemble(mesh.vertices(), mesh.node_weights_bulk(), &KernelSpec::gaussian(1.0, 1.0), 10)
            .unwrap_err();
        assert!(matches!(err, Error::Capacity { limit: 10, .. }));
    }

    #[test]
    fn singular_surface_kernel_is_rejected() {
        let mesh = build_disk_mesh(1).unwrap();
        let err = assemble_surface_convolution(&mesh, &KernelSpec::truncated_power(0.5)).unwrap_err();
        assert!(matches!(err, Error::Assumption { tag: "A2", .. }));
        assert!(check_surface_admissibility(&KernelSpec::riesz(1.5), &mesh).is_err());
    }

    #[test]
    fn constant_surface_kernel_integrates_length() {
        let mesh = build_disk_mesh(4).unwrap();
        let op = assemble_surface_convolution(&mesh, &KernelSpec::gaussian(0.7, f64::INFINITY)).unwrap();
        for &a in op.a_field() {
            assert!((a - 0.7 * mesh.boundary_length()).abs() < 1e-12);
            assert!((a - 0.7 * 2.0 * PI).abs() < 0.7 * 2.0 * PI * 1e-3);
        }
    }

    #[test]
    fn zero_amplitude_fails_admissibility() {
        let mesh = build_disk_mesh(2).unwrap();
        let spec = KernelSpec::gaussian(0.0, 0.5);
        let report = check_bulk_admissibility(&spec, &mesh).unwrap();
        assert_eq!(report.a_min, 0.0);
        assert!(!report.passed());
        assert!(matches!(assemble_bulk_convolution(&mesh, &spec), Err(Error::Assumption { tag: "A2", .. })));
    }

    #[test]
    fn truncated_power_respects_the_analytic_floor() {
        let mesh = build_disk_mesh(3).unwrap();
        let report = check_bulk_admissibility(&KernelSpec::truncated_power(0.5), &mesh).unwrap();
        assert!(report.passed());
        // all offsets are at most 2R = 2, where rho = 1
        assert!((report.kernel_floor - libm::pow(2.0, -0.5)).abs() < 1e-12);
        assert!(report.a_min >= report.analytic_lower_bound);
        let op = assemble_bulk_convolution(&mesh, &KernelSpec::truncated_power(0.5)).unwrap();
        assert!((op.a_min() - report.a_min).abs() < 1e-12 * report.a_min);
    }
}

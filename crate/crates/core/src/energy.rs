//! Potentials, penalty and the nonlocal free energy.
//!
//! The interface parameters are folded into the operators: the bulk kernel
//! is multiplied by `ε` and the well weight divided by `ε` (likewise `δ` on
//! the surface, which also divides the penalty). Everything downstream then
//! works with the unit-parameter form
//!
//! ```text
//! E = ¼∬J|φ(x)−φ(y)|² + ∫f W(φ) + ¼∬K|ψ(z)−ψ(y)|² + ∫g W(ψ) + ∫bψ
//! ```
//!
//! with the quartic double well `W(s) = ¼(s² − 1)²`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::nonlocal::{nonlocal_dirichlet_energy, ConvolutionOperator};
use crate::vecops::{weighted_dot, weighted_sum};
use crate::{Error, Result};

pub fn double_well(s: f64) -> f64 {
    let q = s * s - 1.0;
    0.25 * q * q
}

pub fn double_well_prime(s: f64) -> f64 {
    s * s * s - s
}

pub fn double_well_second(s: f64) -> f64 {
    3.0 * s * s - 1.0
}

/// A coefficient given either as one constant or as per-node values.
#[derive(Debug, Clone, PartialEq)]
pub enum NodalField {
    Constant(f64),
    Nodal(Vec<f64>),
}

impl NodalField {
    pub fn at(&self, i: usize) -> f64 {
        match self {
            NodalField::Constant(c) => *c,
            NodalField::Nodal(v) => v[i],
        }
    }

    pub fn min(&self) -> f64 {
        match self {
            NodalField::Constant(c) => *c,
            NodalField::Nodal(v) => v.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    pub fn max(&self) -> f64 {
        match self {
            NodalField::Constant(c) => *c,
            NodalField::Nodal(v) => v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            NodalField::Constant(c) => c.is_finite(),
            NodalField::Nodal(v) => v.iter().all(|x| x.is_finite()),
        }
    }

    /// Materializes `n` values, checking the length of nodal data.
    pub fn to_vec(&self, what: &'static str, n: usize) -> Result<Vec<f64>> {
        match self {
            NodalField::Constant(c) => Ok(vec![*c; n]),
            NodalField::Nodal(v) => {
                Error::check_len(what, n, v.len())?;
                Ok(v.clone())
            }
        }
    }
}

/// Weights of the bulk and surface double wells.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    pub f: NodalField,
    pub g: NodalField,
}

/// Linear boundary penalty `B(z, s) = b(z) s`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltySpec {
    pub b: NodalField,
}

impl PenaltySpec {
    pub fn none() -> Self {
        Self {
            b: NodalField::Constant(0.0),
        }
    }
}

/// How the bulk and surface chemical potentials are coupled on the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    /// `L ∂ₙμ = βν − μ` with `L > 0`.
    Robin { l: f64 },
    /// The `L → 0` limit `μ|Γ = βν`.
    Dirichlet,
    /// The `L → ∞` limit: no-flux bulk and an independent surface system.
    Decoupled,
}

impl Coupling {
    pub fn name(&self) -> &'static str {
        match self {
            Coupling::Robin { .. } => "robin",
            Coupling::Dirichlet => "dirichlet",
            Coupling::Decoupled => "decoupled",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub beta: f64,
    pub coupling: Coupling,
    pub m_bulk: f64,
    pub m_surf: f64,
    pub eps: f64,
    pub delta: f64,
}

impl ModelSpec {
    /// Unit mobilities and interface parameters.
    pub fn new(beta: f64, coupling: Coupling) -> Self {
        Self {
            beta,
            coupling,
            m_bulk: 1.0,
            m_surf: 1.0,
            eps: 1.0,
            delta: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta != 0.0 && self.beta.is_finite()) {
            return Err(Error::assumption("A1", format!("beta = {} must be finite and nonzero", self.beta)));
        }
        match self.coupling {
            Coupling::Robin { l } if !(l > 0.0 && l.is_finite()) => {
                return Err(Error::assumption("A1", format!("Robin parameter L = {l} must be finite and positive")));
            }
            Coupling::Dirichlet if self.beta <= 0.0 => {
                return Err(Error::assumption("A1", format!("the Dirichlet model needs beta > 0, got {}", self.beta)));
            }
            _ => {}
        }
        for (name, v) in [("m_bulk", self.m_bulk), ("m_surf", self.m_surf), ("eps", self.eps), ("delta", self.delta)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::assumption("A1", format!("{name} = {v} must be finite and positive")));
            }
        }
        Ok(())
    }
}

/// Nodal values of `F = f W + ½ a s²` and its first two derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialDerivatives {
    pub value: Vec<f64>,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

pub fn potential_derivatives(weight: &[f64], a_field: &[f64], s: &[f64]) -> PotentialDerivatives {
    assert_eq!(weight.len(), s.len());
    assert_eq!(a_field.len(), s.len());
    let mut out = PotentialDerivatives {
        value: Vec::with_capacity(s.len()),
        first: Vec::with_capacity(s.len()),
        second: Vec::with_capacity(s.len()),
    };
    for ((&f, &a), &x) in weight.iter().zip(a_field).zip(s) {
        out.value.push(f * double_well(x) + 0.5 * a * x * x);
        out.first.push(f * double_well_prime(x) + a * x);
        out.second.push(f * double_well_second(x) + a);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    /// Double-difference interaction plus the weighted wells.
    DifferenceForm,
    /// `−½⟨J∗φ, φ⟩ + ∫F` with the convex shifted potentials.
    ConvolutionForm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParts {
    pub bulk: f64,
    pub surf: f64,
    pub penalty: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.bulk + self.surf + self.penalty
    }
}

/// The discrete free energy with its assembled operators.
#[derive(Debug, Clone)]
pub struct FreeEnergy {
    bulk: ConvolutionOperator,
    surf: ConvolutionOperator,
    f: Vec<f64>,
    g: Vec<f64>,
    b: Vec<f64>,
}

impl FreeEnergy {
    /// Scales the operators by `ε`, `δ` and checks the convexity margins
    /// `c_* = a_* − max f > 0` and `c_⊛ = a_⊛ − max g > 0` in nodal form.
    pub fn new(
        bulk: &ConvolutionOperator,
        surf: &ConvolutionOperator,
        potential: &PotentialSpec,
        penalty: &PenaltySpec,
        model: &ModelSpec,
    ) -> Result<Self> {
        model.validate()?;
        let (nb, ns) = (bulk.len(), surf.len());
        for (name, field) in [("f", &potential.f), ("g", &potential.g)] {
            if !field.is_finite() || field.min() < 0.0 {
                return Err(Error::assumption("A3", format!("well weight {name} must be finite and nonnegative")));
            }
        }
        if !penalty.b.is_finite() {
            return Err(Error::assumption("A5", "penalty weight b must be finite"));
        }
        let bulk = bulk.scaled(model.eps);
        let surf = surf.scaled(model.delta);
        let f: Vec<f64> = potential.f.to_vec("well weight f", nb)?.iter().map(|v| v / model.eps).collect();
        let g: Vec<f64> = potential.g.to_vec("well weight g", ns)?.iter().map(|v| v / model.delta).collect();
        let b: Vec<f64> = penalty.b.to_vec("penalty weight b", ns)?.iter().map(|v| v / model.delta).collect();
        let energy = Self { bulk, surf, f, g, b };
        let (c_bulk, c_surf) = energy.convexity_margins();
        if !(c_bulk > 0.0) {
            return Err(Error::assumption(
                "A3",
                format!(
                    "max f = {:e} >= eps * a_* = {:e}",
                    potential.f.max(),
                    model.eps * energy.bulk.a_min()
                ),
            ));
        }
        if !(c_surf > 0.0) {
            return Err(Error::assumption(
                "A3",
                format!(
                    "max g = {:e} >= delta * a_circledast = {:e}",
                    potential.g.max(),
                    model.delta * energy.surf.a_min()
                ),
            ));
        }
        Ok(energy)
    }

    pub fn bulk_operator(&self) -> &ConvolutionOperator {
        &self.bulk
    }

    pub fn surface_operator(&self) -> &ConvolutionOperator {
        &self.surf
    }

    pub fn n_bulk(&self) -> usize {
        self.bulk.len()
    }

    pub fn n_surface(&self) -> usize {
        self.surf.len()
    }

    /// Effective well weights and penalty after the `ε`, `δ` scaling.
    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// `(c_*, c_⊛)` from the nodal `a` fields.
    pub fn convexity_margins(&self) -> (f64, f64) {
        let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
        (self.bulk.a_min() - max(&self.f), self.surf.a_min() - max(&self.g))
    }

    pub fn bulk_potential(&self, phi: &[f64]) -> PotentialDerivatives {
        potential_derivatives(&self.f, self.bulk.a_field(), phi)
    }

    pub fn surface_potential(&self, psi: &[f64]) -> PotentialDerivatives {
        potential_derivatives(&self.g, self.surf.a_field(), psi)
    }

    /// `μ = −J∗φ + F'(φ)`.
    pub fn chemical_potential_bulk(&self, phi: &[f64]) -> Vec<f64> {
        let conv = self.bulk.apply(phi);
        let a = self.bulk.a_field();
        phi.iter()
            .enumerate()
            .map(|(i, &p)| -conv[i] + (self.f[i] * double_well_prime(p) + a[i] * p))
            .collect()
    }

    /// `ν = −K⊛ψ + G'(ψ) + b`.
    pub fn chemical_potential_surface(&self, psi: &[f64]) -> Vec<f64> {
        let conv = self.surf.apply(psi);
        let a = self.surf.a_field();
        psi.iter()
            .enumerate()
            .map(|(i, &p)| -conv[i] + (self.g[i] * double_well_prime(p) + a[i] * p) + self.b[i])
            .collect()
    }

    pub fn energy_parts(&self, phi: &[f64], psi: &[f64], repr: Representation) -> EnergyParts {
        let (wb, ws) = (self.bulk.weights(), self.surf.weights());
        let penalty = weighted_dot(ws, &self.b, psi);
        match repr {
            Representation::DifferenceForm => {
                let wells = |f: &[f64], s: &[f64]| -> Vec<f64> { f.iter().zip(s).map(|(f, &x)| f * double_well(x)).collect() };
                EnergyParts {
                    bulk: nonlocal_dirichlet_energy(&self.bulk, phi) + weighted_sum(wb, &wells(&self.f, phi)),
                    surf: nonlocal_dirichlet_energy(&self.surf, psi) + weighted_sum(ws, &wells(&self.g, psi)),
                    penalty,
                }
            }
            Representation::ConvolutionForm => {
                let fb = self.bulk_potential(phi);
                let fs = self.surface_potential(psi);
                EnergyParts {
                    bulk: -0.5 * weighted_dot(wb, &self.bulk.apply(phi), phi) + weighted_sum(wb, &fb.value),
                    surf: -0.5 * weighted_dot(ws, &self.surf.apply(psi), psi) + weighted_sum(ws, &fs.value),
                    penalty,
                }
            }
        }
    }

    pub fn total_energy(&self, phi: &[f64], psi: &[f64], repr: Representation) -> f64 {
        self.energy_parts(phi, psi, repr).total()
    }

    /// `−Σ wⱼ |bⱼ| · max |ψ|`; the wells and interaction terms are nonnegative.
    pub fn energy_lower_bound(&self, psi: &[f64]) -> f64 {
        let psi_max = crate::vecops::max_abs(psi);
        let b_abs: Vec<f64> = self.b.iter().map(|v| v.abs()).collect();
        -weighted_sum(self.surf.weights(), &b_abs) * psi_max
    }

    /// Smallest `F''` and `G''` over all nodes and `s` on a uniform grid.
    pub fn min_second_derivatives(&self, lo: f64, hi: f64, samples: usize) -> (f64, f64) {
        let mut min_f = f64::INFINITY;
        let mut min_g = f64::INFINITY;
        for k in 0..samples.max(2) {
            let s = lo + (hi - lo) * k as f64 / (samples.max(2) - 1) as f64;
            for (f, a) in self.f.iter().zip(self.bulk.a_field()) {
                min_f = min_f.min(f * double_well_second(s) + a);
            }
            for (g, a) in self.g.iter().zip(self.surf.a_field()) {
                min_g = min_g.min(g * double_well_second(s) + a);
            }
        }
        (min_f, min_g)
    }
}

/// Central-difference directional derivative of the energy against the
/// weighted pairing of the chemical potentials with the direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariationReport {
    pub derivative: f64,
    pub pairing: f64,
    pub abs_error: f64,
    pub rel_error: f64,
}

pub fn first_variation_check(
    energy: &FreeEnergy,
    phi: &[f64],
    psi: &[f64],
    zeta: &[f64],
    xi: &[f64],
    step: f64,
) -> VariationReport {
    let shifted = |sign: f64| {
        let p: Vec<f64> = phi.iter().zip(zeta).map(|(a, b)| a + sign * step * b).collect();
        let q: Vec<f64> = psi.iter().zip(xi).map(|(a, b)| a + sign * step * b).collect();
        energy.total_energy(&p, &q, Representation::ConvolutionForm)
    };
    let derivative = (shifted(1.0) - shifted(-1.0)) / (2.0 * step);
    let mu = energy.chemical_potential_bulk(phi);
    let nu = energy.chemical_potential_surface(psi);
    let pairing = weighted_dot(energy.bulk.weights(), &mu, zeta) + weighted_dot(energy.surf.weights(), &nu, xi);
    let abs_error = (derivative - pairing).abs();
    let scale = derivative.abs().max(pairing.abs());
    VariationReport {
        derivative,
        pairing,
        abs_error,
        rel_error: if scale > 0.0 { abs_error / scale } else { 0.0 },
    }
}

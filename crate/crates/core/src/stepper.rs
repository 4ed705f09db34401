//! Implicit gradient-flow steps for the Robin, Dirichlet and decoupled
//! models.
//!
//! With the lumped mass `D`, the coupling operator `𝒜` (see
//! [`crate::elliptic`]) and the chemical potentials `μ̂(x) = (μ(φ), ν(ψ))`,
//! one Robin step solves
//!
//! ```text
//! D (x − xⁿ)/τ + 𝒜 μ̂(x) = 0,   x = (φ, ψ).
//! ```
//!
//! The potentials are eliminated, so Newton runs on `x` alone with the
//! Jacobian `D/τ + 𝒜 H`, `H` being the (dense) Hessian of the energy in the
//! weighted pairing. Each Newton update conserves the β-weighted mass
//! exactly because `(β1, 1)ᵀ 𝒜 = 0`.
//!
//! The Dirichlet model substitutes the single potential `u = μ(φ)` with
//! `ν(ψ) = u|Γ/β`; the decoupled model runs two independent solves.

use alloc::vec;
use alloc::vec::Vec;

use faer::Mat;

use crate::dense::DenseLu;
use crate::elliptic::{CoupledField, CoupledSolver, EllipticParams, MassKind};
use crate::energy::{Coupling, EnergyParts, FreeEnergy, ModelSpec, Representation};
use crate::mesh::FemMatrices;
use crate::sparse::{CsrMatrix, TripletBuilder};
use crate::vecops::{weighted_norm, weighted_sum};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub t: f64,
}

impl State {
    pub fn new(phi: Vec<f64>, psi: Vec<f64>) -> Self {
        Self { phi, psi, t: 0.0 }
    }

    pub fn is_finite(&self) -> bool {
        self.phi.iter().chain(&self.psi).all(|v| v.is_finite()) && self.t.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub tau: f64,
    /// Bound on the weighted residual `‖D⁻¹R‖_w`.
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Number of times `τ` may be multiplied by `backoff` after a failure.
    pub max_halvings: usize,
    pub backoff: f64,
    /// Relative slack `tol · (1 + |E(old)|)` of the energy certificate.
    pub certificate_tol: f64,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self {
            tau: 1e-3,
            newton_tol: 1e-10,
            max_newton: 25,
            max_halvings: 6,
            backoff: 0.5,
            certificate_tol: 1e-9,
        }
    }
}

impl StepConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tau > 0.0
            && self.tau.is_finite()
            && self.newton_tol > 0.0
            && self.max_newton > 0
            && self.backoff > 0.0
            && self.backoff < 1.0
            && self.certificate_tol > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Contract(alloc::format!("invalid step configuration {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateReport {
    pub energy_old: f64,
    pub energy_new: f64,
    pub movement_norm: f64,
    /// `E(new) + ‖new − old‖²_*/(2τ) − E(old)`.
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub newton_iters: usize,
    pub final_residual: f64,
    pub residual_history: Vec<f64>,
    /// `r_k / r_{k−1}²` for the last two residuals, when defined.
    pub quadratic_ratio: Option<f64>,
    pub tau_used: f64,
    pub halvings: usize,
    pub energy_before: f64,
    pub energy_after: f64,
    pub energy_difference_form: f64,
    pub parts_before: EnergyParts,
    pub parts_after: EnergyParts,
    pub movement_norm: f64,
    pub certificate: CertificateReport,
    pub mass_value: f64,
    pub mass_bulk: f64,
    pub mass_surf: f64,
    /// `‖βν − μ|Γ‖` in the weighted surface norm.
    pub equilibrium_gap: f64,
    /// `equilibrium_gap / L` (Robin), 0 (decoupled), NaN (Dirichlet).
    pub flux_norm: f64,
}

struct NewtonOutcome {
    x: Vec<f64>,
    iters: usize,
    history: Vec<f64>,
}

/// Plain Newton iteration; `None` on non-convergence, with the history.
fn newton(
    x0: Vec<f64>,
    tol: f64,
    max_iter: usize,
    mut residual: impl FnMut(&[f64]) -> (Vec<f64>, f64),
    mut jacobian: impl FnMut(&[f64]) -> Mat<f64>,
) -> core::result::Result<NewtonOutcome, Vec<f64>> {
    let mut x = x0;
    let mut history = Vec::new();
    for it in 0..=max_iter {
        let (r, norm) = residual(&x);
        history.push(norm);
        if !norm.is_finite() {
            return Err(history);
        }
        if norm <= tol {
            return Ok(NewtonOutcome { x, iters: it, history });
        }
        if it == max_iter {
            break;
        }
        let lu = match DenseLu::factor(&jacobian(&x)) {
            Ok(lu) => lu,
            Err(_) => return Err(history),
        };
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        match lu.solve(&neg) {
            Ok(dx) => x.iter_mut().zip(&dx).for_each(|(a, d)| *a += d),
            Err(_) => return Err(history),
        }
    }
    Err(history)
}

fn dense_from_rows(n: usize, rows: &[f64]) -> Mat<f64> {
    Mat::from_fn(n, n, |i, j| rows[i * n + j])
}

/// Which potential blocks a gradient-flow solve acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Blocks {
    Both,
    Bulk,
    Surf,
}

/// Time stepper for one model on one mesh.
#[derive(Debug)]
pub struct Stepper {
    model: ModelSpec,
    energy: FreeEnergy,
    trace: Vec<usize>,
    w_bulk: Vec<f64>,
    w_surf: Vec<f64>,
    /// `𝒜` on the stepped unknowns: stacked for Robin, bulk `𝒜₀` for Dirichlet.
    operator: CsrMatrix,
    /// Decoupled bulk and surface operators.
    split: Option<(CsrMatrix, CsrMatrix)>,
    metric: CoupledSolver,
}

impl Stepper {
    pub fn new(fem: &FemMatrices, energy: FreeEnergy, model: ModelSpec) -> Result<Self> {
        model.validate()?;
        Error::check_len("bulk weights", fem.lumped_bulk.len(), energy.n_bulk())?;
        Error::check_len("surface weights", fem.lumped_surf.len(), energy.n_surface())?;
        let metric = CoupledSolver::new(fem, EllipticParams::from_model(&model, MassKind::Lumped))?;
        let (operator, split) = match model.coupling {
            Coupling::Robin { .. } => (metric.operator().clone(), None),
            Coupling::Dirichlet => {
                let mut b = TripletBuilder::new(fem.lumped_bulk.len(), fem.lumped_bulk.len());
                b.push_block(0, 0, 1.0 / (model.beta * model.beta), metric.operator());
                (b.build(), None)
            }
            Coupling::Decoupled => {
                let scaled = |m: &CsrMatrix, c: f64| {
                    let mut b = TripletBuilder::new(m.nrows(), m.ncols());
                    b.push_block(0, 0, c, m);
                    b.build()
                };
                let bulk = scaled(&fem.stiffness_bulk, model.m_bulk);
                let surf = scaled(&fem.stiffness_surf, model.m_surf);
                (metric.operator().clone(), Some((bulk, surf)))
            }
        };
        Ok(Self {
            model,
            energy,
            trace: fem.trace.indices().to_vec(),
            w_bulk: fem.lumped_bulk.clone(),
            w_surf: fem.lumped_surf.clone(),
            operator,
            split,
            metric,
        })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn energy(&self) -> &FreeEnergy {
        &self.energy
    }

    pub fn metric(&self) -> &CoupledSolver {
        &self.metric
    }

    pub fn weights(&self) -> (&[f64], &[f64]) {
        (&self.w_bulk, &self.w_surf)
    }

    pub fn n_bulk(&self) -> usize {
        self.w_bulk.len()
    }

    pub fn n_surface(&self) -> usize {
        self.w_surf.len()
    }

    /// `β Σ wφ + Σ wψ`.
    pub fn mass(&self, state: &State) -> f64 {
        self.model.beta * weighted_sum(&self.w_bulk, &state.phi) + weighted_sum(&self.w_surf, &state.psi)
    }

    pub fn check_state(&self, state: &State) -> Result<()> {
        Error::check_len("phi", self.n_bulk(), state.phi.len())?;
        Error::check_len("psi", self.n_surface(), state.psi.len())?;
        if state.is_finite() {
            Ok(())
        } else {
            Err(Error::Contract("state has non-finite entries".into()))
        }
    }

    /// `‖βν − μ|Γ‖_w` for the chemical potentials of `state`.
    pub fn equilibrium_gap(&self, state: &State) -> f64 {
        let mu = self.energy.chemical_potential_bulk(&state.phi);
        let nu = self.energy.chemical_potential_surface(&state.psi);
        let gap: Vec<f64> = nu.iter().zip(&self.trace).map(|(n, &t)| self.model.beta * n - mu[t]).collect();
        weighted_norm(&self.w_surf, &gap)
    }

    fn block_weights(&self, blocks: Blocks) -> Vec<f64> {
        match blocks {
            Blocks::Both => self.w_bulk.iter().chain(&self.w_surf).copied().collect(),
            Blocks::Bulk => self.w_bulk.clone(),
            Blocks::Surf => self.w_surf.clone(),
        }
    }

    /// Stacked potentials `μ̂(x)` for the given blocks.
    fn potentials(&self, blocks: Blocks, x: &[f64]) -> Vec<f64> {
        let nb = self.n_bulk();
        match blocks {
            Blocks::Both => {
                let mut m = self.energy.chemical_potential_bulk(&x[..nb]);
                m.extend(self.energy.chemical_potential_surface(&x[nb..]));
                m
            }
            Blocks::Bulk => self.energy.chemical_potential_bulk(x),
            Blocks::Surf => self.energy.chemical_potential_surface(x),
        }
    }

    /// `(F''(φ), G''(ψ))` for the blocks present, plus the block offsets.
    fn second_derivatives(&self, blocks: Blocks, x: &[f64]) -> (Option<Vec<f64>>, Option<Vec<f64>>, usize) {
        let nb = self.n_bulk();
        match blocks {
            Blocks::Both => (
                Some(self.energy.bulk_potential(&x[..nb]).second),
                Some(self.energy.surface_potential(&x[nb..]).second),
                nb,
            ),
            Blocks::Bulk => (Some(self.energy.bulk_potential(x).second), None, 0),
            Blocks::Surf => (None, Some(self.energy.surface_potential(x).second), 0),
        }
    }

    /// Adds `c · (row k of H)` into `row`, with `H = diag(F'') − W` on the
    /// bulk block and `diag(G'') − W_Γ` on the surface block.
    fn add_hessian_row(
        &self,
        row: &mut [f64],
        k: usize,
        c: f64,
        f2: &Option<Vec<f64>>,
        g2: &Option<Vec<f64>>,
        surf_offset: usize,
        blocks: Blocks,
    ) {
        let bulk_rows = match blocks {
            Blocks::Both | Blocks::Bulk => self.n_bulk(),
            Blocks::Surf => 0,
        };
        let (op, second, offset, local) = if k < bulk_rows {
            (self.energy.bulk_operator(), f2.as_ref().expect("bulk block"), 0, k)
        } else {
            (self.energy.surface_operator(), g2.as_ref().expect("surface block"), surf_offset, k - surf_offset)
        };
        let kr = op.kernel_row(local);
        let w = op.weights();
        let target = &mut row[offset..offset + op.len()];
        for ((t, kv), wv) in target.iter_mut().zip(kr).zip(w) {
            *t -= c * (kv * wv);
        }
        row[offset + local] += c * second[local];
    }

    /// Newton solve of `D(x − x_old)/τ + op μ̂(x) = 0`.
    fn flow_solve(&self, op: &CsrMatrix, blocks: Blocks, x_old: &[f64], tau: f64, cfg: &StepConfig) -> core::result::Result<NewtonOutcome, Vec<f64>> {
        let w = self.block_weights(blocks);
        let n = w.len();
        let residual = |x: &[f64]| {
            let am = op.mul_vec(&self.potentials(blocks, x));
            let r: Vec<f64> = (0..n).map(|i| w[i] * (x[i] - x_old[i]) / tau + am[i]).collect();
            let norm = libm::sqrt(r.iter().zip(&w).map(|(ri, wi)| ri * ri / wi).sum::<f64>());
            (r, norm)
        };
        let jacobian = |x: &[f64]| {
            let (f2, g2, off) = self.second_derivatives(blocks, x);
            let mut rows = vec![0.0; n * n];
            for i in 0..n {
                let row = &mut rows[i * n..(i + 1) * n];
                row[i] += w[i] / tau;
                let (cols, vals) = op.row(i);
                for (&k, &a) in cols.iter().zip(vals) {
                    self.add_hessian_row(row, k, a, &f2, &g2, off, blocks);
                }
            }
            dense_from_rows(n, &rows)
        };
        newton(x_old.to_vec(), cfg.newton_tol, cfg.max_newton, residual, jacobian)
    }

    /// Newton solve of the single-potential Dirichlet system.
    fn dirichlet_solve(&self, x_old: &[f64], tau: f64, cfg: &StepConfig) -> core::result::Result<NewtonOutcome, Vec<f64>> {
        let (nb, ns) = (self.n_bulk(), self.n_surface());
        let n = nb + ns;
        let beta = self.model.beta;
        let op = &self.operator;
        let residual = |x: &[f64]| {
            let mu = self.energy.chemical_potential_bulk(&x[..nb]);
            let nu = self.energy.chemical_potential_surface(&x[nb..]);
            let am = op.mul_vec(&mu);
            let mut r: Vec<f64> = (0..nb).map(|i| self.w_bulk[i] * (x[i] - x_old[i]) / tau + am[i]).collect();
            for (j, &t) in self.trace.iter().enumerate() {
                r[t] += self.w_surf[j] * (x[nb + j] - x_old[nb + j]) / (beta * tau);
            }
            r.extend(nu.iter().zip(&self.trace).map(|(v, &t)| v - mu[t] / beta));
            let norm = libm::sqrt(
                r[..nb].iter().zip(&self.w_bulk).map(|(ri, wi)| ri * ri / wi).sum::<f64>()
                    + r[nb..].iter().zip(&self.w_surf).map(|(ri, wi)| wi * ri * ri).sum::<f64>(),
            );
            (r, norm)
        };
        let jacobian = |x: &[f64]| {
            let (f2, g2, _) = self.second_derivatives(Blocks::Both, x);
            let mut rows = vec![0.0; n * n];
            for i in 0..nb {
                let row = &mut rows[i * n..(i + 1) * n];
                row[i] += self.w_bulk[i] / tau;
                let (cols, vals) = op.row(i);
                for (&k, &a) in cols.iter().zip(vals) {
                    self.add_hessian_row(row, k, a, &f2, &g2, nb, Blocks::Both);
                }
            }
            for (j, &t) in self.trace.iter().enumerate() {
                rows[t * n + nb + j] += self.w_surf[j] / (beta * tau);
                let row = &mut rows[(nb + j) * n..(nb + j + 1) * n];
                self.add_hessian_row(row, t, -1.0 / beta, &f2, &g2, nb, Blocks::Both);
                self.add_hessian_row(row, nb + j, 1.0, &f2, &g2, nb, Blocks::Both);
            }
            dense_from_rows(n, &rows)
        };
        newton(x_old.to_vec(), cfg.newton_tol, cfg.max_newton, residual, jacobian)
    }

    /// One attempt at step size `tau`.
    fn attempt(&self, state: &State, tau: f64, cfg: &StepConfig) -> core::result::Result<(State, usize, Vec<f64>), Vec<f64>> {
        let nb = self.n_bulk();
        let stacked: Vec<f64> = state.phi.iter().chain(&state.psi).copied().collect();
        let (phi, psi, iters, history) = match self.model.coupling {
            Coupling::Robin { .. } => {
                let out = self.flow_solve(&self.operator, Blocks::Both, &stacked, tau, cfg)?;
                let mut x = out.x;
                let psi = x.split_off(nb);
                (x, psi, out.iters, out.history)
            }
            Coupling::Dirichlet => {
                let out = self.dirichlet_solve(&stacked, tau, cfg)?;
                let mut x = out.x;
                let psi = x.split_off(nb);
                (x, psi, out.iters, out.history)
            }
            Coupling::Decoupled => {
                let (ob, os) = self.split.as_ref().expect("decoupled operators");
                let bulk = self.flow_solve(ob, Blocks::Bulk, &state.phi, tau, cfg)?;
                let surf = self.flow_solve(os, Blocks::Surf, &state.psi, tau, cfg)?;
                // report the combined residual of the two independent solves
                let len = bulk.history.len().max(surf.history.len());
                let at = |h: &[f64], k: usize| h[k.min(h.len() - 1)];
                let history = (0..len)
                    .map(|k| libm::hypot(at(&bulk.history, k), at(&surf.history, k)))
                    .collect();
                (bulk.x, surf.x, bulk.iters.max(surf.iters), history)
            }
        };
        Ok((
            State {
                phi,
                psi,
                t: state.t + tau,
            },
            iters,
            history,
        ))
    }

    /// `E(new) + ‖new − old‖²_*/(2τ) − E(old)` in the metric of the model.
    pub fn certificate(&self, old: &State, new: &State, tau: f64, tol: f64) -> Result<CertificateReport> {
        let e_old = self.energy.total_energy(&old.phi, &old.psi, Representation::ConvolutionForm);
        let e_new = self.energy.total_energy(&new.phi, &new.psi, Representation::ConvolutionForm);
        let delta = CoupledField::new(
            new.phi.iter().zip(&old.phi).map(|(a, b)| a - b).collect(),
            new.psi.iter().zip(&old.psi).map(|(a, b)| a - b).collect(),
        );
        let movement_norm = self.metric.norm(&delta)?;
        let value = e_new + movement_norm * movement_norm / (2.0 * tau) - e_old;
        let tolerance = tol * (1.0 + e_old.abs());
        Ok(CertificateReport {
            energy_old: e_old,
            energy_new: e_new,
            movement_norm,
            value,
            tolerance,
            passed: value <= tolerance,
        })
    }

    /// Advances by one step, halving `τ` on Newton failure.
    pub fn step(&self, state: &State, cfg: &StepConfig) -> Result<(State, StepReport)> {
        cfg.validate()?;
        self.check_state(state)?;
        let mut tau = cfg.tau;
        let mut last_history = Vec::new();
        for halvings in 0..=cfg.max_halvings {
            match self.attempt(state, tau, cfg) {
                Ok((new, iters, history)) => {
                    let report = self.report(state, &new, tau, halvings, iters, history, cfg)?;
                    return Ok((new, report));
                }
                Err(history) => last_history = history,
            }
            tau *= cfg.backoff;
        }
        Err(Error::NewtonDivergence {
            attempts: cfg.max_halvings + 1,
            history: last_history,
        })
    }

    pub fn step_robin(&self, state: &State, cfg: &StepConfig) -> Result<(State, StepReport)> {
        self.require(matches!(self.model.coupling, Coupling::Robin { .. }), "robin")?;
        self.step(state, cfg)
    }

    pub fn step_dirichlet(&self, state: &State, cfg: &StepConfig) -> Result<(State, StepReport)> {
        self.require(self.model.coupling == Coupling::Dirichlet, "dirichlet")?;
        self.step(state, cfg)
    }

    pub fn step_decoupled(&self, state: &State, cfg: &StepConfig) -> Result<(State, StepReport)> {
        self.require(self.model.coupling == Coupling::Decoupled, "decoupled")?;
        self.step(state, cfg)
    }

    fn require(&self, ok: bool, which: &str) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::Contract(alloc::format!(
                "stepper was built for the {} model, not {which}",
                self.model.coupling.name()
            )))
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn report(
        &self,
        old: &State,
        new: &State,
        tau: f64,
        halvings: usize,
        iters: usize,
        history: Vec<f64>,
        cfg: &StepConfig,
    ) -> Result<StepReport> {
        let certificate = self.certificate(old, new, tau, cfg.certificate_tol)?;
        let parts_before = self.energy.energy_parts(&old.phi, &old.psi, Representation::ConvolutionForm);
        let parts_after = self.energy.energy_parts(&new.phi, &new.psi, Representation::ConvolutionForm);
        let (gap, flux) = match self.model.coupling {
            Coupling::Robin { l } => {
                let g = self.equilibrium_gap(new);
                (g, g / l)
            }
            Coupling::Dirichlet => (0.0, f64::NAN),
            Coupling::Decoupled => (self.equilibrium_gap(new), 0.0),
        };
        let n = history.len();
        let quadratic_ratio = if n >= 2 && history[n - 2] > 0.0 {
            Some(history[n - 1] / (history[n - 2] * history[n - 2]))
        } else {
            None
        };
        Ok(StepReport {
            newton_iters: iters,
            final_residual: *history.last().unwrap_or(&0.0),
            residual_history: history,
            quadratic_ratio,
            tau_used: tau,
            halvings,
            energy_before: certificate.energy_old,
            energy_after: certificate.energy_new,
            energy_difference_form: self.energy.total_energy(&new.phi, &new.psi, Representation::DifferenceForm),
            parts_before,
            parts_after,
            movement_norm: certificate.movement_norm,
            certificate,
            mass_value: self.mass(new),
            mass_bulk: weighted_sum(&self.w_bulk, &new.phi),
            mass_surf: weighted_sum(&self.w_surf, &new.psi),
            equilibrium_gap: gap,
            flux_norm: flux,
        })
    }

    /// Runs `n_steps` steps, stopping early on failure. `observer` sees
    /// every accepted step.
    pub fn run(&self, initial: State, cfg: &StepConfig, n_steps: usize, mut observer: impl FnMut(usize, &State, &StepReport)) -> Trajectory {
        let mut states = vec![initial];
        let mut reports = Vec::with_capacity(n_steps);
        let mut failure = None;
        for k in 0..n_steps {
            match self.step(states.last().expect("nonempty"), cfg) {
                Ok((s, r)) => {
                    observer(k + 1, &s, &r);
                    states.push(s);
                    reports.push(r);
                }
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
        }
        Trajectory { states, reports, failure }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// The initial state followed by every accepted state.
    pub states: Vec<State>,
    pub reports: Vec<StepReport>,
    pub failure: Option<Error>,
}

impl Trajectory {
    pub fn last(&self) -> &State {
        self.states.last().expect("trajectory holds the initial state")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{NodalField, PenaltySpec, PotentialSpec};
    use crate::mesh::{assemble_fem, build_disk_mesh};
    use crate::nonlocal::{assemble_bulk_convolution, assemble_surface_convolution, KernelSpec};

    fn stepper(coupling: Coupling, level: u32) -> Stepper {
        let mesh = build_disk_mesh(level).unwrap();
        let fem = assemble_fem(&mesh).unwrap();
        let bulk = assemble_bulk_convolution(&mesh, &KernelSpec::gaussian(1.0, 0.5)).unwrap();
        let surf = assemble_surface_convolution(&mesh, &KernelSpec::gaussian(1.0, 0.5)).unwrap();
        let pot = PotentialSpec {
            f: NodalField::Constant(0.3 * bulk.a_min()),
            g: NodalField::Constant(0.3 * surf.a_min()),
        };
        let model = ModelSpec::new(1.0, coupling);
        let energy = FreeEnergy::new(&bulk, &surf, &pot, &PenaltySpec::none(), &model).unwrap();
        Stepper::new(&fem, energy, model).unwrap()
    }

    #[test]
    fn pure_state_is_a_fixed_point() {
        for coupling in [Coupling::Robin { l: 1.0 }, Coupling::Dirichlet, Coupling::Decoupled] {
            let s = stepper(coupling, 2);
            let state = State::new(vec![1.0; s.n_bulk()], vec![1.0; s.n_surface()]);
            let (next, report) = s.step(&state, &StepConfig::default()).unwrap();
            assert_eq!(next.phi, state.phi);
            assert_eq!(next.psi, state.psi);
            assert_eq!(report.newton_iters, 0);
        }
    }

    #[test]
    fn wrong_model_entry_point_is_rejected() {
        let s = stepper(Coupling::Decoupled, 1);
        let state = State::new(vec![0.0; s.n_bulk()], vec![0.0; s.n_surface()]);
        assert!(matches!(s.step_robin(&state, &StepConfig::default()), Err(Error::Contract(_))));
    }

    #[test]
    fn zero_steps_keep_the_initial_state() {
        let s = stepper(Coupling::Robin { l: 1.0 }, 1);
        let state = State::new(vec![0.2; s.n_bulk()], vec![-0.1; s.n_surface()]);
        let traj = s.run(state.clone(), &StepConfig::default(), 0, |_, _, _| {});
        assert_eq!(traj.states, vec![state]);
        assert!(traj.reports.is_empty());
    }

    #[test]
    fn identical_states_have_zero_certificate() {
        let s = stepper(Coupling::Robin { l: 1.0 }, 2);
        let phi: Vec<f64> = (0..s.n_bulk()).map(|i| 0.1 * libm::sin(i as f64)).collect();
        let state = State::new(phi, vec![0.05; s.n_surface()]);
        let c = s.certificate(&state, &state, 1e-3, 1e-9).unwrap();
        assert_eq!(c.value, 0.0);
        assert!(c.passed);
    }
}

//! The property suite behind `nlch certify`.
//!
//! The configuration supplies kernels, potentials, penalty, model
//! parameters and the seed; mesh level, step counts, `τ`, `L` and initial
//! data are pinned per criterion so that results are comparable between
//! configurations.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nlch_core::elliptic::{
    CoupledField, CoupledSolver, EllipticParams, LinearSolverKind, MassKind, NeumannSolver, Side,
};
use nlch_core::energy::{first_variation_check, Coupling, Representation};
use nlch_core::mesh::{assemble_fem, build_disk_mesh, FemMatrices};
use nlch_core::weighted_sum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{FieldSource, InitKind, InitSpec, RunConfig};
use crate::io::{self, Checkpoint};
use crate::problem::Problem;
use crate::simulate::{drive, run_simulation, Trajectory};
use crate::sweep::run_sweep;
use crate::{Error, Result};

pub const CRITERIA: [(u32, &str); 10] = [
    (1, "energy representation identity"),
    (2, "variational gradient"),
    (3, "dissipation and step certificate"),
    (4, "mass conservation"),
    (5, "stationarity of pure states"),
    (6, "singular limit L -> 0"),
    (7, "singular limit L -> infinity"),
    (8, "elliptic operators"),
    (9, "Newton health"),
    (10, "determinism and checkpoint round-trip"),
];

pub const MESH_LEVEL: u32 = 4;
pub const TAU: f64 = 1e-3;
pub const ROBIN_STEPS: usize = 200;
pub const DECOUPLED_STEPS: usize = 100;
pub const STATIONARY_STEPS: usize = 50;
pub const SWEEP_STEPS: usize = 50;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: u32,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {:<40} {} ({:.1} s) {}",
            self.id,
            self.title,
            if self.passed { "PASS" } else { "FAIL" },
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

pub fn outcomes_csv(outcomes: &[Outcome]) -> String {
    let mut s = String::from("criterion,title,passed,seconds,detail\n");
    for o in outcomes {
        let _ = writeln!(
            s,
            "{},{},{},{:.3},\"{}\"",
            o.id,
            o.title,
            o.passed,
            o.elapsed.as_secs_f64(),
            o.detail.replace('"', "'")
        );
    }
    s
}

struct Check {
    passed: bool,
    detail: String,
}

impl Check {
    fn new(passed: bool, detail: String) -> Self {
        Self { passed, detail }
    }
}

pub struct Suite {
    base: RunConfig,
    work_dir: PathBuf,
    robin: OnceLock<std::result::Result<Trajectory, String>>,
}

impl Suite {
    /// `work_dir` receives the files of the determinism criterion.
    pub fn new(cfg: &RunConfig, work_dir: &Path) -> Self {
        let mut base = cfg.clone();
        base.mesh_level = MESH_LEVEL;
        base.step = nlch_core::stepper::StepConfig {
            tau: TAU,
            ..Default::default()
        };
        base.model.coupling = Coupling::Robin { l: 1.0 };
        base.n_steps = ROBIN_STEPS;
        base.snapshot_every = 0;
        base.init_phi = InitSpec::noise(0.0, 0.1);
        base.init_psi = InitSpec::noise(0.0, 0.1);
        Self {
            base,
            work_dir: work_dir.to_path_buf(),
            robin: OnceLock::new(),
        }
    }

    pub fn base(&self) -> &RunConfig {
        &self.base
    }

    pub fn run(&self, id: u32) -> Outcome {
        let title = CRITERIA.iter().find(|c| c.0 == id).map_or("unknown", |c| c.1);
        let start = Instant::now();
        let result = match id {
            1 => self.energy_identity(),
            2 => self.variational_gradient(),
            3 => self.dissipation(),
            4 => self.mass_conservation(),
            5 => self.stationarity(),
            6 => self.limit_dirichlet(),
            7 => self.limit_decoupled(),
            8 => self.elliptic(),
            9 => self.newton_health(),
            10 => self.determinism(),
            _ => Err(Error::Contract(format!("no criterion {id}"))),
        };
        let (passed, detail) = match result {
            Ok(c) => (c.passed, c.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        Outcome {
            id,
            title,
            passed,
            detail,
            elapsed: start.elapsed(),
        }
    }

    pub fn run_all(&self, mut report: impl FnMut(&Outcome)) -> Vec<Outcome> {
        CRITERIA
            .iter()
            .map(|&(id, _)| {
                let o = self.run(id);
                report(&o);
                o
            })
            .collect()
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.base.seed);
        rng.set_stream(stream);
        rng
    }

    fn robin_run(&self) -> Result<&Trajectory> {
        let r = self.robin.get_or_init(|| {
            let run = || -> Result<Trajectory> {
                let p = Problem::build(&self.base)?;
                drive(&p, p.initial_state()?, 0, ROBIN_STEPS, |_, _, _, _| Ok(()))
            };
            run().map_err(|e| e.to_string())
        });
        match r {
            Ok(t) => match &t.failure {
                Some(e) => Err(Error::Contract(format!("Robin run failed after {} steps: {e}", t.final_step))),
                None => Ok(t),
            },
            Err(e) => Err(Error::Contract(e.clone())),
        }
    }

    fn energy_identity(&self) -> Result<Check> {
        let p = Problem::build(&self.base)?;
        let e = p.stepper.energy();
        let mut rng = self.rng(1);
        let mut worst = 0.0f64;
        for _ in 0..50 {
            let phi: Vec<f64> = (0..e.n_bulk()).map(|_| rng.random_range(-1.5..1.5)).collect();
            let psi: Vec<f64> = (0..e.n_surface()).map(|_| rng.random_range(-1.5..1.5)).collect();
            let conv = e.total_energy(&phi, &psi, Representation::ConvolutionForm);
            let diff = e.total_energy(&phi, &psi, Representation::DifferenceForm);
            worst = worst.max((diff - conv).abs() / (1.0 + conv.abs()));
        }
        Ok(Check::new(worst < 1e-12, format!("max |E_diff - E_conv|/(1+|E|) = {worst:.3e} (< 1e-12)")))
    }

    fn variational_gradient(&self) -> Result<Check> {
        let p = Problem::build(&self.base)?;
        let e = p.stepper.energy();
        let mut rng = self.rng(2);
        let mut worst_rel = 0.0f64;
        let mut min_order = f64::INFINITY;
        for _ in 0..20 {
            let mut draw = |n: usize, a: f64| -> Vec<f64> { (0..n).map(|_| rng.random_range(-a..a)).collect() };
            let phi = draw(e.n_bulk(), 1.2);
            let psi = draw(e.n_surface(), 1.2);
            let zeta = draw(e.n_bulk(), 1.0);
            let xi = draw(e.n_surface(), 1.0);
            let errs: Vec<f64> = [1e-3, 1e-4, 1e-5]
                .iter()
                .map(|&h| first_variation_check(e, &phi, &psi, &zeta, &xi, h).rel_error)
                .collect();
            worst_rel = worst_rel.max(errs[2]);
            min_order = min_order.min((errs[0] / errs[1]).log10());
        }
        Ok(Check::new(
            worst_rel < 1e-6 && min_order >= 1.8,
            format!("max rel error at 1e-5 = {worst_rel:.3e} (< 1e-6); min observed order 1e-3 -> 1e-4 = {min_order:.3} (>= 1.8)"),
        ))
    }

    fn dissipation(&self) -> Result<Check> {
        let t = self.robin_run()?;
        let mut worst_increase = f64::NEG_INFINITY;
        let mut worst_cert = f64::NEG_INFINITY;
        let mut ok = t.reports.len() == ROBIN_STEPS;
        for w in t.rows.windows(2) {
            let slack = 1e-9 * (1.0 + w[0].energy.abs());
            let rel = (w[1].energy - w[0].energy) / slack;
            worst_increase = worst_increase.max(rel);
            ok &= w[1].energy <= w[0].energy + slack;
        }
        for r in &t.reports {
            worst_cert = worst_cert.max(r.certificate.value / r.certificate.tolerance);
            ok &= r.certificate.passed;
        }
        Ok(Check::new(
            ok,
            format!(
                "{} steps; max (E_new - E_old)/(1e-9(1+|E|)) = {worst_increase:.3e} (<= 1); max certificate/tolerance = {worst_cert:.3e} (<= 1)",
                t.reports.len()
            ),
        ))
    }

    fn mass_conservation(&self) -> Result<Check> {
        let t = self.robin_run()?;
        let m = t.rows[0].mass_beta_weighted;
        let robin = t.rows.iter().map(|r| (r.mass_beta_weighted - m).abs() / (1.0 + m.abs())).fold(0.0, f64::max);

        let mut cfg = self.base.clone();
        cfg.model.coupling = Coupling::Decoupled;
        let p = Problem::build(&cfg)?;
        let d = drive(&p, p.initial_state()?, 0, DECOUPLED_STEPS, |_, _, _, _| Ok(()))?;
        if let Some(e) = d.failure {
            return Err(e.into());
        }
        let (mb, ms) = (d.rows[0].mass_bulk, d.rows[0].mass_surf);
        let bulk = d.rows.iter().map(|r| (r.mass_bulk - mb).abs() / (1.0 + mb.abs())).fold(0.0, f64::max);
        let surf = d.rows.iter().map(|r| (r.mass_surf - ms).abs() / (1.0 + ms.abs())).fold(0.0, f64::max);
        Ok(Check::new(
            robin < 1e-10 && bulk < 1e-10 && surf < 1e-10,
            format!("Robin drift {robin:.3e}; decoupled bulk {bulk:.3e}, surface {surf:.3e} (all < 1e-10)"),
        ))
    }

    fn stationarity(&self) -> Result<Check> {
        let mut worst = 0.0f64;
        let mut parts = Vec::new();
        for coupling in [Coupling::Robin { l: 1.0 }, Coupling::Dirichlet, Coupling::Decoupled] {
            if coupling == Coupling::Dirichlet && self.base.model.beta <= 0.0 {
                continue;
            }
            let mut cfg = self.base.clone();
            cfg.model.coupling = coupling;
            cfg.penalty_b = FieldSource::Scalar(0.0);
            cfg.init_phi = InitSpec::constant(1.0);
            cfg.init_psi = InitSpec::constant(1.0);
            let p = Problem::build(&cfg)?;
            let t = drive(&p, p.initial_state()?, 0, STATIONARY_STEPS, |_, _, _, _| Ok(()))?;
            if let Some(e) = t.failure {
                return Err(e.into());
            }
            let s = &t.final_state;
            let dev = s.phi.iter().chain(&s.psi).map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
            worst = worst.max(dev);
            parts.push(format!("{} {dev:.1e}", coupling.name()));
        }
        Ok(Check::new(worst <= 1e-12, format!("max |x - 1| after {STATIONARY_STEPS} steps: {} (<= 1e-12)", parts.join(", "))))
    }

    /// Shared base of both sweeps: a smooth mode plus small noise.
    pub fn sweep_base(&self) -> RunConfig {
        let mut cfg = self.base.clone();
        cfg.n_steps = SWEEP_STEPS;
        cfg.init_phi = InitSpec {
            kind: InitKind::Noise,
            mean: 0.0,
            amplitude: 0.02,
            gradient: [0.3, 0.0],
        };
        cfg.init_psi = InitSpec {
            kind: InitKind::Noise,
            mean: 0.0,
            amplitude: 0.02,
            gradient: [0.0, -0.3],
        };
        cfg
    }

    fn limit_dirichlet(&self) -> Result<Check> {
        if self.base.model.beta <= 0.0 {
            return Ok(Check::new(false, "the Dirichlet limit needs beta > 0".into()));
        }
        let r = run_sweep(&self.sweep_base(), &[1.0, 1e-1, 1e-2, 1e-3], None, crate::sweep::default_threads())?;
        let gaps: Vec<String> = r.rows.iter().map(|x| format!("{:.3e}", x.gap_l2)).collect();
        let dists: Vec<String> = r.rows.iter().map(|x| format!("{:.3e}", x.dist_dirichlet_0star)).collect();
        let dir = r.dirichlet_monotone.unwrap_or(false);
        Ok(Check::new(
            r.gap_monotone && r.gap_slope >= 0.4 && dir,
            format!(
                "gap (L=1e-3..1) [{}] monotone {}; slope {:.3} (>= 0.4, empirical); dist to Dirichlet [{}] monotone {dir}",
                gaps.join(" "),
                r.gap_monotone,
                r.gap_slope,
                dists.join(" ")
            ),
        ))
    }

    fn limit_decoupled(&self) -> Result<Check> {
        let r = run_sweep(&self.sweep_base(), &[1.0, 1e1, 1e2, 1e3], None, crate::sweep::default_threads())?;
        let flux: Vec<String> = r.rows.iter().map(|x| format!("{:.3e}", x.flux_l2)).collect();
        let dists: Vec<String> = r.rows.iter().map(|x| format!("{:.3e}", x.dist_decoupled_l2)).collect();
        Ok(Check::new(
            r.flux_monotone && r.flux_slope >= 0.4 && r.decoupled_monotone,
            format!(
                "flux (L=1..1e3) [{}] monotone {}; slope vs 1/L {:.3} (>= 0.4, empirical); dist to decoupled [{}] monotone {}",
                flux.join(" "),
                r.flux_monotone,
                r.flux_slope,
                dists.join(" "),
                r.decoupled_monotone
            ),
        ))
    }

    fn elliptic(&self) -> Result<Check> {
        let mesh = build_disk_mesh(self.base.mesh_level)?;
        let fem = assemble_fem(&mesh)?;
        let model = &self.base.model;
        let mut rng = self.rng(8);
        let mut worst_weak = 0.0f64;
        let mut worst_sym = 0.0f64;
        let mut positive = true;

        let mut couplings = vec![Coupling::Robin { l: 1.0 }, Coupling::Robin { l: 1e-2 }];
        if model.beta > 0.0 {
            couplings.push(Coupling::Dirichlet);
        }
        for coupling in couplings {
            let params = EllipticParams {
                coupling,
                ..EllipticParams::from_model(model, MassKind::Lumped)
            };
            let solver = CoupledSolver::new(&fem, params)?;
            let sample = |rng: &mut ChaCha8Rng| random_mean_free(rng, &fem, model.beta);
            let r1 = sample(&mut rng);
            let r2 = sample(&mut rng);
            let s1 = solver.solve(&r1)?;
            let s2 = solver.solve(&r2)?;
            for _ in 0..30 {
                let test = match coupling {
                    Coupling::Dirichlet => {
                        let rho: Vec<f64> = (0..fem.lumped_bulk.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
                        solver.lift(&rho)
                    }
                    _ => random_pair(&mut rng, &fem),
                };
                worst_weak = worst_weak.max(solver.weak_residual(&r1, &s1, &test).1);
            }
            let a = solver.mass_pairing(&r1, &s2);
            let b = solver.mass_pairing(&r2, &s1);
            worst_sym = worst_sym.max((a - b).abs() / a.abs().max(b.abs()));
            // ⟨r, S r⟩_M = −‖r‖²_* < 0 for r ≠ 0
            positive &= solver.norm(&r1)? > 0.0 && solver.mass_pairing(&r1, &s1) < 0.0;
        }
        for side in [Side::Bulk, Side::Surface] {
            let solver = NeumannSolver::new(&fem, side, model.m_bulk, MassKind::Lumped, LinearSolverKind::Direct)?;
            let w = match side {
                Side::Bulk => &fem.lumped_bulk,
                Side::Surface => &fem.lumped_surf,
            };
            let r = mean_free(w, (0..w.len()).map(|_| rng.random_range(-1.0..1.0)).collect());
            let u = solver.solve(&r)?;
            for _ in 0..30 {
                let z: Vec<f64> = (0..w.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let a = solver.form(&u, &z);
                let b: f64 = w.iter().zip(&r).zip(&z).map(|((w, r), z)| w * r * z).sum();
                worst_weak = worst_weak.max((a + b).abs() / a.abs().max(b.abs()));
            }
            positive &= solver.norm(&r)? > 0.0;
        }
        let (errors, min_order) = circle_eigenfunction_orders()?;
        let errs: Vec<String> = errors.iter().map(|e| format!("{e:.3e}")).collect();
        Ok(Check::new(
            worst_weak < 1e-10 && worst_sym < 1e-10 && positive && min_order >= 1.8,
            format!(
                "max weak residual {worst_weak:.3e} (< 1e-10); symmetry defect {worst_sym:.3e} (< 1e-10); positivity {positive}; \
                 surface eigenfunction errors levels 2-5 [{}] min order {min_order:.3} (>= 1.8)",
                errs.join(" ")
            ),
        ))
    }

    fn newton_health(&self) -> Result<Check> {
        let t = self.robin_run()?;
        let max_iters = t.reports.iter().map(|r| r.newton_iters).max().unwrap_or(0);
        let max_res = t.reports.iter().map(|r| r.final_residual).fold(0.0, f64::max);
        let ratios: Vec<f64> = t.reports.iter().filter_map(|r| r.quadratic_ratio).collect();
        let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
        let halvings: usize = t.reports.iter().map(|r| r.halvings).sum();
        Ok(Check::new(
            max_iters <= 8 && max_res <= 1e-10,
            format!(
                "max iterations {max_iters} (<= 8); max final residual {max_res:.3e} (<= 1e-10); last-ratio quadratic fit logged on {} steps, max r_k/r_(k-1)^2 = {max_ratio:.3e}; halvings {halvings}",
                ratios.len()
            ),
        ))
    }

    fn determinism(&self) -> Result<Check> {
        let dir = self.work_dir.join("determinism");
        let mut cfg = self.base.clone();
        cfg.mesh_level = 3;
        cfg.n_steps = 20;
        cfg.snapshot_every = 10;
        let run = |name: &str, n_steps: usize, resume: Option<&Checkpoint>| -> Result<PathBuf> {
            let mut p_cfg = cfg.clone();
            p_cfg.n_steps = n_steps;
            let problem = Problem::build(&p_cfg)?;
            let out = dir.join(name);
            let summary = run_simulation(&problem, &out, resume)?;
            if let Some(e) = summary.trajectory.failure {
                return Err(e.into());
            }
            Ok(out)
        };
        let a = run("a", 20, None)?;
        let b = run("b", 20, None)?;
        let same_seed = read(&a.join("diagnostics.csv"))? == read(&b.join("diagnostics.csv"))?;
        let c = run("c", 10, None)?;
        let ck = Checkpoint::read(&c.join("checkpoint.txt"))?;
        run("c", 20, Some(&ck))?;
        let resumed = read(&a.join("diagnostics.csv"))? == read(&c.join("diagnostics.csv"))?
            && read(&a.join("checkpoint.txt"))? == read(&c.join("checkpoint.txt"))?
            && read(&a.join("fields_000020.txt"))? == read(&c.join("fields_000020.txt"))?;
        let again = Checkpoint::parse(Path::new("checkpoint"), &ck.to_text())?;
        let round_trip = again == ck
            && again
                .state
                .phi
                .iter()
                .chain(&again.state.psi)
                .zip(ck.state.phi.iter().chain(&ck.state.psi))
                .all(|(x, y)| x.to_bits() == y.to_bits());
        Ok(Check::new(
            same_seed && resumed && round_trip,
            format!(
                "same seed byte-identical diagnostics {same_seed}; 10+10 resumed run byte-identical to 20-step run {resumed}; checkpoint text round-trip bitwise {round_trip}"
            ),
        ))
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| Error::Io(io::IoError::Os { path: path.to_path_buf(), source }))
}

fn mean_free(w: &[f64], v: Vec<f64>) -> Vec<f64> {
    let m = weighted_sum(w, &v) / w.iter().sum::<f64>();
    v.into_iter().map(|x| x - m).collect()
}

fn random_pair(rng: &mut ChaCha8Rng, fem: &FemMatrices) -> CoupledField {
    CoupledField::new(
        (0..fem.lumped_bulk.len()).map(|_| rng.random_range(-1.0..1.0)).collect(),
        (0..fem.lumped_surf.len()).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
}

/// Random pair with `β Σ w r_Ω + Σ w r_Γ = 0`, corrected on the bulk.
fn random_mean_free(rng: &mut ChaCha8Rng, fem: &FemMatrices, beta: f64) -> CoupledField {
    let mut r = random_pair(rng, fem);
    let area: f64 = fem.lumped_bulk.iter().sum();
    let m = r.beta_mean(beta, &fem.lumped_bulk, &fem.lumped_surf);
    let shift = m / (beta * area);
    for v in &mut r.bulk {
        *v -= shift;
    }
    r
}

/// Max-norm errors of the surface Neumann solve of `sin θ` (exact solution
/// `−sin θ`) with consistent mass on levels 2–5, and the smallest observed
/// order between consecutive levels.
pub fn circle_eigenfunction_orders() -> Result<(Vec<f64>, f64)> {
    let mut errors = Vec::new();
    for level in 2..=5 {
        let mesh = build_disk_mesh(level)?;
        let fem = assemble_fem(&mesh)?;
        let solver = NeumannSolver::new(&fem, Side::Surface, 1.0, MassKind::Consistent, LinearSolverKind::Direct)?;
        let pts = mesh.boundary_points();
        let r: Vec<f64> = pts.iter().map(|p| p[1].atan2(p[0]).sin()).collect();
        let u = solver.solve(&r)?;
        errors.push(u.iter().zip(&r).map(|(u, r)| (u + r).abs()).fold(0.0, f64::max));
    }
    let min_order = errors.windows(2).map(|w| (w[0] / w[1]).log2()).fold(f64::INFINITY, f64::min);
    Ok((errors, min_order))
}

/// Formats outcomes for `certify.csv` and the terminal; returns whether all
/// passed.
pub fn summarize(outcomes: &[Outcome]) -> (bool, String) {
    let passed = outcomes.iter().filter(|o| o.passed).count();
    (
        passed == outcomes.len(),
        format!("{passed}/{} criteria passed", outcomes.len()),
    )
}

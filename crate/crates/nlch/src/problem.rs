//! A configured problem: mesh, matrices, energy, stepper and initial data.

use std::fmt::Write as _;

use nlch_core::energy::{Coupling, FreeEnergy, ModelSpec, NodalField, PenaltySpec, PotentialSpec};
use nlch_core::mesh::{assemble_fem, build_disk_mesh, FemMatrices, TriMesh};
use nlch_core::nonlocal::{
    assemble_bulk_convolution, assemble_surface_convolution, check_bulk_admissibility, check_surface_admissibility,
    AdmissibilityReport,
};
use nlch_core::stepper::{State, Stepper};
use nlch_core::{weighted_sum, Error as CoreError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{fmt_f64, ConfigError, FieldSource, InitKind, InitSpec, RunConfig};
use crate::io::load_nodal;
use crate::Result;

/// One logged admissibility item.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub tag: &'static str,
    pub key: &'static str,
    pub quantity: &'static str,
    pub value: f64,
    /// The bound `value` is compared against; its direction is in `relation`.
    pub bound: f64,
    pub relation: &'static str,
    pub passed: bool,
}

pub const CHECKS_HEADER: &str = "tag,key,quantity,value,relation,bound,passed";

impl Check {
    fn new(tag: &'static str, key: &'static str, quantity: &'static str, value: f64, relation: &'static str, bound: f64) -> Self {
        let passed = match relation {
            ">" => value > bound,
            ">=" => value >= bound,
            "<" => value < bound,
            "<=" => value <= bound,
            "!=" => value != bound,
            _ => unreachable!("unknown relation {relation}"),
        };
        Self {
            tag,
            key,
            quantity,
            value,
            bound,
            relation,
            passed,
        }
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.tag,
            self.key,
            self.quantity,
            fmt_f64(self.value),
            self.relation,
            fmt_f64(self.bound),
            self.passed
        )
    }
}

pub fn checks_csv(checks: &[Check]) -> String {
    let mut s = String::from(CHECKS_HEADER);
    s.push('\n');
    for c in checks {
        let _ = writeln!(s, "{}", c.to_csv());
    }
    s
}

pub struct Problem {
    pub config: RunConfig,
    pub mesh: TriMesh,
    pub fem: FemMatrices,
    pub bulk_report: AdmissibilityReport,
    pub surface_report: AdmissibilityReport,
    pub checks: Vec<Check>,
    pub stepper: Stepper,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("config", &self.config)
            .field("n_bulk", &self.mesh.n_bulk())
            .field("n_surface", &self.mesh.n_surface())
            .finish_non_exhaustive()
    }
}

/// Attaches the config key to a core admissibility error.
fn keyed(key: &str, e: CoreError) -> ConfigError {
    ConfigError::invalid(key, e.to_string())
}

fn nodal(src: &FieldSource, name: &str, n: usize) -> Result<NodalField> {
    Ok(match src {
        FieldSource::Scalar(x) => NodalField::Constant(*x),
        FieldSource::File(path) => NodalField::Nodal(load_nodal(path, Some(name), n)?),
    })
}

impl Problem {
    /// Assembles everything `cfg` describes and runs the admissibility
    /// checks. Violations are reported against the responsible key.
    pub fn build(cfg: &RunConfig) -> Result<Self> {
        let mesh = build_disk_mesh(cfg.mesh_level).map_err(|e| keyed("mesh.level", e))?;
        let fem = assemble_fem(&mesh)?;
        let bulk_report = check_bulk_admissibility(&cfg.kernel_bulk, &mesh).map_err(|e| keyed("kernel.bulk", e))?;
        let surface_report =
            check_surface_admissibility(&cfg.kernel_surface, &mesh).map_err(|e| keyed("kernel.surface", e))?;
        let bulk = assemble_bulk_convolution(&mesh, &cfg.kernel_bulk).map_err(|e| keyed("kernel.bulk", e))?;
        let surf = assemble_surface_convolution(&mesh, &cfg.kernel_surface).map_err(|e| keyed("kernel.surface", e))?;
        let potential = PotentialSpec {
            f: nodal(&cfg.potential_f, "f", mesh.n_bulk())?,
            g: nodal(&cfg.potential_g, "g", mesh.n_surface())?,
        };
        let penalty = PenaltySpec {
            b: nodal(&cfg.penalty_b, "b", mesh.n_surface())?,
        };
        let model = cfg.model;
        let checks = admissibility_checks(&model, &bulk_report, &surface_report, &potential, &penalty);
        let energy = FreeEnergy::new(&bulk, &surf, &potential, &penalty, &model).map_err(|e| {
            let key = match &e {
                CoreError::Assumption { tag: "A5", .. } => "penalty.b",
                CoreError::Assumption { message, .. } if message.contains(" g ") || message.starts_with("max g") => {
                    "potential.g"
                }
                CoreError::Assumption { .. } => "potential.f",
                _ => "model",
            };
            keyed(key, e)
        })?;
        let stepper = Stepper::new(&fem, energy, model)?;
        Ok(Self {
            config: cfg.clone(),
            mesh,
            fem,
            bulk_report,
            surface_report,
            checks,
            stepper,
        })
    }

    pub fn model(&self) -> &ModelSpec {
        self.stepper.model()
    }

    /// Seeded initial data; the bulk field draws first from the stream.
    pub fn initial_state(&self) -> Result<State> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        let phi = init_field(&self.config.init_phi, "phi", self.mesh.vertices(), &self.fem.lumped_bulk, &mut rng)?;
        let psi = init_field(
            &self.config.init_psi,
            "psi",
            &self.mesh.boundary_points(),
            &self.fem.lumped_surf,
            &mut rng,
        )?;
        let state = State::new(phi, psi);
        self.stepper.check_state(&state)?;
        Ok(state)
    }
}

fn init_field(spec: &InitSpec, name: &str, points: &[[f64; 2]], w: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let n = points.len();
    let measure: f64 = w.iter().sum();
    let mean_free = |v: Vec<f64>| {
        let m = weighted_sum(w, &v) / measure;
        v.into_iter().map(|x| x - m).collect::<Vec<_>>()
    };
    let mut field = match &spec.kind {
        InitKind::File(path) => return Ok(load_nodal(path, Some(name), n)?),
        InitKind::Constant => vec![spec.mean; n],
        InitKind::Noise => {
            let xi: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            mean_free(xi).into_iter().map(|x| spec.mean + spec.amplitude * x).collect()
        }
    };
    if spec.gradient != [0.0, 0.0] {
        let lin = mean_free(points.iter().map(|p| spec.gradient[0] * p[0] + spec.gradient[1] * p[1]).collect());
        for (f, l) in field.iter_mut().zip(lin) {
            *f += l;
        }
    }
    Ok(field)
}

fn admissibility_checks(
    model: &ModelSpec,
    bulk: &AdmissibilityReport,
    surf: &AdmissibilityReport,
    potential: &PotentialSpec,
    penalty: &PenaltySpec,
) -> Vec<Check> {
    let mut c = vec![
        Check::new("A1", "model.m_bulk", "m_bulk", model.m_bulk, ">", 0.0),
        Check::new("A1", "model.m_surf", "m_surf", model.m_surf, ">", 0.0),
        Check::new("A1", "model.eps", "eps", model.eps, ">", 0.0),
        Check::new("A1", "model.delta", "delta", model.delta, ">", 0.0),
    ];
    match model.coupling {
        Coupling::Robin { l } => {
            c.push(Check::new("A1", "model.beta", "beta", model.beta, "!=", 0.0));
            c.push(Check::new("A1", "model.L", "L", l, ">", 0.0));
        }
        Coupling::Dirichlet => c.push(Check::new("A1", "model.beta", "beta", model.beta, ">", 0.0)),
        Coupling::Decoupled => c.push(Check::new("A1", "model.beta", "beta", model.beta, "!=", 0.0)),
    }
    for (key, r) in [("kernel.bulk", bulk), ("kernel.surface", surf)] {
        c.push(Check::new("A2", key, "a_min", r.a_min, ">", 0.0));
        c.push(Check::new("A2", key, "a_max", r.a_max, "<", f64::INFINITY));
        c.push(Check::new("A2", key, "b_max", r.b_max, "<", f64::INFINITY));
    }
    // the whole-plane integral bounds a only for the area kernel
    if let Some(u) = bulk.analytic_upper_bound {
        c.push(Check::new("A2", "kernel.bulk", "a_max_vs_plane_integral", bulk.a_max, "<=", u));
    }
    let a_b = model.eps * bulk.a_min;
    let a_s = model.delta * surf.a_min;
    let (f_max, g_max) = (potential.f.max(), potential.g.max());
    c.push(Check::new("A3", "potential.f", "min_f", potential.f.min(), ">=", 0.0));
    c.push(Check::new("A3", "potential.f", "max_f_vs_eps_a_min", f_max, "<", a_b));
    c.push(Check::new("A3", "potential.g", "min_g", potential.g.min(), ">=", 0.0));
    c.push(Check::new("A3", "potential.g", "max_g_vs_delta_a_min", g_max, "<", a_s));
    // c_* and c_⊛, the convexity margins of F and G
    let (c_star, c_circ) = ((a_b - f_max) / model.eps, (a_s - g_max) / model.delta);
    c.push(Check::new("A4", "potential.f", "c_star", c_star, ">", 0.0));
    c.push(Check::new("A4", "potential.g", "c_circledast", c_circ, ">", 0.0));
    let b_abs = penalty.b.max().abs().max(penalty.b.min().abs());
    c.push(Check::new("A5", "penalty.b", "max_abs_b", b_abs, "<", f64::INFINITY));
    // B(z, s) = b(z) s, so B' is constant in s: L_B = 0
    c.push(Check::new("A5", "penalty.b", "lipschitz_B_prime_vs_c_circledast", 0.0, "<", c_circ));
    // F'' = f (3s² − 1) + a ≤ γ (1 + s²) with γ = 3 max f + a_max
    c.push(Check::new("A7", "potential.f", "gamma_F_second", (3.0 * f_max + bulk.a_max * model.eps) / model.eps, "<", f64::INFINITY));
    c.push(Check::new("A7", "potential.g", "gamma_G_second", (3.0 * g_max + surf.a_max * model.delta) / model.delta, "<", f64::INFINITY));
    c.push(Check::new("A8", "penalty.b", "sup_abs_B_second_vs_c_circledast", 0.0, "<", c_circ));
    c
}

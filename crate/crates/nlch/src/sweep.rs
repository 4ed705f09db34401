//! Robin runs over a range of `L`, compared with the Dirichlet (`L → 0`)
//! and decoupled (`L → ∞`) reference models.
//!
//! All members share mesh, initial data and `τ`; only the coupling
//! changes. Rates are least-squares slopes of log-log data and are
//! empirical: the convergence statements behind them are qualitative.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Mutex;

use nlch_core::elliptic::{CoupledField, CoupledSolver, EllipticParams, MassKind};
use nlch_core::energy::{Coupling, ModelSpec};
use nlch_core::stepper::State;
use nlch_core::weighted_dot;

use crate::config::{fmt_f64, RunConfig};
use crate::io;
use crate::problem::Problem;
use crate::simulate::{drive, run_simulation, Trajectory};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub l: f64,
    /// `(Σₖ τₖ ‖βνᵏ − μᵏ‖²_w)^½`.
    pub gap_l2: f64,
    /// The same for `(βν − μ)/L`.
    pub flux_l2: f64,
    pub dist_dirichlet_0star: f64,
    pub dist_dirichlet_l2: f64,
    pub dist_decoupled_0star: f64,
    pub dist_decoupled_l2: f64,
}

pub const SWEEP_HEADER: &str =
    "L,gap_l2,flux_l2,dist_dirichlet_0star,dist_dirichlet_l2,dist_decoupled_0star,dist_decoupled_l2";

impl SweepRow {
    pub fn to_csv(&self) -> String {
        [
            self.l,
            self.gap_l2,
            self.flux_l2,
            self.dist_dirichlet_0star,
            self.dist_dirichlet_l2,
            self.dist_decoupled_0star,
            self.dist_decoupled_l2,
        ]
        .iter()
        .map(|v| fmt_f64(*v))
        .collect::<Vec<_>>()
        .join(",")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Sorted by increasing `L`.
    pub rows: Vec<SweepRow>,
    /// Slope of `log gap_l2` against `log L`.
    pub gap_slope: f64,
    /// Slope of `log flux_l2` against `log(1/L)`.
    pub flux_slope: f64,
    /// `gap_l2` strictly increases with `L`.
    pub gap_monotone: bool,
    /// `flux_l2` strictly decreases with `L`.
    pub flux_monotone: bool,
    /// Distance to the Dirichlet run strictly increases with `L`.
    pub dirichlet_monotone: Option<bool>,
    /// Distance to the decoupled run strictly decreases with `L`.
    pub decoupled_monotone: bool,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{SWEEP_HEADER}\n");
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.to_csv());
        }
        s
    }

    pub fn slopes_csv(&self) -> String {
        let mut s = String::from("name,value,note\n");
        let _ = writeln!(s, "gap_l2_vs_L,{},empirical least-squares log-log slope", fmt_f64(self.gap_slope));
        let _ = writeln!(s, "flux_l2_vs_inv_L,{},empirical least-squares log-log slope", fmt_f64(self.flux_slope));
        let _ = writeln!(s, "gap_l2_increasing_in_L,{},trend", self.gap_monotone);
        let _ = writeln!(s, "flux_l2_decreasing_in_L,{},trend", self.flux_monotone);
        let dir = self.dirichlet_monotone.map_or("n/a".to_string(), |b| b.to_string());
        let _ = writeln!(s, "dist_dirichlet_0star_increasing_in_L,{dir},trend");
        let _ = writeln!(s, "dist_decoupled_l2_decreasing_in_L,{},trend", self.decoupled_monotone);
        s
    }
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn strictly(values: impl Iterator<Item = f64>, increasing: bool) -> bool {
    let v: Vec<f64> = values.collect();
    v.windows(2).all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] })
}

pub fn validate_ls(ls: &[f64]) -> Result<Vec<f64>> {
    if ls.len() < 4 {
        return Err(Error::Contract(format!("a sweep needs at least 4 values of L, got {}", ls.len())));
    }
    if let Some(bad) = ls.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
        return Err(Error::Contract(format!("L = {bad} is not positive and finite")));
    }
    let mut sorted = ls.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Contract("L values must be distinct".into()));
    }
    let span = (sorted[sorted.len() - 1] / sorted[0]).log10();
    if span < 3.0 - 1e-9 {
        return Err(Error::Contract(format!("L values span {span:.2} decades; at least 3 are required")));
    }
    Ok(sorted)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Member {
    Robin(f64),
    Dirichlet,
    Decoupled,
}

impl Member {
    fn coupling(self) -> Coupling {
        match self {
            Member::Robin(l) => Coupling::Robin { l },
            Member::Dirichlet => Coupling::Dirichlet,
            Member::Decoupled => Coupling::Decoupled,
        }
    }

    fn dir_name(self) -> String {
        match self {
            Member::Robin(l) => format!("L_{}", fmt_f64(l)),
            Member::Dirichlet => "dirichlet".into(),
            Member::Decoupled => "decoupled".into(),
        }
    }
}

struct MemberRun {
    member: Member,
    trajectory: Trajectory,
    n: (usize, usize),
}

fn run_member(base: &RunConfig, member: Member, out: Option<&Path>) -> Result<MemberRun> {
    let mut cfg = base.clone();
    cfg.model.coupling = member.coupling();
    let problem = Problem::build(&cfg)?;
    let n = (problem.mesh.n_bulk(), problem.mesh.n_surface());
    let trajectory = match out {
        Some(dir) => run_simulation(&problem, &dir.join(member.dir_name()), None)?.trajectory,
        None => drive(&problem, problem.initial_state()?, 0, cfg.n_steps, |_, _, _, _| Ok(()))?,
    };
    if let Some(e) = trajectory.failure {
        return Err(Error::Contract(format!("sweep member {} failed: {e}", member.dir_name())));
    }
    Ok(MemberRun { member, trajectory, n })
}

fn time_norm(t: &Trajectory, value: impl Fn(usize) -> f64) -> f64 {
    t.reports
        .iter()
        .enumerate()
        .map(|(k, r)| r.tau_used * value(k + 1).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Runs the sweep. With `out = Some(dir)`, each member writes its own run
/// directory below `dir` and the aggregate goes to `sweep.csv` and
/// `sweep_slopes.csv`.
pub fn run_sweep(base: &RunConfig, ls: &[f64], out: Option<&Path>, threads: usize) -> Result<SweepResult> {
    let ls = validate_ls(ls)?;
    let mut members: Vec<Member> = Vec::new();
    if base.model.beta > 0.0 {
        members.push(Member::Dirichlet);
    }
    members.push(Member::Decoupled);
    members.extend(ls.iter().map(|&l| Member::Robin(l)));
    if let Some(dir) = out {
        io::create_dir(dir)?;
    }

    let queue = Mutex::new(members.clone().into_iter());
    let results = Mutex::new(Vec::new());
    let threads = threads.clamp(1, members.len());
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let Some(member) = queue.lock().expect("queue").next() else { break };
                let r = run_member(base, member, out);
                let failed = r.is_err();
                results.lock().expect("results").push((member, r));
                if failed {
                    break;
                }
            });
        }
    });
    let mut runs = Vec::new();
    for (_, r) in results.into_inner().expect("results") {
        runs.push(r?);
    }
    let n = runs[0].n;
    if runs.iter().any(|r| r.n != n) {
        return Err(Error::Contract("sweep members were discretized differently".into()));
    }
    let find = |m: Member| runs.iter().find(|r| r.member == m);
    let decoupled = find(Member::Decoupled).expect("decoupled reference");
    let dirichlet = find(Member::Dirichlet);

    // shared metric objects, built once on the base discretization
    let mut cfg = base.clone();
    cfg.model.coupling = Coupling::Decoupled;
    let problem = Problem::build(&cfg)?;
    let fem = &problem.fem;
    let s0 = if base.model.beta > 0.0 {
        let model = ModelSpec {
            coupling: Coupling::Dirichlet,
            ..base.model
        };
        Some(CoupledSolver::new(fem, EllipticParams::from_model(&model, MassKind::Lumped))?)
    } else {
        None
    };
    let diff = |a: &State, b: &State| {
        CoupledField::new(
            a.phi.iter().zip(&b.phi).map(|(x, y)| x - y).collect(),
            a.psi.iter().zip(&b.psi).map(|(x, y)| x - y).collect(),
        )
    };
    let l2 = |d: &CoupledField| {
        (weighted_dot(&fem.lumped_bulk, &d.bulk, &d.bulk) + weighted_dot(&fem.lumped_surf, &d.surf, &d.surf)).sqrt()
    };
    let star = |d: &CoupledField| -> Result<f64> {
        match &s0 {
            Some(s) => Ok(s.norm(d)?),
            None => Ok(f64::NAN),
        }
    };

    let mut rows = Vec::new();
    for &l in &ls {
        let run = find(Member::Robin(l)).expect("robin member");
        let t = &run.trajectory;
        let terminal = &t.final_state;
        let (dd0, dd2) = match dirichlet {
            Some(d) => {
                let diff = diff(terminal, &d.trajectory.final_state);
                (star(&diff)?, l2(&diff))
            }
            None => (f64::NAN, f64::NAN),
        };
        let dec = diff(terminal, &decoupled.trajectory.final_state);
        rows.push(SweepRow {
            l,
            gap_l2: time_norm(t, |k| t.rows[k].equilibrium_gap),
            flux_l2: time_norm(t, |k| t.rows[k].flux_norm),
            dist_dirichlet_0star: dd0,
            dist_dirichlet_l2: dd2,
            dist_decoupled_0star: star(&dec)?,
            dist_decoupled_l2: l2(&dec),
        });
    }
    let gap_pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.l.ln(), r.gap_l2.ln())).collect();
    let flux_pts: Vec<(f64, f64)> = rows.iter().map(|r| ((1.0 / r.l).ln(), r.flux_l2.ln())).collect();
    let result = SweepResult {
        gap_slope: fit_slope(&gap_pts),
        flux_slope: fit_slope(&flux_pts),
        gap_monotone: strictly(rows.iter().map(|r| r.gap_l2), true),
        flux_monotone: strictly(rows.iter().map(|r| r.flux_l2), false),
        dirichlet_monotone: dirichlet.map(|_| strictly(rows.iter().map(|r| r.dist_dirichlet_0star), true)),
        decoupled_monotone: strictly(rows.iter().map(|r| r.dist_decoupled_l2), false),
        rows,
    };
    if let Some(dir) = out {
        io::write_text(&dir.join("sweep.csv"), &result.to_csv())?;
        io::write_text(&dir.join("sweep_slopes.csv"), &result.slopes_csv())?;
    }
    Ok(result)
}

/// Threads to use when the caller does not say.
pub fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

pub fn parse_l_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| Error::Contract(format!("cannot read `{s}` as a value of L"))))
        .collect()
}

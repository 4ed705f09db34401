//! Time stepping with on-disk diagnostics.
//!
//! A run directory holds `diagnostics.csv`, `run.log`, `mesh.txt`,
//! `config.echo`, `admissibility.csv`, optional `fields_NNNNNN.txt`
//! snapshots and `checkpoint.txt`. Rows are flushed as steps are accepted,
//! so a failed run leaves everything up to the last good step behind.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nlch_core::energy::{Coupling, Representation};
use nlch_core::stepper::{State, StepReport};

use crate::config::{fmt_f64, RunConfig};
use crate::io::{self, Checkpoint, DiagnosticsRow, IoError, DIAGNOSTICS_HEADER};
use crate::problem::{checks_csv, Problem};
use crate::{Error, Result};

/// Diagnostics of a state that has not been produced by a step.
pub fn initial_row(problem: &Problem, step: usize, state: &State) -> DiagnosticsRow {
    let st = &problem.stepper;
    let energy = st.energy();
    let (w_bulk, w_surf) = st.weights();
    let gap = st.equilibrium_gap(state);
    let (gap, flux) = match st.model().coupling {
        Coupling::Robin { l } => (gap, gap / l),
        Coupling::Dirichlet => (0.0, f64::NAN),
        Coupling::Decoupled => (gap, 0.0),
    };
    DiagnosticsRow {
        step,
        t: state.t,
        energy: energy.total_energy(&state.phi, &state.psi, Representation::ConvolutionForm),
        energy_difference_form: energy.total_energy(&state.phi, &state.psi, Representation::DifferenceForm),
        mass_beta_weighted: st.mass(state),
        mass_bulk: nlch_core::weighted_sum(w_bulk, &state.phi),
        mass_surf: nlch_core::weighted_sum(w_surf, &state.psi),
        equilibrium_gap: gap,
        flux_norm: flux,
        newton_iters: 0,
        residual: 0.0,
    }
}

/// In-memory result of stepping.
#[derive(Debug)]
pub struct Trajectory {
    /// Row 0 describes the starting state.
    pub rows: Vec<DiagnosticsRow>,
    pub reports: Vec<StepReport>,
    pub final_state: State,
    pub final_step: usize,
    pub failure: Option<nlch_core::Error>,
}

/// Steps `initial` (which is step `start`) up to step `n_steps`, handing
/// each accepted step to `sink`. A solver failure ends the loop and is
/// returned in [`Trajectory::failure`]; a sink error aborts.
pub fn drive(
    problem: &Problem,
    initial: State,
    start: usize,
    n_steps: usize,
    mut sink: impl FnMut(usize, &State, &StepReport, &DiagnosticsRow) -> Result<()>,
) -> Result<Trajectory> {
    let cfg = &problem.config.step;
    let mut rows = vec![initial_row(problem, start, &initial)];
    let mut reports = Vec::new();
    let mut state = initial;
    let mut failure = None;
    let mut k = start;
    while k < n_steps {
        match problem.stepper.step(&state, cfg) {
            Ok((next, report)) => {
                k += 1;
                let row = DiagnosticsRow::from_report(k, &next, &report);
                sink(k, &next, &report, &row)?;
                rows.push(row);
                reports.push(report);
                state = next;
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    Ok(Trajectory {
        rows,
        reports,
        final_state: state,
        final_step: k,
        failure,
    })
}

/// Output directory for `cfg`: absolute paths are kept, relative ones go
/// under `root`.
pub fn output_dir(cfg: &RunConfig, root: Option<&Path>) -> PathBuf {
    if cfg.output.is_absolute() {
        cfg.output.clone()
    } else {
        root.unwrap_or(Path::new(".")).join(&cfg.output)
    }
}

/// Configurations agree on everything that affects the trajectory.
fn same_physics(a: &RunConfig, b: &RunConfig) -> bool {
    let strip = |c: &RunConfig| RunConfig {
        n_steps: 0,
        snapshot_every: 0,
        output: PathBuf::new(),
        ..c.clone()
    };
    strip(a) == strip(b)
}

fn open_append(path: &Path) -> Result<BufWriter<File>> {
    let f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|source| IoError::Os {
            path: path.to_path_buf(),
            source,
        })?;
    Ok(BufWriter::new(f))
}

fn write_line(w: &mut BufWriter<File>, path: &Path, line: &str) -> Result<()> {
    writeln!(w, "{line}")
        .and_then(|_| w.flush())
        .map_err(|source| IoError::Os {
            path: path.to_path_buf(),
            source,
        })?;
    Ok(())
}

fn log_line(k: usize, r: &StepReport) -> String {
    let history: Vec<String> = r.residual_history.iter().map(|v| fmt_f64(*v)).collect();
    format!(
        "step {k}: tau {} halvings {} newton {} residuals [{}] quadratic_ratio {} certificate {} <= {} {}",
        fmt_f64(r.tau_used),
        r.halvings,
        r.newton_iters,
        history.join(" "),
        r.quadratic_ratio.map_or("n/a".to_string(), fmt_f64),
        fmt_f64(r.certificate.value),
        fmt_f64(r.certificate.tolerance),
        if r.certificate.passed { "ok" } else { "FAILED" }
    )
}

#[derive(Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub trajectory: Trajectory,
}

/// Runs `problem` into `out_dir`, optionally continuing from a checkpoint.
pub fn run_simulation(problem: &Problem, out_dir: &Path, resume: Option<&Checkpoint>) -> Result<RunSummary> {
    let cfg = &problem.config;
    io::create_dir(out_dir)?;
    io::write_text(&out_dir.join("mesh.txt"), &io::mesh_to_string(&problem.mesh))?;
    io::write_text(&out_dir.join("config.echo"), &cfg.echo())?;
    io::write_text(&out_dir.join("admissibility.csv"), &checks_csv(&problem.checks))?;

    let diag_path = out_dir.join("diagnostics.csv");
    let log_path = out_dir.join("run.log");
    let (initial, start) = match resume {
        Some(ck) => {
            let saved = RunConfig::parse(&ck.config_echo, Path::new(""))?;
            if !same_physics(&saved, cfg) {
                return Err(Error::Contract(
                    "checkpoint was written for a different configuration (only run.n_steps, run.output and run.snapshot_every may change)".into(),
                ));
            }
            problem.stepper.check_state(&ck.state)?;
            // keep the rows up to the checkpoint, drop anything after it
            let kept = match io::read_diagnostics(&diag_path) {
                Ok(rows) => rows.into_iter().filter(|r| r.step <= ck.step).collect(),
                Err(IoError::Os { .. }) => Vec::new(),
                Err(e) => return Err(e.into()),
            };
            let mut text = format!("{DIAGNOSTICS_HEADER}\n");
            for r in &kept {
                text.push_str(&r.to_csv());
                text.push('\n');
            }
            io::write_text(&diag_path, &text)?;
            (ck.state.clone(), ck.step)
        }
        None => {
            let state = problem.initial_state()?;
            let mut text = format!("{DIAGNOSTICS_HEADER}\n");
            text.push_str(&initial_row(problem, 0, &state).to_csv());
            text.push('\n');
            io::write_text(&diag_path, &text)?;
            io::write_text(&log_path, "")?;
            if cfg.snapshot_every > 0 {
                write_snapshot(out_dir, 0, &state)?;
            }
            (state, 0)
        }
    };

    let mut diag = open_append(&diag_path)?;
    let mut log = open_append(&log_path)?;
    if let Some(ck) = resume {
        write_line(&mut log, &log_path, &format!("resumed from step {}", ck.step))?;
    }
    let trajectory = drive(problem, initial, start, cfg.n_steps, |k, state, report, row| {
        write_line(&mut diag, &diag_path, &row.to_csv())?;
        write_line(&mut log, &log_path, &log_line(k, report))?;
        if cfg.snapshot_every > 0 && k % cfg.snapshot_every == 0 {
            write_snapshot(out_dir, k, state)?;
        }
        Ok(())
    })?;
    if let Some(e) = &trajectory.failure {
        write_line(&mut log, &log_path, &format!("failed at step {}: {e}", trajectory.final_step + 1))?;
    }
    let ck = Checkpoint {
        step: trajectory.final_step,
        state: trajectory.final_state.clone(),
        config_echo: cfg.echo(),
    };
    io::write_text(&out_dir.join("checkpoint.txt"), &ck.to_text())?;
    Ok(RunSummary {
        out_dir: out_dir.to_path_buf(),
        trajectory,
    })
}

fn write_snapshot(dir: &Path, step: usize, state: &State) -> Result<()> {
    let path = dir.join(format!("fields_{step:06}.txt"));
    io::write_text(&path, &io::state_fields(state).to_text())?;
    Ok(())
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Parser, Subcommand};

use nlch::certify::{outcomes_csv, summarize, Suite, CRITERIA};
use nlch::config::RunConfig;
use nlch::io::{self, Checkpoint};
use nlch::problem::{checks_csv, Problem};
use nlch::simulate::{output_dir, run_simulation};
use nlch::sweep::{default_threads, parse_l_list, run_sweep};
use nlch::OUTPUT_ROOT_ENV;

/// Nonlocal Cahn–Hilliard with a nonlocal dynamic boundary condition and
/// Robin coupling, on the unit disk.
///
/// Relative `run.output` paths are placed under $NLCH_OUTPUT_ROOT (default:
/// the current directory).
#[derive(Parser)]
#[command(name = "nlch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time-step a configuration, writing diagnostics, snapshots and a checkpoint.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Continue from a checkpoint written by an earlier run of the same configuration.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Robin runs over several L plus Dirichlet and decoupled references.
    Sweep {
        config: PathBuf,
        /// Comma-separated values of L (at least 4, spanning at least 3 decades).
        #[arg(long = "L", value_name = "LIST")]
        l: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Assemble the problem and report the admissibility checks only.
    Check { config: PathBuf },
    /// Run the acceptance criteria; exit status 0 iff all pass.
    Certify {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated criterion numbers (default: all).
        #[arg(long)]
        only: Option<String>,
    },
}

fn load(path: &Path, seed: Option<u64>) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::load(path).with_context(|| format!("reading configuration {}", path.display()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn output_root() -> Option<PathBuf> {
    std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from)
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, seed, resume } => {
            let cfg = load(&config, seed)?;
            let problem = Problem::build(&cfg)?;
            let out = output_dir(&cfg, output_root().as_deref());
            let ck = resume.map(|p| Checkpoint::read(&p)).transpose()?;
            let summary = run_simulation(&problem, &out, ck.as_ref())?;
            let t = &summary.trajectory;
            let last = t.rows.last().expect("initial row");
            println!(
                "{}: step {} t {} energy {:.12e} mass {:.12e}",
                out.display(),
                t.final_step,
                last.t,
                last.energy,
                last.mass_beta_weighted
            );
            if let Some(e) = &t.failure {
                eprintln!("run stopped at step {}: {e}", t.final_step + 1);
                return Ok(ExitCode::from(1));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { config, l, seed, threads } => {
            let cfg = load(&config, seed)?;
            let ls = parse_l_list(&l)?;
            let out = output_dir(&cfg, output_root().as_deref());
            let result = run_sweep(&cfg, &ls, Some(&out), threads.unwrap_or_else(default_threads))?;
            print!("{}", result.to_csv());
            print!("{}", result.slopes_csv());
            println!("written to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { config } => {
            let cfg = load(&config, None)?;
            let problem = Problem::build(&cfg)?;
            print!("{}", checks_csv(&problem.checks));
            println!(
                "mesh level {}: {} bulk nodes, {} boundary nodes",
                cfg.mesh_level,
                problem.mesh.n_bulk(),
                problem.mesh.n_surface()
            );
            Ok(if problem.checks.iter().all(|c| c.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Certify { config, seed, only } => {
            let cfg = load(&config, seed)?;
            let ids: Vec<u32> = match only {
                Some(list) => list
                    .split(',')
                    .map(|s| s.trim().parse::<u32>().with_context(|| format!("criterion `{s}`")))
                    .collect::<anyhow::Result<_>>()?,
                None => CRITERIA.iter().map(|c| c.0).collect(),
            };
            let out = output_dir(&cfg, output_root().as_deref()).join("certify");
            io::create_dir(&out)?;
            let suite = Suite::new(&cfg, &out);
            let mut outcomes = Vec::new();
            for id in ids {
                let o = suite.run(id);
                println!("{}", o.line());
                outcomes.push(o);
            }
            io::write_text(&out.join("certify.csv"), &outcomes_csv(&outcomes))?;
            let (all, text) = summarize(&outcomes);
            println!("{text}");
            Ok(if all { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

//! Configuration, simulation driver, `L`-sweeps and certification on top of
//! `nlch-core`.
//!
//! | module | contents |
//! |---|---|
//! | [`config`] | `section.key = value` run configuration and its echo |
//! | [`io`] | mesh, field, checkpoint and diagnostics files |
//! | [`problem`] | assembly of a configured problem, initial data, admissibility log |
//! | [`simulate`] | time stepping with diagnostics, snapshots and checkpoints |
//! | [`sweep`] | Robin runs over a range of `L` against the two limit models |
//! | [`certify`] | the property suite behind `nlch certify` |

pub mod certify;
pub mod config;
pub mod io;
pub mod problem;
pub mod simulate;
pub mod sweep;

/// Name of the environment variable that holds the output root.
pub const OUTPUT_ROOT_ENV: &str = "NLCH_OUTPUT_ROOT";

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Io(#[from] io::IoError),
    #[error(transparent)]
    Core(#[from] nlch_core::Error),
    #[error("{0}")]
    Contract(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

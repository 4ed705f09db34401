//! Solver core for the nonlocal Cahn–Hilliard equation with a nonlocal
//! dynamic boundary condition.
//!
//! The bulk phase field `phi` and the surface phase field `psi` evolve as a
//! gradient flow of a nonlocal free energy with respect to a bulk–surface
//! H⁻¹-type metric. The two chemical potentials are coupled by the Robin
//! condition `L ∂ₙμ = βν − μ`; the limits `L → 0` (Dirichlet coupling
//! `μ|Γ = βν`) and `L → ∞` (decoupled no-flux systems) are available as
//! separate models.
//!
//! The crate is `no_std` (with `alloc`). Enabling the default `std` feature
//! only switches the dense and sparse factorizations to their fast,
//! architecture-specific kernels.
//!
//! Module map:
//!
//! * [`mesh`]: triangulated unit disk, boundary loop and P1 matrices.
//! * [`nonlocal`]: interaction kernels and dense convolution operators.
//! * [`energy`]: potentials, penalty, free energy and chemical potentials.
//! * [`elliptic`]: bulk–surface solution operators and dual norms.
//! * [`stepper`]: implicit gradient-flow steps for the three models.
#![no_std]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod elliptic;
pub mod energy;
mod error;
pub mod mesh;
pub mod nonlocal;
pub mod sparse;
pub mod stepper;

mod dense;
mod vecops;

pub use error::Error;
pub use vecops::{weighted_dot, weighted_norm, weighted_sum};

/// Result alias used throughout the crate.
pub type Result<T, E = Error> = core::result::Result<T, E>;

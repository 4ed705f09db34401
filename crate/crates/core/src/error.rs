use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the solver core.
///
/// Admissibility failures carry the tag of the violated modelling
/// assumption (for example `"A3"`) so that callers can report it verbatim.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{tag}: {message}")]
    Assumption { tag: &'static str, message: String },

    #[error("degenerate triangle {index}: area {area:e} is below {threshold:e}")]
    DegenerateTriangle {
        index: usize,
        area: f64,
        threshold: f64,
    },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("kernel is singular at the origin; use the diagonal rule of the convolution operator")]
    KernelSingularity,

    #[error("capacity exceeded: {what} is {requested}, limit is {limit}")]
    Capacity {
        what: &'static str,
        requested: usize,
        limit: usize,
    },

    #[error("length mismatch for {what}: expected {expected}, got {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("linear solver failed: {message} (pivot ratio {pivot_ratio:e})")]
    LinearSolver { message: String, pivot_ratio: f64 },

    #[error("Newton iteration did not converge after {attempts} step-size attempts (last residuals {history:?})")]
    NewtonDivergence { attempts: usize, history: Vec<f64> },
}

impl Error {
    pub(crate) fn assumption(tag: &'static str, message: impl Into<String>) -> Self {
        Error::Assumption {
            tag,
            message: message.into(),
        }
    }

    pub(crate) fn check_len(what: &'static str, expected: usize, actual: usize) -> crate::Result<()> {
        if expected == actual {
            Ok(())
        } else {
            Err(Error::LengthMismatch {
                what,
                expected,
                actual,
            })
        }
    }
}

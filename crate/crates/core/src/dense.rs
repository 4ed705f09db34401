//! Thin wrappers over faer's dense and sparse LU factorizations.

use alloc::format;
use alloc::vec::Vec;

use faer::linalg::solvers::Solve;
use faer::Mat;

use crate::sparse::CsrMatrix;
use crate::{Error, Result};

/// Ratio of the smallest to the largest |Uᵢᵢ| of a pivoted LU factor.
fn pivot_ratio(u: faer::MatRef<'_, f64>) -> f64 {
    let n = u.nrows().min(u.ncols());
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..n {
        let d = u[(i, i)].abs();
        lo = lo.min(d);
        hi = hi.max(d);
    }
    if hi == 0.0 {
        0.0
    } else {
        lo / hi
    }
}

/// Dense LU with partial pivoting.
pub(crate) struct DenseLu {
    lu: faer::linalg::solvers::PartialPivLu<f64>,
    n: usize,
}

impl DenseLu {
    pub fn factor(m: &Mat<f64>) -> Result<Self> {
        let lu = m.partial_piv_lu();
        let ratio = pivot_ratio(lu.U());
        if !(ratio > 1e-15) || !ratio.is_finite() {
            return Err(Error::LinearSolver {
                message: format!("dense matrix of order {} is numerically singular", m.nrows()),
                pivot_ratio: ratio,
            });
        }
        Ok(Self { lu, n: m.nrows() })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        Error::check_len("right-hand side", self.n, rhs.len())?;
        let b = Mat::<f64>::from_fn(self.n, 1, |i, _| rhs[i]);
        let x = self.lu.solve(&b);
        let out: Vec<f64> = (0..self.n).map(|i| x[(i, 0)]).collect();
        if out.iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(Error::LinearSolver {
                message: "non-finite solution".into(),
                pivot_ratio: pivot_ratio(self.lu.U()),
            })
        }
    }
}

/// Sparse LU of an assembled CSR matrix.
pub(crate) struct SparseLu {
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
    n: usize,
}

impl SparseLu {
    pub fn factor(m: &CsrMatrix) -> Result<Self> {
        let lu = m.to_faer()?.sp_lu().map_err(|e| Error::LinearSolver {
            message: format!("sparse LU failed: {e:?}"),
            pivot_ratio: 0.0,
        })?;
        Ok(Self { lu, n: m.nrows() })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        Error::check_len("right-hand side", self.n, rhs.len())?;
        let b = Mat::<f64>::from_fn(self.n, 1, |i, _| rhs[i]);
        let x = self.lu.solve(&b);
        let out: Vec<f64> = (0..self.n).map(|i| x[(i, 0)]).collect();
        if out.iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(Error::LinearSolver {
                message: "sparse factorization produced a non-finite solution".into(),
                pivot_ratio: 0.0,
            })
        }
    }
}

impl core::fmt::Debug for DenseLu {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("DenseLu").field("n", &self.n).finish_non_exhaustive()
    }
}

impl core::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("SparseLu").field("n", &self.n).finish_non_exhaustive()
    }
}

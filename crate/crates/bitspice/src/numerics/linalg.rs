//! Dense Hermitian linear algebra on top of `faer`.
//!
//! Covariance matrices here are Hermitian positive definite by construction
//! (diagonal loading from the noise term), so everything routes through a
//! Cholesky factorization.

use faer::linalg::solvers::DenseSolveCore;
use faer::prelude::*;
use faer::Side;

use crate::{C64, Error, Result};

/// Pin faer to sequential execution; the target is a single core and the
/// thread pool only adds overhead.
pub fn seq_parallelism() {
    static ONCE: std::sync::Once = std::sync::Once::new();
    ONCE.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

/// Cholesky factorization of a Hermitian positive definite matrix.
pub struct HermitianFactor {
    llt: faer::linalg::solvers::Llt<C64>,
    dim: usize,
}

impl HermitianFactor {
    pub fn new(a: MatRef<'_, C64>) -> Result<Self> {
        seq_parallelism();
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "factorization needs a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let llt = a
            .llt(Side::Lower)
            .map_err(|_| Error::Numerical("matrix is not positive definite".into()))?;
        Ok(Self { llt, dim: a.nrows() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Solve A x = b.
    pub fn solve_vec(&self, b: &[C64]) -> Result<Vec<C64>> {
        if b.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "rhs length {} vs dimension {}",
                b.len(),
                self.dim
            )));
        }
        let rhs = MatRef::from_column_major_slice(b, self.dim, 1);
        let x = self.llt.solve(rhs);
        Ok((0..self.dim).map(|i| x[(i, 0)]).collect())
    }

    /// Full inverse A⁻¹.
    pub fn inverse(&self) -> Mat<C64> {
        self.llt.inverse()
    }

    /// ln det A (real since A is Hermitian PD).
    pub fn log_det(&self) -> f64 {
        let l = self.llt.L();
        (0..self.dim).map(|i| 2.0 * l[(i, i)].re.ln()).sum()
    }
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(a: MatRef<'_, C64>) -> Result<Vec<f64>> {
    seq_parallelism();
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::Numerical("eigenvalue iteration failed".into()))
}

/// Quadratic form vᴴ A v (real part; exact for Hermitian A).
pub fn quadratic_form(a: MatRef<'_, C64>, v: &[C64]) -> f64 {
    let n = v.len();
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..n {
        let mut col = C64::new(0.0, 0.0);
        for i in 0..n {
            col += v[i].conj() * a[(i, j)];
        }
        acc += col * v[j];
    }
    acc.re
}

/// Hermitian matrix times vector.
pub fn mat_vec(a: MatRef<'_, C64>, v: &[C64]) -> Vec<C64> {
    let (r, c) = (a.nrows(), a.ncols());
    assert_eq!(c, v.len());
    let mut out = vec![C64::new(0.0, 0.0); r];
    for j in 0..c {
        let vj = v[j];
        for i in 0..r {
            out[i] += a[(i, j)] * vj;
        }
    }
    out
}

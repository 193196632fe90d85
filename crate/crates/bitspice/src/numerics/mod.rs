//! Shared numerical kernels: the conjugate-gradient solver used for
//! covariance systems, dense Hermitian factorizations, and Gaussian tail
//! functions.

pub mod gauss;
pub mod linalg;

pub use gauss::{inverse_mills_ratio, log_std_normal_cdf, mills_shifted, std_normal_cdf, std_normal_pdf};
pub use linalg::{hermitian_eigenvalues, mat_vec, quadratic_form, seq_parallelism, HermitianFactor};

use crate::{C64, Error, Result};

/// Options for [`cgls_solve`].
#[derive(Debug, Clone, Copy)]
pub struct CglsOptions {
    /// Relative residual target.
    pub tol: f64,
    /// Iteration cap; 0 means 5·N.
    pub max_iter: usize,
}

impl Default for CglsOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 0 }
    }
}

/// Convergence report for [`cgls_solve`].
#[derive(Debug, Clone, Copy)]
pub struct CglsReport {
    pub iterations: usize,
    pub rel_residual: f64,
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Conjugate gradients on a Hermitian positive definite system `R x = rhs`,
/// with `R` available only through matvecs. `apply` writes `R·v` into its
/// second argument.
pub fn cgls_solve(
    apply: impl Fn(&[C64], &mut [C64]),
    rhs: &[C64],
    opts: &CglsOptions,
) -> Result<(Vec<C64>, CglsReport)> {
    cgls_solve_warm(apply, rhs, None, opts)
}

/// [`cgls_solve`] with an optional initial guess. A guess whose residual is
/// no better than the zero vector is discarded, so a stale one cannot make
/// the solve worse; the termination test stays relative to `rhs`.
pub fn cgls_solve_warm(
    apply: impl Fn(&[C64], &mut [C64]),
    rhs: &[C64],
    x0: Option<&[C64]>,
    opts: &CglsOptions,
) -> Result<(Vec<C64>, CglsReport)> {
    let n = rhs.len();
    if !rhs.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        return Err(Error::InvalidArgument("rhs contains non-finite entries".into()));
    }
    let rhs_norm = norm(rhs);
    let mut x = vec![C64::new(0.0, 0.0); n];
    if rhs_norm == 0.0 {
        return Ok((x, CglsReport { iterations: 0, rel_residual: 0.0 }));
    }
    let max_iter = if opts.max_iter == 0 { 5 * n } else { opts.max_iter };

    let mut r = rhs.to_vec();
    if let Some(x0) = x0 {
        debug_assert_eq!(x0.len(), n);
        let mut ax0 = vec![C64::new(0.0, 0.0); n];
        apply(x0, &mut ax0);
        let r0: Vec<C64> = rhs.iter().zip(&ax0).map(|(&b, &a)| b - a).collect();
        let rel = norm(&r0) / rhs_norm;
        if rel <= opts.tol {
            return Ok((x0.to_vec(), CglsReport { iterations: 0, rel_residual: rel }));
        }
        if rel < 1.0 {
            x.copy_from_slice(x0);
            r = r0;
        }
    }
    let mut p = r.clone();
    let mut ap = vec![C64::new(0.0, 0.0); n];
    let mut rho = dot(&r, &r).re;

    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let denom = dot(&p, &ap).re;
        if denom <= 0.0 || !denom.is_finite() {
            return Err(Error::Numerical(format!(
                "operator lost positive definiteness (pᴴAp = {denom:.3e})"
            )));
        }
        let alpha = rho / denom;
        for i in 0..n {
            x[i] += p[i] * alpha;
            r[i] -= ap[i] * alpha;
        }
        let rel = norm(&r) / rhs_norm;
        if rel <= opts.tol {
            return Ok((x, CglsReport { iterations: it, rel_residual: rel }));
        }
        let rho_next = dot(&r, &r).re;
        let beta = rho_next / rho;
        rho = rho_next;
        for i in 0..n {
            p[i] = r[i] + p[i] * beta;
        }
    }
    let rel = norm(&r) / rhs_norm;
    Err(Error::Convergence(format!(
        "cgls stopped after {max_iter} iterations at relative residual {rel:.3e}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use faer::prelude::*;

    #[test]
    fn scaled_identity_converges_immediately() {
        let rhs: Vec<C64> = (0..6).map(|i| C64::new(i as f64, 1.0)).collect();
        let (x, rep) = cgls_solve(
            |v, out| {
                for (o, vi) in out.iter_mut().zip(v) {
                    *o = vi * 2.0;
                }
            },
            &rhs,
            &CglsOptions::default(),
        )
        .unwrap();
        assert_eq!(rep.iterations, 1);
        for (xi, bi) in x.iter().zip(&rhs) {
            assert!((xi - bi * 0.5).norm() < 1e-14);
        }
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let rhs = vec![C64::new(0.0, 0.0); 5];
        let (x, rep) = cgls_solve(|v, out| out.copy_from_slice(v), &rhs, &CglsOptions::default()).unwrap();
        assert_eq!(rep.iterations, 0);
        assert!(x.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn matches_dense_solve() {
        let n = 40;
        let mut s = 11u64;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 33) as f64 / (1u64 << 31) as f64 - 1.0
        };
        let m = Mat::from_fn(n, n, |_, _| C64::new(next(), next()));
        let mut a = &m * m.adjoint();
        for i in 0..n {
            a[(i, i)] += C64::new(2.0, 0.0);
        }
        let rhs: Vec<C64> = (0..n).map(|_| C64::new(next(), next())).collect();
        let (x, _) = cgls_solve(
            |v, out| {
                let prod = super::linalg::mat_vec(a.as_ref(), v);
                out.copy_from_slice(&prod);
            },
            &rhs,
            &CglsOptions { tol: 1e-10, max_iter: 0 },
        )
        .unwrap();
        let f = HermitianFactor::new(a.as_ref()).unwrap();
        let xd = f.solve_vec(&rhs).unwrap();
        let num: f64 = x.iter().zip(&xd).map(|(u, v)| (u - v).norm_sqr()).sum::<f64>().sqrt();
        let den: f64 = xd.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!(num / den < 1e-6, "rel err {}", num / den);
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let n = 30;
        let mut s = 5u64;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 33) as f64 / (1u64 << 31) as f64 - 1.0
        };
        let m = Mat::from_fn(n, n, |_, _| C64::new(next(), next()));
        let mut a = &m * m.adjoint();
        for i in 0..n {
            a[(i, i)] += C64::new(0.1, 0.0);
        }
        let rhs: Vec<C64> = (0..n).map(|_| C64::new(next(), next())).collect();
        let err = cgls_solve(
            |v, out| out.copy_from_slice(&super::linalg::mat_vec(a.as_ref(), v)),
            &rhs,
            &CglsOptions { tol: 1e-14, max_iter: 2 },
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("residual"), "message should carry the residual: {msg}");
    }
}

//! Structured dictionary operators.
//!
//! A [`Dictionary`] is the gridded steering matrix `B` (N samples by M grid
//! atoms) behind every estimator in this crate. Three kinds are supported:
//!
//! * `Dense` — an explicit matrix; the universal fallback and test oracle,
//! * `Fourier2D` — atoms `ψ(ω̄_kd) ⊗ ψ(ω_kr)` on uniform DFT grids, applied
//!   through zero-padded FFTs without materializing the matrix,
//! * `Kronecker` — `Φ ⊗ S` for code-modulated models, applied through the
//!   reshape identity `vec(S·Γ·Φᵀ)`.
//!
//! Atom indexing is column-major over the grid with the range/fast-frequency
//! index `kr` fastest, matching the vectorization of the amplitude grid.
//! Sample indexing is column-major with the fast-time index `n1` fastest.
//! Phases are referenced to the first sample, i.e. every atom starts at 1.

use std::sync::Arc;

use faer::prelude::*;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::{C64, Error, Result};

/// Uniform 2-D frequency grid: `kr_bins` fast-frequency bins by `kd_bins`
/// Doppler bins over `n1` by `n2` samples, with `ω_kr = 2π·kr/kr_bins` and
/// `ω̄_kd = 2π·kd/kd_bins`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FourierGrid {
    pub n1: usize,
    pub n2: usize,
    pub kr_bins: usize,
    pub kd_bins: usize,
}

impl FourierGrid {
    /// 1-D sinusoid grid: N samples, M frequency bins.
    pub fn line(n: usize, bins: usize) -> Self {
        Self { n1: n, n2: 1, kr_bins: bins, kd_bins: 1 }
    }

    pub fn n_samples(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn n_atoms(&self) -> usize {
        self.kr_bins * self.kd_bins
    }
}

struct FourierPlans {
    inv_r: Arc<dyn Fft<f64>>,
    inv_d: Arc<dyn Fft<f64>>,
    fwd_r: Arc<dyn Fft<f64>>,
    fwd_d: Arc<dyn Fft<f64>>,
}

enum Kind {
    Dense(Mat<C64>),
    Fourier(FourierGrid, FourierPlans),
    Kronecker {
        code: Mat<f64>,
        code_c: Mat<C64>,
        doppler: Mat<C64>,
    },
}

/// The dictionary operator `B`.
pub struct Dictionary {
    kind: Kind,
    n: usize,
    m: usize,
}

impl Dictionary {
    pub fn dense(b: Mat<C64>) -> Self {
        let (n, m) = (b.nrows(), b.ncols());
        Self { kind: Kind::Dense(b), n, m }
    }

    pub fn fourier(grid: FourierGrid) -> Result<Self> {
        if grid.n1 == 0 || grid.n2 == 0 || grid.kr_bins == 0 || grid.kd_bins == 0 {
            return Err(Error::InvalidArgument("all grid dimensions must be positive".into()));
        }
        if grid.kr_bins < grid.n1 || grid.kd_bins < grid.n2 {
            return Err(Error::InvalidArgument(format!(
                "grid must be at least as fine as the sampling: {}x{} bins for {}x{} samples",
                grid.kr_bins, grid.kd_bins, grid.n1, grid.n2
            )));
        }
        let mut planner = FftPlanner::new();
        let plans = FourierPlans {
            inv_r: planner.plan_fft(grid.kr_bins, FftDirection::Inverse),
            inv_d: planner.plan_fft(grid.kd_bins, FftDirection::Inverse),
            fwd_r: planner.plan_fft(grid.kr_bins, FftDirection::Forward),
            fwd_d: planner.plan_fft(grid.kd_bins, FftDirection::Forward),
        };
        let (n, m) = (grid.n_samples(), grid.n_atoms());
        Ok(Self { kind: Kind::Fourier(grid, plans), n, m })
    }

    /// `B = Φ ⊗ S`: `code` is the real steering matrix S (N1×Kr), `doppler`
    /// the slow-time steering matrix Φ (N2×Kd).
    pub fn kronecker(code: Mat<f64>, doppler: Mat<C64>) -> Result<Self> {
        if code.nrows() == 0 || code.ncols() == 0 || doppler.nrows() == 0 || doppler.ncols() == 0 {
            return Err(Error::InvalidArgument("empty factor matrix".into()));
        }
        let code_c = Mat::from_fn(code.nrows(), code.ncols(), |i, j| C64::new(code[(i, j)], 0.0));
        let n = code.nrows() * doppler.nrows();
        let m = code.ncols() * doppler.ncols();
        Ok(Self { kind: Kind::Kronecker { code, code_c, doppler }, n, m })
    }

    /// Number of measurement samples N.
    pub fn n_samples(&self) -> usize {
        self.n
    }

    /// Number of grid atoms M.
    pub fn n_atoms(&self) -> usize {
        self.m
    }

    /// The frequency grid, when this dictionary is a Fourier one.
    pub fn fourier_grid(&self) -> Option<FourierGrid> {
        match &self.kind {
            Kind::Fourier(g, _) => Some(*g),
            _ => None,
        }
    }

    pub(crate) fn dense_matrix(&self) -> Option<MatRef<'_, C64>> {
        match &self.kind {
            Kind::Dense(b) => Some(b.as_ref()),
            _ => None,
        }
    }

    pub(crate) fn kronecker_parts(&self) -> Option<(MatRef<'_, f64>, MatRef<'_, C64>)> {
        match &self.kind {
            Kind::Kronecker { code, doppler, .. } => Some((code.as_ref(), doppler.as_ref())),
            _ => None,
        }
    }

    fn check_len(len: usize, want: usize, what: &str) -> Result<()> {
        if len != want {
            return Err(Error::DimensionMismatch(format!("{what} has length {len}, expected {want}")));
        }
        Ok(())
    }

    /// `B x`.
    pub fn matvec(&self, x: &[C64]) -> Result<Vec<C64>> {
        Self::check_len(x.len(), self.m, "input vector")?;
        match &self.kind {
            Kind::Dense(b) => {
                let mut y = vec![C64::new(0.0, 0.0); self.n];
                for k in 0..self.m {
                    let xk = x[k];
                    if xk.norm_sqr() == 0.0 {
                        continue;
                    }
                    for i in 0..self.n {
                        y[i] += b[(i, k)] * xk;
                    }
                }
                Ok(y)
            }
            Kind::Fourier(g, plans) => {
                let mut work = x.to_vec();
                // fast axis: one inverse transform per Doppler bin
                for chunk in work.chunks_mut(g.kr_bins) {
                    plans.inv_r.process(chunk);
                }
                // slow axis, strided
                if g.kd_bins > 1 {
                    let mut lane = vec![C64::new(0.0, 0.0); g.kd_bins];
                    for r in 0..g.n1 {
                        for d in 0..g.kd_bins {
                            lane[d] = work[r + d * g.kr_bins];
                        }
                        plans.inv_d.process(&mut lane);
                        for d in 0..g.kd_bins {
                            work[r + d * g.kr_bins] = lane[d];
                        }
                    }
                }
                let mut y = vec![C64::new(0.0, 0.0); self.n];
                for n2 in 0..g.n2 {
                    for n1 in 0..g.n1 {
                        y[n1 + n2 * g.n1] = work[n1 + n2 * g.kr_bins];
                    }
                }
                Ok(y)
            }
            Kind::Kronecker { code_c, doppler, .. } => {
                let (n1, kr) = (code_c.nrows(), code_c.ncols());
                let (n2, kd) = (doppler.nrows(), doppler.ncols());
                let gamma = MatRef::from_column_major_slice(x, kr, kd);
                let y = code_c * gamma * doppler.transpose();
                let mut out = vec![C64::new(0.0, 0.0); self.n];
                for c in 0..n2 {
                    for r in 0..n1 {
                        out[r + c * n1] = y[(r, c)];
                    }
                }
                Ok(out)
            }
        }
    }

    /// `Bᴴ y`.
    pub fn adjoint_matvec(&self, y: &[C64]) -> Result<Vec<C64>> {
        Self::check_len(y.len(), self.n, "input vector")?;
        match &self.kind {
            Kind::Dense(b) => {
                let mut out = vec![C64::new(0.0, 0.0); self.m];
                for k in 0..self.m {
                    let mut acc = C64::new(0.0, 0.0);
                    for i in 0..self.n {
                        acc += b[(i, k)].conj() * y[i];
                    }
                    out[k] = acc;
                }
                Ok(out)
            }
            Kind::Fourier(g, plans) => {
                let mut work = vec![C64::new(0.0, 0.0); self.m];
                for n2 in 0..g.n2 {
                    for n1 in 0..g.n1 {
                        work[n1 + n2 * g.kr_bins] = y[n1 + n2 * g.n1];
                    }
                }
                for chunk in work.chunks_mut(g.kr_bins) {
                    plans.fwd_r.process(chunk);
                }
                if g.kd_bins > 1 {
                    let mut lane = vec![C64::new(0.0, 0.0); g.kd_bins];
                    for r in 0..g.kr_bins {
                        for d in 0..g.kd_bins {
                            lane[d] = work[r + d * g.kr_bins];
                        }
                        plans.fwd_d.process(&mut lane);
                        for d in 0..g.kd_bins {
                            work[r + d * g.kr_bins] = lane[d];
                        }
                    }
                }
                Ok(work)
            }
            Kind::Kronecker { code_c, doppler, .. } => {
                let n1 = code_c.nrows();
                let n2 = doppler.nrows();
                let ymat = MatRef::from_column_major_slice(y, n1, n2);
                let g = code_c.adjoint() * ymat * doppler.conjugate();
                let (kr, kd) = (g.nrows(), g.ncols());
                let mut out = vec![C64::new(0.0, 0.0); self.m];
                for c in 0..kd {
                    for r in 0..kr {
                        out[r + c * kr] = g[(r, c)];
                    }
                }
                Ok(out)
            }
        }
    }

    /// Materialize atom `k` (0-based).
    pub fn column(&self, k: usize) -> Result<Vec<C64>> {
        if k >= self.m {
            return Err(Error::InvalidArgument(format!("atom index {k} out of range (M = {})", self.m)));
        }
        match &self.kind {
            Kind::Dense(b) => Ok((0..self.n).map(|i| b[(i, k)]).collect()),
            Kind::Fourier(g, _) => {
                let kr = k % g.kr_bins;
                let kd = k / g.kr_bins;
                let wr = 2.0 * std::f64::consts::PI * kr as f64 / g.kr_bins as f64;
                let wd = 2.0 * std::f64::consts::PI * kd as f64 / g.kd_bins as f64;
                let mut col = Vec::with_capacity(self.n);
                for n2 in 0..g.n2 {
                    for n1 in 0..g.n1 {
                        let phase = wr * n1 as f64 + wd * n2 as f64;
                        col.push(C64::from_polar(1.0, phase));
                    }
                }
                Ok(col)
            }
            Kind::Kronecker { code_c, doppler, .. } => {
                let kr = k % code_c.ncols();
                let kd = k / code_c.ncols();
                let mut col = Vec::with_capacity(self.n);
                for n2 in 0..doppler.nrows() {
                    for n1 in 0..code_c.nrows() {
                        col.push(doppler[(n2, kd)] * code_c[(n1, kr)]);
                    }
                }
                Ok(col)
            }
        }
    }

    /// Materialize sample row `n` (0-based): the n-th row of B.
    pub fn row(&self, n: usize) -> Result<Vec<C64>> {
        if n >= self.n {
            return Err(Error::InvalidArgument(format!("sample index {n} out of range (N = {})", self.n)));
        }
        match &self.kind {
            Kind::Dense(b) => Ok((0..self.m).map(|k| b[(n, k)]).collect()),
            Kind::Fourier(g, _) => {
                let n1 = n % g.n1;
                let n2 = n / g.n1;
                let mut row = Vec::with_capacity(self.m);
                for kd in 0..g.kd_bins {
                    let wd = 2.0 * std::f64::consts::PI * kd as f64 / g.kd_bins as f64;
                    for kr in 0..g.kr_bins {
                        let wr = 2.0 * std::f64::consts::PI * kr as f64 / g.kr_bins as f64;
                        row.push(C64::from_polar(1.0, wr * n1 as f64 + wd * n2 as f64));
                    }
                }
                Ok(row)
            }
            Kind::Kronecker { code_c, doppler, .. } => {
                let n1 = n % code_c.nrows();
                let n2 = n / code_c.nrows();
                let mut row = Vec::with_capacity(self.m);
                for kd in 0..doppler.ncols() {
                    for kr in 0..code_c.ncols() {
                        row.push(doppler[(n2, kd)] * code_c[(n1, kr)]);
                    }
                }
                Ok(row)
            }
        }
    }

    /// `‖b_k‖²` for one atom.
    pub fn column_norm_sq(&self, k: usize) -> Result<f64> {
        if k >= self.m {
            return Err(Error::InvalidArgument(format!("atom index {k} out of range (M = {})", self.m)));
        }
        Ok(match &self.kind {
            Kind::Dense(b) => (0..self.n).map(|i| b[(i, k)].norm_sqr()).sum(),
            Kind::Fourier(_, _) => self.n as f64,
            Kind::Kronecker { code, doppler, .. } => {
                let kr = k % code.ncols();
                let kd = k / code.ncols();
                let s: f64 = (0..code.nrows()).map(|i| code[(i, kr)] * code[(i, kr)]).sum();
                let p: f64 = (0..doppler.nrows()).map(|i| doppler[(i, kd)].norm_sqr()).sum();
                s * p
            }
        })
    }

    /// `‖b_k‖²` for every atom.
    pub fn column_norms_sq(&self) -> Vec<f64> {
        match &self.kind {
            Kind::Dense(b) => (0..self.m)
                .map(|k| (0..self.n).map(|i| b[(i, k)].norm_sqr()).sum())
                .collect(),
            Kind::Fourier(_, _) => vec![self.n as f64; self.m],
            Kind::Kronecker { code, doppler, .. } => {
                let s: Vec<f64> = (0..code.ncols())
                    .map(|k| (0..code.nrows()).map(|i| code[(i, k)] * code[(i, k)]).sum())
                    .collect();
                let p: Vec<f64> = (0..doppler.ncols())
                    .map(|k| (0..doppler.nrows()).map(|i| doppler[(i, k)].norm_sqr()).sum())
                    .collect();
                let mut out = Vec::with_capacity(self.m);
                for pd in &p {
                    for sk in &s {
                        out.push(sk * pd);
                    }
                }
                out
            }
        }
    }

    /// Materialize the full matrix. Intended for small problems and tests.
    pub fn to_dense(&self) -> Mat<C64> {
        let mut b = Mat::zeros(self.n, self.m);
        for k in 0..self.m {
            let col = self.column(k).expect("index in range");
            for i in 0..self.n {
                b[(i, k)] = col[i];
            }
        }
        b
    }
}

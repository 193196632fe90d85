//! High-precision weighted SPICE family: SPICE, LIKES, SLIM and IAA over
//! the augmented model A = [B I], where the covariance of the data is
//! R = B*P1*B^H + P2 with diagonal signal powers P1 and per-sample noise
//! powers P2. The four algorithms share one multiplicative power update
//! and differ only in their weights; all structured fast paths (Toeplitz
//! assembly for Fourier grids, separable contractions for Kronecker
//! dictionaries) reproduce the dense arithmetic exactly.

use faer::{Mat, MatRef};
use rustfft::FftPlanner;

use crate::dictionary::Dictionary;
use crate::numerics::{HermitianFactor, cgls_solve, cgls_solve_warm, CglsOptions, CglsReport};
use crate::{C64, Error, Result};

/// Smallest admissible power: keeps P invertible inside the updates.
pub const POWER_FLOOR: f64 = 1e-16;

/// Weight choice selecting one member of the family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightScheme {
    Spice,
    Likes,
    Slim,
    Iaa,
}

impl WeightScheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            WeightScheme::Spice => "spice",
            WeightScheme::Likes => "likes",
            WeightScheme::Slim => "slim",
            WeightScheme::Iaa => "iaa",
        }
    }
}

impl std::fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Nonnegative powers of the augmented model: one entry per dictionary
/// atom followed by one noise power per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedPowers {
    values: Vec<f64>,
    n_atoms: usize,
}

impl AugmentedPowers {
    pub fn new(signal: Vec<f64>, noise: Vec<f64>) -> Result<Self> {
        let n_atoms = signal.len();
        let mut values = signal;
        values.extend_from_slice(&noise);
        for &v in &values {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "powers must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(Self { values, n_atoms })
    }

    pub fn uniform(n_atoms: usize, n_samples: usize, signal: f64, noise: f64) -> Result<Self> {
        Self::new(vec![signal; n_atoms], vec![noise; n_samples])
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn n_samples(&self) -> usize {
        self.values.len() - self.n_atoms
    }

    /// Signal powers p_1 .. p_M.
    pub fn signal(&self) -> &[f64] {
        &self.values[..self.n_atoms]
    }

    /// Per-sample noise powers p_{M+1} .. p_{M+N}.
    pub fn noise(&self) -> &[f64] {
        &self.values[self.n_atoms..]
    }

    /// All M+N powers, signal first.
    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    /// Clamp every entry at [`POWER_FLOOR`].
    pub fn apply_floor(&mut self) {
        for v in &mut self.values {
            if *v < POWER_FLOOR {
                *v = POWER_FLOOR;
            }
        }
    }

    /// Replace all noise powers by their mean (tied-noise model).
    pub fn tie_noise(&mut self) {
        let noise = &mut self.values[self.n_atoms..];
        let mean = noise.iter().sum::<f64>() / noise.len() as f64;
        noise.fill(mean);
    }

    fn check_dict(&self, d: &Dictionary) -> Result<()> {
        if self.n_atoms != d.n_atoms() || self.n_samples() != d.n_samples() {
            return Err(Error::DimensionMismatch(format!(
                "powers sized for {} atoms / {} samples, dictionary has {} / {}",
                self.n_atoms,
                self.n_samples(),
                d.n_atoms(),
                d.n_samples()
            )));
        }
        Ok(())
    }
}

/// Unnormalized inverse 2-D DFT in place over a column-major grid
/// (`n_fast` along the contiguous axis).
fn fft2_inverse(data: &mut [C64], n_fast: usize, n_slow: usize) {
    debug_assert_eq!(data.len(), n_fast * n_slow);
    let mut planner = FftPlanner::new();
    if n_fast > 1 {
        let fast = planner.plan_fft_inverse(n_fast);
        for chunk in data.chunks_exact_mut(n_fast) {
            fast.process(chunk);
        }
    }
    if n_slow > 1 {
        let slow = planner.plan_fft_inverse(n_slow);
        let mut lane = vec![C64::ZERO; n_slow];
        for i in 0..n_fast {
            for (j, v) in lane.iter_mut().enumerate() {
                *v = data[i + j * n_fast];
            }
            slow.process(&mut lane);
            for (j, v) in lane.iter().enumerate() {
                data[i + j * n_fast] = *v;
            }
        }
    }
}

/// Dense covariance R = B*diag(signal)*B^H + diag(noise).
///
/// Exploits the dictionary structure: Fourier grids produce a
/// Toeplitz-block-Toeplitz matrix filled from one inverse FFT of the power
/// grid; Kronecker dictionaries contract the separable factors.
pub(crate) fn covariance_from_parts(
    d: &Dictionary,
    signal: &[f64],
    noise: &[f64],
) -> Result<Mat<C64>> {
    let (n, m) = (d.n_samples(), d.n_atoms());
    if signal.len() != m || noise.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "expected {m} signal and {n} noise powers, got {} and {}",
            signal.len(),
            noise.len()
        )));
    }
    for &v in signal.iter().chain(noise) {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "powers must be finite and nonnegative, got {v}"
            )));
        }
    }

    let mut r;
    if let Some(grid) = d.fourier_grid() {
        // lag table: sum_k p_k e^{j w_k d} is the unnormalized inverse DFT
        // of the power grid, exactly periodic in the lag
        let (krn, kdn) = (grid.kr_bins, grid.kd_bins);
        let mut lags: Vec<C64> = signal.iter().map(|&p| C64::new(p, 0.0)).collect();
        fft2_inverse(&mut lags, krn, kdn);
        let (n1, n2) = (grid.n1 as i64, grid.n2 as i64);
        r = Mat::zeros(n, n);
        for b2 in 0..n2 {
            for b1 in 0..n1 {
                let col = (b1 + n1 * b2) as usize;
                for a2 in 0..n2 {
                    let d2 = (a2 - b2).rem_euclid(kdn as i64) as usize;
                    for a1 in 0..n1 {
                        let d1 = (a1 - b1).rem_euclid(krn as i64) as usize;
                        let row = (a1 + n1 * a2) as usize;
                        r[(row, col)] = lags[d1 + krn * d2];
                    }
                }
            }
        }
    } else if let Some((code, doppler)) = d.kronecker_parts() {
        r = kronecker_covariance(code, doppler, signal);
    } else {
        let b = d.dense_matrix().expect("dense kind");
        let mut bp = b.to_owned();
        for (k, &p) in signal.iter().enumerate() {
            for i in 0..n {
                bp[(i, k)] *= p;
            }
        }
        r = &bp * b.adjoint();
    }
    for (i, &v) in noise.iter().enumerate() {
        r[(i, i)] += C64::new(v, 0.0);
    }
    Ok(r)
}

/// Separable assembly for Kronecker dictionaries: the permuted covariance
/// factors as V * F with V the real code-pair matrix and F the
/// power-weighted Doppler Gram rows.
fn kronecker_covariance(code: MatRef<'_, f64>, doppler: MatRef<'_, C64>, signal: &[f64]) -> Mat<C64> {
    let (n1, krn) = (code.nrows(), code.ncols());
    let (n2, kdn) = (doppler.nrows(), doppler.ncols());
    let n = n1 * n2;

    let mut v = Mat::<f64>::zeros(n1 * n1, krn);
    for kr in 0..krn {
        for j in 0..n1 {
            for i in 0..n1 {
                v[(i + n1 * j, kr)] = code[(i, kr)] * code[(j, kr)];
            }
        }
    }

    // F[kr, a + N2*b] = sum_kd p[kr,kd] phi_kd[a] conj(phi_kd[b])
    let mut f_re = Mat::<f64>::zeros(krn, n2 * n2);
    let mut f_im = Mat::<f64>::zeros(krn, n2 * n2);
    let mut scaled = Mat::<C64>::zeros(n2, kdn);
    for kr in 0..krn {
        for kd in 0..kdn {
            let p = signal[kr + krn * kd];
            for a in 0..n2 {
                scaled[(a, kd)] = doppler[(a, kd)] * p;
            }
        }
        let gram: Mat<C64> = &scaled * doppler.adjoint();
        for b in 0..n2 {
            for a in 0..n2 {
                let g = gram[(a, b)];
                f_re[(kr, a + n2 * b)] = g.re;
                f_im[(kr, a + n2 * b)] = g.im;
            }
        }
    }

    let perm_re: Mat<f64> = &v * &f_re;
    let perm_im: Mat<f64> = &v * &f_im;
    let mut r = Mat::zeros(n, n);
    for b2 in 0..n2 {
        for b1 in 0..n1 {
            let col = b1 + n1 * b2;
            for a2 in 0..n2 {
                let pc = a2 + n2 * b2;
                for a1 in 0..n1 {
                    let pr = a1 + n1 * b1;
                    r[(a1 + n1 * a2, col)] = C64::new(perm_re[(pr, pc)], perm_im[(pr, pc)]);
                }
            }
        }
    }
    r
}

/// Dense covariance of the augmented model.
pub fn build_covariance(d: &Dictionary, p: &AugmentedPowers) -> Result<Mat<C64>> {
    p.check_dict(d)?;
    covariance_from_parts(d, p.signal(), p.noise())
}

/// Matrix-free covariance application y -> B(P1 (B^H y)) + P2 y for the
/// conjugate-gradient path at sizes where dense factorization is too
/// expensive.
pub struct CovarianceOp<'a> {
    d: &'a Dictionary,
    signal: &'a [f64],
    noise: &'a [f64],
}

impl<'a> CovarianceOp<'a> {
    pub fn new(d: &'a Dictionary, signal: &'a [f64], noise: &'a [f64]) -> Result<Self> {
        if signal.len() != d.n_atoms() || noise.len() != d.n_samples() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} signal and {} noise powers, got {} and {}",
                d.n_atoms(),
                d.n_samples(),
                signal.len(),
                noise.len()
            )));
        }
        Ok(Self { d, signal, noise })
    }

    pub fn apply(&self, v: &[C64], out: &mut [C64]) {
        let mut t = self.d.adjoint_matvec(v).expect("dimensions checked at construction");
        for (tk, &p) in t.iter_mut().zip(self.signal) {
            *tk *= p;
        }
        let bt = self.d.matvec(&t).expect("dimensions checked at construction");
        for ((o, &b), (&w, &vi)) in out.iter_mut().zip(&bt).zip(self.noise.iter().zip(v)) {
            *o = b + w * vi;
        }
    }

    /// Solve R x = rhs iteratively.
    pub fn solve(&self, rhs: &[C64], opts: &CglsOptions) -> Result<(Vec<C64>, CglsReport)> {
        cgls_solve(|v, out| self.apply(v, out), rhs, opts)
    }

    /// Solve R x = rhs starting from a previous solution of a nearby system.
    pub fn solve_warm(
        &self,
        rhs: &[C64],
        x0: Option<&[C64]>,
        opts: &CglsOptions,
    ) -> Result<(Vec<C64>, CglsReport)> {
        cgls_solve_warm(|v, out| self.apply(v, out), rhs, x0, opts)
    }
}

/// Quadratic forms b_k^H * Rinv * b_k for every dictionary atom, exact and
/// structured: Fourier grids collapse Rinv along diagonals and read the
/// forms off one inverse FFT; Kronecker dictionaries contract the code
/// pairs first.
pub(crate) fn column_weights(d: &Dictionary, rinv: MatRef<'_, C64>) -> Result<Vec<f64>> {
    let n = d.n_samples();
    if rinv.nrows() != n || rinv.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "inverse covariance is {}x{}, dictionary has {n} samples",
            rinv.nrows(),
            rinv.ncols()
        )));
    }
    if let Some(grid) = d.fourier_grid() {
        let (krn, kdn) = (grid.kr_bins, grid.kd_bins);
        let (n1, n2) = (grid.n1 as i64, grid.n2 as i64);
        let mut acc = vec![C64::ZERO; krn * kdn];
        for b2 in 0..n2 {
            for b1 in 0..n1 {
                let col = (b1 + n1 * b2) as usize;
                for a2 in 0..n2 {
                    let d2 = (b2 - a2).rem_euclid(kdn as i64) as usize;
                    for a1 in 0..n1 {
                        let d1 = (b1 - a1).rem_euclid(krn as i64) as usize;
                        acc[d1 + krn * d2] += rinv[((a1 + n1 * a2) as usize, col)];
                    }
                }
            }
        }
        fft2_inverse(&mut acc, krn, kdn);
        Ok(acc.into_iter().map(|v| v.re).collect())
    } else if let Some((code, doppler)) = d.kronecker_parts() {
        Ok(kronecker_weights(code, doppler, rinv))
    } else {
        let b = d.dense_matrix().expect("dense kind");
        let mut out = Vec::with_capacity(d.n_atoms());
        let mut col = vec![C64::ZERO; n];
        for k in 0..d.n_atoms() {
            for (i, c) in col.iter_mut().enumerate() {
                *c = b[(i, k)];
            }
            out.push(crate::numerics::quadratic_form(rinv, &col));
        }
        Ok(out)
    }
}

fn kronecker_weights(code: MatRef<'_, f64>, doppler: MatRef<'_, C64>, rinv: MatRef<'_, C64>) -> Vec<f64> {
    let (n1, krn) = (code.nrows(), code.ncols());
    let (n2, kdn) = (doppler.nrows(), doppler.ncols());

    // permuted inverse: rows index code pairs, columns index Doppler pairs
    let mut perm_re = Mat::<f64>::zeros(n1 * n1, n2 * n2);
    let mut perm_im = Mat::<f64>::zeros(n1 * n1, n2 * n2);
    for b2 in 0..n2 {
        for b1 in 0..n1 {
            let col = b1 + n1 * b2;
            for a2 in 0..n2 {
                let pc = a2 + n2 * b2;
                for a1 in 0..n1 {
                    let v = rinv[(a1 + n1 * a2, col)];
                    perm_re[(a1 + n1 * b1, pc)] = v.re;
                    perm_im[(a1 + n1 * b1, pc)] = v.im;
                }
            }
        }
    }

    let mut v = Mat::<f64>::zeros(n1 * n1, krn);
    for kr in 0..krn {
        for j in 0..n1 {
            for i in 0..n1 {
                v[(i + n1 * j, kr)] = code[(i, kr)] * code[(j, kr)];
            }
        }
    }
    // G[kr, (a,b)] = s_kr^H Rinv_block(a,b) s_kr
    let g_re: Mat<f64> = v.transpose() * &perm_re;
    let g_im: Mat<f64> = v.transpose() * &perm_im;

    let mut out = vec![0.0; krn * kdn];
    let mut block = Mat::<C64>::zeros(n2, n2);
    for kr in 0..krn {
        for b in 0..n2 {
            for a in 0..n2 {
                let pc = a + n2 * b;
                block[(a, b)] = C64::new(g_re[(kr, pc)], g_im[(kr, pc)]);
            }
        }
        let t: Mat<C64> = &block * doppler;
        for kd in 0..kdn {
            let mut acc = C64::ZERO;
            for a in 0..n2 {
                acc += doppler[(a, kd)].conj() * t[(a, kd)];
            }
            out[kr + krn * kd] = acc.re;
        }
    }
    out
}

struct Solved {
    factor: HermitianFactor,
    /// R^{-1} y
    x: Vec<C64>,
    /// B^H R^{-1} y
    bhx: Vec<C64>,
}

fn factor_and_solve(d: &Dictionary, y: &[C64], p: &AugmentedPowers) -> Result<Solved> {
    p.check_dict(d)?;
    if y.len() != d.n_samples() {
        return Err(Error::DimensionMismatch(format!(
            "data length {} != {} samples",
            y.len(),
            d.n_samples()
        )));
    }
    let r = covariance_from_parts(d, p.signal(), p.noise())?;
    let factor = HermitianFactor::new(r.as_ref())?;
    let x = factor.solve_vec(y)?;
    let bhx = d.adjoint_matvec(&x)?;
    Ok(Solved { factor, x, bhx })
}

fn multiplicative_update(
    p: &AugmentedPowers,
    s: &Solved,
    w_signal: impl Fn(usize) -> f64,
    w_noise: impl Fn(usize) -> f64,
) -> Result<AugmentedPowers> {
    let signal = p
        .signal()
        .iter()
        .enumerate()
        .map(|(k, &pk)| pk * s.bhx[k].norm() / w_signal(k).sqrt())
        .collect();
    let noise = p
        .noise()
        .iter()
        .enumerate()
        .map(|(i, &pi)| pi * s.x[i].norm() / w_noise(i).sqrt())
        .collect();
    let mut out = AugmentedPowers::new(signal, noise)?;
    out.apply_floor();
    Ok(out)
}

/// One SPICE power update: p_k <- p_k |a_k^H R^{-1} y| / ||a_k||.
pub fn spice_step(d: &Dictionary, y: &[C64], p: &AugmentedPowers) -> Result<AugmentedPowers> {
    let s = factor_and_solve(d, y, p)?;
    let norms = d.column_norms_sq();
    multiplicative_update(p, &s, |k| norms[k], |_| 1.0)
}

/// One LIKES outer iteration: freeze the weights a_k^H R^{-1} a_k at the
/// current covariance, then run `inner` SPICE-type updates under them.
pub fn likes_step(
    d: &Dictionary,
    y: &[C64],
    p: &AugmentedPowers,
    inner: usize,
) -> Result<AugmentedPowers> {
    if inner == 0 {
        return Err(Error::InvalidArgument("LIKES needs at least one inner iteration".into()));
    }
    let mut s = factor_and_solve(d, y, p)?;
    let rinv = s.factor.inverse();
    let w_sig = column_weights(d, rinv.as_ref())?;
    let w_noise: Vec<f64> = (0..d.n_samples()).map(|i| rinv[(i, i)].re).collect();
    let mut cur = p.clone();
    for l in 0..inner {
        if l > 0 {
            s = factor_and_solve(d, y, &cur)?;
        }
        cur = multiplicative_update(&cur, &s, |k| w_sig[k], |i| w_noise[i])?;
    }
    Ok(cur)
}

/// One SLIM power update: p_k <- p_k^{3/2} |a_k^H R^{-1} y|.
pub fn slim_step(d: &Dictionary, y: &[C64], p: &AugmentedPowers) -> Result<AugmentedPowers> {
    let s = factor_and_solve(d, y, p)?;
    let psig = p.signal().to_vec();
    let pnoise = p.noise().to_vec();
    multiplicative_update(p, &s, move |k| 1.0 / psig[k], move |i| 1.0 / pnoise[i])
}

/// One IAA power update: p_k <- sqrt(p_k) |a_k^H R^{-1} y| / (a_k^H R^{-1} a_k).
pub fn iaa_step(d: &Dictionary, y: &[C64], p: &AugmentedPowers) -> Result<AugmentedPowers> {
    let s = factor_and_solve(d, y, p)?;
    let rinv = s.factor.inverse();
    let q_sig = column_weights(d, rinv.as_ref())?;
    let q_noise: Vec<f64> = (0..d.n_samples()).map(|i| rinv[(i, i)].re).collect();
    let psig = p.signal().to_vec();
    let pnoise = p.noise().to_vec();
    multiplicative_update(
        p,
        &s,
        move |k| psig[k] * q_sig[k] * q_sig[k],
        move |i| pnoise[i] * q_noise[i] * q_noise[i],
    )
}

/// LMMSE amplitude extraction gamma = P1 B^H R^{-1} y.
pub fn lmmse_amplitudes(d: &Dictionary, y: &[C64], p: &AugmentedPowers) -> Result<Vec<C64>> {
    let s = factor_and_solve(d, y, p)?;
    Ok(s.bhx.iter().zip(p.signal()).map(|(&t, &pk)| t * pk).collect())
}

/// Matched-filter power spectrum |b_k^H y|^2 / ||b_k||^4. Applied to raw
/// signed measurements it doubles as the one-bit periodogram baseline.
pub fn periodogram(d: &Dictionary, y: &[C64]) -> Result<Vec<f64>> {
    let t = d.adjoint_matvec(y)?;
    let norms = d.column_norms_sq();
    Ok(t
        .iter()
        .zip(&norms)
        .map(|(v, &w)| if w > 0.0 { v.norm_sqr() / (w * w) } else { 0.0 })
        .collect())
}

/// Covariance-fitting objective y^H R^{-1} y + sum_k ||a_k||^2 p_k.
pub fn spice_objective(d: &Dictionary, y: &[C64], p: &AugmentedPowers) -> Result<f64> {
    let s = factor_and_solve(d, y, p)?;
    let fit: f64 = y.iter().zip(&s.x).map(|(a, b)| (a.conj() * b).re).sum();
    let norms = d.column_norms_sq();
    let penalty: f64 = p.signal().iter().zip(&norms).map(|(&pk, &w)| w * pk).sum::<f64>()
        + p.noise().iter().sum::<f64>();
    Ok(fit + penalty)
}

/// Negative log-likelihood y^H R^{-1} y + ln|R|.
pub fn likes_objective(d: &Dictionary, y: &[C64], p: &AugmentedPowers) -> Result<f64> {
    let s = factor_and_solve(d, y, p)?;
    let fit: f64 = y.iter().zip(&s.x).map(|(a, b)| (a.conj() * b).re).sum();
    Ok(fit + s.factor.log_det())
}

/// SLIM objective y^H R^{-1} y + sum_k ln p_k over all M+N powers.
pub fn slim_objective(d: &Dictionary, y: &[C64], p: &AugmentedPowers) -> Result<f64> {
    let s = factor_and_solve(d, y, p)?;
    let fit: f64 = y.iter().zip(&s.x).map(|(a, b)| (a.conj() * b).re).sum();
    let logs: f64 = p.as_flat().iter().map(|&v| v.ln()).sum();
    Ok(fit + logs)
}

/// Driver options; `tol` is the relative l2 change of the power vector.
#[derive(Debug, Clone)]
pub struct HpOptions {
    pub scheme: WeightScheme,
    pub max_iter: usize,
    pub tol: f64,
    /// LIKES inner iterations per outer weight refresh.
    pub inner_iterations: usize,
    /// Estimate a single common noise power instead of per-sample powers.
    pub tied_noise: bool,
    /// Record the scheme's objective after every iteration (no-op for IAA).
    pub track_objective: bool,
}

impl HpOptions {
    pub fn new(scheme: WeightScheme) -> Self {
        Self {
            scheme,
            max_iter: 150,
            tol: 1e-6,
            inner_iterations: 1,
            tied_noise: false,
            track_objective: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HpEstimate {
    pub powers: AugmentedPowers,
    /// LMMSE amplitudes at the final powers.
    pub amplitudes: Vec<C64>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective trace (initial value first) when tracking is enabled.
    pub objective: Vec<f64>,
}

fn rel_change(next: &AugmentedPowers, prev: &AugmentedPowers) -> f64 {
    let mut diff = 0.0;
    let mut base = 0.0;
    for (&a, &b) in next.as_flat().iter().zip(prev.as_flat()) {
        diff += (a - b) * (a - b);
        base += b * b;
    }
    (diff / base.max(1e-300)).sqrt()
}

/// Run one member of the family from a periodogram initialization until
/// the powers settle.
pub fn hp_estimate(d: &Dictionary, y: &[C64], opts: &HpOptions) -> Result<HpEstimate> {
    if y.len() != d.n_samples() {
        return Err(Error::DimensionMismatch(format!(
            "data length {} != {} samples",
            y.len(),
            d.n_samples()
        )));
    }
    let mean_power = y.iter().map(|v| v.norm_sqr()).sum::<f64>() / y.len().max(1) as f64;
    let mut p = AugmentedPowers::new(periodogram(d, y)?, vec![mean_power; y.len()])?;
    p.apply_floor();

    let objective_of = |p: &AugmentedPowers| -> Result<Option<f64>> {
        if !opts.track_objective {
            return Ok(None);
        }
        Ok(match opts.scheme {
            WeightScheme::Spice => Some(spice_objective(d, y, p)?),
            WeightScheme::Likes => Some(likes_objective(d, y, p)?),
            WeightScheme::Slim => Some(slim_objective(d, y, p)?),
            WeightScheme::Iaa => None,
        })
    };

    let mut objective = Vec::new();
    if let Some(v) = objective_of(&p)? {
        objective.push(v);
    }
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let mut next = match opts.scheme {
            WeightScheme::Spice => spice_step(d, y, &p)?,
            WeightScheme::Likes => likes_step(d, y, &p, opts.inner_iterations)?,
            WeightScheme::Slim => slim_step(d, y, &p)?,
            WeightScheme::Iaa => iaa_step(d, y, &p)?,
        };
        if opts.tied_noise {
            next.tie_noise();
        }
        if let Some(v) = objective_of(&next)? {
            objective.push(v);
        }
        iterations += 1;
        let change = rel_change(&next, &p);
        p = next;
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    let amplitudes = lmmse_amplitudes(d, y, &p)?;
    Ok(HpEstimate { powers: p, amplitudes, iterations, converged, objective })
}

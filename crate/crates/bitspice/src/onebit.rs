//! Sparse estimation from one-bit measurements. All four variants share
//! one majorize-minimize loop: linearize the sign likelihood around the
//! current estimate into a surrogate data vector, solve the resulting
//! weighted least-squares problem under the covariance model
//! R = B*diag(p)*B^H + 2I, then refresh the powers with the variant's
//! weight rule. Each iteration is equivalent to one high-precision
//! weighted SPICE step applied to the surrogate data.

use faer::{Mat, MatRef};

use crate::dictionary::Dictionary;
use crate::numerics::{
    log_std_normal_cdf, mills_shifted, CglsOptions, HermitianFactor,
};
use crate::quantizer::SignedMeasurements;
use crate::spice::{column_weights, covariance_from_parts, CovarianceOp, POWER_FLOOR};
use crate::{C64, Error, Result};

/// Regularizer keeping the reweighting well defined (SLIM's floor).
pub const DEFAULT_EPSILON: f64 = 1e-4;

/// Initial amplitude guess for every atom.
pub const INITIAL_AMPLITUDE: C64 = C64::new(1e-3, 1e-3);

/// Variant of the one-bit estimator family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OneBitVariant {
    Spice,
    Likes,
    Slim,
    Iaa,
}

impl OneBitVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            OneBitVariant::Spice => "1bspice",
            OneBitVariant::Likes => "1blikes",
            OneBitVariant::Slim => "1bslim",
            OneBitVariant::Iaa => "1biaa",
        }
    }
}

impl std::fmt::Display for OneBitVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How covariance systems are solved each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    /// Assemble R and factor it; needed by the variants whose weights
    /// read the inverse (1bLIKES, 1bIAA).
    Dense,
    /// Matrix-free conjugate gradients; valid for 1bSPICE and 1bSLIM
    /// whose weights never touch the inverse.
    Cgls,
}

#[derive(Debug, Clone)]
pub struct OneBitConfig {
    pub variant: OneBitVariant,
    pub epsilon: f64,
    /// Relative l2 change of the power vector that counts as converged.
    pub rel_tol: f64,
    pub max_iter: usize,
    pub solver: SolverKind,
    /// Record the variant's objective per iteration (rejected for 1bIAA,
    /// which has none).
    pub track_objective: bool,
}

impl OneBitConfig {
    pub fn new(variant: OneBitVariant) -> Self {
        Self {
            variant,
            epsilon: DEFAULT_EPSILON,
            rel_tol: 1e-3,
            max_iter: 150,
            solver: SolverKind::Dense,
            track_objective: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive and finite, got {}",
                self.epsilon
            )));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "rel_tol must be positive and finite, got {}",
                self.rel_tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        if self.solver == SolverKind::Cgls
            && matches!(self.variant, OneBitVariant::Likes | OneBitVariant::Iaa)
        {
            return Err(Error::InvalidArgument(format!(
                "the {} weights need the dense covariance inverse; use the dense solver",
                self.variant
            )));
        }
        if self.track_objective && self.variant == OneBitVariant::Iaa {
            return Err(Error::InvalidArgument(
                "no objective is defined for the 1biaa variant".into(),
            ));
        }
        Ok(())
    }
}

/// Converged estimator state.
#[derive(Debug, Clone)]
pub struct OneBitEstimate {
    /// Scaled amplitudes (true amplitude times the inverse noise scale).
    pub beta: Vec<C64>,
    pub powers: Vec<f64>,
    /// Estimated inverse noise scale sqrt(2)/sigma.
    pub eta: f64,
    /// beta / eta when the scale resolved (eta > 0).
    pub amplitudes: Option<Vec<C64>>,
    /// False when eta collapsed to 0 and the amplitude scale is
    /// unidentifiable; `beta` is still meaningful up to scale.
    pub scale_resolved: bool,
    pub iterations: usize,
    pub converged: bool,
    /// Relative l2 change of the power vector, one entry per iteration.
    pub rel_change: Vec<f64>,
    /// Objective trace (initial state first) when tracking is enabled.
    pub objective: Vec<f64>,
}

fn check_signed(z: &SignedMeasurements, n: usize) -> Result<()> {
    if z.z.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "signed data length {} != {n} samples",
            z.z.len()
        )));
    }
    if !z.z.iter().all(|v| v.re.abs() == 1.0 && v.im.abs() == 1.0) {
        return Err(Error::InvalidArgument(
            "signed measurements must have entries in {-1,+1} per component".into(),
        ));
    }
    Ok(())
}

/// Sign-consistency margins of the current state: the arguments the
/// likelihood feeds to ln(Phi), one real pair per sample.
fn margins(
    z: &SignedMeasurements,
    model: &[C64],
    eta: f64,
    h: &[C64],
) -> impl Iterator<Item = (f64, f64)> {
    z.z.iter()
        .zip(model)
        .zip(h)
        .map(move |((&zn, &mn), &hn)| {
            (zn.re * (mn.re - eta * hn.re), zn.im * (mn.im - eta * hn.im))
        })
        .collect::<Vec<_>>()
        .into_iter()
}

/// Surrogate data of the MM linearization: g(n) combines the signs with
/// the soft sign-consistency scores u(x) = x + phi(x)/Phi(x).
pub fn surrogate_data(
    z: &SignedMeasurements,
    d: &Dictionary,
    beta: &[C64],
    eta: f64,
    h: &[C64],
) -> Result<Vec<C64>> {
    let n = d.n_samples();
    check_signed(z, n)?;
    if h.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "threshold length {} != {n} samples",
            h.len()
        )));
    }
    if !eta.is_finite() || eta < 0.0 {
        return Err(Error::InvalidArgument(format!("eta must be finite and >= 0, got {eta}")));
    }
    let model = d.matvec(beta)?;
    Ok(z
        .z
        .iter()
        .zip(margins(z, &model, eta, h))
        .map(|(&zn, (xr, xi))| C64::new(zn.re * mills_shifted(xr), zn.im * mills_shifted(xi)))
        .collect())
}

/// Covariance of the surrogate model, R = B*diag(p)*B^H + 2I.
pub fn onebit_covariance(d: &Dictionary, p: &[f64]) -> Result<Mat<C64>> {
    covariance_from_parts(d, p, &vec![2.0; d.n_samples()])
}

fn real_dot(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x.conj() * y).re).sum()
}

fn scale_from_solves(h: &[C64], rinv_h: &[C64], rinv_g: &[C64]) -> f64 {
    let den = real_dot(h, rinv_h);
    if den <= 0.0 {
        // identically-zero threshold: the scale carries no information
        return 0.0;
    }
    (-real_dot(h, rinv_g) / den).max(0.0)
}

fn amplitudes_from_solves(
    d: &Dictionary,
    p: &[f64],
    rinv_h: &[C64],
    rinv_g: &[C64],
    eta: f64,
) -> Result<Vec<C64>> {
    let combined: Vec<C64> = rinv_h.iter().zip(rinv_g).map(|(&a, &b)| a * eta + b).collect();
    let t = d.adjoint_matvec(&combined)?;
    Ok(t.iter().zip(p).map(|(&tk, &pk)| tk * pk).collect())
}

/// Nonnegativity-projected minimizer of the surrogate over the threshold
/// scale: max(0, -Re[h^H R^{-1} g] / (h^H R^{-1} h)).
pub fn scale_update(r: MatRef<'_, C64>, h: &[C64], g: &[C64]) -> Result<f64> {
    let factor = HermitianFactor::new(r)?;
    let rinv_h = factor.solve_vec(h)?;
    let rinv_g = factor.solve_vec(g)?;
    Ok(scale_from_solves(h, &rinv_h, &rinv_g))
}

/// Minimizer of the surrogate over the scaled amplitudes at a fixed
/// scale: beta = diag(p) B^H R^{-1} (eta h + g).
pub fn amplitude_update(
    r: MatRef<'_, C64>,
    d: &Dictionary,
    p: &[f64],
    h: &[C64],
    g: &[C64],
    eta: f64,
) -> Result<Vec<C64>> {
    let factor = HermitianFactor::new(r)?;
    let rinv_h = factor.solve_vec(h)?;
    let rinv_g = factor.solve_vec(g)?;
    amplitudes_from_solves(d, p, &rinv_h, &rinv_g, eta)
}

/// Variant weights. `rinv` is required by 1bLIKES and 1bIAA and ignored
/// by the others; 1bSLIM's implicit weight is 1/(p_k + epsilon).
pub fn variant_weights(
    variant: OneBitVariant,
    d: &Dictionary,
    rinv: Option<MatRef<'_, C64>>,
    p: &[f64],
    epsilon: f64,
) -> Result<Vec<f64>> {
    if p.len() != d.n_atoms() {
        return Err(Error::DimensionMismatch(format!(
            "power length {} != {} atoms",
            p.len(),
            d.n_atoms()
        )));
    }
    match variant {
        OneBitVariant::Spice => Ok(d.column_norms_sq()),
        OneBitVariant::Slim => Ok(p.iter().map(|&pk| 1.0 / (pk + epsilon)).collect()),
        OneBitVariant::Likes | OneBitVariant::Iaa => {
            let rinv = rinv.ok_or_else(|| {
                Error::InvalidArgument(format!("{variant} weights need the covariance inverse"))
            })?;
            let q = column_weights(d, rinv)?;
            Ok(match variant {
                OneBitVariant::Likes => q,
                _ => q.iter().zip(p).map(|(&qk, &pk)| pk * qk * qk).collect(),
            })
        }
    }
}

/// Variant power refresh: 1bSLIM squares the amplitudes and adds epsilon;
/// the others divide the amplitude magnitude by the weight's square root.
pub fn power_update(
    variant: OneBitVariant,
    beta: &[C64],
    weights: &[f64],
    epsilon: f64,
) -> Vec<f64> {
    debug_assert_eq!(beta.len(), weights.len());
    beta.iter()
        .zip(weights)
        .map(|(bk, &wk)| {
            let p = match variant {
                OneBitVariant::Slim => bk.norm_sqr() + epsilon,
                _ => bk.norm() / wk.sqrt(),
            };
            p.max(POWER_FLOOR)
        })
        .collect()
}

/// Negative log-likelihood of the signed measurements at (beta, eta),
/// evaluated through the stable ln(Phi). Returns +infinity when a margin
/// is infinitely wrong rather than erroring.
pub fn negative_log_likelihood(
    z: &SignedMeasurements,
    d: &Dictionary,
    beta: &[C64],
    eta: f64,
    h: &[C64],
) -> Result<f64> {
    let n = d.n_samples();
    check_signed(z, n)?;
    if h.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "threshold length {} != {n} samples",
            h.len()
        )));
    }
    let model = d.matvec(beta)?;
    Ok(margins(z, &model, eta, h)
        .map(|(xr, xi)| -log_std_normal_cdf(xr) - log_std_normal_cdf(xi))
        .sum())
}

/// The variant's regularized objective at the given state. 1bIAA has no
/// objective and is rejected.
pub fn onebit_objective(
    variant: OneBitVariant,
    z: &SignedMeasurements,
    d: &Dictionary,
    h: &[C64],
    beta: &[C64],
    p: &[f64],
    eta: f64,
    epsilon: f64,
) -> Result<f64> {
    let l = negative_log_likelihood(z, d, beta, eta, h)?;
    match variant {
        OneBitVariant::Slim => {
            Ok(l + beta.iter().map(|b| (b.norm_sqr() + epsilon).ln()).sum::<f64>())
        }
        OneBitVariant::Spice => {
            let quad: f64 = beta.iter().zip(p).map(|(b, &pk)| b.norm_sqr() / pk).sum();
            let norms = d.column_norms_sq();
            let trace: f64 = norms.iter().zip(p).map(|(&w, &pk)| w * pk).sum::<f64>()
                + 2.0 * d.n_samples() as f64;
            Ok(l + quad + trace)
        }
        OneBitVariant::Likes => {
            let quad: f64 = beta.iter().zip(p).map(|(b, &pk)| b.norm_sqr() / pk).sum();
            let r = onebit_covariance(d, p)?;
            let factor = HermitianFactor::new(r.as_ref())?;
            Ok(l + quad + factor.log_det())
        }
        OneBitVariant::Iaa => {
            Err(Error::InvalidArgument("no objective is defined for the 1biaa variant".into()))
        }
    }
}

/// Objective value minus the ln|R| part; the driver completes LIKES
/// entries lazily when the next factorization is available.
fn partial_objective(
    variant: OneBitVariant,
    z: &SignedMeasurements,
    d: &Dictionary,
    h: &[C64],
    beta: &[C64],
    p: &[f64],
    eta: f64,
    epsilon: f64,
    spice_weights: &[f64],
) -> Result<f64> {
    let l = negative_log_likelihood(z, d, beta, eta, h)?;
    Ok(match variant {
        OneBitVariant::Slim => {
            l + beta.iter().map(|b| (b.norm_sqr() + epsilon).ln()).sum::<f64>()
        }
        OneBitVariant::Spice => {
            let quad: f64 = beta.iter().zip(p).map(|(b, &pk)| b.norm_sqr() / pk).sum();
            let trace: f64 = spice_weights.iter().zip(p).map(|(&w, &pk)| w * pk).sum::<f64>()
                + 2.0 * d.n_samples() as f64;
            l + quad + trace
        }
        OneBitVariant::Likes => {
            let quad: f64 = beta.iter().zip(p).map(|(b, &pk)| b.norm_sqr() / pk).sum();
            l + quad
        }
        OneBitVariant::Iaa => unreachable!("tracking is rejected for 1biaa"),
    })
}

fn power_rel_change(next: &[f64], prev: &[f64]) -> f64 {
    let mut diff = 0.0;
    let mut base = 0.0;
    for (&a, &b) in next.iter().zip(prev) {
        diff += (a - b) * (a - b);
        base += b * b;
    }
    (diff / base.max(1e-300)).sqrt()
}

/// Run the configured variant on signed measurements until the powers
/// settle or the iteration cap is reached.
pub fn onebit_estimate(
    z: &SignedMeasurements,
    d: &Dictionary,
    h: &[C64],
    config: &OneBitConfig,
) -> Result<OneBitEstimate> {
    config.validate()?;
    let (n, m) = (d.n_samples(), d.n_atoms());
    check_signed(z, n)?;
    if h.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "threshold length {} != {n} samples",
            h.len()
        )));
    }

    let mut beta = vec![INITIAL_AMPLITUDE; m];
    let mut p = vec![INITIAL_AMPLITUDE.norm_sqr(); m];
    let mut eta = 0.0f64;
    let noise = vec![2.0f64; n];
    let spice_norms = d.column_norms_sq();

    let track = config.track_objective;
    let mut objective: Vec<f64> = Vec::new();
    // LIKES objective entries wait for ln|R| at the next factorization
    let mut pending: Option<f64> = None;
    let record = |objective: &mut Vec<f64>,
                      pending: &mut Option<f64>,
                      beta: &[C64],
                      p: &[f64],
                      eta: f64|
     -> Result<()> {
        if !track {
            return Ok(());
        }
        let v = partial_objective(
            config.variant,
            z,
            d,
            h,
            beta,
            p,
            eta,
            config.epsilon,
            &spice_norms,
        )?;
        if config.variant == OneBitVariant::Likes {
            *pending = Some(v);
        } else {
            if !v.is_finite() {
                return Err(Error::Numerical(format!("objective became non-finite ({v})")));
            }
            objective.push(v);
        }
        Ok(())
    };
    record(&mut objective, &mut pending, &beta, &p, eta)?;

    let mut iterations = 0;
    let mut converged = false;
    let mut rel_change = Vec::new();
    // previous covariance solves; R and g drift slowly, so they make good
    // starting points for the next iteration's conjugate gradients
    let mut warm_h: Option<Vec<C64>> = None;
    let mut warm_g: Option<Vec<C64>> = None;
    for _ in 0..config.max_iter {
        let g = surrogate_data(z, d, &beta, eta, h)?;

        let (rinv_h, rinv_g, weights) = match config.solver {
            SolverKind::Dense => {
                let r = covariance_from_parts(d, &p, &noise)?;
                let factor = HermitianFactor::new(r.as_ref())?;
                if let Some(partial) = pending.take() {
                    let v = partial + factor.log_det();
                    if !v.is_finite() {
                        return Err(Error::Numerical(format!(
                            "objective became non-finite ({v})"
                        )));
                    }
                    objective.push(v);
                }
                let weights = match config.variant {
                    OneBitVariant::Spice => spice_norms.clone(),
                    OneBitVariant::Slim => Vec::new(),
                    OneBitVariant::Likes | OneBitVariant::Iaa => {
                        let rinv = factor.inverse();
                        variant_weights(
                            config.variant,
                            d,
                            Some(rinv.as_ref()),
                            &p,
                            config.epsilon,
                        )?
                    }
                };
                (factor.solve_vec(h)?, factor.solve_vec(&g)?, weights)
            }
            SolverKind::Cgls => {
                let op = CovarianceOp::new(d, &p, &noise)?;
                // the outer loop stops at a 1e-3 power change, so solves two
                // orders tighter than that leave the iterate path unchanged
                // at the accuracy anyone reads it
                let opts = CglsOptions { tol: 1e-6, max_iter: 0 };
                let (rinv_h, _) = op.solve_warm(h, warm_h.as_deref(), &opts)?;
                let (rinv_g, _) = op.solve_warm(&g, warm_g.as_deref(), &opts)?;
                warm_h = Some(rinv_h.clone());
                warm_g = Some(rinv_g.clone());
                let weights = match config.variant {
                    OneBitVariant::Spice => spice_norms.clone(),
                    _ => Vec::new(),
                };
                (rinv_h, rinv_g, weights)
            }
        };

        eta = scale_from_solves(h, &rinv_h, &rinv_g);
        beta = amplitudes_from_solves(d, &p, &rinv_h, &rinv_g, eta)?;
        let next = match config.variant {
            OneBitVariant::Slim => power_update(config.variant, &beta, &p, config.epsilon),
            _ => power_update(config.variant, &beta, &weights, config.epsilon),
        };
        iterations += 1;
        let change = power_rel_change(&next, &p);
        rel_change.push(change);
        p = next;
        record(&mut objective, &mut pending, &beta, &p, eta)?;
        if change < config.rel_tol {
            converged = true;
            break;
        }
    }

    if let Some(partial) = pending.take() {
        // one extra factorization closes the last LIKES objective entry
        let r = covariance_from_parts(d, &p, &noise)?;
        let factor = HermitianFactor::new(r.as_ref())?;
        let v = partial + factor.log_det();
        if !v.is_finite() {
            return Err(Error::Numerical(format!("objective became non-finite ({v})")));
        }
        objective.push(v);
    }

    let scale_resolved = eta > 0.0;
    let amplitudes =
        scale_resolved.then(|| beta.iter().map(|b| b / eta).collect::<Vec<C64>>());
    Ok(OneBitEstimate {
        beta,
        powers: p,
        eta,
        amplitudes,
        scale_resolved,
        iterations,
        converged,
        rel_change,
        objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::FourierGrid;
    use crate::numerics::hermitian_eigenvalues;
    use crate::quantizer::{eight_level_threshold, signc};
    use crate::spice::{lmmse_amplitudes, AugmentedPowers};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dense(n: usize, m: usize, seed: u64) -> Dictionary {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = || C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        Dictionary::dense(Mat::from_fn(n, m, |_, _| g()))
    }

    fn random_signs(n: usize, seed: u64) -> SignedMeasurements {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SignedMeasurements {
            z: (0..n)
                .map(|_| {
                    C64::new(
                        if rng.random_bool(0.5) { 1.0 } else { -1.0 },
                        if rng.random_bool(0.5) { 1.0 } else { -1.0 },
                    )
                })
                .collect(),
        }
    }

    fn random_state(n: usize, m: usize, seed: u64) -> (Vec<C64>, Vec<f64>, f64, Vec<C64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = || C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        let beta: Vec<C64> = (0..m).map(|_| g()).collect();
        let h: Vec<C64> = (0..n).map(|_| g()).collect();
        let p: Vec<f64> = (0..m).map(|_| 0.1 + rng.random::<f64>()).collect();
        let eta = 0.2 + rng.random::<f64>();
        (beta, p, eta, h)
    }

    #[test]
    fn surrogate_zero_state_is_uniform() {
        let d = random_dense(6, 9, 1);
        let z = random_signs(6, 2);
        let h = vec![C64::new(0.3, -0.1); 6];
        let g = surrogate_data(&z, &d, &vec![C64::ZERO; 9], 0.0, &h).unwrap();
        let u0 = mills_shifted(0.0);
        for (gn, zn) in g.iter().zip(&z.z) {
            assert!((gn.re - zn.re * u0).abs() < 1e-15);
            assert!((gn.im - zn.im * u0).abs() < 1e-15);
            assert!((gn.norm() - u0 * std::f64::consts::SQRT_2).abs() < 1e-12);
        }
        assert!((u0 - 0.797_884_560_802_865_4).abs() < 1e-12);
    }

    #[test]
    fn surrogate_large_margin_recovers_model() {
        // all margins = 10: u(x) ~ x and g reduces to the linear model
        let n = 8;
        let d = Dictionary::dense(Mat::from_fn(n, n, |i, j| {
            if i == j { C64::ONE } else { C64::ZERO }
        }));
        let z = random_signs(n, 3);
        let beta: Vec<C64> = z.z.iter().map(|zn| zn * 10.0).collect();
        let g = surrogate_data(&z, &d, &beta, 0.0, &vec![C64::ZERO; n]).unwrap();
        for (gn, bn) in g.iter().zip(&beta) {
            assert!((gn - bn).norm() < 1e-6);
        }
    }

    #[test]
    fn surrogate_matches_scalar_loop() {
        let d = random_dense(5, 7, 4);
        let z = random_signs(5, 5);
        let (beta, _, eta, h) = random_state(5, 7, 6);
        let got = surrogate_data(&z, &d, &beta, eta, &h).unwrap();

        let b = d.to_dense();
        for i in 0..5 {
            let mut row = C64::ZERO;
            for k in 0..7 {
                row += b[(i, k)] * beta[k];
            }
            let xr = z.z[i].re * (row.re - eta * h[i].re);
            let xi = z.z[i].im * (row.im - eta * h[i].im);
            let u = |x: f64| {
                x + crate::numerics::std_normal_pdf(x) / crate::numerics::std_normal_cdf(x)
            };
            let want = C64::new(z.z[i].re * u(xr), z.z[i].im * u(xi));
            assert!((got[i] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn surrogate_rejects_bad_signs() {
        let d = random_dense(3, 4, 7);
        let z = SignedMeasurements { z: vec![C64::new(1.0, 0.5); 3] };
        assert!(surrogate_data(&z, &d, &vec![C64::ZERO; 4], 0.0, &vec![C64::ZERO; 3]).is_err());
    }

    #[test]
    fn covariance_hand_case() {
        let d = Dictionary::dense(Mat::from_fn(2, 1, |_, _| C64::ONE));
        let r = onebit_covariance(&d, &[3.0]).unwrap();
        let want = [[5.0, 3.0], [3.0, 5.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((r[(i, j)] - C64::new(want[i][j], 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn covariance_floor_is_twice_identity() {
        let d = random_dense(5, 8, 8);
        let r = onebit_covariance(&d, &vec![POWER_FLOOR; 8]).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { 2.0 } else { 0.0 };
                assert!((r[(i, j)] - C64::new(want, 0.0)).norm() < 1e-12);
            }
        }
        let p: Vec<f64> = (0..8).map(|k| 0.1 + 0.2 * k as f64).collect();
        let eigs =
            hermitian_eigenvalues(onebit_covariance(&d, &p).unwrap().as_ref()).unwrap();
        assert!(eigs.iter().all(|&e| e >= 2.0 - 1e-9), "{eigs:?}");
    }

    #[test]
    fn scale_update_sign_cases() {
        let d = random_dense(4, 6, 9);
        let (_, p, _, h) = random_state(4, 6, 10);
        let r = onebit_covariance(&d, &p).unwrap();
        let neg: Vec<C64> = h.iter().map(|v| -v).collect();
        assert!((scale_update(r.as_ref(), &h, &neg).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(scale_update(r.as_ref(), &h, &h).unwrap(), 0.0);
        assert_eq!(scale_update(r.as_ref(), &[C64::ZERO; 4], &neg).unwrap(), 0.0);
    }

    fn quadratic_surrogate(
        d: &Dictionary,
        p: &[f64],
        h: &[C64],
        g: &[C64],
        beta: &[C64],
        eta: f64,
    ) -> f64 {
        let model = d.matvec(beta).unwrap();
        let fit: f64 = model
            .iter()
            .zip(h.iter().zip(g))
            .map(|(&mn, (&hn, &gn))| (mn - (hn * eta + gn)).norm_sqr())
            .sum();
        let reg: f64 = beta.iter().zip(p).map(|(b, &pk)| b.norm_sqr() / pk).sum();
        0.5 * fit + reg
    }

    #[test]
    fn scale_update_matches_grid_search() {
        let d = random_dense(5, 8, 11);
        let (_, p, _, h) = random_state(5, 8, 12);
        // g near -h keeps the unconstrained minimizer positive
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let g: Vec<C64> = h
            .iter()
            .map(|v| -v + C64::new(0.1 * (rng.random::<f64>() - 0.5), 0.1 * (rng.random::<f64>() - 0.5)))
            .collect();
        let r = onebit_covariance(&d, &p).unwrap();
        let eta = scale_update(r.as_ref(), &h, &g).unwrap();
        assert!(eta > 0.0);

        let q_of = |e: f64| {
            let beta = amplitude_update(r.as_ref(), &d, &p, &h, &g, e).unwrap();
            quadratic_surrogate(&d, &p, &h, &g, &beta, e)
        };
        let q_star = q_of(eta);
        let mut best = (0.0, q_of(0.0));
        let steps = 4000;
        for i in 0..=steps {
            let e = 2.0 * eta * i as f64 / steps as f64;
            let q = q_of(e);
            if q < best.1 {
                best = (e, q);
            }
        }
        assert!((best.0 - eta).abs() <= 2.0 * eta / steps as f64 + 1e-6);
        assert!(q_star <= best.1 + 1e-10);
    }

    #[test]
    fn amplitude_update_scalar_identity_dictionary() {
        let n = 5;
        let d = Dictionary::dense(Mat::from_fn(n, n, |i, j| {
            if i == j { C64::ONE } else { C64::ZERO }
        }));
        let (_, p, eta, h) = random_state(n, n, 14);
        let g: Vec<C64> = h.iter().map(|v| v * C64::new(0.3, 0.7)).collect();
        let r = onebit_covariance(&d, &p).unwrap();
        let beta = amplitude_update(r.as_ref(), &d, &p, &h, &g, eta).unwrap();
        for k in 0..n {
            let want = (h[k] * eta + g[k]) * (p[k] / (p[k] + 2.0));
            assert!((beta[k] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn amplitude_update_floored_powers_vanish() {
        let d = random_dense(4, 7, 15);
        let (_, _, eta, h) = random_state(4, 7, 16);
        let g: Vec<C64> = h.iter().map(|v| -v).collect();
        let p = vec![POWER_FLOOR; 7];
        let r = onebit_covariance(&d, &p).unwrap();
        let beta = amplitude_update(r.as_ref(), &d, &p, &h, &g, eta).unwrap();
        assert!(beta.iter().all(|b| b.norm() < 1e-14));
    }

    #[test]
    fn joint_update_zeroes_surrogate_gradient() {
        let d = random_dense(6, 9, 17);
        let (_, p, _, h) = random_state(6, 9, 18);
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let g: Vec<C64> = h
            .iter()
            .map(|v| -v + C64::new(0.2 * (rng.random::<f64>() - 0.5), 0.2 * (rng.random::<f64>() - 0.5)))
            .collect();
        let r = onebit_covariance(&d, &p).unwrap();
        let eta = scale_update(r.as_ref(), &h, &g).unwrap();
        assert!(eta > 0.0, "need an interior scale for the gradient check");
        let beta = amplitude_update(r.as_ref(), &d, &p, &h, &g, eta).unwrap();

        let f0 = quadratic_surrogate(&d, &p, &h, &g, &beta, eta);
        let step = 1e-6;
        for k in 0..9 {
            for dir in [C64::new(step, 0.0), C64::new(0.0, step)] {
                let mut plus = beta.clone();
                plus[k] += dir;
                let mut minus = beta.clone();
                minus[k] -= dir;
                let fd = (quadratic_surrogate(&d, &p, &h, &g, &plus, eta)
                    - quadratic_surrogate(&d, &p, &h, &g, &minus, eta))
                    / (2.0 * step);
                assert!(fd.abs() < 1e-8 * f0.max(1.0), "component {k}: {fd:.3e}");
            }
        }
        let fd_eta = (quadratic_surrogate(&d, &p, &h, &g, &beta, eta + step)
            - quadratic_surrogate(&d, &p, &h, &g, &beta, eta - step))
            / (2.0 * step);
        assert!(fd_eta.abs() < 1e-8 * f0.max(1.0), "scale: {fd_eta:.3e}");
    }

    #[test]
    fn weights_spice_fourier_all_equal_n() {
        let d = Dictionary::fourier(FourierGrid { n1: 8, n2: 4, kr_bins: 16, kd_bins: 8 }).unwrap();
        let p = vec![0.5; d.n_atoms()];
        let w = variant_weights(OneBitVariant::Spice, &d, None, &p, 1e-4).unwrap();
        assert!(w.iter().all(|&v| (v - 32.0).abs() < 1e-9));
    }

    #[test]
    fn weights_likes_at_floor() {
        let d = random_dense(5, 8, 20);
        let p = vec![POWER_FLOOR; 8];
        let r = onebit_covariance(&d, &p).unwrap();
        let rinv = HermitianFactor::new(r.as_ref()).unwrap().inverse();
        let w = variant_weights(OneBitVariant::Likes, &d, Some(rinv.as_ref()), &p, 1e-4).unwrap();
        let norms = d.column_norms_sq();
        for (k, (&wk, &nk)) in w.iter().zip(&norms).enumerate() {
            assert!((wk - nk / 2.0).abs() < 1e-9 * nk, "atom {k}");
        }
    }

    #[test]
    fn weight_ordering_iaa_likes_slim() {
        for seed in 0..5 {
            let d = random_dense(5, 9, 30 + seed);
            let mut rng = ChaCha8Rng::seed_from_u64(40 + seed);
            let p: Vec<f64> = (0..9).map(|_| 0.05 + rng.random::<f64>()).collect();
            let r = onebit_covariance(&d, &p).unwrap();
            let rinv = HermitianFactor::new(r.as_ref()).unwrap().inverse();
            let likes =
                variant_weights(OneBitVariant::Likes, &d, Some(rinv.as_ref()), &p, 0.0).unwrap();
            let iaa =
                variant_weights(OneBitVariant::Iaa, &d, Some(rinv.as_ref()), &p, 0.0).unwrap();
            for k in 0..9 {
                let slim = 1.0 / p[k];
                assert!(iaa[k] <= likes[k] + 1e-10, "atom {k}");
                assert!(likes[k] <= slim + 1e-10, "atom {k}");
            }
        }
    }

    #[test]
    fn power_update_cases() {
        let beta = vec![C64::ZERO; 3];
        let p = power_update(OneBitVariant::Slim, &beta, &[1.0; 3], 1e-4);
        assert!(p.iter().all(|&v| (v - 1e-4).abs() < 1e-18));

        let beta = vec![C64::new(2.0, 0.0)];
        let p = power_update(OneBitVariant::Spice, &beta, &[4.0], 1e-4);
        assert!((p[0] - 1.0).abs() < 1e-14);

        // p = |beta|/sqrt(w) minimizes |beta|^2/p + w p
        let (b, w) = (1.7, 3.2);
        let p_star = b / f64::sqrt(w);
        let cost = |p: f64| b * b / p + w * p;
        for i in 1..=1000 {
            let p = 2.0 * p_star * i as f64 / 1000.0;
            assert!(cost(p_star) <= cost(p) + 1e-12);
        }
    }

    #[test]
    fn objective_zero_state_values() {
        let d = random_dense(6, 9, 50);
        let z = random_signs(6, 51);
        let h: Vec<C64> = (0..6).map(|i| C64::new(0.1 * i as f64, -0.05)).collect();
        let beta = vec![C64::ZERO; 9];
        let l = negative_log_likelihood(&z, &d, &beta, 0.0, &h).unwrap();
        assert!((l - 12.0 * std::f64::consts::LN_2).abs() < 1e-12);

        let eps = 1e-4;
        let g = onebit_objective(OneBitVariant::Slim, &z, &d, &h, &beta, &[1.0; 9], 0.0, eps)
            .unwrap();
        assert!((g - (l + 9.0 * eps.ln())).abs() < 1e-10);
    }

    #[test]
    fn objective_matches_direct_summation() {
        let d = random_dense(5, 7, 52);
        let z = random_signs(5, 53);
        let (beta, p, eta, h) = random_state(5, 7, 54);

        let b = d.to_dense();
        let mut l_direct = 0.0;
        for i in 0..5 {
            let mut row = C64::ZERO;
            for k in 0..7 {
                row += b[(i, k)] * beta[k];
            }
            let xr = z.z[i].re * (row.re - eta * h[i].re);
            let xi = z.z[i].im * (row.im - eta * h[i].im);
            l_direct -= crate::numerics::std_normal_cdf(xr).ln();
            l_direct -= crate::numerics::std_normal_cdf(xi).ln();
        }
        let l = negative_log_likelihood(&z, &d, &beta, eta, &h).unwrap();
        assert!((l - l_direct).abs() < 1e-10 * l_direct.abs().max(1.0));

        // trace term against the assembled covariance
        let quad: f64 = beta.iter().zip(&p).map(|(bk, &pk)| bk.norm_sqr() / pk).sum();
        let r = onebit_covariance(&d, &p).unwrap();
        let trace: f64 = (0..5).map(|i| r[(i, i)].re).sum();
        let f1 = onebit_objective(OneBitVariant::Spice, &z, &d, &h, &beta, &p, eta, 1e-4).unwrap();
        assert!((f1 - (l + quad + trace)).abs() < 1e-9 * f1.abs());

        assert!(onebit_objective(OneBitVariant::Iaa, &z, &d, &h, &beta, &p, eta, 1e-4).is_err());
    }

    #[test]
    fn surrogate_majorizes_likelihood() {
        // the quadratic expansion anchored at the state touches L there
        // and stays above it everywhere else
        let d = random_dense(6, 8, 60);
        let z = random_signs(6, 61);
        let (beta0, _, eta0, h) = random_state(6, 8, 62);
        let g = surrogate_data(&z, &d, &beta0, eta0, &h).unwrap();

        let quad_of = |beta: &[C64], eta: f64| {
            let model = d.matvec(beta).unwrap();
            0.5 * model
                .iter()
                .zip(h.iter().zip(&g))
                .map(|(&mn, (&hn, &gn))| (mn - (hn * eta + gn)).norm_sqr())
                .sum::<f64>()
        };
        let l0 = negative_log_likelihood(&z, &d, &beta0, eta0, &h).unwrap();
        let anchor = l0 - quad_of(&beta0, eta0);

        let mut rng = ChaCha8Rng::seed_from_u64(63);
        for probe in 0..25 {
            let beta: Vec<C64> = (0..8)
                .map(|_| C64::new(2.0 * rng.random::<f64>() - 1.0, 2.0 * rng.random::<f64>() - 1.0))
                .collect();
            let eta = rng.random::<f64>() * 2.0;
            let l = negative_log_likelihood(&z, &d, &beta, eta, &h).unwrap();
            let bound = quad_of(&beta, eta) + anchor;
            assert!(l <= bound + 1e-9 * bound.abs().max(1.0), "probe {probe}: {l} > {bound}");
        }
    }

    #[test]
    fn slim_iteration_equals_surrogate_slim_step() {
        // one 1bSLIM iteration is one SLIM-style LMMSE applied to the
        // surrogate data under noise covariance 2I
        for seed in 0..3 {
            let d = random_dense(8, 16, 70 + seed);
            let z = random_signs(8, 80 + seed);
            let (beta0, p0, eta0, h) = random_state(8, 16, 90 + seed);
            let eps = 1e-4;

            let g = surrogate_data(&z, &d, &beta0, eta0, &h).unwrap();
            let r = onebit_covariance(&d, &p0).unwrap();
            let eta1 = scale_update(r.as_ref(), &h, &g).unwrap();
            let beta1 = amplitude_update(r.as_ref(), &d, &p0, &h, &g, eta1).unwrap();
            let p1 = power_update(OneBitVariant::Slim, &beta1, &p0, eps);

            let ybar: Vec<C64> = h.iter().zip(&g).map(|(&hn, &gn)| hn * eta1 + gn).collect();
            let aug = AugmentedPowers::new(p0.clone(), vec![2.0; 8]).unwrap();
            let beta_hp = lmmse_amplitudes(&d, &ybar, &aug).unwrap();
            for k in 0..16 {
                assert!((beta1[k] - beta_hp[k]).norm() < 1e-10, "seed {seed} atom {k}");
                let p_hp = (beta_hp[k].norm_sqr() + eps).max(POWER_FLOOR);
                assert!((p1[k] - p_hp).abs() < 1e-10, "seed {seed} atom {k}");
            }
        }
    }

    fn single_target_measurements(
        n: usize,
        bin: usize,
        seed: u64,
    ) -> (Dictionary, SignedMeasurements, Vec<C64>) {
        let d = Dictionary::fourier(FourierGrid::line(n, n)).unwrap();
        let y = d.column(bin).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = eight_level_threshold(n, 0.5, &mut rng);
        let z = signc(&y, &h).unwrap();
        (d, z, h.values)
    }

    #[test]
    fn estimator_localizes_single_target() {
        // large enough that the coherent correlation gain lifts 1bSLIM
        // out of its epsilon floor; tiny scenes stall there
        let n = 256;
        let bin = 85;
        let (d, z, h) = single_target_measurements(n, bin, 100);
        for variant in [OneBitVariant::Slim, OneBitVariant::Iaa] {
            let est = onebit_estimate(&z, &d, &h, &OneBitConfig::new(variant)).unwrap();
            let peak = est
                .powers
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            assert!(
                (peak as i64 - bin as i64).abs() <= 1,
                "{variant}: peak at {peak}, want {bin}"
            );
            assert!(est.scale_resolved, "{variant}: scale did not resolve");
            let amp = est.amplitudes.as_ref().unwrap()[peak].norm();
            assert!((amp - 1.0).abs() < 0.15, "{variant}: amplitude {amp}");
        }
    }

    #[test]
    fn estimator_traces_decrease() {
        let n = 16;
        let bin = 5;
        let (d, z, h) = single_target_measurements(n, bin, 101);
        for variant in [OneBitVariant::Slim, OneBitVariant::Spice, OneBitVariant::Likes] {
            let mut config = OneBitConfig::new(variant);
            config.track_objective = true;
            config.max_iter = 60;
            config.rel_tol = 1e-9;
            let est = onebit_estimate(&z, &d, &h, &config).unwrap();
            assert!(est.objective.len() >= 2, "{variant}");
            for (i, pair) in est.objective.windows(2).enumerate() {
                assert!(
                    pair[1] <= pair[0] + 1e-9 * pair[0].abs().max(1.0),
                    "{variant} step {i}: {} -> {}",
                    pair[0],
                    pair[1]
                );
            }
        }
    }

    #[test]
    fn estimator_solvers_agree_for_slim() {
        let n = 24;
        let (d, z, h) = single_target_measurements(n, 7, 102);
        let mut dense_cfg = OneBitConfig::new(OneBitVariant::Slim);
        dense_cfg.max_iter = 25;
        dense_cfg.rel_tol = 1e-12;
        let mut cgls_cfg = dense_cfg.clone();
        cgls_cfg.solver = SolverKind::Cgls;
        let a = onebit_estimate(&z, &d, &h, &dense_cfg).unwrap();
        let b = onebit_estimate(&z, &d, &h, &cgls_cfg).unwrap();
        assert_eq!(a.iterations, b.iterations);
        for k in 0..n {
            assert!((a.beta[k] - b.beta[k]).norm() < 1e-6, "atom {k}");
            assert!((a.powers[k] - b.powers[k]).abs() < 1e-6, "atom {k}");
        }
        assert!((a.eta - b.eta).abs() < 1e-6);
    }

    #[test]
    fn estimator_threshold_scaling_rescales_amplitudes() {
        // doubling h halves the estimated scale and doubles beta/eta
        let n = 32;
        let (d, z, h) = single_target_measurements(n, 9, 103);
        let doubled: Vec<C64> = h.iter().map(|v| v * 2.0).collect();
        let mut config = OneBitConfig::new(OneBitVariant::Slim);
        config.rel_tol = 1e-8;
        let a = onebit_estimate(&z, &d, &h, &config).unwrap();
        let b = onebit_estimate(&z, &d, &doubled, &config).unwrap();
        assert!((b.eta - a.eta / 2.0).abs() < 1e-4 * a.eta);
        let ga = a.amplitudes.as_ref().unwrap();
        let gb = b.amplitudes.as_ref().unwrap();
        for k in 0..n {
            assert!((gb[k] - ga[k] * 2.0).norm() < 1e-3 * ga[k].norm().max(1e-6), "atom {k}");
        }
    }

    #[test]
    fn estimator_zero_threshold_flags_unresolved_scale() {
        let n = 16;
        let d = Dictionary::fourier(FourierGrid::line(n, n)).unwrap();
        let y = d.column(3).unwrap();
        let h = crate::quantizer::Threshold {
            values: vec![C64::ZERO; n],
            scheme: crate::quantizer::ThresholdScheme::PerSample,
        };
        let z = signc(&y, &h).unwrap();
        let mut config = OneBitConfig::new(OneBitVariant::Slim);
        config.max_iter = 20;
        let est = onebit_estimate(&z, &d, &h.values, &config).unwrap();
        assert!(!est.scale_resolved);
        assert_eq!(est.eta, 0.0);
        assert!(est.amplitudes.is_none());
        // beta still peaks at the right bin, just without absolute scale
        let peak = est.powers.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(peak, 3);
    }

    #[test]
    fn config_rejections() {
        let mut c = OneBitConfig::new(OneBitVariant::Likes);
        c.solver = SolverKind::Cgls;
        assert!(c.validate().is_err());
        let mut c = OneBitConfig::new(OneBitVariant::Iaa);
        c.track_objective = true;
        assert!(c.validate().is_err());
        let mut c = OneBitConfig::new(OneBitVariant::Slim);
        c.epsilon = 0.0;
        assert!(c.validate().is_err());
    }
}

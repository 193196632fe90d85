//! Scene generation and high-precision measurement synthesis for the two
//! radar models: dechirped LFMCW snapshots (two-dimensional sinusoids in
//! fast/slow time) and PMCW snapshots built from a circularly shifted
//! pulse-shaped binary code.

use faer::Mat;
use rand::{Rng, RngExt};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_4, PI, TAU};

use crate::{C64, Error, Result};

/// Raised-cosine roll-off used throughout the PMCW chain.
const ROLL_OFF: f64 = 0.25;

/// Chirp and sampling bookkeeping for converting the normalized frequency
/// pair of an estimate into physical range and velocity.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadarParams {
    /// Half of the chirp sweep slope, Hz/s.
    pub chirp_rate_half: f64,
    /// Propagation speed, m/s.
    pub light_speed: f64,
    /// Fast-time sample rate, Hz.
    pub sample_rate: f64,
    /// Carrier frequency, Hz.
    pub carrier: f64,
    /// Chirp duration, s.
    pub chirp_duration: f64,
    /// Chip duration of the binary code, s.
    pub chip_duration: f64,
    /// Pulse repetition interval, s. Equals code length times chip duration
    /// for the PMCW model.
    pub pri: f64,
}

impl RadarParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            (self.chirp_rate_half, "chirp_rate_half"),
            (self.light_speed, "light_speed"),
            (self.sample_rate, "sample_rate"),
            (self.carrier, "carrier"),
            (self.chirp_duration, "chirp_duration"),
            (self.chip_duration, "chip_duration"),
            (self.pri, "pri"),
        ];
        for (v, name) in fields {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "radar parameter {name} must be finite and positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// One scatterer.
#[derive(Debug, Clone, Copy)]
pub struct Target {
    /// Fast-axis coordinate: angular frequency in rad/sample for the LFMCW
    /// model, delay in seconds for PMCW.
    pub range_coord: f64,
    /// Slow-axis angular frequency in rad/PRI, in [0, 2*pi).
    pub doppler: f64,
    /// Complex amplitude.
    pub amp: C64,
    /// True when the coordinates sit exactly on the estimation grid.
    pub on_grid: bool,
}

/// Ground-truth scene: a sparse set of scatterers.
#[derive(Debug, Clone, Default)]
pub struct Scene {
    pub targets: Vec<Target>,
}

impl Scene {
    pub fn new(targets: Vec<Target>) -> Self {
        Self { targets }
    }
}

/// Maximum-length ±1 sequence from a Fibonacci shift register.
///
/// `taps` encodes the feedback polynomial over GF(2) with bit `i` set for
/// each term x^i, including the leading bit `r` and the constant bit 0;
/// x^5 + x^2 + 1 is `0b100101`. The register starts from the all-ones
/// state and shifts the low bit out first; bits map to ±1 as 1 - 2b.
pub fn mls_generate(register_length: u32, taps: u64) -> Result<Vec<f64>> {
    let r = register_length;
    if !(2..=24).contains(&r) {
        return Err(Error::InvalidArgument(format!(
            "register length must be in 2..=24, got {r}"
        )));
    }
    if taps >> r != 1 || taps & 1 == 0 {
        return Err(Error::InvalidArgument(format!(
            "taps {taps:#b} do not encode a degree-{r} polynomial with a constant term"
        )));
    }
    let n = (1u64 << r) - 1;
    let feedback = taps & (n >> 0); // low r bits: terms x^0 .. x^{r-1}
    let seed = n;
    let mut state = seed;
    let mut out = Vec::with_capacity(n as usize);
    for step in 1..=n {
        out.push(1.0 - 2.0 * (state & 1) as f64);
        let fb = (state & feedback).count_ones() as u64 & 1;
        state = (state >> 1) | (fb << (r - 1));
        if state == seed && step < n {
            return Err(Error::InvalidArgument(format!(
                "taps {taps:#b} are not primitive: register period {step} < {n}"
            )));
        }
    }
    if state != seed {
        return Err(Error::InvalidArgument(format!(
            "taps {taps:#b} are not primitive: register does not return to the seed after {n} steps"
        )));
    }
    Ok(out)
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        let px = PI * x;
        1.0 - px * px / 6.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Truncated raised-cosine pulse with roll-off 0.25, supported on
/// (-5*T_s, 5*T_s]. Unit peak at t = 0, zero at every other chip instant.
pub fn raised_cosine(t: f64, t_s: f64) -> f64 {
    debug_assert!(t_s > 0.0);
    let x = t / t_s;
    if x <= -5.0 || x > 5.0 {
        return 0.0;
    }
    let half = 2.0 * ROLL_OFF * x;
    let denom = 1.0 - half * half;
    if denom.abs() < 1e-9 {
        // removable singularity at |x| = 1/(2*roll_off)
        return FRAC_PI_4 * sinc(x);
    }
    sinc(x) * (PI * ROLL_OFF * x).cos() / denom
}

/// Fractional-delay steering matrix for the PMCW code `s`: column k samples
/// the pulse-shaped, periodically transmitted code delayed by `delays[k]`
/// seconds. Integer-chip delays reduce to exact circular shifts of `s`.
pub fn pmcw_steering_matrix(s: &[f64], delays: &[f64], t_s: f64) -> Result<Mat<f64>> {
    if delays.is_empty() {
        return Err(Error::InvalidArgument("empty delay list".into()));
    }
    if !(t_s > 0.0) || !t_s.is_finite() {
        return Err(Error::InvalidArgument(format!("chip duration must be positive, got {t_s}")));
    }
    let n1 = s.len() as i64;
    if n1 == 0 {
        return Err(Error::InvalidArgument("empty code sequence".into()));
    }
    let mut m = Mat::zeros(s.len(), delays.len());
    for (k, &tau) in delays.iter().enumerate() {
        if !tau.is_finite() || tau < 0.0 {
            return Err(Error::InvalidArgument(format!("delay must be nonnegative, got {tau}")));
        }
        let whole = (tau / t_s).floor();
        let frac = tau - whole * t_s;
        let whole = whole as i64;
        // chip weights of the ten pulse tails straddling each sample
        let w: Vec<f64> = (-5..5).map(|i| raised_cosine(i as f64 * t_s + frac, t_s)).collect();
        for n in 0..n1 {
            let mut acc = 0.0;
            for (j, i) in (-5..5).enumerate() {
                acc += s[(n + i - whole).rem_euclid(n1) as usize] * w[j];
            }
            m[(n as usize, k)] = acc;
        }
    }
    Ok(m)
}

fn check_freq(w: f64, what: &str) -> Result<()> {
    if !w.is_finite() || !(0.0..TAU).contains(&w) {
        return Err(Error::InvalidArgument(format!(
            "{what} must lie in [0, 2*pi), got {w}"
        )));
    }
    Ok(())
}

fn check_amp(a: C64) -> Result<()> {
    if !a.re.is_finite() || !a.im.is_finite() {
        return Err(Error::InvalidArgument(format!("amplitude must be finite, got {a}")));
    }
    Ok(())
}

/// Noiseless LFMCW snapshot matrix, vectorized fast-axis first:
/// y(n1, n2) = sum of amp * exp(j*(w*n1 + wbar*n2)) over targets.
pub fn synthesize_lfmcw(scene: &Scene, n1: usize, n2: usize) -> Result<Vec<C64>> {
    let mut y = vec![C64::ZERO; n1 * n2];
    for t in &scene.targets {
        check_freq(t.range_coord, "fast-axis frequency")?;
        check_freq(t.doppler, "doppler frequency")?;
        check_amp(t.amp)?;
        for j2 in 0..n2 {
            let slow = t.amp * C64::from_polar(1.0, t.doppler * j2 as f64);
            let row = &mut y[n1 * j2..n1 * (j2 + 1)];
            for (j1, v) in row.iter_mut().enumerate() {
                *v += slow * C64::from_polar(1.0, t.range_coord * j1 as f64);
            }
        }
    }
    Ok(y)
}

/// Noiseless PMCW snapshot matrix, vectorized fast-axis first: each target
/// contributes its delayed code column times a slow-time phase ramp.
/// Target delays are in seconds and must stay below one PRI.
pub fn synthesize_pmcw(scene: &Scene, s: &[f64], n2: usize, t_s: f64) -> Result<Vec<C64>> {
    let n1 = s.len();
    let pri = n1 as f64 * t_s;
    let mut y = vec![C64::ZERO; n1 * n2];
    if scene.targets.is_empty() {
        return Ok(y);
    }
    for t in &scene.targets {
        if !t.range_coord.is_finite() || t.range_coord < 0.0 || t.range_coord >= pri {
            return Err(Error::InvalidArgument(format!(
                "delay {} falls outside the PRI [0, {pri})",
                t.range_coord
            )));
        }
        check_freq(t.doppler, "doppler frequency")?;
        check_amp(t.amp)?;
    }
    let delays: Vec<f64> = scene.targets.iter().map(|t| t.range_coord).collect();
    let steer = pmcw_steering_matrix(s, &delays, t_s)?;
    for (k, t) in scene.targets.iter().enumerate() {
        for j2 in 0..n2 {
            let slow = t.amp * C64::from_polar(1.0, t.doppler * j2 as f64);
            let row = &mut y[n1 * j2..n1 * (j2 + 1)];
            for (j1, v) in row.iter_mut().enumerate() {
                *v += slow * steer[(j1, k)];
            }
        }
    }
    Ok(y)
}

/// Add circularly symmetric complex white Gaussian noise at the requested
/// SNR. Returns the noisy vector and the total noise variance
/// sigma^2 = signal_power * 10^(-snr_db/10); each real component gets
/// variance sigma^2 / 2. `snr_db = f64::INFINITY` is the no-noise sentinel.
pub fn add_noise<R: Rng + ?Sized>(
    y: &[C64],
    snr_db: f64,
    signal_power: f64,
    rng: &mut R,
) -> (Vec<C64>, f64) {
    debug_assert!(signal_power > 0.0);
    debug_assert!(!snr_db.is_nan());
    if snr_db == f64::INFINITY {
        return (y.to_vec(), 0.0);
    }
    let sigma2 = signal_power * 10f64.powf(-snr_db / 10.0);
    let scale = (sigma2 / 2.0).sqrt();
    let noisy = y
        .iter()
        .map(|&v| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            v + C64::new(scale * re, scale * im)
        })
        .collect();
    (noisy, sigma2)
}

/// Invert the frequency pair of an LFMCW estimate into physical range (m)
/// and radial velocity (m/s).
pub fn freq_to_range_doppler(w: f64, w_bar: f64, p: &RadarParams) -> Result<(f64, f64)> {
    if p.chirp_rate_half == 0.0 {
        return Err(Error::InvalidArgument(
            "chirp rate is zero: range cannot be recovered from the beat frequency".into(),
        ));
    }
    let v = w_bar * p.light_speed / (4.0 * PI * p.carrier * p.chirp_duration);
    let range = (w * p.light_speed * p.sample_rate / TAU - 2.0 * p.carrier * v)
        / (4.0 * p.chirp_rate_half);
    Ok((range, v))
}

/// Forward map from physical range/velocity to the frequency pair; inverse
/// of [`freq_to_range_doppler`].
pub fn range_doppler_to_freq(range: f64, v: f64, p: &RadarParams) -> Result<(f64, f64)> {
    p.validate()?;
    let w_bar = 4.0 * PI * p.carrier * p.chirp_duration * v / p.light_speed;
    let w = (4.0 * p.chirp_rate_half * range + 2.0 * p.carrier * v) * TAU
        / (p.light_speed * p.sample_rate);
    Ok((w, w_bar))
}

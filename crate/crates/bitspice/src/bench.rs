//! Trial metrics, seeded Monte Carlo benchmarks, and range-Doppler image
//! export.
//!
//! A [`Scenario`] is a fully serializable description of one experiment:
//! model, dimensions, grid, SNR sweep, threshold scheme, scene generator and
//! estimator knobs. [`monte_carlo`] replays it over a seed list for a set of
//! algorithms and aggregates NMSE, sidelobe power, runtime and iteration
//! counts per (algorithm, SNR) pair. Everything except wall-clock timing is
//! a pure function of the seed list.

use std::f64::consts::TAU;
use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use faer::Mat;
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dictionary::{Dictionary, FourierGrid};
use crate::numerics::seq_parallelism;
use crate::onebit::{onebit_estimate, OneBitConfig, OneBitVariant, SolverKind, DEFAULT_EPSILON};
use crate::quantizer::{eight_level_threshold, pri_varying_threshold, signc, Threshold, ThresholdScheme};
use crate::spice::{hp_estimate, HpOptions, WeightScheme};
use crate::waveforms::{add_noise, mls_generate, pmcw_steering_matrix, synthesize_lfmcw, synthesize_pmcw, Scene, Target};
use crate::{C64, Error, Result};

/// Lower clip for exported dB maps.
pub const DB_FLOOR: f64 = -80.0;

/// Estimation grid geometry: `kr_bins` range cells (fast index) by
/// `kd_bins` Doppler cells, atom `k = kr + kr_bins * kd`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridShape {
    pub kr_bins: usize,
    pub kd_bins: usize,
}

impl GridShape {
    pub fn n_atoms(&self) -> usize {
        self.kr_bins * self.kd_bins
    }

    pub fn flat(&self, kr: usize, kd: usize) -> usize {
        debug_assert!(kr < self.kr_bins && kd < self.kd_bins);
        kr + self.kr_bins * kd
    }

    /// Atom indices at most one cell away from `bin` along each axis, with
    /// wrap-around; `bin` itself included. Sorted and deduplicated.
    pub fn neighborhood(&self, bin: usize) -> Vec<usize> {
        debug_assert!(bin < self.n_atoms());
        let (kr, kd) = (bin % self.kr_bins, bin / self.kr_bins);
        let mut out = Vec::with_capacity(9);
        for dd in [self.kd_bins - 1, 0, 1] {
            for dr in [self.kr_bins - 1, 0, 1] {
                out.push(self.flat((kr + dr) % self.kr_bins, (kd + dd) % self.kd_bins));
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// A scene target reduced to grid coordinates: nearest atom index and true
/// amplitude magnitude.
#[derive(Debug, Clone, Copy)]
pub struct TargetBin {
    pub bin: usize,
    pub amplitude: f64,
}

/// Outcome of a single estimation run on one noise/threshold realization.
#[derive(Debug, Clone)]
pub struct TrialResult {
    /// Recovered amplitude spectrum, one entry per grid atom.
    pub estimates: Vec<C64>,
    pub scene: Scene,
    pub grid: GridShape,
    /// Scene targets mapped to their nearest grid bins.
    pub targets: Vec<TargetBin>,
    pub seed: u64,
    pub runtime_s: f64,
    pub iterations: usize,
}

impl TrialResult {
    pub fn new(
        estimates: Vec<C64>,
        scene: Scene,
        grid: GridShape,
        targets: Vec<TargetBin>,
        seed: u64,
        runtime_s: f64,
        iterations: usize,
    ) -> Result<Self> {
        if estimates.len() != grid.n_atoms() {
            return Err(Error::DimensionMismatch(format!(
                "{} estimates for a {}x{} grid",
                estimates.len(),
                grid.kr_bins,
                grid.kd_bins
            )));
        }
        for t in &targets {
            if t.bin >= grid.n_atoms() || !(t.amplitude > 0.0) || !t.amplitude.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "bad target bin {} amplitude {}",
                    t.bin, t.amplitude
                )));
            }
        }
        if !(runtime_s >= 0.0) {
            return Err(Error::InvalidArgument(format!("negative runtime {runtime_s}")));
        }
        Ok(Self { estimates, scene, grid, targets, seed, runtime_s, iterations })
    }

    /// Amplitude read out for a target: max spectrum magnitude within one
    /// bin of `bin` in each grid axis.
    pub fn peak_amplitude(&self, bin: usize) -> f64 {
        self.grid
            .neighborhood(bin)
            .iter()
            .map(|&j| self.estimates[j].norm())
            .fold(0.0, f64::max)
    }
}

/// Average normalized squared amplitude error over all targets of all
/// trials: mean of (amp_hat - amp)^2 / amp^2.
pub fn nmse(trials: &[TrialResult]) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for trial in trials {
        for t in &trial.targets {
            let a_hat = trial.peak_amplitude(t.bin);
            let e = (a_hat - t.amplitude) / t.amplitude;
            sum += e * e;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::InvalidArgument("no targets to score".into()));
    }
    Ok(sum / count as f64)
}

/// Average residual spectrum energy: mean over trials of total energy minus
/// the energy attributed to the targets. Returns 0 for an empty slice.
pub fn sidelobe_power(trials: &[TrialResult]) -> f64 {
    if trials.is_empty() {
        return 0.0;
    }
    let mut sum = 0.0;
    for trial in trials {
        let total: f64 = trial.estimates.iter().map(|v| v.norm_sqr()).sum();
        let peaks: f64 = trial.targets.iter().map(|t| trial.peak_amplitude(t.bin).powi(2)).sum();
        sum += total - peaks;
    }
    sum / trials.len() as f64
}

/// Number of entries above `rel_floor` times the largest entry; the support
/// size of a power or magnitude spectrum.
pub fn support_size(values: &[f64], rel_floor: f64) -> usize {
    let max = values.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return 0;
    }
    values.iter().filter(|&&v| v > rel_floor * max).count()
}

/// Matched-filter amplitude spectrum `b_k^H y / ||b_k||^2`; the classical
/// periodogram readout, and the 1bPER baseline when fed sign data.
pub fn periodogram_amplitudes(d: &Dictionary, y: &[C64]) -> Result<Vec<C64>> {
    let t = d.adjoint_matvec(y)?;
    let norms = d.column_norms_sq();
    Ok(t
        .iter()
        .zip(&norms)
        .map(|(&v, &w)| if w > 0.0 { v / w } else { C64::ZERO })
        .collect())
}

/// Which estimator a benchmark trial runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// One-bit estimator on the signed data.
    OneBit(OneBitVariant),
    /// High-precision estimator on the unquantized noisy data.
    HighPrecision(WeightScheme),
    /// Periodogram of the signed data; the 1bPER baseline.
    OneBitPeriodogram,
}

impl Algorithm {
    pub fn label(&self) -> &'static str {
        match self {
            Algorithm::OneBit(v) => v.as_str(),
            Algorithm::HighPrecision(s) => s.as_str(),
            Algorithm::OneBitPeriodogram => "1bper",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "1bspice" => Algorithm::OneBit(OneBitVariant::Spice),
            "1blikes" => Algorithm::OneBit(OneBitVariant::Likes),
            "1bslim" => Algorithm::OneBit(OneBitVariant::Slim),
            "1biaa" => Algorithm::OneBit(OneBitVariant::Iaa),
            "1bper" => Algorithm::OneBitPeriodogram,
            "spice" => Algorithm::HighPrecision(WeightScheme::Spice),
            "likes" => Algorithm::HighPrecision(WeightScheme::Likes),
            "slim" => Algorithm::HighPrecision(WeightScheme::Slim),
            "iaa" => Algorithm::HighPrecision(WeightScheme::Iaa),
            other => {
                return Err(Error::Config(format!(
                    "unknown algorithm '{other}': expected one of 1bspice, 1blikes, 1bslim, \
                     1biaa, 1bper, spice, likes, slim, iaa"
                )))
            }
        })
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Measurement model family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lfmcw,
    Pmcw,
}

/// Threshold scheme selector for scenario configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdKind {
    /// Eight-level threshold redrawn every sample.
    PerSample,
    /// Eight-level threshold held constant within each PRI.
    PerPri,
    /// All-zero threshold; plain sign quantization. The amplitude scale is
    /// then unidentifiable and estimators report unscaled coefficients.
    Zero,
}

/// Per-trial scene generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneModel {
    /// Fixed tones: angular frequencies (rad/sample) and magnitudes; each
    /// trial redraws uniform phases. LFMCW only.
    Sinusoids { freqs: Vec<f64>, amps: Vec<f64> },
    /// `count` scatterers dropped on random grid cells with pairwise
    /// (wrapped Chebyshev) separation of at least `min_separation_bins`;
    /// the first `off_grid` of them are pushed 0.2 to 0.5 bins off the grid
    /// in both axes. Magnitudes uniform in [amp_min, amp_max], phases
    /// uniform. PMCW only.
    RandomScatter {
        count: usize,
        off_grid: usize,
        amp_min: f64,
        amp_max: f64,
        min_separation_bins: usize,
    },
}

fn default_chip_seconds() -> f64 {
    1e-6
}

/// Declarative description of one benchmark experiment; serializes every
/// knob so a results table can be reproduced from the config and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub model: ModelKind,
    /// Fast-time samples per PRI.
    pub n1: usize,
    /// PRIs per coherent interval.
    pub n2: usize,
    pub kr_bins: usize,
    pub kd_bins: usize,
    /// m-sequence shift register length (PMCW only).
    #[serde(default)]
    pub code_register_length: Option<u32>,
    /// m-sequence feedback polynomial bit mask (PMCW only).
    #[serde(default)]
    pub code_taps: Option<u64>,
    /// Chip duration in seconds (PMCW only).
    #[serde(default = "default_chip_seconds")]
    pub chip_seconds: f64,
    pub snr_db: Vec<f64>,
    pub threshold: ThresholdKind,
    pub scene: SceneModel,
    pub epsilon: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
    pub solver: SolverKind,
}

impl Scenario {
    /// Five tones with the classic two-close-tones resolution stress: the
    /// second and third sit 1/n apart in normalized frequency. Grid is 5x
    /// oversampled, threshold redrawn per sample.
    pub fn five_sinusoids(n: usize, snr_db: Vec<f64>) -> Self {
        let fractions = [0.150, 0.216, 0.216 + 1.0 / n as f64, 0.375, 0.450];
        Self {
            name: "five-sinusoids".into(),
            model: ModelKind::Lfmcw,
            n1: n,
            n2: 1,
            kr_bins: 5 * n,
            kd_bins: 1,
            code_register_length: None,
            code_taps: None,
            chip_seconds: default_chip_seconds(),
            snr_db,
            threshold: ThresholdKind::PerSample,
            scene: SceneModel::Sinusoids {
                freqs: fractions.iter().map(|f| f * TAU).collect(),
                amps: vec![1.0, 0.8, 0.8, 0.6, 0.4],
            },
            epsilon: DEFAULT_EPSILON,
            rel_tol: 1e-3,
            max_iter: 150,
            solver: SolverKind::Dense,
        }
    }

    /// Thirty scatterers (four off-grid) seen by a length-31 m-sequence
    /// PMCW radar over 64 PRIs, on a 124x320 range-Doppler grid with a
    /// PRI-varying threshold.
    pub fn pmcw_scatter(snr_db: Vec<f64>) -> Self {
        Self {
            name: "pmcw-scatter".into(),
            model: ModelKind::Pmcw,
            n1: 31,
            n2: 64,
            kr_bins: 124,
            kd_bins: 320,
            code_register_length: Some(5),
            code_taps: Some(0b100101),
            chip_seconds: default_chip_seconds(),
            snr_db,
            threshold: ThresholdKind::PerPri,
            scene: SceneModel::RandomScatter {
                count: 30,
                off_grid: 4,
                amp_min: 0.1,
                amp_max: 1.0,
                min_separation_bins: 6,
            },
            epsilon: DEFAULT_EPSILON,
            rel_tol: 1e-3,
            max_iter: 150,
            solver: SolverKind::Dense,
        }
    }

    pub fn grid(&self) -> GridShape {
        GridShape { kr_bins: self.kr_bins, kd_bins: self.kd_bins }
    }

    pub fn n_samples(&self) -> usize {
        self.n1 * self.n2
    }

    /// PRI duration in seconds; meaningful for the PMCW model.
    pub fn pri_seconds(&self) -> f64 {
        self.n1 as f64 * self.chip_seconds
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n1 == 0 || self.n2 == 0 || self.kr_bins == 0 || self.kd_bins == 0 {
            return fail(format!(
                "dimensions must be positive: n1={} n2={} kr_bins={} kd_bins={}",
                self.n1, self.n2, self.kr_bins, self.kd_bins
            ));
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| s.is_nan()) {
            return fail("snr_db must be a non-empty list of numbers".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return fail(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return fail(format!("rel_tol must be positive, got {}", self.rel_tol));
        }
        if self.max_iter == 0 {
            return fail("max_iter must be at least 1".into());
        }
        if !(self.chip_seconds > 0.0 && self.chip_seconds.is_finite()) {
            return fail(format!("chip_seconds must be positive, got {}", self.chip_seconds));
        }
        match self.model {
            ModelKind::Lfmcw => {
                if self.code_register_length.is_some() || self.code_taps.is_some() {
                    return fail("code parameters are only meaningful for the pmcw model".into());
                }
                if self.kr_bins < self.n1 || self.kd_bins < self.n2 {
                    return fail(format!(
                        "the Fourier grid must cover the data: kr_bins={} < n1={} or kd_bins={} \
                         < n2={}",
                        self.kr_bins, self.n1, self.kd_bins, self.n2
                    ));
                }
            }
            ModelKind::Pmcw => {
                let r = match self.code_register_length {
                    Some(r) => r,
                    None => return fail("pmcw model needs code_register_length".into()),
                };
                if self.code_taps.is_none() {
                    return fail("pmcw model needs code_taps".into());
                }
                let period = (1usize << r) - 1;
                if self.n1 != period {
                    return fail(format!(
                        "n1={} does not match the m-sequence period {period}",
                        self.n1
                    ));
                }
            }
        }
        match &self.scene {
            SceneModel::Sinusoids { freqs, amps } => {
                if self.model != ModelKind::Lfmcw {
                    return fail("sinusoid scenes require the lfmcw model".into());
                }
                // empty lists are allowed: a zero-target scene is pure noise
                if freqs.len() != amps.len() {
                    return fail(format!(
                        "freqs and amps must pair up, got {}/{}",
                        freqs.len(),
                        amps.len()
                    ));
                }
                if freqs.iter().any(|&w| !(0.0..TAU).contains(&w)) {
                    return fail("tone frequencies must lie in [0, 2*pi)".into());
                }
                if amps.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
                    return fail("tone amplitudes must be positive".into());
                }
            }
            SceneModel::RandomScatter { count, off_grid, amp_min, amp_max, min_separation_bins } => {
                if self.model != ModelKind::Pmcw {
                    return fail("scatter scenes require the pmcw model".into());
                }
                if *count == 0 || off_grid > count {
                    return fail(format!("bad target counts: {count} total, {off_grid} off-grid"));
                }
                if !(*amp_min > 0.0 && amp_max >= amp_min && amp_max.is_finite()) {
                    return fail(format!("bad amplitude range [{amp_min}, {amp_max}]"));
                }
                let sep = *min_separation_bins;
                if sep == 0 || count * (2 * sep + 1).pow(2) > self.kr_bins * self.kd_bins {
                    return fail(format!(
                        "{count} targets with separation {sep} cannot fit a {}x{} grid",
                        self.kr_bins, self.kd_bins
                    ));
                }
            }
        }
        Ok(())
    }

    /// Reject algorithm/solver combinations the estimators cannot honor.
    pub fn check_algorithm(&self, algorithm: Algorithm) -> Result<()> {
        if let Algorithm::OneBit(v) = algorithm {
            self.onebit_config(v).validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn onebit_config(&self, variant: OneBitVariant) -> OneBitConfig {
        let mut cfg = OneBitConfig::new(variant);
        cfg.epsilon = self.epsilon;
        cfg.rel_tol = self.rel_tol;
        cfg.max_iter = self.max_iter;
        cfg.solver = self.solver;
        cfg
    }

    /// The transmitted m-sequence (PMCW only).
    pub fn code(&self) -> Result<Vec<f64>> {
        match (self.code_register_length, self.code_taps) {
            (Some(r), Some(taps)) => mls_generate(r, taps),
            _ => Err(Error::Config("scenario has no code parameters".into())),
        }
    }

    /// Build the estimation dictionary for this scenario.
    pub fn build_dictionary(&self) -> Result<Dictionary> {
        match self.model {
            ModelKind::Lfmcw => Dictionary::fourier(FourierGrid {
                n1: self.n1,
                n2: self.n2,
                kr_bins: self.kr_bins,
                kd_bins: self.kd_bins,
            }),
            ModelKind::Pmcw => {
                let code = self.code()?;
                let pri = self.pri_seconds();
                let delays: Vec<f64> =
                    (0..self.kr_bins).map(|k| k as f64 * pri / self.kr_bins as f64).collect();
                let steering = pmcw_steering_matrix(&code, &delays, self.chip_seconds)?;
                let doppler = Mat::from_fn(self.n2, self.kd_bins, |n, k| {
                    C64::from_polar(1.0, TAU * (n * k) as f64 / self.kd_bins as f64)
                });
                Dictionary::kronecker(steering, doppler)
            }
        }
    }

    /// Draw one scene realization.
    pub fn draw_scene<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Scene> {
        self.validate()?;
        match &self.scene {
            SceneModel::Sinusoids { freqs, amps } => {
                let targets = freqs
                    .iter()
                    .zip(amps)
                    .map(|(&w, &a)| {
                        let cells = w / TAU * self.kr_bins as f64;
                        Target {
                            range_coord: w,
                            doppler: 0.0,
                            amp: C64::from_polar(a, rng.random_range(0.0..TAU)),
                            on_grid: (cells - cells.round()).abs() < 1e-9,
                        }
                    })
                    .collect();
                Ok(Scene::new(targets))
            }
            SceneModel::RandomScatter { count, off_grid, amp_min, amp_max, min_separation_bins } => {
                let cells = self.draw_cells(*count, *min_separation_bins, rng)?;
                let pri = self.pri_seconds();
                let targets = cells
                    .into_iter()
                    .enumerate()
                    .map(|(i, (kr, kd))| {
                        let off = i < *off_grid;
                        let (dr, dd) = if off {
                            (half_bin_offset(rng), half_bin_offset(rng))
                        } else {
                            (0.0, 0.0)
                        };
                        let r_cells = (kr as f64 + dr).rem_euclid(self.kr_bins as f64);
                        let d_cells = (kd as f64 + dd).rem_euclid(self.kd_bins as f64);
                        Target {
                            range_coord: r_cells / self.kr_bins as f64 * pri,
                            doppler: TAU * d_cells / self.kd_bins as f64,
                            amp: C64::from_polar(
                                rng.random_range(*amp_min..=*amp_max),
                                rng.random_range(0.0..TAU),
                            ),
                            on_grid: !off,
                        }
                    })
                    .collect();
                Ok(Scene::new(targets))
            }
        }
    }

    fn draw_cells<R: Rng + ?Sized>(
        &self,
        count: usize,
        min_sep: usize,
        rng: &mut R,
    ) -> Result<Vec<(usize, usize)>> {
        let mut cells: Vec<(usize, usize)> = Vec::with_capacity(count);
        let mut attempts = 0usize;
        while cells.len() < count {
            attempts += 1;
            if attempts > 10_000 * count {
                return Err(Error::Numerical(format!(
                    "could not place {count} targets with separation {min_sep}"
                )));
            }
            let kr = rng.random_range(0..self.kr_bins);
            let kd = rng.random_range(0..self.kd_bins);
            let far_enough = cells.iter().all(|&(a, b)| {
                wrapped_distance(kr, a, self.kr_bins).max(wrapped_distance(kd, b, self.kd_bins))
                    >= min_sep
            });
            if far_enough {
                cells.push((kr, kd));
            }
        }
        Ok(cells)
    }

    /// Noiseless measurements for one scene under this scenario's model.
    pub fn synthesize(&self, scene: &Scene) -> Result<Vec<C64>> {
        match self.model {
            ModelKind::Lfmcw => synthesize_lfmcw(scene, self.n1, self.n2),
            ModelKind::Pmcw => synthesize_pmcw(scene, &self.code()?, self.n2, self.chip_seconds),
        }
    }

    /// Map scene targets to their nearest grid bins.
    pub fn target_bins(&self, scene: &Scene) -> Vec<TargetBin> {
        let grid = self.grid();
        scene
            .targets
            .iter()
            .map(|t| {
                let r_cells = match self.model {
                    ModelKind::Lfmcw => t.range_coord / TAU * grid.kr_bins as f64,
                    ModelKind::Pmcw => t.range_coord / self.pri_seconds() * grid.kr_bins as f64,
                };
                let d_cells = t.doppler / TAU * grid.kd_bins as f64;
                let kr = (r_cells.round() as usize).rem_euclid(grid.kr_bins);
                let kd = (d_cells.round() as usize).rem_euclid(grid.kd_bins);
                TargetBin { bin: grid.flat(kr, kd), amplitude: t.amp.norm() }
            })
            .collect()
    }
}

fn wrapped_distance(a: usize, b: usize, period: usize) -> usize {
    let d = (a as i64 - b as i64).rem_euclid(period as i64) as usize;
    d.min(period - d)
}

fn half_bin_offset<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let magnitude = rng.random_range(0.2..0.5);
    if rng.random_bool(0.5) {
        magnitude
    } else {
        -magnitude
    }
}

/// Run one seeded trial: draw the scene, synthesize, add noise, quantize,
/// estimate. Only the estimator call is timed.
/// Draw the scenario's threshold realization. `h_max` scales the
/// eight-level alphabet; the zero scheme ignores it.
pub fn draw_threshold<R: Rng + ?Sized>(
    scenario: &Scenario,
    n: usize,
    h_max: f64,
    rng: &mut R,
) -> Threshold {
    match scenario.threshold {
        ThresholdKind::PerSample => eight_level_threshold(n, h_max, rng),
        ThresholdKind::PerPri => pri_varying_threshold(scenario.n1, scenario.n2, h_max, rng),
        ThresholdKind::Zero => {
            Threshold { values: vec![C64::ZERO; n], scheme: ThresholdScheme::PerSample }
        }
    }
}

pub fn run_trial(
    scenario: &Scenario,
    dict: &Dictionary,
    algorithm: Algorithm,
    snr_db: f64,
    seed: u64,
) -> Result<TrialResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scene = scenario.draw_scene(&mut rng)?;
    let y = scenario.synthesize(&scene)?;
    let signal_power: f64 = scene.targets.iter().map(|t| t.amp.norm_sqr()).sum();
    // a zero-target scene still gets noise, scaled as if a unit-power
    // signal were present
    let reference = if signal_power > 0.0 { signal_power } else { 1.0 };
    let (y_noisy, sigma2) = add_noise(&y, snr_db, reference, &mut rng);
    let h_max = 0.5 * (signal_power + sigma2).sqrt();
    let threshold = draw_threshold(scenario, y.len(), h_max, &mut rng);
    let z = signc(&y_noisy, &threshold)?;
    let targets = scenario.target_bins(&scene);

    let start = Instant::now();
    let (estimates, iterations) = match algorithm {
        Algorithm::OneBit(variant) => {
            let cfg = scenario.onebit_config(variant);
            let est = onebit_estimate(&z, dict, &threshold.values, &cfg)?;
            // When the scale stays unresolved (eta = 0) score the raw
            // amplitudes; the trial is then honestly bad.
            (est.amplitudes.unwrap_or(est.beta), est.iterations)
        }
        Algorithm::HighPrecision(scheme) => {
            let mut opts = HpOptions::new(scheme);
            opts.max_iter = scenario.max_iter;
            opts.tol = scenario.rel_tol;
            let est = hp_estimate(dict, &y_noisy, &opts)?;
            (est.amplitudes, est.iterations)
        }
        Algorithm::OneBitPeriodogram => (periodogram_amplitudes(dict, &z.z)?, 0),
    };
    let runtime_s = start.elapsed().as_secs_f64();
    TrialResult::new(estimates, scene, scenario.grid(), targets, seed, runtime_s, iterations)
}

/// One aggregated line of the results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub algorithm: String,
    pub snr_db: f64,
    /// Trials that completed and contribute to the averages.
    pub n_runs: usize,
    pub nmse: f64,
    pub sidelobe_power: f64,
    pub mean_runtime_s: f64,
    pub mean_iters: f64,
}

/// A failed trial, recorded instead of aborting the whole benchmark.
#[derive(Debug, Clone)]
pub struct TrialAbort {
    pub algorithm: String,
    pub snr_db: f64,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct BenchReport {
    pub rows: Vec<ResultRow>,
    pub aborts: Vec<TrialAbort>,
}

/// Replay `scenario` for every (algorithm, SNR, seed) combination and
/// aggregate the metrics. `seeds` must have exactly `n_runs` entries; the
/// result is a pure function of them apart from the timing columns. `jobs`
/// caps trial parallelism and does not affect the output.
pub fn monte_carlo(
    scenario: &Scenario,
    algorithms: &[Algorithm],
    n_runs: usize,
    seeds: &[u64],
    jobs: usize,
) -> Result<BenchReport> {
    scenario.validate()?;
    if algorithms.is_empty() {
        return Err(Error::Config("no algorithms requested".into()));
    }
    if n_runs == 0 {
        return Err(Error::Config("n_runs must be at least 1".into()));
    }
    if seeds.len() != n_runs {
        return Err(Error::Config(format!(
            "{} seeds for {n_runs} runs; seeds are mandatory, one per run",
            seeds.len()
        )));
    }
    for &a in algorithms {
        scenario.check_algorithm(a)?;
    }
    seq_parallelism();
    let dict = scenario.build_dictionary()?;

    let mut tasks = Vec::with_capacity(algorithms.len() * scenario.snr_db.len() * n_runs);
    for &alg in algorithms {
        for &snr in &scenario.snr_db {
            for &seed in seeds {
                tasks.push((alg, snr, seed));
            }
        }
    }
    let results = run_tasks(scenario, &dict, &tasks, jobs)?;
    Ok(aggregate(algorithms, &scenario.snr_db, n_runs, &tasks, results))
}

fn run_tasks(
    scenario: &Scenario,
    dict: &Dictionary,
    tasks: &[(Algorithm, f64, u64)],
    jobs: usize,
) -> Result<Vec<Result<TrialResult>>> {
    if jobs <= 1 {
        return Ok(tasks
            .iter()
            .map(|&(alg, snr, seed)| run_trial(scenario, dict, alg, snr, seed))
            .collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("could not build a {jobs}-thread pool: {e}")))?;
    Ok(pool.install(|| {
        tasks
            .par_iter()
            .map(|&(alg, snr, seed)| run_trial(scenario, dict, alg, snr, seed))
            .collect()
    }))
}

fn aggregate(
    algorithms: &[Algorithm],
    snrs: &[f64],
    n_runs: usize,
    tasks: &[(Algorithm, f64, u64)],
    results: Vec<Result<TrialResult>>,
) -> BenchReport {
    let mut report = BenchReport::default();
    let mut slot = results.into_iter();
    for (a_i, &alg) in algorithms.iter().enumerate() {
        for (s_i, &snr) in snrs.iter().enumerate() {
            debug_assert_eq!(
                tasks[(a_i * snrs.len() + s_i) * n_runs].0,
                alg,
                "task layout out of sync"
            );
            let mut completed = Vec::with_capacity(n_runs);
            for t_i in 0..n_runs {
                let seed = tasks[(a_i * snrs.len() + s_i) * n_runs + t_i].2;
                match slot.next().expect("one result per task") {
                    Ok(trial) => completed.push(trial),
                    Err(e) => report.aborts.push(TrialAbort {
                        algorithm: alg.label().into(),
                        snr_db: snr,
                        seed,
                        message: e.to_string(),
                    }),
                }
            }
            let row = ResultRow {
                algorithm: alg.label().into(),
                snr_db: snr,
                n_runs: completed.len(),
                nmse: nmse(&completed).unwrap_or(f64::NAN),
                sidelobe_power: if completed.is_empty() {
                    f64::NAN
                } else {
                    sidelobe_power(&completed)
                },
                mean_runtime_s: mean(completed.iter().map(|t| t.runtime_s)),
                mean_iters: mean(completed.iter().map(|t| t.iterations as f64)),
            };
            report.rows.push(row);
        }
    }
    report
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in values {
        sum += v;
        count += 1;
    }
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

/// Render the results table as CSV.
pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from("algorithm,snr_db,n_runs,nmse,sidelobe_power,mean_runtime_s,mean_iters\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{:.6},{}\n",
            r.algorithm, r.snr_db, r.n_runs, r.nmse, r.sidelobe_power, r.mean_runtime_s, r.mean_iters
        ));
    }
    out
}

pub fn write_results_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    std::fs::write(path, results_csv(rows))?;
    Ok(())
}

/// Magnitude to clipped decibels.
pub fn to_db(magnitude: f64) -> f64 {
    if magnitude > 0.0 {
        (20.0 * magnitude.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

/// Write a range-Doppler map as `<stem>.csv` (dB values, Kd rows by Kr
/// columns) and `<stem>.pgm` (8-bit grayscale, dB mapped linearly from the
/// floor to the map's peak). `values` are magnitudes in atom order, range
/// fastest.
pub fn export_rd_image(
    values: &[f64],
    kr_bins: usize,
    kd_bins: usize,
    stem: &Path,
) -> Result<(PathBuf, PathBuf)> {
    if values.len() != kr_bins * kd_bins {
        return Err(Error::DimensionMismatch(format!(
            "{} values for a {kr_bins}x{kd_bins} grid",
            values.len()
        )));
    }
    let db: Vec<f64> = values.iter().map(|&v| to_db(v)).collect();

    let mut csv = String::with_capacity(db.len() * 8);
    for kd in 0..kd_bins {
        for kr in 0..kr_bins {
            if kr > 0 {
                csv.push(',');
            }
            csv.push_str(&format!("{:.3}", db[kr + kr_bins * kd]));
        }
        csv.push('\n');
    }
    let csv_path = stem.with_extension("csv");
    std::fs::write(&csv_path, csv)?;

    let peak = db.iter().cloned().fold(DB_FLOOR, f64::max);
    let scale = if peak > DB_FLOOR { 255.0 / (peak - DB_FLOOR) } else { 0.0 };
    let mut pgm = Vec::with_capacity(db.len() + 32);
    write!(&mut pgm, "P5\n{kr_bins} {kd_bins}\n255\n")?;
    pgm.extend(db.iter().map(|&d| ((d - DB_FLOOR) * scale).round() as u8));
    let pgm_path = stem.with_extension("pgm");
    std::fs::write(&pgm_path, pgm)?;
    Ok((csv_path, pgm_path))
}

/// Read back an exported dB map: (kr_bins, kd_bins, values range-fastest).
pub fn load_rd_csv(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let text = std::fs::read_to_string(path)?;
    let mut kr_bins = 0usize;
    let mut rows = 0usize;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut width = 0usize;
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|e| {
                Error::InvalidArgument(format!("{}: bad dB value '{field}': {e}", path.display()))
            })?;
            values.push(v);
            width += 1;
        }
        if i == 0 {
            kr_bins = width;
        } else if width != kr_bins {
            return Err(Error::InvalidArgument(format!(
                "{}: ragged row {i}: {width} columns, expected {kr_bins}",
                path.display()
            )));
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::InvalidArgument(format!("{}: empty grid", path.display())));
    }
    Ok((kr_bins, rows, values))
}

//! One-bit quantization against known time-varying thresholds, plus the
//! two threshold generators used by the experiments.

use rand::{Rng, RngExt};

use crate::{C64, Error, Result};

/// How the threshold varies over the measurement vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdScheme {
    /// Independent draw for every sample.
    PerSample,
    /// Constant over each block of `samples_per_pri` consecutive samples.
    PerPri { samples_per_pri: usize },
}

/// Complex threshold vector handed to the comparator.
#[derive(Debug, Clone)]
pub struct Threshold {
    pub values: Vec<C64>,
    pub scheme: ThresholdScheme,
}

/// One-bit measurements: every entry is one of the four values ±1 ± j.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedMeasurements {
    pub z: Vec<C64>,
}

fn sign(x: f64) -> f64 {
    if x >= 0.0 { 1.0 } else { -1.0 }
}

/// Component-wise complex sign of `y - h`, with sign(0) = +1.
pub fn signc(y: &[C64], h: &Threshold) -> Result<SignedMeasurements> {
    if y.len() != h.values.len() {
        return Err(Error::DimensionMismatch(format!(
            "signal length {} != threshold length {}",
            y.len(),
            h.values.len()
        )));
    }
    let z = y
        .iter()
        .zip(&h.values)
        .map(|(v, t)| C64::new(sign(v.re - t.re), sign(v.im - t.im)))
        .collect();
    Ok(SignedMeasurements { z })
}

/// The eight-element threshold alphabet: -h_max, -h_max + step, ..., h_max
/// with step = 2*h_max/7.
pub fn eight_levels(h_max: f64) -> [f64; 8] {
    let step = 2.0 * h_max / 7.0;
    std::array::from_fn(|i| -h_max + i as f64 * step)
}

fn draw_level<R: Rng + ?Sized>(levels: &[f64; 8], rng: &mut R) -> C64 {
    let re = levels[rng.random_range(0..8)];
    let im = levels[rng.random_range(0..8)];
    C64::new(re, im)
}

/// Per-sample threshold: real and imaginary parts drawn independently and
/// uniformly from the eight-level alphabet.
pub fn eight_level_threshold<R: Rng + ?Sized>(n: usize, h_max: f64, rng: &mut R) -> Threshold {
    debug_assert!(h_max > 0.0);
    let levels = eight_levels(h_max);
    let values = (0..n).map(|_| draw_level(&levels, rng)).collect();
    Threshold { values, scheme: ThresholdScheme::PerSample }
}

/// Per-PRI threshold: one eight-level draw per PRI, replicated across the
/// `n1` fast-time samples of that PRI.
pub fn pri_varying_threshold<R: Rng + ?Sized>(
    n1: usize,
    n2: usize,
    h_max: f64,
    rng: &mut R,
) -> Threshold {
    debug_assert!(n1 >= 1 && n2 >= 1);
    debug_assert!(h_max > 0.0);
    let levels = eight_levels(h_max);
    let mut values = Vec::with_capacity(n1 * n2);
    for _ in 0..n2 {
        let v = draw_level(&levels, rng);
        values.extend(std::iter::repeat_n(v, n1));
    }
    Threshold { values, scheme: ThresholdScheme::PerPri { samples_per_pri: n1 } }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_threshold(n: usize) -> Threshold {
        Threshold { values: vec![C64::ZERO; n], scheme: ThresholdScheme::PerSample }
    }

    #[test]
    fn sign_of_zero_is_positive() {
        let z = signc(&[C64::ZERO], &zero_threshold(1)).unwrap();
        assert_eq!(z.z, vec![C64::new(1.0, 1.0)]);
        let z = signc(&[C64::new(1.0, -2.0)], &zero_threshold(1)).unwrap();
        assert_eq!(z.z, vec![C64::new(1.0, -1.0)]);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(signc(&[C64::ZERO; 3], &zero_threshold(2)).is_err());
    }

    #[test]
    fn entries_have_magnitude_sqrt_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y: Vec<C64> =
            (0..64).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        let h = eight_level_threshold(64, 0.4, &mut rng);
        let z = signc(&y, &h).unwrap();
        for v in &z.z {
            assert!(v.re.abs() == 1.0 && v.im.abs() == 1.0);
            assert_eq!(v.norm(), std::f64::consts::SQRT_2);
        }
    }

    #[test]
    fn requantizing_unit_offsets_reproduces_signs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y: Vec<C64> =
            (0..128).map(|_| C64::new(4.0 * rng.random::<f64>() - 2.0, 4.0 * rng.random::<f64>() - 2.0)).collect();
        let h = eight_level_threshold(128, 1.0, &mut rng);
        let z = signc(&y, &h).unwrap();
        // y' sits exactly one unit on the recorded side of the threshold
        let y2: Vec<C64> = h.values.iter().zip(&z.z).map(|(t, s)| t + s).collect();
        let z2 = signc(&y2, &h).unwrap();
        assert_eq!(z, z2);
    }

    #[test]
    fn threshold_shift_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y: Vec<C64> =
            (0..64).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        let h = eight_level_threshold(64, 0.7, &mut rng);
        let shifted: Vec<C64> = y.iter().zip(&h.values).map(|(v, t)| v - t).collect();
        let a = signc(&y, &h).unwrap();
        let b = signc(&shifted, &zero_threshold(64)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn alphabet_matches_definition() {
        let set = eight_levels(3.5);
        let want = [-3.5, -2.5, -1.5, -0.5, 0.5, 1.5, 2.5, 3.5];
        for (a, b) in set.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn per_sample_draws_live_in_alphabet() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h_max = 0.9;
        let set = eight_levels(h_max);
        let h = eight_level_threshold(1000, h_max, &mut rng);
        assert_eq!(h.scheme, ThresholdScheme::PerSample);
        for v in &h.values {
            assert!(set.iter().any(|&l| l == v.re), "{}", v.re);
            assert!(set.iter().any(|&l| l == v.im), "{}", v.im);
        }
    }

    #[test]
    fn per_sample_levels_are_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h_max = 1.0;
        let set = eight_levels(h_max);
        let n = 500_000;
        let h = eight_level_threshold(n, h_max, &mut rng);
        let mut counts = [0usize; 8];
        for v in &h.values {
            counts[set.iter().position(|&l| l == v.re).unwrap()] += 1;
            counts[set.iter().position(|&l| l == v.im).unwrap()] += 1;
        }
        for (i, c) in counts.iter().enumerate() {
            let freq = *c as f64 / (2 * n) as f64;
            assert!((freq - 0.125).abs() < 0.01, "level {i}: {freq}");
        }
    }

    #[test]
    fn per_pri_blocks_are_constant() {
        // seed chosen so the two PRI draws land on different alphabet pairs
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = pri_varying_threshold(4, 2, 1.0, &mut rng);
        assert_eq!(h.scheme, ThresholdScheme::PerPri { samples_per_pri: 4 });
        assert_eq!(h.values.len(), 8);
        let mut distinct: Vec<C64> = h.values.clone();
        distinct.dedup();
        assert_eq!(distinct.len(), 2);
        for block in h.values.chunks(4) {
            assert!(block.iter().all(|v| v == &block[0]));
        }

        let h = pri_varying_threshold(31, 64, 2.0, &mut rng);
        for block in h.values.chunks(31) {
            assert!(block.iter().all(|v| v == &block[0]));
        }

        let h = pri_varying_threshold(5, 1, 1.0, &mut rng);
        assert!(h.values.iter().all(|v| v == &h.values[0]));
    }
}

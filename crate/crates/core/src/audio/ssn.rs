use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::AudioBuffer;
use crate::dsp::{hann, RealFft};
use crate::error::{Error, Result};

/// Shortest reference accepted by [`generate_ssn`].
pub const SSN_MIN_REFERENCE: usize = 4096;
const WELCH_SEGMENT: usize = 512;

/// Welch-averaged magnitude spectrum: Hann-windowed segments of `segment`
/// samples with 50% overlap, `segment / 2 + 1` bins.
pub fn welch_magnitude(x: &[f64], segment: usize) -> Vec<f64> {
    let fft = RealFft::new(segment);
    let window = hann(segment, true);
    let hop = segment / 2;
    let mut acc = vec![0.0; fft.bins()];
    let mut count = 0usize;
    let mut start = 0;
    while start + segment <= x.len() {
        let seg: Vec<f64> = x[start..start + segment]
            .iter()
            .zip(&window)
            .map(|(s, w)| s * w)
            .collect();
        for (a, c) in acc.iter_mut().zip(fft.forward(&seg)) {
            *a += c.norm();
        }
        count += 1;
        start += hop;
    }
    if count > 0 {
        acc.iter_mut().for_each(|a| *a /= count as f64);
    }
    acc
}

/// Gaussian noise carrying the long-term average magnitude spectrum of
/// `reference`, at the reference's RMS level. Deterministic for a given seed.
pub fn generate_ssn(reference: &AudioBuffer, length: usize, seed: u64) -> Result<AudioBuffer> {
    if reference.len() < SSN_MIN_REFERENCE {
        return Err(Error::TooShort(format!(
            "SSN reference has {} samples, need at least {SSN_MIN_REFERENCE}",
            reference.len()
        )));
    }
    if length == 0 {
        return Ok(reference.with_samples(vec![]));
    }
    let profile = welch_magnitude(reference.samples(), WELCH_SEGMENT);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let white: Vec<f64> = (0..length).map(|_| StandardNormal.sample(&mut rng)).collect();

    let fft = RealFft::new(length);
    let mut spec = fft.forward(&white);
    let last = (profile.len() - 1) as f64;
    for (k, bin) in spec.iter_mut().enumerate() {
        // map bin k of the long transform onto the Welch grid
        let pos = (k as f64 * WELCH_SEGMENT as f64 / length as f64).min(last);
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        let gain = if i + 1 < profile.len() {
            profile[i] * (1.0 - frac) + profile[i + 1] * frac
        } else {
            profile[i]
        };
        *bin *= gain;
    }
    let mut shaped = fft.inverse(&spec);

    let target = reference.rms();
    let current = super::rms(&shaped);
    let g = if current > 0.0 { target / current } else { 0.0 };
    shaped.iter_mut().for_each(|s| *s *= g);
    AudioBuffer::new(shaped, reference.sample_rate())
}

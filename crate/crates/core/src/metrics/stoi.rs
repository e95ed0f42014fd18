//! Short-time objective intelligibility (STOI).
//!
//! Both signals are resampled to 10 kHz, frames more than 40 dB below the
//! loudest clean frame are dropped from both, and one-third-octave band
//! envelopes are compared over 384 ms segments after the processed envelope
//! is level-normalised and clipped at a -15 dB signal-to-distortion ratio.
//! The score is the mean correlation over all bands and segments.

use serde::{Deserialize, Serialize};

use crate::audio::{resample, AudioBuffer};
use crate::dsp::RealFft;
use crate::error::{Error, Result};

pub const STOI_RATE: u32 = 10_000;
const FRAME_LEN: usize = 256;
const NFFT: usize = 512;
const NUM_BANDS: usize = 15;
const MIN_FREQ: f64 = 150.0;
/// Frames per short-time segment (384 ms at a 128-sample hop).
const SEGMENT: usize = 30;
const BETA_DB: f64 = -15.0;
const DYN_RANGE_DB: f64 = 40.0;
const EPS: f64 = f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoiScore {
    pub value: f64,
    /// `value` relative to a reference score, capped at 1.
    pub normalized_value: Option<f64>,
}

/// Symmetric Hann of length `n + 2` with both zero endpoints dropped.
fn inner_hann(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n + 1) as f64).cos())
        .collect()
}

/// Band index ranges `[lo, hi)` over the `NFFT / 2 + 1` bins; each edge is
/// the bin nearest to the band's one-third-octave edge.
fn third_octave_bands() -> Vec<(usize, usize)> {
    let bins = NFFT / 2 + 1;
    let freqs: Vec<f64> = (0..bins).map(|i| i as f64 * STOI_RATE as f64 / NFFT as f64).collect();
    let nearest = |target: f64| {
        (0..bins)
            .min_by(|&a, &b| (freqs[a] - target).abs().total_cmp(&(freqs[b] - target).abs()))
            .unwrap()
    };
    (0..NUM_BANDS)
        .map(|k| {
            let k = k as f64;
            let lo = MIN_FREQ * 2f64.powf((2.0 * k - 1.0) / 6.0);
            let hi = MIN_FREQ * 2f64.powf((2.0 * k + 1.0) / 6.0);
            (nearest(lo), nearest(hi))
        })
        .collect()
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Drops frames of `x` more than `DYN_RANGE_DB` below its loudest frame
/// (and the same frames of `y`) and overlap-adds the remainder.
fn remove_silent_frames(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let hop = FRAME_LEN / 2;
    let w = inner_hann(FRAME_LEN);
    if x.len() < FRAME_LEN {
        return (vec![], vec![]);
    }
    let starts: Vec<usize> = (0..=x.len() - FRAME_LEN).step_by(hop).collect();
    let windowed = |s: &[f64], start: usize| -> Vec<f64> {
        s[start..start + FRAME_LEN].iter().zip(&w).map(|(a, b)| a * b).collect()
    };
    let x_frames: Vec<Vec<f64>> = starts.iter().map(|&s| windowed(x, s)).collect();
    let y_frames: Vec<Vec<f64>> = starts.iter().map(|&s| windowed(y, s)).collect();
    let energies: Vec<f64> = x_frames.iter().map(|f| 20.0 * (norm(f) + EPS).log10()).collect();
    let max = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let keep: Vec<usize> = (0..energies.len())
        .filter(|&i| max - DYN_RANGE_DB - energies[i] < 0.0)
        .collect();
    if keep.is_empty() {
        return (vec![], vec![]);
    }
    let out_len = (keep.len() - 1) * hop + FRAME_LEN;
    let mut xs = vec![0.0; out_len];
    let mut ys = vec![0.0; out_len];
    for (j, &i) in keep.iter().enumerate() {
        for k in 0..FRAME_LEN {
            xs[j * hop + k] += x_frames[i][k];
            ys[j * hop + k] += y_frames[i][k];
        }
    }
    (xs, ys)
}

/// One-third-octave band envelopes, `[band][frame]`.
fn band_envelopes(x: &[f64], fft: &RealFft, bands: &[(usize, usize)]) -> Vec<Vec<f64>> {
    let hop = FRAME_LEN / 2;
    let w = inner_hann(FRAME_LEN);
    let mut env = vec![Vec::new(); bands.len()];
    // frame starts stop one short of a full final window, as in the reference procedure
    let mut start = 0;
    while start + FRAME_LEN < x.len() {
        let frame: Vec<f64> = x[start..start + FRAME_LEN].iter().zip(&w).map(|(a, b)| a * b).collect();
        let power: Vec<f64> = fft.forward(&frame).iter().map(|c| c.norm_sqr()).collect();
        for (b, &(lo, hi)) in bands.iter().enumerate() {
            env[b].push(power[lo..hi].iter().sum::<f64>().sqrt());
        }
        start += hop;
    }
    env
}

fn prepare(buffer: &AudioBuffer) -> Result<Vec<f64>> {
    if buffer.sample_rate() == STOI_RATE {
        Ok(buffer.samples().to_vec())
    } else {
        Ok(resample(buffer, STOI_RATE)?.into_samples())
    }
}

/// STOI of `processed` against the `clean` reference.
pub fn stoi(clean: &AudioBuffer, processed: &AudioBuffer) -> Result<StoiScore> {
    if clean.sample_rate() != processed.sample_rate() {
        return Err(Error::RateMismatch {
            left: clean.sample_rate(),
            right: processed.sample_rate(),
        });
    }
    if clean.len().abs_diff(processed.len()) > 1 {
        return Err(Error::LengthMismatch {
            left: clean.len(),
            right: processed.len(),
        });
    }
    if clean.duration_secs() < 0.5 {
        return Err(Error::TooShort(format!(
            "STOI needs at least 0.5 s, got {:.3} s",
            clean.duration_secs()
        )));
    }
    if clean.peak() == 0.0 {
        return Err(Error::Silent);
    }
    let mut x = prepare(clean)?;
    let mut y = prepare(processed)?;
    let n = x.len().min(y.len());
    x.truncate(n);
    y.truncate(n);

    let (x, y) = remove_silent_frames(&x, &y);
    let fft = RealFft::new(NFFT);
    let bands = third_octave_bands();
    let x_env = band_envelopes(&x, &fft, &bands);
    let y_env = band_envelopes(&y, &fft, &bands);
    let frames = x_env[0].len();
    if frames < SEGMENT {
        return Err(Error::TooShort(format!(
            "only {frames} non-silent frames, need {SEGMENT}"
        )));
    }

    let clip = 1.0 + 10f64.powf(-BETA_DB / 20.0);
    let mut total = 0.0;
    let mut count = 0usize;
    for m in SEGMENT..=frames {
        for (xb, yb) in x_env.iter().zip(&y_env) {
            let xs = &xb[m - SEGMENT..m];
            let ys = &yb[m - SEGMENT..m];
            let alpha = norm(xs) / (norm(ys) + EPS);
            let yp: Vec<f64> = ys.iter().zip(xs).map(|(yv, xv)| (yv * alpha).min(xv * clip)).collect();
            total += correlation(xs, &yp);
            count += 1;
        }
    }
    let value = total / count as f64;
    Ok(StoiScore {
        value,
        normalized_value: None,
    })
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let ac: Vec<f64> = a.iter().map(|v| v - ma).collect();
    let bc: Vec<f64> = b.iter().map(|v| v - mb).collect();
    let (na, nb) = (norm(&ac) + EPS, norm(&bc) + EPS);
    ac.iter().zip(&bc).map(|(p, q)| (p / na) * (q / nb)).sum()
}

/// Scores `processed` and expresses it relative to `reference`, capped at 1.
pub fn stoi_normalized(clean: &AudioBuffer, processed: &AudioBuffer, reference: &StoiScore) -> Result<StoiScore> {
    let mut score = stoi(clean, processed)?;
    score.normalized_value = Some(normalize_score(score.value, reference.value)?);
    Ok(score)
}

pub fn normalize_score(value: f64, reference: f64) -> Result<f64> {
    if !(reference > 0.0) {
        return Err(Error::invalid(format!(
            "reference STOI must be positive, got {reference}"
        )));
    }
    Ok((value / reference).min(1.0))
}

/// STOI of `clean` corrupted by its own speech-shaped noise at 10 dB; the
/// usual reference for normalized scores.
pub fn ssn_reference_score(clean: &AudioBuffer, seed: u64) -> Result<StoiScore> {
    let ssn = crate::audio::generate_ssn(clean, clean.len(), seed)?;
    let mix = crate::audio::mix_at_snr(clean, &ssn, &crate::audio::MixSpec::at(10.0))?;
    stoi(clean, &mix.mixture)
}

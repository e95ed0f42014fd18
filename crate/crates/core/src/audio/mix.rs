use serde::{Deserialize, Serialize};

use super::{rms, AudioBuffer};
use crate::error::{Error, Result};

/// Peak-normalizes a buffer to unit maximum magnitude.
///
/// Returns the normalized buffer and the scale such that
/// `original == normalized * scale`.
pub fn normalize_peak(buffer: &AudioBuffer) -> Result<(AudioBuffer, f64)> {
    let peak = buffer.peak();
    if peak == 0.0 {
        return Err(Error::Silent);
    }
    let out = buffer.samples().iter().map(|s| s / peak).collect();
    Ok((buffer.with_samples(out), peak))
}

/// Which portion of the clean signal defines its level when mixing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LevelBasis {
    /// Plain RMS over the whole utterance.
    #[default]
    Rms,
    /// RMS over 10 ms blocks whose energy is within 40 dB of the loudest block.
    ActiveRms,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixSpec {
    pub snr_db: f64,
    #[serde(default)]
    pub noise_seek: usize,
    #[serde(default)]
    pub level_basis: LevelBasis,
}

impl MixSpec {
    pub fn at(snr_db: f64) -> Self {
        Self {
            snr_db,
            noise_seek: 0,
            level_basis: LevelBasis::Rms,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mixture {
    pub mixture: AudioBuffer,
    /// The cropped noise after gain, i.e. `mixture - clean`.
    pub scaled_noise: AudioBuffer,
    pub gain: f64,
}

pub(crate) fn level(x: &[f64], sample_rate: u32, basis: LevelBasis) -> f64 {
    match basis {
        LevelBasis::Rms => rms(x),
        LevelBasis::ActiveRms => {
            let block = ((sample_rate as usize) / 100).max(1);
            let energies: Vec<f64> = x
                .chunks(block)
                .map(|c| c.iter().map(|s| s * s).sum::<f64>() / c.len() as f64)
                .collect();
            let max = energies.iter().cloned().fold(0.0, f64::max);
            if max == 0.0 {
                return 0.0;
            }
            let floor = max * 1e-4;
            let (sum, n) = x
                .chunks(block)
                .zip(&energies)
                .filter(|(_, &e)| e >= floor)
                .fold((0.0, 0usize), |(s, n), (c, _)| {
                    (s + c.iter().map(|v| v * v).sum::<f64>(), n + c.len())
                });
            (sum / n as f64).sqrt()
        }
    }
}

/// Adds `noise` (cropped from `spec.noise_seek`, never looped) to `clean`,
/// scaled so the clean-to-noise level ratio equals `spec.snr_db`.
pub fn mix_at_snr(clean: &AudioBuffer, noise: &AudioBuffer, spec: &MixSpec) -> Result<Mixture> {
    if clean.sample_rate() != noise.sample_rate() {
        return Err(Error::RateMismatch {
            left: clean.sample_rate(),
            right: noise.sample_rate(),
        });
    }
    if !spec.snr_db.is_finite() {
        return Err(Error::invalid("snr_db must be finite"));
    }
    let n = clean.len();
    let end = spec.noise_seek.checked_add(n);
    let crop = match end {
        Some(end) if end <= noise.len() => &noise.samples()[spec.noise_seek..end],
        _ => {
            return Err(Error::NoiseTooShort {
                needed: n,
                seek: spec.noise_seek,
                available: noise.len(),
            })
        }
    };
    let clean_level = level(clean.samples(), clean.sample_rate(), spec.level_basis);
    let noise_level = rms(crop);
    if noise_level == 0.0 {
        return Err(Error::invalid("noise segment is silent; cannot reach a finite SNR"));
    }
    let gain = 10f64.powf(-spec.snr_db / 20.0) * clean_level / noise_level;
    let scaled: Vec<f64> = crop.iter().map(|v| v * gain).collect();
    let mixed: Vec<f64> = clean.samples().iter().zip(&scaled).map(|(c, v)| c + v).collect();
    Ok(Mixture {
        mixture: clean.with_samples(mixed),
        scaled_noise: clean.with_samples(scaled),
        gain,
    })
}

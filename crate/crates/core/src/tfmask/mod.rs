//! Ideal time-frequency mask baselines on a gammatone front end.
//!
//! The ideal binary mask (IBM) needs the clean signal and the noise that was
//! added to it; the target binary mask (TBM) needs the clean signal and a
//! speech-shaped noise reference. Both are applied to the gammatone channels
//! of the noisy mixture and resynthesized.

pub mod gammatone;
mod grid;
mod masks;
mod resynth;

pub use gammatone::{erb_center_frequencies, gammatone_analyze, ChannelSignals, GammatoneBank};
pub use grid::{frame_count, tf_energy, TfGrid};
pub use masks::{channel_coverage, ibm_compute, tbm_compute, BinaryMask, LocalCriterion};
pub use resynth::mask_resynthesize;

use serde::{Deserialize, Serialize};

use crate::audio::{generate_ssn, AudioBuffer};
use crate::error::{Error, Result};

/// Analysis geometry and criteria shared by the IBM and TBM pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskSettings {
    pub win_ms: f64,
    pub hop_ms: f64,
    /// IBM relative criterion, added to the mixture SNR to form LC.
    pub rc_db: f64,
    /// When set, use this LC directly instead of mixture SNR + RC.
    pub absolute_lc_db: Option<f64>,
    /// Fraction of per-channel speech energy the TBM must retain.
    pub coverage: f64,
}

impl Default for MaskSettings {
    fn default() -> Self {
        Self {
            win_ms: 20.0,
            hop_ms: 10.0,
            rc_db: -5.0,
            absolute_lc_db: None,
            coverage: 0.99,
        }
    }
}

impl MaskSettings {
    pub fn criterion(&self, mixture_snr_db: f64) -> LocalCriterion {
        match self.absolute_lc_db {
            Some(lc_db) => LocalCriterion::Absolute { lc_db },
            None => LocalCriterion::Relative {
                mixture_snr_db,
                rc_db: self.rc_db,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct MaskedOutput {
    pub audio: AudioBuffer,
    pub mask: BinaryMask,
}

fn check_lengths(a: &AudioBuffer, b: &AudioBuffer) -> Result<()> {
    if a.sample_rate() != b.sample_rate() {
        return Err(Error::RateMismatch {
            left: a.sample_rate(),
            right: b.sample_rate(),
        });
    }
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// Full IBM pipeline: analyse clean and scaled noise, build the mask,
/// apply it to the mixture channels and resynthesize.
pub fn ibm_process(
    clean: &AudioBuffer,
    scaled_noise: &AudioBuffer,
    mixture: &AudioBuffer,
    mixture_snr_db: f64,
    settings: &MaskSettings,
    bank: &GammatoneBank,
) -> Result<MaskedOutput> {
    check_lengths(clean, scaled_noise)?;
    check_lengths(clean, mixture)?;
    let clean_grid = tf_energy(&bank.analyze(clean)?, settings.win_ms, settings.hop_ms)?;
    let noise_grid = tf_energy(&bank.analyze(scaled_noise)?, settings.win_ms, settings.hop_ms)?;
    let mask = ibm_compute(&clean_grid, &noise_grid, settings.criterion(mixture_snr_db))?;
    let audio = mask_resynthesize(&bank.analyze(mixture)?, &mask, bank)?;
    Ok(MaskedOutput { audio, mask })
}

/// Full TBM pipeline. The speech-shaped noise is generated from the clean
/// signal at its own level with `ssn_seed`.
pub fn tbm_process(
    clean: &AudioBuffer,
    mixture: &AudioBuffer,
    settings: &MaskSettings,
    bank: &GammatoneBank,
    ssn_seed: u64,
) -> Result<MaskedOutput> {
    check_lengths(clean, mixture)?;
    let ssn = generate_ssn(clean, clean.len(), ssn_seed)?;
    tbm_process_with_ssn(clean, &ssn, mixture, settings, bank)
}

/// TBM pipeline against a precomputed speech-shaped noise reference.
pub fn tbm_process_with_ssn(
    clean: &AudioBuffer,
    ssn: &AudioBuffer,
    mixture: &AudioBuffer,
    settings: &MaskSettings,
    bank: &GammatoneBank,
) -> Result<MaskedOutput> {
    check_lengths(clean, ssn)?;
    check_lengths(clean, mixture)?;
    let clean_grid = tf_energy(&bank.analyze(clean)?, settings.win_ms, settings.hop_ms)?;
    let ssn_grid = tf_energy(&bank.analyze(ssn)?, settings.win_ms, settings.hop_ms)?;
    let mask = tbm_compute(&clean_grid, &ssn_grid, settings.coverage)?;
    let audio = mask_resynthesize(&bank.analyze(mixture)?, &mask, bank)?;
    Ok(MaskedOutput { audio, mask })
}

//! Blind acoustic mask: a time-domain, per-frame sample mask driven only by
//! the noisy signal.
//!
//! Each non-overlapping frame gets a DATE noise estimate `sigma_hat`, a lower
//! amplitude bound `y_bq`, the target proportion
//! `d = |sigma_ny - sigma_hat| / (sigma_ny + sigma_hat)` and an upper bound
//! `xi = max(y_bq, d)`. Samples with magnitude strictly inside `(y_bq, xi)`
//! pass unchanged, those at or above `xi` lose `alpha * sigma_hat` of
//! magnitude, and the rest are scaled by `beta`.
//!
//! Thresholds are magnitudes and are compared against `|x|`; the sign of
//! each sample is restored afterwards. Because `d` is dimensionless the
//! comparison only makes sense on a peak-normalized signal, so
//! [`bam_process`] normalizes first by default.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::audio::{frame_split, normalize_peak, AudioBuffer};
use crate::error::{Error, Result};
use crate::noise::{date_estimate, frame_std, DateConfig, DateEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BamParams {
    /// Over-subtraction factor applied above the preserved band.
    pub alpha: f64,
    /// Flooring factor applied below the preserved band.
    pub beta: f64,
    pub frame_ms: f64,
    /// Peak-normalize before masking and restore the scale afterwards.
    pub normalize: bool,
    pub date: DateConfig,
}

impl Default for BamParams {
    fn default() -> Self {
        Self {
            alpha: 0.35,
            beta: 0.65,
            frame_ms: 32.0,
            normalize: true,
            date: DateConfig::default(),
        }
    }
}

impl BamParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::invalid(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        if !(self.frame_ms > 0.0 && self.frame_ms.is_finite()) {
            return Err(Error::invalid(format!("frame_ms must be > 0, got {}", self.frame_ms)));
        }
        self.date.validate()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchCounts {
    pub kept: usize,
    pub subtracted: usize,
    pub floored: usize,
}

impl BranchCounts {
    pub fn total(&self) -> usize {
        self.kept + self.subtracted + self.floored
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameDecision {
    pub sigma_ny: f64,
    pub d_q: f64,
    pub xi_q: f64,
    pub estimate: DateEstimate,
    pub counts: BranchCounts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Branch {
    Keep,
    Subtract,
    Floor,
}

#[inline]
fn classify(magnitude: f64, y_bq: f64, xi_q: f64) -> Branch {
    if y_bq < magnitude && magnitude < xi_q {
        Branch::Keep
    } else if magnitude >= xi_q {
        Branch::Subtract
    } else {
        Branch::Floor
    }
}

#[inline]
fn transform(x: f64, branch: Branch, subtrahend: f64, beta: f64) -> f64 {
    match branch {
        Branch::Keep => x,
        Branch::Subtract => (x.abs() - subtrahend).max(0.0).copysign(x),
        Branch::Floor => beta * x,
    }
}

/// `|sigma_ny - sigma_hat| / |sigma_ny + sigma_hat|`, defined as 0 when both vanish.
pub fn target_proportion(sigma_ny: f64, sigma_hat: f64) -> f64 {
    let den = (sigma_ny + sigma_hat).abs();
    if den == 0.0 {
        return 0.0;
    }
    (sigma_ny - sigma_hat).abs() / den
}

pub fn adaptive_threshold(y_bq: f64, d_q: f64) -> f64 {
    y_bq.max(d_q)
}

/// Applies the three-branch sample transform to one frame.
pub fn apply_mask_frame(frame: &[f64], est: &DateEstimate, xi_q: f64, params: &BamParams) -> (Vec<f64>, BranchCounts) {
    mask_into(frame, frame, est, xi_q, params.alpha * est.sigma_hat, params.beta)
}

/// Classifies on `analysis` and writes the transform of the matching
/// `source` samples. `analysis` may be a rescaled copy of `source`.
fn mask_into(
    analysis: &[f64],
    source: &[f64],
    est: &DateEstimate,
    xi_q: f64,
    subtrahend: f64,
    beta: f64,
) -> (Vec<f64>, BranchCounts) {
    let mut counts = BranchCounts::default();
    let out = analysis
        .iter()
        .zip(source)
        .map(|(&a, &x)| {
            let branch = classify(a.abs(), est.y_bq, xi_q);
            match branch {
                Branch::Keep => counts.kept += 1,
                Branch::Subtract => counts.subtracted += 1,
                Branch::Floor => counts.floored += 1,
            }
            transform(x, branch, subtrahend, beta)
        })
        .collect();
    (out, counts)
}

#[derive(Debug, Clone)]
pub struct BamOutput {
    pub audio: AudioBuffer,
    pub decisions: Vec<FrameDecision>,
    /// Peak used for normalization (1 when normalization is off).
    pub scale: f64,
}

/// Runs the full mask: normalize, frame, estimate, threshold, mask, concatenate.
///
/// Decisions and thresholds are computed on the normalized signal; the
/// transform is applied to the original samples with the subtraction
/// rescaled, which equals masking the normalized signal and multiplying
/// back, without the rounding round trip.
pub fn bam_process(noisy: &AudioBuffer, params: &BamParams) -> Result<BamOutput> {
    params.validate()?;
    let (analysis, scale) = if params.normalize {
        normalize_peak(noisy)?
    } else {
        (noisy.clone(), 1.0)
    };
    let frames = frame_split(&analysis, params.frame_ms)?;
    let mut out = Vec::with_capacity(noisy.len());
    let mut decisions = Vec::with_capacity(frames.len());

    let mut offset = 0;
    for frame in &frames.frames {
        let source = &noisy.samples()[offset..offset + frame.len()];
        offset += frame.len();

        let estimate = date_estimate(frame, &params.date)?;
        let sigma_ny = frame_std(frame);
        let d_q = target_proportion(sigma_ny, estimate.sigma_hat);
        let xi_q = adaptive_threshold(estimate.y_bq, d_q);
        let subtrahend = params.alpha * estimate.sigma_hat * scale;
        let (masked, counts) = mask_into(frame, source, &estimate, xi_q, subtrahend, params.beta);
        out.extend(masked);
        decisions.push(FrameDecision {
            sigma_ny,
            d_q,
            xi_q,
            estimate,
            counts,
        });
    }
    Ok(BamOutput {
        audio: noisy.with_samples(out),
        decisions,
        scale,
    })
}

pub const DIAGNOSTICS_HEADER: &str = "frame_index,sigma_ny,sigma_hat,d_q,y_bq,xi_q,kept,subtracted,floored";

/// One CSV row per frame.
pub fn write_diagnostics_csv<W: Write>(mut w: W, decisions: &[FrameDecision]) -> io::Result<()> {
    writeln!(w, "{DIAGNOSTICS_HEADER}")?;
    for (i, d) in decisions.iter().enumerate() {
        writeln!(
            w,
            "{i},{},{},{},{},{},{},{},{}",
            d.sigma_ny,
            d.estimate.sigma_hat,
            d.d_q,
            d.estimate.y_bq,
            d.xi_q,
            d.counts.kept,
            d.counts.subtracted,
            d.counts.floored
        )?;
    }
    Ok(())
}

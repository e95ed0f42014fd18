//! Per-frame robust noise level estimation with the d-dimensional trimmed
//! estimator (DATE), specialised to scalar samples.
//!
//! Magnitudes are sorted ascending, `Y_1 <= ... <= Y_T`. For each candidate
//! `t > t_min` the running estimate `sigma(t) = c * (Y_1 + ... + Y_t) / t` is
//! formed, and the first `t` whose detection level `lambda * sigma(t)` falls
//! between `Y_{t-1}` and `Y_{t+1}` becomes `b_q`. Magnitudes below `Y_{b_q}`
//! are treated as noise only and `sigma(b_q)` is the noise standard deviation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `sqrt(pi / 2)`: inverse of `E|X| / sigma` for zero-mean Gaussian `X`.
pub const GAUSSIAN_C: f64 = 1.253_314_137_315_500_3;

/// Default detection threshold, in units of the running noise estimate.
pub const DEFAULT_DETECTION_THRESHOLD: f64 = 2.5;

/// How the lower search bound `t_min` is derived from the frame length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum TMinPolicy {
    /// `t_min = floor(fraction * T)`; at least `1 - fraction` of the samples
    /// are assumed to be noise only.
    Fraction { fraction: f64 },
}

impl Default for TMinPolicy {
    fn default() -> Self {
        TMinPolicy::Fraction { fraction: 0.5 }
    }
}

impl TMinPolicy {
    pub fn t_min(&self, len: usize) -> usize {
        match *self {
            TMinPolicy::Fraction { fraction } => ((fraction * len as f64).floor() as usize).min(len.saturating_sub(1)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DateConfig {
    /// Rescales a trimmed mean magnitude into a standard deviation.
    pub c: f64,
    /// Multiplier on the running estimate that separates noise from signal
    /// magnitudes in the search relation.
    pub detection_threshold: f64,
    pub t_min: TMinPolicy,
}

impl Default for DateConfig {
    fn default() -> Self {
        Self {
            c: GAUSSIAN_C,
            detection_threshold: DEFAULT_DETECTION_THRESHOLD,
            t_min: TMinPolicy::default(),
        }
    }
}

impl DateConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::invalid(format!("DATE c must be positive, got {}", self.c)));
        }
        if !(self.detection_threshold > 0.0 && self.detection_threshold.is_finite()) {
            return Err(Error::invalid(format!(
                "DATE detection threshold must be positive, got {}",
                self.detection_threshold
            )));
        }
        let TMinPolicy::Fraction { fraction } = self.t_min;
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::invalid(format!(
                "t_min fraction must lie in [0, 1), got {fraction}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DateEstimate {
    pub sigma_hat: f64,
    /// 1-based index into the ascending magnitudes.
    pub b_q: usize,
    /// The `b_q`-th smallest magnitude.
    pub y_bq: f64,
    pub t_min: usize,
    pub c: f64,
    /// False when no index satisfied the search relation and the whole
    /// frame was used.
    pub converged: bool,
}

pub(crate) fn sorted_magnitudes(frame: &[f64]) -> Vec<f64> {
    let mut mags: Vec<f64> = frame.iter().map(|x| x.abs()).collect();
    mags.sort_by(f64::total_cmp);
    mags
}

/// Runs DATE on one frame.
pub fn date_estimate(frame: &[f64], config: &DateConfig) -> Result<DateEstimate> {
    if frame.is_empty() {
        return Err(Error::invalid("DATE needs a non-empty frame"));
    }
    config.validate()?;
    let mags = sorted_magnitudes(frame);
    let len = mags.len();
    let t_min = config.t_min.t_min(len);
    let scale = config.c * config.detection_threshold;

    // prefix[t] = Y_1 + ... + Y_t
    let mut prefix = Vec::with_capacity(len + 1);
    prefix.push(0.0);
    for &m in &mags {
        prefix.push(prefix.last().unwrap() + m);
    }

    // 1-based t, mags[t - 1] is Y_t
    let found = (t_min + 1..=len).find(|&t| {
        let level = scale * prefix[t] / t as f64;
        let below = if t >= 2 { mags[t - 2] <= level } else { true };
        let above = if t < len { level <= mags[t] } else { true };
        below && above
    });
    let (b_q, converged) = match found {
        Some(t) => (t, true),
        None => (len, false),
    };
    Ok(DateEstimate {
        sigma_hat: config.c * prefix[b_q] / b_q as f64,
        b_q,
        y_bq: mags[b_q - 1],
        t_min,
        c: config.c,
        converged,
    })
}

/// Population standard deviation (divide by `T`) about the frame mean.
pub fn frame_std(frame: &[f64]) -> f64 {
    if frame.is_empty() {
        return 0.0;
    }
    let n = frame.len() as f64;
    let mean = frame.iter().sum::<f64>() / n;
    (frame.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn gaussian(n: usize, sigma: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(0.0, sigma).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    /// Independent recomputation of the estimate from its stored index.
    fn recompute_sigma(frame: &[f64], est: &DateEstimate) -> f64 {
        let mut m: Vec<f64> = frame.iter().map(|v| v.abs()).collect();
        m.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut s = 0.0;
        for v in &m[..est.b_q] {
            s += v;
        }
        est.c * s / est.b_q as f64
    }

    #[test]
    fn all_zero_frame() {
        let est = date_estimate(&[0.0; 64], &DateConfig::default()).unwrap();
        assert_eq!(est.sigma_hat, 0.0);
        assert_eq!(est.y_bq, 0.0);
        assert!(est.converged);
    }

    #[test]
    fn empty_frame_is_an_error() {
        assert!(date_estimate(&[], &DateConfig::default()).is_err());
    }

    #[test]
    fn single_sample_tail() {
        let est = date_estimate(&[-0.3], &DateConfig::default()).unwrap();
        assert_eq!(est.b_q, 1);
        assert_eq!(est.y_bq, 0.3);
    }

    #[test]
    fn invalid_config_rejected() {
        let bad = DateConfig {
            c: 0.0,
            ..DateConfig::default()
        };
        assert!(date_estimate(&[1.0, 2.0], &bad).is_err());
        let bad = DateConfig {
            t_min: TMinPolicy::Fraction { fraction: 1.0 },
            ..DateConfig::default()
        };
        assert!(date_estimate(&[1.0, 2.0], &bad).is_err());
    }

    #[test]
    fn gaussian_frames_land_near_sigma() {
        let cfg = DateConfig::default();
        let inside = (0..1000)
            .filter(|&seed| {
                let s = date_estimate(&gaussian(512, 0.1, seed), &cfg).unwrap().sigma_hat;
                (0.085..=0.115).contains(&s)
            })
            .count();
        assert!(inside >= 900, "{inside} of 1000 inside [0.085, 0.115]");
    }

    #[test]
    fn single_outlier_is_trimmed() {
        let cfg = DateConfig::default();
        let mut rel: Vec<f64> = (0..1000)
            .map(|seed| {
                let mut f = gaussian(512, 0.05, 10_000 + seed);
                f[seed as usize % 512] = 1.0;
                let est = date_estimate(&f, &cfg).unwrap();
                assert!(est.y_bq < 1.0);
                (est.sigma_hat - 0.05).abs() / 0.05
            })
            .collect();
        rel.sort_by(f64::total_cmp);
        assert!(rel[500] < 0.2, "median relative error {}", rel[500]);
    }

    #[test]
    fn gaussian_noise_with_bursts_ignores_the_burst() {
        // a loud tone over a quarter of the frame must not inflate the estimate
        let mut f = gaussian(512, 0.02, 77);
        for (i, v) in f.iter_mut().enumerate().take(128) {
            *v += 0.8 * (i as f64 * 0.3).sin();
        }
        let est = date_estimate(&f, &DateConfig::default()).unwrap();
        assert!(est.converged);
        assert!((est.sigma_hat - 0.02).abs() / 0.02 < 0.3, "{}", est.sigma_hat);
    }

    #[test]
    fn mean_error_shrinks_with_frame_length() {
        let cfg = DateConfig::default();
        let mean_err = |len: usize| {
            (0..400)
                .map(|seed| {
                    let s = date_estimate(&gaussian(len, 1.0, seed * 7 + len as u64), &cfg)
                        .unwrap()
                        .sigma_hat;
                    (s - 1.0).abs()
                })
                .sum::<f64>()
                / 400.0
        };
        let (e64, e512, e4096) = (mean_err(64), mean_err(512), mean_err(4096));
        assert!(e64 > e512 && e512 > e4096, "{e64} {e512} {e4096}");
    }

    #[test]
    fn frame_std_examples() {
        assert_eq!(frame_std(&[1.0, -1.0, 1.0, -1.0]), 1.0);
        assert_eq!(frame_std(&[0.25; 9]), 0.0);
        assert!(frame_std(&[0.4; 9]) < 1e-15);
        assert_eq!(frame_std(&[0.0, 0.0, 2.0, 2.0]), 1.0);
    }

    proptest! {
        #[test]
        fn estimate_invariants(frame in prop::collection::vec(-1.0f64..1.0, 2..600)) {
            let est = date_estimate(&frame, &DateConfig::default()).unwrap();
            let mags = sorted_magnitudes(&frame);
            prop_assert!(est.sigma_hat >= 0.0);
            prop_assert!(est.t_min <= est.b_q && est.b_q <= frame.len());
            prop_assert!(est.t_min < est.b_q || !est.converged);
            prop_assert_eq!(est.y_bq, mags[est.b_q - 1]);
            let recomputed = recompute_sigma(&frame, &est);
            prop_assert!((est.sigma_hat - recomputed).abs() <= 1e-12 * recomputed.max(1e-300));
        }

        #[test]
        fn scale_equivariance(frame in prop::collection::vec(-1.0f64..1.0, 2..400), k in prop_oneof![-8.0f64..-0.125, 0.125f64..8.0]) {
            // powers of two keep the scaled arithmetic exact
            let k = 2f64.powi(k.abs().log2().round() as i32) * k.signum();
            let cfg = DateConfig::default();
            let a = date_estimate(&frame, &cfg).unwrap();
            let scaled: Vec<f64> = frame.iter().map(|x| x * k).collect();
            let b = date_estimate(&scaled, &cfg).unwrap();
            prop_assert_eq!(a.b_q, b.b_q);
            prop_assert_eq!(a.sigma_hat * k.abs(), b.sigma_hat);
        }

        #[test]
        fn permutation_invariance(frame in prop::collection::vec(-1.0f64..1.0, 2..400), rot in 0usize..400) {
            let cfg = DateConfig::default();
            let a = date_estimate(&frame, &cfg).unwrap();
            let mut p = frame.clone();
            p.reverse();
            let r = rot % p.len();
            p.rotate_left(r);
            prop_assert_eq!(a, date_estimate(&p, &cfg).unwrap());
        }
    }
}

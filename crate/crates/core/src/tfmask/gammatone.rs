//! Fourth-order gammatone filterbank on an ERB-rate frequency grid.
//!
//! Each channel is realised as a complex baseband filter: the input is
//! shifted down by the centre frequency, passed through four identical
//! one-pole low-pass sections with pole `exp(-2 pi b / fs)` and shifted back
//! up. The impulse response is then `t^3 exp(-2 pi b t) cos(2 pi fc (t - D))`
//! up to gain, where `D` is the envelope peak `3 / (2 pi b)`. Putting the
//! carrier phase at zero at the envelope peak lets resynthesis compensate
//! each channel by a plain integer shift.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex;

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

pub const GAMMATONE_ORDER: usize = 4;
/// Bandwidth of a fourth-order gammatone relative to the ERB at its centre.
pub const BANDWIDTH_FACTOR: f64 = 1.019;

/// ERB-rate (number of ERBs below `f`).
pub fn erb_rate(f: f64) -> f64 {
    21.4 * (1.0 + 0.00437 * f).log10()
}

pub fn erb_rate_to_hz(e: f64) -> f64 {
    (10f64.powf(e / 21.4) - 1.0) / 0.00437
}

/// Equivalent rectangular bandwidth at `f` Hz.
pub fn erb_bandwidth(f: f64) -> f64 {
    24.7 * (4.37 * f / 1000.0 + 1.0)
}

/// `n` frequencies equally spaced on the ERB-rate scale, endpoints exact.
pub fn erb_center_frequencies(n: usize, f_lo: f64, f_hi: f64) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 channels, got {n}")));
    }
    if !(f_lo > 0.0 && f_lo < f_hi && f_hi.is_finite()) {
        return Err(Error::invalid(format!("need 0 < f_lo < f_hi, got {f_lo}..{f_hi}")));
    }
    let (e_lo, e_hi) = (erb_rate(f_lo), erb_rate(f_hi));
    let step = (e_hi - e_lo) / (n - 1) as f64;
    let mut freqs: Vec<f64> = (0..n).map(|i| erb_rate_to_hz(e_lo + step * i as f64)).collect();
    freqs[0] = f_lo;
    freqs[n - 1] = f_hi;
    Ok(freqs)
}

#[derive(Debug, Clone)]
struct Channel {
    center_hz: f64,
    omega: f64,
    pole: f64,
    delay: usize,
}

#[derive(Debug, Clone)]
pub struct GammatoneBank {
    channels: Vec<Channel>,
    sample_rate: u32,
    /// Scalar that makes the delay-compensated channel sum best approximate
    /// an identity system (least squares against a unit impulse).
    synthesis_gain: f64,
}

/// Channel outputs, `n_channels` rows of `signal_len` samples, plus the
/// per-channel envelope-peak delays used to align them for resynthesis.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSignals {
    pub rows: Vec<Vec<f64>>,
    pub delays: Vec<usize>,
    pub sample_rate: u32,
}

impl ChannelSignals {
    pub fn n_channels(&self) -> usize {
        self.rows.len()
    }

    pub fn signal_len(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }
}

impl GammatoneBank {
    /// Builds a bank of `n` channels between `f_lo` and `f_hi`.
    ///
    /// `f_hi` may equal the Nyquist frequency so that the common
    /// 50-8000 Hz, 16 kHz configuration is expressible.
    pub fn new(n: usize, f_lo: f64, f_hi: f64, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        let nyquist = sample_rate as f64 / 2.0;
        if f_hi > nyquist {
            return Err(Error::invalid(format!(
                "highest centre frequency {f_hi} Hz exceeds Nyquist {nyquist} Hz"
            )));
        }
        let freqs = erb_center_frequencies(n, f_lo, f_hi)?;
        let fs = sample_rate as f64;
        let channels = freqs
            .into_iter()
            .map(|fc| {
                let b = BANDWIDTH_FACTOR * erb_bandwidth(fc);
                Channel {
                    center_hz: fc,
                    omega: 2.0 * PI * fc / fs,
                    pole: (-2.0 * PI * b / fs).exp(),
                    delay: (3.0 * fs / (2.0 * PI * b)).round() as usize,
                }
            })
            .collect();
        let mut bank = Self {
            channels,
            sample_rate,
            synthesis_gain: 1.0,
        };
        bank.synthesis_gain = bank.fit_synthesis_gain();
        Ok(bank)
    }

    /// The 64-channel, 50-8000 Hz bank.
    pub fn standard(sample_rate: u32) -> Result<Self> {
        Self::new(64, 50.0, 8000.0_f64.min(sample_rate as f64 / 2.0), sample_rate)
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn center_freqs(&self) -> Vec<f64> {
        self.channels.iter().map(|c| c.center_hz).collect()
    }

    pub fn delays(&self) -> Vec<usize> {
        self.channels.iter().map(|c| c.delay).collect()
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn synthesis_gain(&self) -> f64 {
        self.synthesis_gain
    }

    fn fit_synthesis_gain(&self) -> f64 {
        let max_delay = self.channels.iter().map(|c| c.delay).max().unwrap_or(0);
        let len = 8 * max_delay + 2048;
        let mut impulse = vec![0.0; len];
        impulse[0] = 1.0;
        let rows: Vec<Vec<f64>> = self.channels.iter().map(|c| filter_channel(c, &impulse)).collect();
        let mut sum = vec![0.0; len];
        for (c, row) in self.channels.iter().zip(&rows) {
            for (t, v) in row.iter().enumerate().skip(c.delay) {
                sum[t - c.delay] += v;
            }
        }
        let energy: f64 = sum.iter().map(|v| v * v).sum();
        if energy > 0.0 {
            sum[0] / energy
        } else {
            1.0
        }
    }

    /// Filters `buffer` through every channel.
    pub fn analyze(&self, buffer: &AudioBuffer) -> Result<ChannelSignals> {
        if buffer.sample_rate() != self.sample_rate {
            return Err(Error::RateMismatch {
                left: buffer.sample_rate(),
                right: self.sample_rate,
            });
        }
        let x = buffer.samples();
        let rows = self.channels.par_iter().map(|c| filter_channel(c, x)).collect();
        Ok(ChannelSignals {
            rows,
            delays: self.delays(),
            sample_rate: self.sample_rate,
        })
    }
}

/// Convenience wrapper for [`GammatoneBank::analyze`].
pub fn gammatone_analyze(buffer: &AudioBuffer, bank: &GammatoneBank) -> Result<ChannelSignals> {
    bank.analyze(buffer)
}

fn filter_channel(c: &Channel, x: &[f64]) -> Vec<f64> {
    let a = 1.0 - c.pole;
    let r = c.pole;
    let step = Complex::from_polar(1.0, c.omega);
    // carrier phase zero at the envelope peak
    let peak_phase = Complex::from_polar(2.0, -c.omega * c.delay as f64);
    let mut phasor = Complex::new(1.0, 0.0);
    let mut state = [Complex::new(0.0, 0.0); GAMMATONE_ORDER];
    let mut out = Vec::with_capacity(x.len());
    for (n, &v) in x.iter().enumerate() {
        let mut s = phasor.conj() * v;
        for st in state.iter_mut() {
            *st = *st * r + s * a;
            s = *st;
        }
        out.push((phasor * peak_phase * s).re);
        phasor *= step;
        if n % 1024 == 1023 {
            phasor /= phasor.norm();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erb_endpoints_exact() {
        let f = erb_center_frequencies(64, 50.0, 8000.0).unwrap();
        assert_eq!(f.len(), 64);
        assert_eq!(f[0], 50.0);
        assert_eq!(f[63], 8000.0);
        assert!(f.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn two_channels_are_the_endpoints() {
        assert_eq!(erb_center_frequencies(2, 100.0, 4000.0).unwrap(), vec![100.0, 4000.0]);
    }

    #[test]
    fn equal_erb_rate_spacing() {
        let f = erb_center_frequencies(64, 50.0, 8000.0).unwrap();
        let d: Vec<f64> = f.windows(2).map(|w| erb_rate(w[1]) - erb_rate(w[0])).collect();
        for x in &d {
            assert!((x - d[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn bad_ranges_rejected() {
        assert!(erb_center_frequencies(1, 50.0, 8000.0).is_err());
        assert!(erb_center_frequencies(8, 0.0, 8000.0).is_err());
        assert!(erb_center_frequencies(8, 900.0, 800.0).is_err());
        assert!(GammatoneBank::new(64, 50.0, 8000.0, 8000).is_err());
    }

    #[test]
    fn erb_rate_round_trip() {
        for f in [50.0, 440.0, 1000.0, 7999.0] {
            assert!((erb_rate_to_hz(erb_rate(f)) - f).abs() < 1e-9);
        }
    }

    #[test]
    fn tone_peaks_in_its_channel() {
        let bank = GammatoneBank::standard(16_000).unwrap();
        let freqs = bank.center_freqs();
        for k in [5usize, 20, 40, 60] {
            let fc = freqs[k];
            let s = (0..16_000)
                .map(|i| (2.0 * PI * fc * i as f64 / 16_000.0).sin())
                .collect();
            let ch = bank.analyze(&AudioBuffer::new(s, 16_000).unwrap()).unwrap();
            let rms: Vec<f64> = ch.rows.iter().map(|r| crate::audio::rms(&r[4000..])).collect();
            let best = (0..rms.len()).max_by(|&a, &b| rms[a].total_cmp(&rms[b])).unwrap();
            assert_eq!(best, k, "tone at {fc} Hz peaked in channel {best}");
            // unit gain at the centre frequency
            assert!(
                (rms[k] * 2f64.sqrt() - 1.0).abs() < 0.05,
                "gain {}",
                rms[k] * 2f64.sqrt()
            );
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let bank = GammatoneBank::new(8, 100.0, 4000.0, 16_000).unwrap();
        let ch = bank.analyze(&AudioBuffer::silence(500, 16_000).unwrap()).unwrap();
        assert!(ch.rows.iter().flatten().all(|&v| v == 0.0));
        assert_eq!(ch.signal_len(), 500);
    }

    #[test]
    fn impulse_excites_every_channel() {
        let bank = GammatoneBank::standard(16_000).unwrap();
        let mut s = vec![0.0; 4000];
        s[10] = 1.0;
        let ch = bank.analyze(&AudioBuffer::new(s, 16_000).unwrap()).unwrap();
        assert!(ch.rows.iter().all(|r| r.iter().map(|v| v * v).sum::<f64>() > 0.0));
    }

    #[test]
    fn rate_mismatch() {
        let bank = GammatoneBank::new(8, 100.0, 4000.0, 16_000).unwrap();
        assert!(matches!(
            bank.analyze(&AudioBuffer::silence(10, 8000).unwrap()),
            Err(Error::RateMismatch { .. })
        ));
    }
}

//! Rational-ratio polyphase resampler built on a Kaiser-windowed sinc.

use super::AudioBuffer;
use crate::error::{Error, Result};

const TAPS_PER_PHASE: usize = 64;
const KAISER_BETA: f64 = 8.0;
/// Cutoff as a fraction of the lower of the two Nyquist frequencies.
const ROLLOFF: f64 = 0.9;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Zeroth-order modified Bessel function of the first kind (power series).
pub(crate) fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Low-pass prototype at the upsampled rate, gain `up` so that zero
/// insertion does not lose level.
fn prototype(up: usize, down: usize) -> Vec<f64> {
    let n = TAPS_PER_PHASE * up + 1;
    let center = (n - 1) as f64 / 2.0;
    let fc = ROLLOFF * 0.5 / up.max(down) as f64;
    let norm = bessel_i0(KAISER_BETA);
    (0..n)
        .map(|k| {
            let r = (k as f64 - center) / center;
            let w = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / norm;
            up as f64 * 2.0 * fc * sinc(2.0 * fc * (k as f64 - center)) * w
        })
        .collect()
}

/// Resamples to `target_rate`. Output length is `ceil(len * target / source)`
/// and is time-aligned with the input (the filter delay is compensated).
pub fn resample(buffer: &AudioBuffer, target_rate: u32) -> Result<AudioBuffer> {
    if target_rate == 0 {
        return Err(Error::invalid("target rate must be positive"));
    }
    let src = buffer.sample_rate() as u64;
    let g = gcd(src, target_rate as u64);
    let up = (target_rate as u64 / g) as usize;
    let down = (src / g) as usize;
    if up == down {
        return Ok(buffer.clone());
    }

    let h = prototype(up, down);
    let n_taps = h.len() as i64;
    let delay = (n_taps - 1) / 2;
    let x = buffer.samples();
    let out_len = (x.len() * up).div_ceil(down);
    let (up_i, down_i) = (up as i64, down as i64);
    let x_len = x.len() as i64;

    let out = (0..out_len as i64)
        .map(|n| {
            // position of this output sample on the upsampled grid, shifted by the delay
            let t = n * down_i + delay;
            let j_lo = (t - n_taps + 1).div_euclid(up_i) + 1;
            let j_lo = j_lo.max(0);
            let j_hi = t.div_euclid(up_i).min(x_len - 1);
            let mut acc = 0.0;
            let mut j = j_lo;
            while j <= j_hi {
                acc += x[j as usize] * h[(t - j * up_i) as usize];
                j += 1;
            }
            acc
        })
        .collect();
    AudioBuffer::new(out, target_rate)
}

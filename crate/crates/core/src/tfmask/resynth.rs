use super::grid::{frame_count, unit_window};
use super::{BinaryMask, ChannelSignals, GammatoneBank};
use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

/// Per-sample gain for one channel: mask values cross-faded with the
/// analysis window and normalised by the window overlap, so an all-ones
/// row gives exactly 1 everywhere. Samples past the last frame hold the
/// last frame's value.
fn sample_weights(row: &[bool], win_len: usize, hop_len: usize, len: usize, window: &[f64]) -> Vec<f64> {
    let mut num = vec![0.0; len];
    let mut den = vec![0.0; len];
    for (f, &bit) in row.iter().enumerate() {
        let start = f * hop_len;
        let m = if bit { 1.0 } else { 0.0 };
        for (i, w) in window.iter().enumerate().take(win_len) {
            let t = start + i;
            if t >= len {
                break;
            }
            num[t] += m * w;
            den[t] += w;
        }
    }
    let last = row.last().map_or(0.0, |&b| if b { 1.0 } else { 0.0 });
    num.iter()
        .zip(&den)
        .map(|(n, d)| if *d > 0.0 { n / d } else { last })
        .collect()
}

/// Weights each channel by its mask row, undoes the channel delay and sums.
pub fn mask_resynthesize(channels: &ChannelSignals, mask: &BinaryMask, bank: &GammatoneBank) -> Result<AudioBuffer> {
    let len = channels.signal_len();
    if mask.n_channels() != channels.n_channels() || channels.n_channels() != bank.n_channels() {
        return Err(Error::ShapeMismatch(format!(
            "mask has {} channels, signals {}, bank {}",
            mask.n_channels(),
            channels.n_channels(),
            bank.n_channels()
        )));
    }
    if mask.hop_len == 0 || mask.win_len < mask.hop_len {
        return Err(Error::ShapeMismatch("mask geometry is degenerate".into()));
    }
    let expected = frame_count(len, mask.win_len, mask.hop_len);
    if mask.n_frames() != expected {
        return Err(Error::ShapeMismatch(format!(
            "mask has {} frames, a {len}-sample signal has {expected}",
            mask.n_frames()
        )));
    }

    let window = unit_window(mask.win_len);
    let mut out = vec![0.0; len];
    for ((row, bits), &delay) in channels.rows.iter().zip(&mask.bits).zip(&channels.delays) {
        if bits.iter().all(|b| !b) {
            continue;
        }
        let w = sample_weights(bits, mask.win_len, mask.hop_len, len, &window);
        for t in delay..len {
            out[t - delay] += w[t] * row[t];
        }
    }
    let g = bank.synthesis_gain();
    out.iter_mut().for_each(|v| *v *= g);
    AudioBuffer::new(out, channels.sample_rate)
}

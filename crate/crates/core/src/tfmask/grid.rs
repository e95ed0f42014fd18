use super::ChannelSignals;
use crate::error::{Error, Result};

/// Per-unit energies, `energies[channel][frame]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TfGrid {
    pub energies: Vec<Vec<f64>>,
    pub win_len: usize,
    pub hop_len: usize,
    pub sample_rate: u32,
    pub signal_len: usize,
}

impl TfGrid {
    pub fn n_channels(&self) -> usize {
        self.energies.len()
    }

    pub fn n_frames(&self) -> usize {
        self.energies.first().map_or(0, Vec::len)
    }

    pub fn same_shape(&self, other: &TfGrid) -> bool {
        self.n_channels() == other.n_channels()
            && self.n_frames() == other.n_frames()
            && self.win_len == other.win_len
            && self.hop_len == other.hop_len
    }
}

/// `floor((len - win) / hop) + 1`, or a single zero-padded frame when the
/// signal is shorter than a window.
pub fn frame_count(signal_len: usize, win_len: usize, hop_len: usize) -> usize {
    if signal_len < win_len {
        1
    } else {
        (signal_len - win_len) / hop_len + 1
    }
}

/// Raised-cosine window sampled at half-integer points so that it is
/// strictly positive over its support and sums to `win / 2` per hop of
/// `win / 2`.
pub fn unit_window(win_len: usize) -> Vec<f64> {
    (0..win_len)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * (i as f64 + 0.5) / win_len as f64).cos())
        .collect()
}

pub(crate) fn ms_to_samples(ms: f64, sample_rate: u32) -> Result<usize> {
    if !(ms > 0.0 && ms.is_finite()) {
        return Err(Error::invalid(format!("duration {ms} ms must be positive")));
    }
    let n = (ms * sample_rate as f64 / 1000.0).round() as usize;
    if n == 0 {
        return Err(Error::invalid(format!("{ms} ms rounds to zero samples")));
    }
    Ok(n)
}

/// Windowed energy `sum (w * x)^2` per channel and frame.
pub fn tf_energy(channels: &ChannelSignals, win_ms: f64, hop_ms: f64) -> Result<TfGrid> {
    let win_len = ms_to_samples(win_ms, channels.sample_rate)?;
    let hop_len = ms_to_samples(hop_ms, channels.sample_rate)?;
    if hop_len > win_len {
        return Err(Error::invalid(format!(
            "hop ({hop_ms} ms) must not exceed window ({win_ms} ms)"
        )));
    }
    let signal_len = channels.signal_len();
    let n_frames = frame_count(signal_len, win_len, hop_len);
    let window = unit_window(win_len);
    let energies = channels
        .rows
        .iter()
        .map(|row| {
            (0..n_frames)
                .map(|f| {
                    let start = f * hop_len;
                    let end = (start + win_len).min(row.len());
                    row[start.min(end)..end]
                        .iter()
                        .zip(&window)
                        .map(|(x, w)| (x * w) * (x * w))
                        .sum()
                })
                .collect()
        })
        .collect();
    Ok(TfGrid {
        energies,
        win_len,
        hop_len,
        sample_rate: channels.sample_rate,
        signal_len,
    })
}

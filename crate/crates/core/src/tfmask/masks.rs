use serde::{Deserialize, Serialize};

use super::TfGrid;
use crate::error::{Error, Result};

/// Binary time-frequency mask, `bits[channel][frame]`, with the geometry
/// of the grid it was derived from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    pub bits: Vec<Vec<bool>>,
    pub win_len: usize,
    pub hop_len: usize,
    pub sample_rate: u32,
}

impl BinaryMask {
    pub fn filled(grid: &TfGrid, value: bool) -> Self {
        Self {
            bits: vec![vec![value; grid.n_frames()]; grid.n_channels()],
            win_len: grid.win_len,
            hop_len: grid.hop_len,
            sample_rate: grid.sample_rate,
        }
    }

    pub fn n_channels(&self) -> usize {
        self.bits.len()
    }

    pub fn n_frames(&self) -> usize {
        self.bits.first().map_or(0, Vec::len)
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().flatten().filter(|&&b| b).count()
    }

    pub fn complement(&self) -> Self {
        Self {
            bits: self.bits.iter().map(|row| row.iter().map(|b| !b).collect()).collect(),
            ..*self
        }
    }

    /// Text dump: a geometry header then one line of `0`/`1` per channel.
    pub fn to_dump(&self) -> String {
        let mut s = format!(
            "# mask channels={} frames={} win={} hop={} rate={}\n",
            self.n_channels(),
            self.n_frames(),
            self.win_len,
            self.hop_len,
            self.sample_rate
        );
        for row in &self.bits {
            for &b in row {
                s.push(if b { '1' } else { '0' });
            }
            s.push('\n');
        }
        s
    }

    pub fn from_dump(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::invalid("empty mask dump"))?;
        let field = |name: &str| -> Result<usize> {
            header
                .split_whitespace()
                .find_map(|kv| kv.strip_prefix(name).and_then(|v| v.strip_prefix('=')))
                .ok_or_else(|| Error::invalid(format!("mask header lacks {name}")))?
                .parse()
                .map_err(|_| Error::invalid(format!("bad {name} in mask header")))
        };
        let (channels, frames) = (field("channels")?, field("frames")?);
        let bits: Vec<Vec<bool>> = lines
            .map(|l| {
                l.chars()
                    .map(|c| match c {
                        '0' => Ok(false),
                        '1' => Ok(true),
                        other => Err(Error::invalid(format!("bad mask character {other:?}"))),
                    })
                    .collect::<Result<Vec<bool>>>()
            })
            .collect::<Result<_>>()?;
        if bits.len() != channels || bits.iter().any(|r| r.len() != frames) {
            return Err(Error::ShapeMismatch(format!(
                "mask body does not match header {channels}x{frames}"
            )));
        }
        Ok(Self {
            bits,
            win_len: field("win")?,
            hop_len: field("hop")?,
            sample_rate: field("rate")? as u32,
        })
    }
}

/// Threshold on local (per-unit) SNR used by the ideal binary mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum LocalCriterion {
    /// `LC = mixture SNR + RC`.
    Relative {
        mixture_snr_db: f64,
        rc_db: f64,
    },
    Absolute {
        lc_db: f64,
    },
}

impl LocalCriterion {
    pub fn lc_db(&self) -> f64 {
        match *self {
            LocalCriterion::Relative { mixture_snr_db, rc_db } => mixture_snr_db + rc_db,
            LocalCriterion::Absolute { lc_db } => lc_db,
        }
    }
}

fn check_shapes(a: &TfGrid, b: &TfGrid) -> Result<()> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!(
            "grids {}x{} (win {}, hop {}) and {}x{} (win {}, hop {})",
            a.n_channels(),
            a.n_frames(),
            a.win_len,
            a.hop_len,
            b.n_channels(),
            b.n_frames(),
            b.win_len,
            b.hop_len
        )))
    }
}

/// Ideal binary mask: a unit is kept when its local SNR strictly exceeds LC.
pub fn ibm_compute(clean: &TfGrid, noise: &TfGrid, criterion: LocalCriterion) -> Result<BinaryMask> {
    check_shapes(clean, noise)?;
    let lc = criterion.lc_db();
    let bits = clean
        .energies
        .iter()
        .zip(&noise.energies)
        .map(|(c_row, n_row)| {
            c_row
                .iter()
                .zip(n_row)
                .map(|(&ec, &en)| match (ec > 0.0, en > 0.0) {
                    (false, _) => false,
                    (true, false) => true,
                    (true, true) => 10.0 * (ec / en).log10() > lc,
                })
                .collect()
        })
        .collect();
    Ok(BinaryMask {
        bits,
        win_len: clean.win_len,
        hop_len: clean.hop_len,
        sample_rate: clean.sample_rate,
    })
}

/// Target binary mask with a per-channel threshold: in each channel the
/// units with the highest clean-to-SSN ratio are kept until they hold at
/// least `coverage` of that channel's clean energy.
pub fn tbm_compute(clean: &TfGrid, ssn: &TfGrid, coverage: f64) -> Result<BinaryMask> {
    check_shapes(clean, ssn)?;
    if !(coverage > 0.0 && coverage <= 1.0) {
        return Err(Error::invalid(format!("coverage must lie in (0, 1], got {coverage}")));
    }
    let bits = clean
        .energies
        .iter()
        .zip(&ssn.energies)
        .map(|(c_row, s_row)| {
            let ratio = |i: usize| {
                if s_row[i] > 0.0 {
                    c_row[i] / s_row[i]
                } else {
                    f64::INFINITY
                }
            };
            let total: f64 = c_row.iter().sum();
            let mut row = vec![false; c_row.len()];
            if total <= 0.0 {
                return row;
            }
            let mut order: Vec<usize> = (0..c_row.len()).filter(|&i| c_row[i] > 0.0).collect();
            order.sort_by(|&a, &b| ratio(b).total_cmp(&ratio(a)));
            let target = coverage * total;
            let mut acc = 0.0;
            let mut threshold = f64::INFINITY;
            for &i in &order {
                acc += c_row[i];
                threshold = ratio(i);
                if acc >= target {
                    break;
                }
            }
            for &i in &order {
                row[i] = ratio(i) >= threshold;
            }
            row
        })
        .collect();
    Ok(BinaryMask {
        bits,
        win_len: clean.win_len,
        hop_len: clean.hop_len,
        sample_rate: clean.sample_rate,
    })
}

/// Retained clean energy over total clean energy, per channel (1 for silent channels).
pub fn channel_coverage(clean: &TfGrid, mask: &BinaryMask) -> Vec<f64> {
    clean
        .energies
        .iter()
        .zip(&mask.bits)
        .map(|(row, bits)| {
            let total: f64 = row.iter().sum();
            if total <= 0.0 {
                return 1.0;
            }
            let kept: f64 = row.iter().zip(bits).filter(|(_, &b)| b).map(|(e, _)| e).sum();
            kept / total
        })
        .collect()
}

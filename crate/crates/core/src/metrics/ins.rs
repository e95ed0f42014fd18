//! Index of non-stationarity (INS) from phase-randomised surrogates.
//!
//! For each window length `Th`, a multitaper spectrogram is computed and each
//! local spectrum is compared with the time-averaged spectrum. The variance
//! of those distances over time is the test statistic. Surrogates share the
//! magnitude spectrum of the signal but have random phases, so they are
//! stationary by construction; their statistics give the null distribution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma};

use crate::audio::AudioBuffer;
use crate::dsp::RealFft;
use crate::error::{Error, Result};

pub const DEFAULT_SCALES: [f64; 8] = [0.02, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5];
pub const DEFAULT_SURROGATES: usize = 50;
pub const MIN_SURROGATES: usize = 20;
pub const N_TAPERS: usize = 5;
/// Weight of the log-energy-ratio term in the spectral distance.
pub const ENERGY_WEIGHT: f64 = 1.0;
pub const CONFIDENCE: f64 = 0.95;
const MIN_WINDOW: usize = 64;
const MIN_POSITIONS: usize = 16;
/// Half-width of the Hermite taper support in its natural units.
const TAPER_HALF_SUPPORT: f64 = 6.0;
const SPECTRAL_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsConfig {
    pub scales: Vec<f64>,
    pub n_surrogates: usize,
    pub seed: u64,
}

impl Default for InsConfig {
    fn default() -> Self {
        Self {
            scales: DEFAULT_SCALES.to_vec(),
            n_surrogates: DEFAULT_SURROGATES,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Stationary,
    NonStationary,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Stationary => "stationary",
            Verdict::NonStationary => "non-stationary",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsProfile {
    pub scales: Vec<f64>,
    pub ins: Vec<f64>,
    pub gamma: Vec<f64>,
    pub ins_max: f64,
    pub n_surrogates: usize,
    pub seed: u64,
    pub n_tapers: usize,
    pub energy_weight: f64,
}

impl InsProfile {
    pub fn verdicts(&self) -> Vec<Verdict> {
        self.ins
            .iter()
            .zip(&self.gamma)
            .map(|(i, g)| {
                if i > g {
                    Verdict::NonStationary
                } else {
                    Verdict::Stationary
                }
            })
            .collect()
    }

    /// Writes `scale,ins,gamma,verdict` rows with a header.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "scale,ins,gamma,verdict")?;
        for (((s, i), g), v) in self.scales.iter().zip(&self.ins).zip(&self.gamma).zip(self.verdicts()) {
            writeln!(w, "{s},{i},{g},{}", v.as_str())?;
        }
        Ok(())
    }
}

pub fn ins_max(profile: &InsProfile) -> Result<f64> {
    profile
        .ins
        .iter()
        .cloned()
        .reduce(f64::max)
        .ok_or_else(|| Error::invalid("empty INS profile"))
}

fn surrogate_samples(x: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = x.len();
    let fft = RealFft::new(n);
    let mut spec = fft.forward(x);
    let last = spec.len() - 1;
    for (k, c) in spec.iter_mut().enumerate() {
        // DC and (for even n) Nyquist must stay real
        if k == 0 || (n.is_multiple_of(2) && k == last) {
            continue;
        }
        // rotating by a uniform phase leaves the phase uniform and makes
        // the surrogate of k*x exactly k times the surrogate of x
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        *c *= Complex::from_polar(1.0, phase);
    }
    let scale = 1.0 / n as f64;
    fft.inverse(&spec).into_iter().map(|v| v * scale).collect()
}

/// Phase-randomised copy of `buffer` with the same magnitude spectrum.
pub fn surrogate(buffer: &AudioBuffer, seed: u64) -> Result<AudioBuffer> {
    if buffer.len() < MIN_WINDOW {
        return Err(Error::TooShort(format!(
            "surrogates need at least {MIN_WINDOW} samples, got {}",
            buffer.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(buffer.with_samples(surrogate_samples(buffer.samples(), &mut rng)))
}

/// First `k` Hermite functions on `len` points, each with unit energy.
fn hermite_tapers(len: usize, k: usize) -> Vec<Vec<f64>> {
    let centre = (len as f64 - 1.0) / 2.0;
    let step = 2.0 * TAPER_HALF_SUPPORT / (len as f64 - 1.0);
    let u: Vec<f64> = (0..len).map(|i| (i as f64 - centre) * step).collect();
    let mut tapers: Vec<Vec<f64>> = Vec::with_capacity(k);
    let h0: Vec<f64> = u
        .iter()
        .map(|v| std::f64::consts::PI.powf(-0.25) * (-v * v / 2.0).exp())
        .collect();
    tapers.push(h0);
    if k > 1 {
        let h1 = u.iter().zip(&tapers[0]).map(|(v, h)| 2f64.sqrt() * v * h).collect();
        tapers.push(h1);
    }
    for n in 2..k {
        let nf = n as f64;
        let h = (0..len)
            .map(|i| (2.0 / nf).sqrt() * u[i] * tapers[n - 1][i] - ((nf - 1.0) / nf).sqrt() * tapers[n - 2][i])
            .collect();
        tapers.push(h);
    }
    for t in &mut tapers {
        let e = t.iter().map(|v| v * v).sum::<f64>().sqrt();
        t.iter_mut().for_each(|v| *v /= e);
    }
    tapers
}

/// Precomputed analysis for one window length.
struct ScalePlan {
    win: usize,
    starts: Vec<usize>,
    tapers: Vec<Vec<f64>>,
    fft: RealFft,
}

impl ScalePlan {
    fn new(len: usize, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale < 1.0) {
            return Err(Error::invalid(format!("scale {scale} must lie in (0, 1)")));
        }
        let win = (scale * len as f64).round() as usize;
        if win < MIN_WINDOW {
            return Err(Error::TooShort(format!(
                "scale {scale} gives a {win}-sample window on a {len}-sample buffer; need {MIN_WINDOW}"
            )));
        }
        let span = len - win;
        let hop = (win / 2).min(span / (MIN_POSITIONS - 1)).max(1);
        let starts: Vec<usize> = (0..=span).step_by(hop).collect();
        if starts.len() < 2 {
            return Err(Error::TooShort(format!(
                "scale {scale} leaves room for a single window"
            )));
        }
        Ok(Self {
            win,
            starts,
            tapers: hermite_tapers(win, N_TAPERS),
            fft: RealFft::new(win.next_power_of_two()),
        })
    }

    /// Variance over time of the distances between each local multitaper
    /// spectrum and their time average.
    fn statistic(&self, x: &[f64]) -> f64 {
        let bins = self.fft.bins();
        let mut buf = vec![0.0; self.win];
        let spectra: Vec<Vec<f64>> = self
            .starts
            .iter()
            .map(|&s| {
                let seg = &x[s..s + self.win];
                let mut acc = vec![0.0; bins];
                for taper in &self.tapers {
                    for ((b, v), t) in buf.iter_mut().zip(seg).zip(taper) {
                        *b = v * t;
                    }
                    for (a, c) in acc.iter_mut().zip(self.fft.forward(&buf)) {
                        *a += c.norm_sqr();
                    }
                }
                acc.iter_mut().for_each(|a| *a /= self.tapers.len() as f64);
                acc
            })
            .collect();
        let n = spectra.len() as f64;
        let mut mean = vec![0.0; bins];
        for s in &spectra {
            for (m, v) in mean.iter_mut().zip(s) {
                *m += v / n;
            }
        }
        // a floor 90 dB under the average level keeps digital silence finite
        let floor = SPECTRAL_FLOOR * mean.iter().sum::<f64>() / bins as f64;
        let mut spectra = spectra;
        spectra.iter_mut().flatten().for_each(|v| *v += floor);
        mean.iter_mut().for_each(|v| *v += floor);
        let distances: Vec<f64> = spectra.iter().map(|s| spectral_distance(s, &mean)).collect();
        let mu = distances.iter().sum::<f64>() / n;
        distances.iter().map(|d| (d - mu) * (d - mu)).sum::<f64>() / n
    }
}

/// Symmetrised Kullback-Leibler divergence between the normalised spectra,
/// inflated by the absolute log ratio of their energies. Both spectra must
/// be strictly positive.
fn spectral_distance(g: &[f64], h: &[f64]) -> f64 {
    let eg: f64 = g.iter().sum();
    let eh: f64 = h.iter().sum();
    let kl: f64 = g
        .iter()
        .zip(h)
        .map(|(a, b)| {
            let p = a / eg;
            let q = b / eh;
            (p - q) * (p / q).ln()
        })
        .sum();
    kl * (1.0 + ENERGY_WEIGHT * (eg / eh).ln().abs())
}

/// 95% point of a Gamma distribution matched to the sample mean and variance.
fn gamma_quantile(samples: &[f64]) -> Result<f64> {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    if !(mean > 0.0 && var > 0.0) {
        return Ok(mean);
    }
    let shape = mean * mean / var;
    let rate = mean / var;
    let dist = Gamma::new(shape, rate).map_err(|e| Error::invalid(format!("gamma fit: {e}")))?;
    Ok(dist.inverse_cdf(CONFIDENCE))
}

/// INS and stationarity threshold at each scale of `config`.
pub fn ins_compute(buffer: &AudioBuffer, config: &InsConfig) -> Result<InsProfile> {
    if config.scales.is_empty() {
        return Err(Error::invalid("no INS scales given"));
    }
    if config.n_surrogates < MIN_SURROGATES {
        return Err(Error::invalid(format!(
            "need at least {MIN_SURROGATES} surrogates, got {}",
            config.n_surrogates
        )));
    }
    let x = buffer.samples();
    let plans = config
        .scales
        .iter()
        .map(|&s| ScalePlan::new(x.len(), s))
        .collect::<Result<Vec<_>>>()?;
    if buffer.peak() == 0.0 {
        return Err(Error::Silent);
    }

    let theta: Vec<f64> = plans.iter().map(|p| p.statistic(x)).collect();
    // one surrogate per stream of the seeded generator, so each is
    // independent of how work is split across threads
    let null: Vec<Vec<f64>> = (0..config.n_surrogates)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(j as u64 + 1);
            let s = surrogate_samples(x, &mut rng);
            plans.iter().map(|p| p.statistic(&s)).collect()
        })
        .collect();

    let mut ins = Vec::with_capacity(plans.len());
    let mut gamma = Vec::with_capacity(plans.len());
    for (k, &t) in theta.iter().enumerate() {
        let column: Vec<f64> = null.iter().map(|row| row[k]).collect();
        let mean = column.iter().sum::<f64>() / column.len() as f64;
        let q = gamma_quantile(&column)?;
        if mean > 0.0 {
            ins.push((t / mean).sqrt());
            gamma.push((q / mean).sqrt());
        } else {
            ins.push(0.0);
            gamma.push(0.0);
        }
    }
    let ins_max = ins.iter().cloned().fold(0.0, f64::max);
    Ok(InsProfile {
        scales: config.scales.clone(),
        ins,
        gamma,
        ins_max,
        n_surrogates: config.n_surrogates,
        seed: config.seed,
        n_tapers: N_TAPERS,
        energy_weight: ENERGY_WEIGHT,
    })
}

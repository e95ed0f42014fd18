//! Per-frame processing-time benchmark.
//!
//! Each method runs its whole pipeline on one frame of a noisy utterance:
//! BAM on the mixture alone, IBM and TBM including the gammatone analysis of
//! every input and the resynthesis. Timings run on a single worker thread
//! and are reported relative to BAM.

use std::time::Instant;

use blindmask::audio::{generate_ssn, mix_at_snr, MixSpec};
use blindmask::tfmask::{ibm_process, tbm_process_with_ssn, GammatoneBank, MaskSettings};
use blindmask::{bam_process, AudioBuffer, BamParams};
use serde::{Deserialize, Serialize};

use crate::config::Method;
use crate::corpus::{babble, speech_utterance, CORPUS_RATE};
use crate::error::{EvalError, Result};

pub const MIN_REPETITIONS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub frame_len: usize,
    pub repetitions: usize,
    pub warmup: usize,
    /// Distinct frames cycled through by every method.
    pub frames_per_repetition: usize,
    /// Each timed repetition runs enough frames to last at least this long,
    /// so scheduler jitter and timer resolution stay small against it.
    pub min_repetition_secs: f64,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            frame_len: 512,
            repetitions: MIN_REPETITIONS,
            warmup: 5,
            frames_per_repetition: 4,
            min_repetition_secs: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: Method,
    pub mean_secs: f64,
    /// `mean_secs` divided by BAM's mean.
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub frame_len: usize,
    pub repetitions: usize,
    pub sample_rate: u32,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn normalized(&self, method: Method) -> Option<f64> {
        self.rows.iter().find(|r| r.method == method).map(|r| r.normalized)
    }
}

struct Frames {
    clean: Vec<AudioBuffer>,
    noise: Vec<AudioBuffer>,
    mixture: Vec<AudioBuffer>,
    ssn: Vec<AudioBuffer>,
}

fn slices(x: &AudioBuffer, frame_len: usize, starts: &[usize]) -> Result<Vec<AudioBuffer>> {
    starts
        .iter()
        .map(|&start| {
            AudioBuffer::new(x.samples()[start..start + frame_len].to_vec(), x.sample_rate()).map_err(Into::into)
        })
        .collect()
}

/// Timed frames are the loudest speech frames, so every method does real work.
fn prepare(config: &BenchConfig) -> Result<Frames> {
    let clean = speech_utterance(config.seed, CORPUS_RATE, 2.0);
    let noise = babble(config.seed, CORPUS_RATE, 2.0);
    let mix = mix_at_snr(&clean, &noise, &MixSpec::at(0.0))?;
    // the speech-shaped reference is a fixed long-term property of the talker
    let ssn = generate_ssn(&clean, clean.len(), config.seed)?;
    let mut starts: Vec<usize> = (0..clean.len() / config.frame_len)
        .map(|i| i * config.frame_len)
        .collect();
    if starts.len() < config.frames_per_repetition {
        return Err(EvalError::Config("too many frames per repetition".into()));
    }
    let energy = |s: usize| {
        clean.samples()[s..s + config.frame_len]
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
    };
    starts.sort_by(|&a, &b| energy(b).total_cmp(&energy(a)));
    starts.truncate(config.frames_per_repetition);
    starts.sort_unstable();
    Ok(Frames {
        clean: slices(&clean, config.frame_len, &starts)?,
        noise: slices(&mix.scaled_noise, config.frame_len, &starts)?,
        mixture: slices(&mix.mixture, config.frame_len, &starts)?,
        ssn: slices(&ssn, config.frame_len, &starts)?,
    })
}

fn run_once(
    method: Method,
    f: &Frames,
    i: usize,
    bam: &BamParams,
    masks: &MaskSettings,
    bank: &GammatoneBank,
) -> Result<()> {
    match method {
        Method::Unp => {
            std::hint::black_box(f.mixture[i].clone());
        }
        Method::Bam => {
            std::hint::black_box(bam_process(&f.mixture[i], bam)?);
        }
        Method::Ibm => {
            std::hint::black_box(ibm_process(&f.clean[i], &f.noise[i], &f.mixture[i], 0.0, masks, bank)?);
        }
        Method::Tbm => {
            std::hint::black_box(tbm_process_with_ssn(
                &f.clean[i],
                &f.ssn[i],
                &f.mixture[i],
                masks,
                bank,
            )?);
        }
    }
    Ok(())
}

/// Mean per-frame wall-clock time of BAM, IBM and TBM, normalized to BAM.
pub fn bench_methods(config: &BenchConfig) -> Result<BenchReport> {
    if config.repetitions < MIN_REPETITIONS {
        return Err(EvalError::Config(format!(
            "benchmark needs at least {MIN_REPETITIONS} repetitions, got {}",
            config.repetitions
        )));
    }
    if config.frame_len < 64 || config.frames_per_repetition == 0 {
        return Err(EvalError::Config(
            "frame_len must be >= 64 and frames_per_repetition >= 1".into(),
        ));
    }
    if !(config.min_repetition_secs >= 0.0 && config.min_repetition_secs.is_finite()) {
        return Err(EvalError::Config(
            "min_repetition_secs must be a finite non-negative duration".into(),
        ));
    }
    let frames = prepare(config)?;
    let bam = BamParams {
        frame_ms: config.frame_len as f64 * 1000.0 / CORPUS_RATE as f64,
        ..BamParams::default()
    };
    let masks = MaskSettings::default();
    let bank = GammatoneBank::standard(CORPUS_RATE)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| EvalError::Config(format!("cannot build benchmark thread pool: {e}")))?;

    let methods = [Method::Bam, Method::Ibm, Method::Tbm];
    let n_frames = config.frames_per_repetition;
    let run_n = |method: Method, n: usize| -> Result<f64> {
        let start = Instant::now();
        for i in 0..n {
            run_once(method, &frames, i % n_frames, &bam, &masks, &bank)?;
        }
        Ok(start.elapsed().as_secs_f64())
    };
    let means = pool.install(|| -> Result<Vec<f64>> {
        // per-method frame counts, doubled until one repetition is long enough
        let mut counts = Vec::with_capacity(methods.len());
        for &method in &methods {
            run_n(method, n_frames)?;
            let mut n = n_frames;
            while run_n(method, n)? < config.min_repetition_secs && n < 1 << 20 {
                n *= 2;
            }
            counts.push(n);
        }
        // methods interleaved within each repetition so slow drifts in
        // machine speed hit all of them alike
        for _ in 0..config.warmup {
            for (k, &method) in methods.iter().enumerate() {
                run_n(method, counts[k])?;
            }
        }
        let mut totals = vec![0.0; methods.len()];
        for _ in 0..config.repetitions {
            for (k, &method) in methods.iter().enumerate() {
                totals[k] += run_n(method, counts[k])?;
            }
        }
        Ok(totals
            .iter()
            .zip(&counts)
            .map(|(t, &n)| t / (n * config.repetitions) as f64)
            .collect())
    })?;
    let base = means[0];
    Ok(BenchReport {
        frame_len: config.frame_len,
        repetitions: config.repetitions,
        sample_rate: CORPUS_RATE,
        rows: methods
            .iter()
            .zip(&means)
            .map(|(&method, &mean_secs)| BenchRow {
                method,
                mean_secs,
                normalized: mean_secs / base,
            })
            .collect(),
    })
}

//! Synthetic desk corpus.
//!
//! "Speech" is a sequence of harmonic vowel-like syllables with formant
//! transitions, fricative onsets and pauses. Babble sums six speech-shaped
//! noises, each modulated by the envelope of its own synthetic talker.
//! Factory noise mixes machine hum, a few drifting tones, hammer-like
//! impulses and a low background. None of this is equivalent to a recorded
//! corpus; it only exercises the same signal structure.

use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};

use blindmask::audio::{generate_ssn, write_wav, WavFormat};
use blindmask::AudioBuffer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{EvalError, Result};

pub const CORPUS_RATE: u32 = 16_000;
const BABBLE_TALKERS: usize = 6;

/// Formant targets (Hz) for five vowels.
const VOWELS: [[f64; 3]; 5] = [
    [730.0, 1090.0, 2440.0],
    [270.0, 2290.0, 3010.0],
    [300.0, 870.0, 2240.0],
    [530.0, 1840.0, 2480.0],
    [570.0, 840.0, 2410.0],
];
const FORMANT_BW: [f64; 3] = [80.0, 100.0, 120.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSpec {
    pub n_utterances: usize,
    pub utterance_secs: f64,
    pub noise_secs: f64,
    pub sample_rate: u32,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            n_utterances: 10,
            utterance_secs: 2.5,
            noise_secs: 8.0,
            sample_rate: CORPUS_RATE,
            seed: 2014,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NamedAudio {
    pub name: String,
    pub audio: AudioBuffer,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub utterances: Vec<NamedAudio>,
    pub noises: Vec<NamedAudio>,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Two-pole resonator with unity gain at DC.
#[derive(Default, Clone, Copy)]
struct Resonator {
    a: f64,
    b: f64,
    c: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn tune(&mut self, freq: f64, bw: f64, fs: f64) {
        let r = (-PI * bw / fs).exp();
        self.c = -r * r;
        self.b = 2.0 * r * (TAU * freq / fs).cos();
        self.a = 1.0 - self.b - self.c;
    }

    fn process(&mut self, x: f64) -> f64 {
        let y = self.a * x + self.b * self.y1 + self.c * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

struct Syllable {
    fricative: usize,
    vowel: usize,
    gap: usize,
    target: [f64; 3],
}

/// One synthetic utterance of `secs` seconds: a glottal pulse train through
/// a cascade of formant resonators, with noise-excited fricative onsets.
pub fn speech_utterance(seed: u64, rate: u32, secs: f64) -> AudioBuffer {
    let mut rng = rng_for(seed, 1);
    let fs = rate as f64;
    let len = (secs * fs).round() as usize;
    let base_f0 = rng.gen_range(95.0..230.0);
    let ms = |lo: f64, hi: f64, rng: &mut ChaCha8Rng| (rng.gen_range(lo..hi) * fs / 1000.0) as usize;

    let lead = ms(120.0, 260.0, &mut rng);
    let mut plan = Vec::new();
    let mut used = lead;
    while used < len {
        let syllables = rng.gen_range(1..=3);
        for s in 0..syllables {
            let fricative = if rng.gen_bool(0.4) {
                ms(50.0, 110.0, &mut rng)
            } else {
                0
            };
            let vowel = ms(110.0, 240.0, &mut rng);
            let gap = if s + 1 == syllables {
                ms(90.0, 320.0, &mut rng)
            } else {
                ms(10.0, 40.0, &mut rng)
            };
            let target = VOWELS[rng.gen_range(0..VOWELS.len())];
            used += fricative + vowel + gap;
            plan.push(Syllable {
                fricative,
                vowel,
                gap,
                target,
            });
        }
    }

    let white = Normal::new(0.0, 1.0).unwrap();
    let mut voiced = vec![0.0; len];
    let mut noisy = vec![0.0; len];
    let mut t = lead;
    let mut phase = 0.0;
    let mut previous = VOWELS[0];
    let mut hp = (0.0, 0.0);
    // glottal low-pass (two real poles) followed by a lip-radiation difference
    let pole = (-TAU * 150.0 / fs).exp();
    let (mut g1, mut g2, mut radiated) = (0.0, 0.0, 0.0);
    let mut tract = [Resonator::default(); 4];
    for syl in &plan {
        for i in 0..syl.fricative {
            if t >= len {
                break;
            }
            let n = white.sample(&mut rng);
            // second difference pushes the noise towards high frequencies
            let v = n - 2.0 * hp.0 + hp.1;
            hp = (n, hp.0);
            let env = (PI * i as f64 / syl.fricative as f64).sin();
            noisy[t] = env * v;
            t += 1;
        }
        let drift = rng.gen_range(-0.15..0.15);
        let loudness = rng.gen_range(0.6..1.0);
        for i in 0..syl.vowel {
            if t >= len {
                break;
            }
            let u = i as f64 / syl.vowel as f64;
            let f0 = base_f0 * (1.0 + drift * u + 0.03 * (TAU * 5.0 * t as f64 / fs).sin());
            if i % 32 == 0 {
                let glide = (u / 0.4).min(1.0);
                for k in 0..3 {
                    let f = previous[k] + (syl.target[k] - previous[k]) * glide;
                    tract[k].tune(f, FORMANT_BW[k], fs);
                }
                tract[3].tune(3500.0, 200.0, fs);
            }
            phase += f0 / fs;
            let pulse = if phase >= 1.0 {
                phase -= 1.0;
                1.0
            } else {
                0.0
            };
            let env = (PI * u).sin().powf(0.6);
            g1 = pole * g1 + (1.0 - pole) * pulse * env * loudness;
            g2 = pole * g2 + (1.0 - pole) * g1;
            let source = g2 - radiated;
            radiated = g2;
            voiced[t] = tract.iter_mut().fold(source, |x, r| r.process(x));
            t += 1;
        }
        previous = syl.target;
        t += syl.gap;
        if t >= len {
            break;
        }
    }
    let peak = |x: &[f64]| x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (pv, pn) = (peak(&voiced), peak(&noisy).max(f64::MIN_POSITIVE));
    // fricatives peak 12 dB below the vowels
    let samples = voiced
        .iter()
        .zip(&noisy)
        .map(|(v, n)| 0.5 * (v / pv + 0.25 * n / pn))
        .collect();
    AudioBuffer::new(samples, rate).expect("synthetic speech is finite")
}

/// Smoothed amplitude envelope, normalised to unit peak.
fn envelope(x: &[f64], rate: u32) -> Vec<f64> {
    let a = (-1.0 / (0.02 * rate as f64)).exp();
    let mut state = 0.0;
    let mut env: Vec<f64> = x
        .iter()
        .map(|v| {
            state = a * state + (1.0 - a) * v.abs();
            state
        })
        .collect();
    let peak = env.iter().cloned().fold(0.0, f64::max);
    env.iter_mut().for_each(|e| *e /= peak);
    env
}

const BABBLE_FLOOR: f64 = 0.05;

/// Six speech-shaped noises, each gated by a different talker's envelope.
pub fn babble(seed: u64, rate: u32, secs: f64) -> AudioBuffer {
    let len = (secs * rate as f64).round() as usize;
    let mut out = vec![0.0; len];
    for talker in 0..BABBLE_TALKERS as u64 {
        let voice = speech_utterance(seed.wrapping_mul(31).wrapping_add(1000 + talker), rate, secs);
        let noise = generate_ssn(&voice, len, seed ^ (talker << 32)).expect("reference is long");
        let mut env = envelope(voice.samples(), rate);
        // stagger talkers so their pauses do not line up
        env.rotate_left(talker as usize * len / BABBLE_TALKERS);
        env.iter_mut().for_each(|e| *e = e.max(BABBLE_FLOOR));
        for ((o, n), e) in out.iter_mut().zip(noise.samples()).zip(&env) {
            *o += n * e;
        }
    }
    normalized(out, rate)
}

/// Hum, drifting tones, hammer impulses and a low noise bed.
pub fn factory(seed: u64, rate: u32, secs: f64) -> AudioBuffer {
    let mut rng = rng_for(seed, 2);
    let fs = rate as f64;
    let len = (secs * fs).round() as usize;
    let white = Normal::new(0.0, 1.0).unwrap();
    let hum_f = rng.gen_range(48.0..62.0);
    let tones: Vec<(f64, f64)> = (0..3)
        .map(|_| (rng.gen_range(600.0..4000.0), rng.gen_range(0.1..0.6)))
        .collect();
    let mut out = vec![0.0; len];
    let mut lp = 0.0;
    for (i, o) in out.iter_mut().enumerate() {
        let t = i as f64 / fs;
        let hum: f64 = (1..=6).map(|k| (TAU * hum_f * k as f64 * t).sin() / k as f64).sum();
        let tonal: f64 = tones
            .iter()
            .map(|&(f, am)| (1.0 + 0.5 * (TAU * am * t).sin()) * (TAU * f * t).sin())
            .sum();
        lp = 0.97 * lp + 0.03 * white.sample(&mut rng);
        *o = 0.25 * hum + 0.08 * tonal + 0.8 * lp;
    }
    let mut t = rng.gen_range(0.05..0.3) * fs;
    while (t as usize) < len {
        let start = t as usize;
        let amp = rng.gen_range(1.5..3.0);
        let tau = rng.gen_range(0.008..0.025) * fs;
        let ring = rng.gen_range(800.0..3000.0);
        for k in 0..(6.0 * tau) as usize {
            if start + k >= len {
                break;
            }
            let decay = (-(k as f64) / tau).exp();
            out[start + k] += amp * decay * (0.6 * white.sample(&mut rng) + 0.4 * (TAU * ring * k as f64 / fs).sin());
        }
        t += rng.gen_range(0.2..0.7) * fs;
    }
    normalized(out, rate)
}

fn normalized(x: Vec<f64>, rate: u32) -> AudioBuffer {
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    AudioBuffer::new(x.into_iter().map(|v| 0.5 * v / peak).collect(), rate).expect("synthetic noise is finite")
}

pub fn generate_corpus(spec: &CorpusSpec) -> Corpus {
    let utterances = (0..spec.n_utterances)
        .map(|i| NamedAudio {
            name: format!("utt{:02}", i + 1),
            audio: speech_utterance(spec.seed.wrapping_add(i as u64), spec.sample_rate, spec.utterance_secs),
        })
        .collect();
    let noises = vec![
        NamedAudio {
            name: "babble".into(),
            audio: babble(spec.seed, spec.sample_rate, spec.noise_secs),
        },
        NamedAudio {
            name: "factory".into(),
            audio: factory(spec.seed, spec.sample_rate, spec.noise_secs),
        },
    ];
    Corpus { utterances, noises }
}

/// Writes `clean/*.wav` and `noise/*.wav` under `dir` as 32-bit float.
pub fn write_corpus(corpus: &Corpus, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (sub, items) in [("clean", &corpus.utterances), ("noise", &corpus.noises)] {
        let d = dir.join(sub);
        std::fs::create_dir_all(&d).map_err(|source| EvalError::Io {
            path: d.clone(),
            source,
        })?;
        for item in items {
            let path = d.join(format!("{}.wav", item.name));
            write_wav(&path, &item.audio, WavFormat::Float32)?;
            written.push(path);
        }
    }
    Ok(written)
}

use blindmask::audio::{generate_ssn, mix_at_snr, read_wav, write_wav, MixSpec, WavFormat};
use blindmask::metrics::{ins_compute, ins_max, stoi, InsConfig};
use blindmask::tfmask::{ibm_process, tbm_process, GammatoneBank, MaskSettings};
use blindmask::{bam_process, AudioBuffer, BamParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const RATE: u32 = 16_000;

/// Amplitude-modulated harmonic complex with silent gaps.
fn voiced(len: usize) -> AudioBuffer {
    let fs = RATE as f64;
    let x = (0..len)
        .map(|n| {
            let t = n as f64 / fs;
            let gate = if (t * 3.0).fract() < 0.7 { 1.0 } else { 0.0 };
            let env = 0.5 - 0.5 * (std::f64::consts::TAU * 4.0 * t).cos();
            let tone: f64 = (1..=12)
                .map(|k| (std::f64::consts::TAU * 130.0 * k as f64 * t).sin() / k as f64)
                .sum();
            0.2 * gate * env * tone
        })
        .collect();
    AudioBuffer::new(x, RATE).unwrap()
}

fn white(len: usize, seed: u64) -> AudioBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, 0.1).unwrap();
    AudioBuffer::new((0..len).map(|_| n.sample(&mut rng)).collect(), RATE).unwrap()
}

#[test]
fn enhance_and_score_every_method() {
    let clean = voiced(40_000);
    let noise = white(48_000, 1);
    let mix = mix_at_snr(&clean, &noise, &MixSpec::at(0.0)).unwrap();
    let bank = GammatoneBank::standard(RATE).unwrap();
    let settings = MaskSettings::default();

    let bam = bam_process(&mix.mixture, &BamParams::default()).unwrap();
    let ibm = ibm_process(&clean, &mix.scaled_noise, &mix.mixture, 0.0, &settings, &bank).unwrap();
    let tbm = tbm_process(&clean, &mix.mixture, &settings, &bank, 2).unwrap();

    let unp = stoi(&clean, &mix.mixture).unwrap().value;
    for out in [&bam.audio, &ibm.audio, &tbm.audio] {
        assert_eq!(out.len(), clean.len());
        let s = stoi(&clean, out).unwrap().value;
        assert!(s.is_finite() && s <= 1.0);
    }
    assert!(stoi(&clean, &ibm.audio).unwrap().value > unp);
}

#[test]
fn wav_round_trip_preserves_processing() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mix.wav");
    let mix = mix_at_snr(&voiced(20_000), &white(20_000, 4), &MixSpec::at(5.0)).unwrap();
    write_wav(&path, &mix.mixture, WavFormat::Float32).unwrap();
    let back = read_wav(&path).unwrap();
    let a = bam_process(&mix.mixture, &BamParams::default()).unwrap();
    let b = bam_process(&back, &BamParams::default()).unwrap();
    let worst = a
        .audio
        .samples()
        .iter()
        .zip(b.audio.samples())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn gated_speech_is_less_stationary_than_noise() {
    let cfg = InsConfig {
        scales: vec![0.05, 0.2],
        n_surrogates: 20,
        seed: 3,
    };
    let noise = ins_max(&ins_compute(&white(24_000, 9), &cfg).unwrap()).unwrap();
    let ssn = generate_ssn(&voiced(24_000), 24_000, 1).unwrap();
    let shaped = ins_max(&ins_compute(&ssn, &cfg).unwrap()).unwrap();
    let speech = ins_max(&ins_compute(&voiced(24_000), &cfg).unwrap()).unwrap();
    assert!(speech > 5.0 * noise.max(shaped), "{speech} vs {noise}/{shaped}");
}

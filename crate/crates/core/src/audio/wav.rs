use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use hound::{SampleFormat, WavSpec};

use super::AudioBuffer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavFormat {
    Pcm16,
    Float32,
}

/// Outcome of [`write_wav`]; `clipped` counts PCM16 samples saturated at full scale.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WriteReport {
    pub clipped: usize,
}

/// Reads a PCM (8/16/24/32-bit) or IEEE float32 WAV file, averaging channels to mono.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let codec = |reason: String| Error::Codec {
        path: path.to_path_buf(),
        reason,
    };
    let reader = hound::WavReader::new(BufReader::new(file)).map_err(|e| codec(e.to_string()))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(codec("zero channels".into()));
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>(),
        (SampleFormat::Int, bits @ 1..=32) => {
            let full_scale = (1_i64 << (bits - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 / full_scale))
                .collect::<std::result::Result<_, _>>()
        }
        (fmt, bits) => return Err(codec(format!("unsupported sample format {fmt:?}/{bits}"))),
    }
    .map_err(|e| codec(e.to_string()))?;

    if interleaved.iter().any(|s| !s.is_finite()) {
        return Err(codec("non-finite float sample".into()));
    }

    let mono = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f64>() / channels as f64)
            .collect()
    };
    AudioBuffer::new(mono, spec.sample_rate)
}

/// Writes a mono WAV file. PCM16 output saturates values outside `[-1, 1)`.
pub fn write_wav(path: impl AsRef<Path>, buffer: &AudioBuffer, format: WavFormat) -> Result<WriteReport> {
    let path = path.as_ref();
    let io_err = |source: std::io::Error| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let hound_err = |e: hound::Error| match e {
        hound::Error::IoError(source) => io_err(source),
        other => Error::Codec {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    };

    let spec = match format {
        WavFormat::Pcm16 => WavSpec {
            channels: 1,
            sample_rate: buffer.sample_rate(),
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        },
        WavFormat::Float32 => WavSpec {
            channels: 1,
            sample_rate: buffer.sample_rate(),
            bits_per_sample: 32,
            sample_format: SampleFormat::Float,
        },
    };
    let file = File::create(path).map_err(io_err)?;
    let mut writer = hound::WavWriter::new(BufWriter::new(file), spec).map_err(hound_err)?;

    let mut report = WriteReport::default();
    match format {
        WavFormat::Pcm16 => {
            for &s in buffer.samples() {
                let scaled = (s * 32768.0).round();
                let code = if scaled > i16::MAX as f64 {
                    report.clipped += 1;
                    i16::MAX
                } else if scaled < i16::MIN as f64 {
                    report.clipped += 1;
                    i16::MIN
                } else {
                    scaled as i16
                };
                writer.write_sample(code).map_err(hound_err)?;
            }
        }
        WavFormat::Float32 => {
            for &s in buffer.samples() {
                writer.write_sample(s as f32).map_err(hound_err)?;
            }
        }
    }
    writer.finalize().map_err(hound_err)?;
    Ok(report)
}

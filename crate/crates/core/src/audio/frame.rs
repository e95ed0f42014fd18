use super::AudioBuffer;
use crate::error::{Error, Result};

/// How the final partial frame was handled by [`frame_split`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailPolicy {
    /// Signal length is a multiple of the frame length.
    None,
    /// The last frame is shorter than `frame_len` and was kept verbatim.
    Retained { len: usize },
}

/// Non-overlapping consecutive frames. Every frame but the last has
/// exactly `frame_len` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    pub frames: Vec<Vec<f64>>,
    pub frame_len: usize,
    pub sample_rate: u32,
    pub tail_policy: TailPolicy,
}

impl FrameSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn total_samples(&self) -> usize {
        self.frames.iter().map(Vec::len).sum()
    }
}

pub(crate) fn frame_len_for(frame_ms: f64, sample_rate: u32) -> Result<usize> {
    if !(frame_ms > 0.0) || !frame_ms.is_finite() {
        return Err(Error::invalid(format!("frame length {frame_ms} ms must be positive")));
    }
    let len = (frame_ms * sample_rate as f64 / 1000.0).round() as usize;
    if len < 2 {
        return Err(Error::invalid(format!(
            "{frame_ms} ms at {sample_rate} Hz gives {len} samples per frame; need at least 2"
        )));
    }
    Ok(len)
}

/// Splits `buffer` into non-overlapping frames of `round(frame_ms * rate / 1000)`
/// samples, keeping a shorter tail frame as-is.
pub fn frame_split(buffer: &AudioBuffer, frame_ms: f64) -> Result<FrameSequence> {
    let frame_len = frame_len_for(frame_ms, buffer.sample_rate())?;
    let frames: Vec<Vec<f64>> = buffer.samples().chunks(frame_len).map(<[f64]>::to_vec).collect();
    let rem = buffer.len() % frame_len;
    let tail_policy = if rem == 0 {
        TailPolicy::None
    } else {
        TailPolicy::Retained { len: rem }
    };
    Ok(FrameSequence {
        frames,
        frame_len,
        sample_rate: buffer.sample_rate(),
        tail_policy,
    })
}

pub fn concat_frames(frames: &FrameSequence) -> AudioBuffer {
    let samples: Vec<f64> = frames.frames.iter().flatten().copied().collect();
    AudioBuffer {
        samples,
        sample_rate: frames.sample_rate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn three_seconds_at_32ms() {
        let buf = AudioBuffer::silence(48_000, 16_000).unwrap();
        let seq = frame_split(&buf, 32.0).unwrap();
        assert_eq!(seq.frame_len, 512);
        assert_eq!(seq.len(), 94);
        assert!(seq.frames[..93].iter().all(|f| f.len() == 512));
        assert_eq!(seq.frames[93].len(), 384);
        assert_eq!(seq.tail_policy, TailPolicy::Retained { len: 384 });
    }

    #[test]
    fn exact_single_frame() {
        let buf = AudioBuffer::silence(512, 16_000).unwrap();
        let seq = frame_split(&buf, 32.0).unwrap();
        assert_eq!(seq.len(), 1);
        assert_eq!(seq.tail_policy, TailPolicy::None);
    }

    #[test]
    fn short_buffer_is_a_single_tail() {
        let buf = AudioBuffer::new((0..10).map(f64::from).collect(), 16_000).unwrap();
        let seq = frame_split(&buf, 32.0).unwrap();
        assert_eq!(seq.len(), 1);
        assert_eq!(seq.frames[0].len(), 10);
        assert_eq!(concat_frames(&seq), buf);
    }

    #[test]
    fn empty_buffer_gives_empty_sequence() {
        let buf = AudioBuffer::silence(0, 16_000).unwrap();
        let seq = frame_split(&buf, 32.0).unwrap();
        assert!(seq.is_empty());
        assert!(concat_frames(&seq).is_empty());
    }

    #[test]
    fn rejects_degenerate_frame_length() {
        let buf = AudioBuffer::silence(100, 1000).unwrap();
        assert!(frame_split(&buf, 1.0).is_err());
        assert!(frame_split(&buf, 0.0).is_err());
        assert!(frame_split(&buf, -3.0).is_err());
    }

    proptest! {
        #[test]
        fn split_then_concat_is_identity(
            samples in prop::collection::vec(-1.0f64..1.0, 0..3000),
            frame_ms in 0.2f64..80.0,
        ) {
            let buf = AudioBuffer::new(samples, 16_000).unwrap();
            let seq = frame_split(&buf, frame_ms).unwrap();
            if let Some((last, body)) = seq.frames.split_last() {
                prop_assert!(body.iter().all(|f| f.len() == seq.frame_len));
                prop_assert!(last.len() <= seq.frame_len && !last.is_empty());
            }
            prop_assert_eq!(concat_frames(&seq), buf);
        }
    }
}

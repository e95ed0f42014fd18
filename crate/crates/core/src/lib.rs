//! Blind acoustic masking for noisy speech, the ideal time-frequency mask
//! baselines it is compared against, and the objective measures (STOI and
//! the surrogate-based index of non-stationarity) used to evaluate them.

pub mod audio;
pub mod bam;
pub mod dsp;
pub mod error;
pub mod metrics;
pub mod noise;
pub mod tfmask;

pub use audio::AudioBuffer;
pub use bam::{bam_process, BamOutput, BamParams, FrameDecision};
pub use error::{Error, Result};
pub use metrics::{ins_compute, stoi, InsConfig, InsProfile, StoiScore};
pub use noise::{date_estimate, DateConfig, DateEstimate};

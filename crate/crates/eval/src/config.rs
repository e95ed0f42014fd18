//! Experiment configuration, read from TOML.
//!
//! ```toml
//! clean_dir = "corpus/clean"
//! noise_files = ["corpus/noise/babble.wav"]
//! snrs_db = [-6, -3, 0, 3, 6, 9]
//! methods = ["unp", "bam", "ibm", "tbm"]
//! metrics = ["stoi", "stoi_norm", "ins"]
//! seed = 7
//! output_dir = "out"
//!
//! [params.bam]
//! alpha = 0.35
//! beta = 0.65
//!
//! [params.masks]
//! rc_db = -5.0
//! coverage = 0.99
//!
//! [params.ins]
//! n_surrogates = 50
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use blindmask::audio::LevelBasis;
use blindmask::metrics::{DEFAULT_SCALES, DEFAULT_SURROGATES, MIN_SURROGATES};
use blindmask::tfmask::MaskSettings;
use blindmask::BamParams;
use serde::{Deserialize, Serialize};

use crate::error::{EvalError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Unp,
    Bam,
    Ibm,
    Tbm,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Unp, Method::Bam, Method::Ibm, Method::Tbm];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Unp => "unp",
            Method::Bam => "bam",
            Method::Ibm => "ibm",
            Method::Tbm => "tbm",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Stoi,
    StoiNorm,
    Ins,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Stoi => "stoi",
            Metric::StoiNorm => "stoi_norm",
            Metric::Ins => "ins",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InsSettings {
    pub scales: Vec<f64>,
    pub n_surrogates: usize,
}

impl Default for InsSettings {
    fn default() -> Self {
        Self {
            scales: DEFAULT_SCALES.to_vec(),
            n_surrogates: DEFAULT_SURROGATES,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentParams {
    pub bam: BamParams,
    pub masks: MaskSettings,
    pub ins: InsSettings,
    pub level_basis: LevelBasis,
}

impl ExperimentParams {
    pub fn validate(&self) -> Result<()> {
        self.bam.validate()?;
        let m = &self.masks;
        if !(m.coverage > 0.0 && m.coverage <= 1.0) {
            return Err(EvalError::Config(format!("coverage {} must lie in (0, 1]", m.coverage)));
        }
        if !(m.win_ms > 0.0 && m.hop_ms > 0.0 && m.hop_ms <= m.win_ms) {
            return Err(EvalError::Config(
                "mask window and hop must be positive with hop <= window".into(),
            ));
        }
        if self.ins.n_surrogates < MIN_SURROGATES {
            return Err(EvalError::Config(format!(
                "n_surrogates must be at least {MIN_SURROGATES}"
            )));
        }
        if self.ins.scales.is_empty() || self.ins.scales.iter().any(|s| !(*s > 0.0 && *s < 1.0)) {
            return Err(EvalError::Config(
                "INS scales must be non-empty and inside (0, 1)".into(),
            ));
        }
        Ok(())
    }

    /// Reads `[params]`-style settings from a standalone TOML file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        let params: Self = toml::from_str(&text).map_err(|e| EvalError::Config(format!("{}: {e}", path.display())))?;
        params.validate()?;
        Ok(params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub clean_dir: PathBuf,
    pub noise_files: Vec<PathBuf>,
    pub snrs_db: Vec<f64>,
    pub methods: Vec<Method>,
    pub metrics: Vec<Metric>,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub params: ExperimentParams,
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })
}

impl ExperimentConfig {
    /// Parses and validates a config file. Relative paths inside it are
    /// resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            cfg.resolve_relative(base);
        }
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| EvalError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| EvalError::Config(e.to_string()))
    }

    fn resolve_relative(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.clean_dir);
        fix(&mut self.output_dir);
        self.noise_files.iter_mut().for_each(fix);
    }

    pub fn validate(&self) -> Result<()> {
        if self.snrs_db.is_empty() {
            return Err(EvalError::Config("snrs_db must not be empty".into()));
        }
        if self.snrs_db.iter().any(|s| !s.is_finite()) {
            return Err(EvalError::Config("snrs_db must be finite".into()));
        }
        if self.methods.is_empty() || self.metrics.is_empty() {
            return Err(EvalError::Config(
                "at least one method and one metric are required".into(),
            ));
        }
        if self.noise_files.is_empty() {
            return Err(EvalError::Config("noise_files must not be empty".into()));
        }
        if has_duplicates(&self.methods) || has_duplicates(&self.metrics) {
            return Err(EvalError::Config("methods and metrics must not repeat".into()));
        }
        self.params.validate()
    }
}

fn has_duplicates<T: Ord + Clone>(items: &[T]) -> bool {
    let mut v = items.to_vec();
    v.sort();
    v.windows(2).any(|w| w[0] == w[1])
}

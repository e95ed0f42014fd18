//! Batch evaluation: every (utterance, noise, SNR) cell is mixed, processed
//! by each method and scored by each metric against the clean reference.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use blindmask::audio::{generate_ssn, mix_at_snr, read_wav, MixSpec, Mixture};
use blindmask::metrics::{ins_compute, normalize_score, ssn_reference_score, stoi, InsConfig};
use blindmask::tfmask::{ibm_process, tbm_process_with_ssn, GammatoneBank};
use blindmask::{bam_process, AudioBuffer};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, ExperimentParams, Method, Metric};
use crate::error::{EvalError, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const REPORT_COLUMNS: [&str; 7] = ["utterance", "noise", "snr_db", "method", "metric", "value", "status"];

/// An input that may have failed to load; failures become failed rows.
#[derive(Debug, Clone)]
pub struct Input {
    pub name: String,
    pub audio: std::result::Result<AudioBuffer, String>,
}

impl Input {
    pub fn loaded(name: impl Into<String>, audio: AudioBuffer) -> Self {
        Self {
            name: name.into(),
            audio: Ok(audio),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub utterance: String,
    pub noise: String,
    pub snr_db: f64,
    pub method: Method,
    pub metric: Metric,
    pub value: Option<f64>,
    /// `ok`, or `failed: <reason>`.
    pub status: String,
}

impl ReportRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub noise: String,
    pub snr_db: f64,
    pub method: Method,
    pub metric: Metric,
    pub mean: Option<f64>,
    pub n_ok: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSeeds {
    pub utterance: String,
    pub noise: String,
    pub snr_db: f64,
    pub noise_seek: usize,
    pub ins_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub schema_version: u32,
    pub tool_version: String,
    /// SHA-256 of the canonical TOML form of the configuration.
    pub config_hash: String,
    pub seed: u64,
    /// Speech-shaped noise seed per utterance (TBM and normalized STOI).
    pub ssn_seeds: BTreeMap<String, u64>,
    pub cells: Vec<CellSeeds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
    pub summary: Vec<SummaryRow>,
    pub provenance: Provenance,
}

impl EvalReport {
    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| !r.is_ok()).count()
    }

    /// Mean of one summary cell, if present and scored.
    pub fn mean(&self, noise: &str, snr_db: f64, method: Method, metric: Metric) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.noise == noise && s.snr_db == snr_db && s.method == method && s.metric == metric)
            .and_then(|s| s.mean)
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const SSN_STREAM_BASE: u64 = 1 << 40;

pub fn config_hash(config: &ExperimentConfig) -> Result<String> {
    let canonical = config.to_toml()?;
    let digest = Sha256::digest(canonical.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn wav_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|source| EvalError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    files.sort();
    Ok(files)
}

fn load(path: &Path) -> Input {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Input {
        name,
        audio: read_wav(path).map_err(|e| e.to_string()),
    }
}

/// Loads the corpus named by `config` and evaluates it.
pub fn run_batch(config: &ExperimentConfig) -> Result<EvalReport> {
    config.validate()?;
    let clean: Vec<Input> = wav_files(&config.clean_dir)?.iter().map(|p| load(p)).collect();
    if clean.is_empty() {
        return Err(EvalError::EmptyCorpus(config.clean_dir.clone()));
    }
    let noises: Vec<Input> = config.noise_files.iter().map(|p| load(p)).collect();
    run_batch_on(config, &clean, &noises)
}

struct Cell<'a> {
    u: usize,
    n: usize,
    s: usize,
    clean: &'a Input,
    noise: &'a Input,
    snr_db: f64,
}

/// Evaluates in-memory inputs. Paths in `config` are only used for the
/// provenance hash.
pub fn run_batch_on(config: &ExperimentConfig, clean: &[Input], noises: &[Input]) -> Result<EvalReport> {
    config.validate()?;
    if clean.is_empty() {
        return Err(EvalError::EmptyCorpus(config.clean_dir.clone()));
    }
    let params = &config.params;
    let ssn_seeds: Vec<u64> = (0..clean.len())
        .map(|u| stream_rng(config.seed, SSN_STREAM_BASE + u as u64).next_u64())
        .collect();

    let needs_ref = config.metrics.contains(&Metric::StoiNorm);
    let needs_ssn = config.methods.contains(&Method::Tbm);
    let per_utterance: Vec<UtteranceContext> = clean
        .par_iter()
        .zip(&ssn_seeds)
        .map(|(input, &seed)| UtteranceContext::new(input, seed, needs_ssn, needs_ref))
        .collect();

    let mut cells = Vec::new();
    for (u, c) in clean.iter().enumerate() {
        for (n, noise) in noises.iter().enumerate() {
            for (s, &snr_db) in config.snrs_db.iter().enumerate() {
                cells.push(Cell {
                    u,
                    n,
                    s,
                    clean: c,
                    noise,
                    snr_db,
                });
            }
        }
    }
    let n_noises = noises.len() as u64;
    let n_snrs = config.snrs_db.len() as u64;

    let results: Vec<(CellSeeds, Vec<ReportRow>)> = cells
        .par_iter()
        .map(|cell| {
            let index = (cell.u as u64 * n_noises + cell.n as u64) * n_snrs + cell.s as u64;
            let mut rng = stream_rng(config.seed, index + 1);
            let offset_draw = rng.next_u64();
            let ins_seed = rng.next_u64();
            evaluate_cell(config, params, cell, &per_utterance[cell.u], offset_draw, ins_seed)
        })
        .collect();

    let mut rows = Vec::new();
    let mut seeds = Vec::new();
    for (cell_seeds, cell_rows) in results {
        seeds.push(cell_seeds);
        rows.extend(cell_rows);
    }
    let summary = summarize(&rows, config);
    let provenance = Provenance {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config_hash(config)?,
        seed: config.seed,
        ssn_seeds: clean.iter().map(|c| c.name.clone()).zip(ssn_seeds).collect(),
        cells: seeds,
    };
    Ok(EvalReport {
        rows,
        summary,
        provenance,
    })
}

struct UtteranceContext {
    ssn: Option<std::result::Result<AudioBuffer, String>>,
    reference: Option<std::result::Result<f64, String>>,
    bank: Option<GammatoneBank>,
}

impl UtteranceContext {
    fn new(input: &Input, ssn_seed: u64, needs_ssn: bool, needs_ref: bool) -> Self {
        let Ok(audio) = &input.audio else {
            return Self {
                ssn: None,
                reference: None,
                bank: None,
            };
        };
        let ssn = needs_ssn.then(|| generate_ssn(audio, audio.len(), ssn_seed).map_err(|e| e.to_string()));
        let reference = needs_ref.then(|| {
            ssn_reference_score(audio, ssn_seed)
                .map(|s| s.value)
                .map_err(|e| e.to_string())
        });
        let bank = GammatoneBank::standard(audio.sample_rate()).ok();
        Self { ssn, reference, bank }
    }
}

fn failed_rows(config: &ExperimentConfig, cell: &Cell, methods: &[Method], reason: &str) -> Vec<ReportRow> {
    methods
        .iter()
        .flat_map(|&method| {
            config.metrics.iter().map(move |&metric| ReportRow {
                utterance: cell.clean.name.clone(),
                noise: cell.noise.name.clone(),
                snr_db: cell.snr_db,
                method,
                metric,
                value: None,
                status: format!("failed: {reason}"),
            })
        })
        .collect()
}

fn process(
    method: Method,
    cell: &Cell,
    clean: &AudioBuffer,
    mix: &Mixture,
    params: &ExperimentParams,
    ctx: &UtteranceContext,
) -> std::result::Result<AudioBuffer, String> {
    let bank = || {
        ctx.bank
            .as_ref()
            .ok_or_else(|| "no gammatone bank for this sample rate".to_string())
    };
    match method {
        Method::Unp => Ok(mix.mixture.clone()),
        Method::Bam => bam_process(&mix.mixture, &params.bam)
            .map(|o| o.audio)
            .map_err(|e| e.to_string()),
        Method::Ibm => ibm_process(
            clean,
            &mix.scaled_noise,
            &mix.mixture,
            cell.snr_db,
            &params.masks,
            bank()?,
        )
        .map(|o| o.audio)
        .map_err(|e| e.to_string()),
        Method::Tbm => {
            let ssn = match &ctx.ssn {
                Some(Ok(ssn)) => ssn,
                Some(Err(e)) => return Err(format!("speech-shaped noise: {e}")),
                None => return Err("speech-shaped noise was not prepared".into()),
            };
            tbm_process_with_ssn(clean, ssn, &mix.mixture, &params.masks, bank()?)
                .map(|o| o.audio)
                .map_err(|e| e.to_string())
        }
    }
}

fn evaluate_cell(
    config: &ExperimentConfig,
    params: &ExperimentParams,
    cell: &Cell,
    ctx: &UtteranceContext,
    offset_draw: u64,
    ins_seed: u64,
) -> (CellSeeds, Vec<ReportRow>) {
    let mut seeds = CellSeeds {
        utterance: cell.clean.name.clone(),
        noise: cell.noise.name.clone(),
        snr_db: cell.snr_db,
        noise_seek: 0,
        ins_seed,
    };
    let (clean, noise) = match (&cell.clean.audio, &cell.noise.audio) {
        (Ok(c), Ok(n)) => (c, n),
        (Err(e), _) => {
            return (
                seeds,
                failed_rows(config, cell, &config.methods, &format!("clean input: {e}")),
            )
        }
        (_, Err(e)) => {
            return (
                seeds,
                failed_rows(config, cell, &config.methods, &format!("noise input: {e}")),
            )
        }
    };
    let room = noise.len().saturating_sub(clean.len());
    seeds.noise_seek = if room == 0 {
        0
    } else {
        ChaCha8Rng::seed_from_u64(offset_draw).gen_range(0..=room)
    };
    let spec = MixSpec {
        snr_db: cell.snr_db,
        noise_seek: seeds.noise_seek,
        level_basis: params.level_basis,
    };
    let mix = match mix_at_snr(clean, noise, &spec) {
        Ok(m) => m,
        Err(e) => {
            return (
                seeds,
                failed_rows(config, cell, &config.methods, &format!("mixing: {e}")),
            )
        }
    };

    let mut rows = Vec::new();
    for &method in &config.methods {
        let output = match process(method, cell, clean, &mix, params, ctx) {
            Ok(o) => o,
            Err(e) => {
                rows.extend(failed_rows(config, cell, &[method], &e));
                continue;
            }
        };
        let mut stoi_value = None;
        for &metric in &config.metrics {
            let value: std::result::Result<f64, String> = match metric {
                Metric::Stoi | Metric::StoiNorm => {
                    let v = stoi_value
                        .get_or_insert_with(|| stoi(clean, &output).map(|s| s.value).map_err(|e| e.to_string()))
                        .clone();
                    match (metric, v) {
                        (Metric::Stoi, v) => v,
                        (_, Err(e)) => Err(e),
                        (_, Ok(v)) => match &ctx.reference {
                            Some(Ok(r)) => normalize_score(v, *r).map_err(|e| e.to_string()),
                            Some(Err(e)) => Err(format!("reference score: {e}")),
                            None => Err("reference score was not prepared".into()),
                        },
                    }
                }
                Metric::Ins => {
                    let cfg = InsConfig {
                        scales: params.ins.scales.clone(),
                        n_surrogates: params.ins.n_surrogates,
                        seed: ins_seed,
                    };
                    ins_compute(&output, &cfg).map(|p| p.ins_max).map_err(|e| e.to_string())
                }
            };
            let (value, status) = match value {
                Ok(v) => (Some(v), "ok".to_string()),
                Err(e) => (None, format!("failed: {e}")),
            };
            rows.push(ReportRow {
                utterance: cell.clean.name.clone(),
                noise: cell.noise.name.clone(),
                snr_db: cell.snr_db,
                method,
                metric,
                value,
                status,
            });
        }
    }
    (seeds, rows)
}

/// Mean per (noise, SNR, method, metric) in config order, over ok rows.
fn summarize(rows: &[ReportRow], config: &ExperimentConfig) -> Vec<SummaryRow> {
    let mut noises: Vec<&str> = Vec::new();
    for r in rows {
        if !noises.contains(&r.noise.as_str()) {
            noises.push(&r.noise);
        }
    }
    let mut out = Vec::new();
    for noise in noises {
        for &snr_db in &config.snrs_db {
            for &method in &config.methods {
                for &metric in &config.metrics {
                    let group = rows
                        .iter()
                        .filter(|r| r.noise == noise && r.snr_db == snr_db && r.method == method && r.metric == metric);
                    let (mut sum, mut n_ok, mut n_failed) = (0.0, 0, 0);
                    for r in group {
                        match (r.is_ok(), r.value) {
                            (true, Some(v)) => {
                                sum += v;
                                n_ok += 1;
                            }
                            _ => n_failed += 1,
                        }
                    }
                    out.push(SummaryRow {
                        noise: noise.to_string(),
                        snr_db,
                        method,
                        metric,
                        mean: (n_ok > 0).then(|| sum / n_ok as f64),
                        n_ok,
                        n_failed,
                    });
                }
            }
        }
    }
    out
}

fn report_err(e: impl std::fmt::Display) -> EvalError {
    EvalError::Report(e.to_string())
}

pub fn write_rows_csv<W: std::io::Write>(rows: &[ReportRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(REPORT_COLUMNS).map_err(report_err)?;
    for r in rows {
        let value = r.value.map(|v| v.to_string()).unwrap_or_default();
        out.write_record([
            r.utterance.as_str(),
            r.noise.as_str(),
            &r.snr_db.to_string(),
            r.method.as_str(),
            r.metric.as_str(),
            &value,
            &r.status,
        ])
        .map_err(report_err)?;
    }
    out.flush().map_err(report_err)
}

pub fn write_summary_csv<W: std::io::Write>(summary: &[SummaryRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["noise", "snr_db", "method", "metric", "mean", "n_ok", "n_failed"])
        .map_err(report_err)?;
    for s in summary {
        out.write_record([
            s.noise.as_str(),
            &s.snr_db.to_string(),
            s.method.as_str(),
            s.metric.as_str(),
            &s.mean.map(|v| v.to_string()).unwrap_or_default(),
            &s.n_ok.to_string(),
            &s.n_failed.to_string(),
        ])
        .map_err(report_err)?;
    }
    out.flush().map_err(report_err)
}

#[derive(Serialize)]
struct SummaryJson<'a> {
    provenance: &'a Provenance,
    summary: &'a [SummaryRow],
}

/// Writes `report.csv`, `summary.csv` and `summary.json` into `dir`.
pub fn write_report(report: &EvalReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| EvalError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let rows_path = dir.join("report.csv");
    let summary_path = dir.join("summary.csv");
    let json_path = dir.join("summary.json");
    write_rows_csv(&report.rows, fs::File::create(&rows_path).map_err(io(&rows_path))?)?;
    write_summary_csv(
        &report.summary,
        fs::File::create(&summary_path).map_err(io(&summary_path))?,
    )?;
    let json = serde_json::to_string_pretty(&SummaryJson {
        provenance: &report.provenance,
        summary: &report.summary,
    })
    .map_err(report_err)?;
    fs::write(&json_path, json).map_err(io(&json_path))?;
    Ok(vec![rows_path, summary_path, json_path])
}

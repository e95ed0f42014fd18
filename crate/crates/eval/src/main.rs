use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use blindmask::audio::{mix_at_snr, read_wav, write_wav, LevelBasis, MixSpec, WavFormat};
use blindmask::bam::write_diagnostics_csv;
use blindmask::metrics::{ins_compute, ssn_reference_score, stoi, stoi_normalized, InsConfig, MetricResult};
use blindmask::tfmask::{ibm_process, tbm_process, GammatoneBank};
use blindmask::{bam_process, AudioBuffer};
use blindmask_eval::bench::{bench_methods, BenchConfig};
use blindmask_eval::corpus::{generate_corpus, write_corpus, CorpusSpec};
use blindmask_eval::{run_batch, write_report, ExperimentConfig, ExperimentParams};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bamctl", version, about = "Blind acoustic masking toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args, Clone)]
struct Common {
    /// Seed for every random choice made by the command.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file or directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// TOML file with processing parameters (or a full experiment for eval-batch).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Mix clean speech with noise at a target SNR.
    Mix(MixArgs),
    /// Enhance a noisy file with the blind acoustic mask.
    Bam(BamArgs),
    /// Apply the ideal binary mask (needs clean speech and the noise).
    Ibm(IbmArgs),
    /// Apply the target binary mask (needs clean speech and the mixture).
    Tbm(TbmArgs),
    /// Score a processed file against its clean reference.
    Stoi(StoiArgs),
    /// Index of non-stationarity of a file.
    Ins(InsArgs),
    /// Run a full experiment from a config file.
    EvalBatch(EvalBatchArgs),
    /// Time the per-frame cost of each method.
    Bench(BenchArgs),
    /// Write the synthetic corpus.
    Corpus(CorpusArgs),
}

#[derive(Args)]
struct MixArgs {
    #[arg(long)]
    clean: PathBuf,
    #[arg(long)]
    noise: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    snr: f64,
    /// Start offset into the noise, in samples.
    #[arg(long, default_value_t = 0)]
    seek: usize,
    /// Measure speech level over active blocks only.
    #[arg(long)]
    active_level: bool,
    /// Also write the scaled noise here.
    #[arg(long)]
    noise_out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct BamArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    frame_ms: Option<f64>,
    /// Skip peak normalization.
    #[arg(long)]
    no_normalize: bool,
    /// Per-frame diagnostics CSV (defaults to the output path with .csv).
    #[arg(long)]
    diagnostics: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct IbmArgs {
    #[arg(long)]
    clean: PathBuf,
    #[arg(long)]
    noise: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    snr: f64,
    #[arg(long, default_value_t = 0)]
    seek: usize,
    #[arg(long, allow_hyphen_values = true)]
    rc_db: Option<f64>,
    /// Absolute local criterion; overrides the relative one.
    #[arg(long, allow_hyphen_values = true)]
    lc_db: Option<f64>,
    /// Write the binary mask as text.
    #[arg(long)]
    mask_out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct TbmArgs {
    #[arg(long)]
    clean: PathBuf,
    #[arg(long)]
    mixture: PathBuf,
    #[arg(long)]
    coverage: Option<f64>,
    #[arg(long)]
    mask_out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct StoiArgs {
    #[arg(long)]
    clean: PathBuf,
    #[arg(long)]
    processed: PathBuf,
    /// Also report the score relative to speech-shaped noise at 10 dB.
    #[arg(long)]
    normalize: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct InsArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    surrogates: Option<usize>,
    /// Comma-separated Th/T ratios.
    #[arg(long, value_delimiter = ',')]
    scales: Option<Vec<f64>>,
    /// Write JSON instead of CSV.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct EvalBatchArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 512)]
    frame_len: usize,
    #[arg(long, default_value_t = 30)]
    repetitions: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct CorpusArgs {
    #[arg(long, default_value_t = 10)]
    utterances: usize,
    #[arg(long, default_value_t = 2.5)]
    utterance_secs: f64,
    #[arg(long, default_value_t = 8.0)]
    noise_secs: f64,
    #[command(flatten)]
    common: Common,
}

fn params(common: &Common) -> Result<ExperimentParams> {
    match &common.config {
        Some(path) => ExperimentParams::load(path).with_context(|| format!("loading {}", path.display())),
        None => Ok(ExperimentParams::default()),
    }
}

fn required_out(common: &Common) -> Result<&Path> {
    common.out.as_deref().context("--out is required for this command")
}

fn read(path: &Path) -> Result<AudioBuffer> {
    read_wav(path).with_context(|| format!("reading {}", path.display()))
}

fn write_audio(path: &Path, audio: &AudioBuffer) -> Result<()> {
    let report = write_wav(path, audio, WavFormat::Float32).with_context(|| format!("writing {}", path.display()))?;
    if report.clipped > 0 {
        eprintln!("warning: {} samples clipped in {}", report.clipped, path.display());
    }
    Ok(())
}

/// Stdout unless `--out` names a file.
fn text_sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn mix(args: MixArgs) -> Result<()> {
    let out = required_out(&args.common)?;
    let clean = read(&args.clean)?;
    let noise = read(&args.noise)?;
    let spec = MixSpec {
        snr_db: args.snr,
        noise_seek: args.seek,
        level_basis: if args.active_level {
            LevelBasis::ActiveRms
        } else {
            LevelBasis::Rms
        },
    };
    let m = mix_at_snr(&clean, &noise, &spec)?;
    write_audio(out, &m.mixture)?;
    if let Some(p) = &args.noise_out {
        write_audio(p, &m.scaled_noise)?;
    }
    println!("mixed at {} dB (noise gain {:.6})", args.snr, m.gain);
    Ok(())
}

fn bam(args: BamArgs) -> Result<()> {
    let out = required_out(&args.common)?;
    let mut p = params(&args.common)?.bam;
    if let Some(a) = args.alpha {
        p.alpha = a;
    }
    if let Some(b) = args.beta {
        p.beta = b;
    }
    if let Some(f) = args.frame_ms {
        p.frame_ms = f;
    }
    if args.no_normalize {
        p.normalize = false;
    }
    let noisy = read(&args.input)?;
    let result = bam_process(&noisy, &p)?;
    write_audio(out, &result.audio)?;
    let diag = args.diagnostics.unwrap_or_else(|| out.with_extension("csv"));
    let file = File::create(&diag).with_context(|| format!("creating {}", diag.display()))?;
    write_diagnostics_csv(BufWriter::new(file), &result.decisions)?;
    println!(
        "{} frames processed; diagnostics in {}",
        result.decisions.len(),
        diag.display()
    );
    Ok(())
}

fn write_mask(path: Option<&Path>, mask: &blindmask::tfmask::BinaryMask) -> Result<()> {
    if let Some(p) = path {
        std::fs::write(p, mask.to_dump()).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn ibm(args: IbmArgs) -> Result<()> {
    let out = required_out(&args.common)?;
    let mut settings = params(&args.common)?.masks;
    if let Some(rc) = args.rc_db {
        settings.rc_db = rc;
    }
    if args.lc_db.is_some() {
        settings.absolute_lc_db = args.lc_db;
    }
    let clean = read(&args.clean)?;
    let noise = read(&args.noise)?;
    let mut spec = MixSpec::at(args.snr);
    spec.noise_seek = args.seek;
    let m = mix_at_snr(&clean, &noise, &spec)?;
    let bank = GammatoneBank::standard(clean.sample_rate())?;
    let result = ibm_process(&clean, &m.scaled_noise, &m.mixture, args.snr, &settings, &bank)?;
    write_audio(out, &result.audio)?;
    write_mask(args.mask_out.as_deref(), &result.mask)?;
    println!(
        "ideal binary mask keeps {} of {} units",
        result.mask.ones(),
        result.mask.n_channels() * result.mask.n_frames()
    );
    Ok(())
}

fn tbm(args: TbmArgs) -> Result<()> {
    let out = required_out(&args.common)?;
    let mut settings = params(&args.common)?.masks;
    if let Some(c) = args.coverage {
        settings.coverage = c;
    }
    let clean = read(&args.clean)?;
    let mixture = read(&args.mixture)?;
    let bank = GammatoneBank::standard(clean.sample_rate())?;
    let result = tbm_process(&clean, &mixture, &settings, &bank, args.common.seed.unwrap_or(0))?;
    write_audio(out, &result.audio)?;
    write_mask(args.mask_out.as_deref(), &result.mask)?;
    println!(
        "target binary mask keeps {} of {} units",
        result.mask.ones(),
        result.mask.n_channels() * result.mask.n_frames()
    );
    Ok(())
}

fn stoi_cmd(args: StoiArgs) -> Result<()> {
    let clean = read(&args.clean)?;
    let processed = read(&args.processed)?;
    let seed = args.common.seed.unwrap_or(0);
    let score = if args.normalize {
        let reference = ssn_reference_score(&clean, seed)?;
        stoi_normalized(&clean, &processed, &reference)?
    } else {
        stoi(&clean, &processed)?
    };
    let mut result = MetricResult::from_stoi(&score);
    if args.normalize {
        result.seed = Some(seed);
    }
    let mut sink = text_sink(args.common.out.as_deref())?;
    writeln!(sink, "{}", serde_json::to_string_pretty(&result)?)?;
    Ok(())
}

fn ins(args: InsArgs) -> Result<()> {
    let p = params(&args.common)?.ins;
    let cfg = InsConfig {
        scales: args.scales.unwrap_or(p.scales),
        n_surrogates: args.surrogates.unwrap_or(p.n_surrogates),
        seed: args.common.seed.unwrap_or(0),
    };
    let buffer = read(&args.input)?;
    let profile = ins_compute(&buffer, &cfg)?;
    let mut sink = text_sink(args.common.out.as_deref())?;
    if args.json {
        writeln!(
            sink,
            "{}",
            serde_json::to_string_pretty(&MetricResult::from_ins(&profile))?
        )?;
    } else {
        profile.write_csv(&mut sink)?;
    }
    Ok(())
}

fn eval_batch(common: Common) -> Result<()> {
    let path = common
        .config
        .as_deref()
        .context("eval-batch needs --config <experiment.toml>")?;
    let mut cfg = ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = common.out {
        cfg.output_dir = out;
    }
    let report = run_batch(&cfg)?;
    let files = write_report(&report, &cfg.output_dir)?;
    println!(
        "{} rows ({} failed); wrote {}",
        report.rows.len(),
        report.failed_rows(),
        files
            .iter()
            .map(|f| f.display().to_string())
            .collect::<Vec<_>>()
            .join(", ")
    );
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let cfg = BenchConfig {
        frame_len: args.frame_len,
        repetitions: args.repetitions,
        seed: args.common.seed.unwrap_or(0),
        ..BenchConfig::default()
    };
    let report = bench_methods(&cfg)?;
    let mut sink = text_sink(args.common.out.as_deref())?;
    writeln!(sink, "{}", serde_json::to_string_pretty(&report)?)?;
    Ok(())
}

fn corpus(args: CorpusArgs) -> Result<()> {
    let out = required_out(&args.common)?;
    if args.utterances == 0 {
        bail!("--utterances must be at least 1");
    }
    let spec = CorpusSpec {
        n_utterances: args.utterances,
        utterance_secs: args.utterance_secs,
        noise_secs: args.noise_secs,
        seed: args.common.seed.unwrap_or(CorpusSpec::default().seed),
        ..CorpusSpec::default()
    };
    let files = write_corpus(&generate_corpus(&spec), out)?;
    println!("wrote {} files under {}", files.len(), out.display());
    Ok(())
}

fn main() {
    // clap exits with status 2 and usage text on unknown input
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Mix(a) => mix(a),
        Command::Bam(a) => bam(a),
        Command::Ibm(a) => ibm(a),
        Command::Tbm(a) => tbm(a),
        Command::Stoi(a) => stoi_cmd(a),
        Command::Ins(a) => ins(a),
        Command::EvalBatch(a) => eval_batch(a.common),
        Command::Bench(a) => bench(a),
        Command::Corpus(a) => corpus(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

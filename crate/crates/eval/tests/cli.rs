use std::path::Path;
use std::process::{Command, Output};

use blindmask::audio::{read_wav, write_wav, WavFormat};
use blindmask_eval::corpus::{babble, speech_utterance, CORPUS_RATE};

fn bamctl(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bamctl"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn fixtures(dir: &Path) {
    write_wav(
        dir.join("s.wav"),
        &speech_utterance(1, CORPUS_RATE, 2.0),
        WavFormat::Float32,
    )
    .unwrap();
    write_wav(dir.join("n.wav"), &babble(2, CORPUS_RATE, 3.0), WavFormat::Float32).unwrap();
}

#[test]
fn mix_bam_stoi_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixtures(d);
    ok(&bamctl(
        &[
            "mix", "--clean", "s.wav", "--noise", "n.wav", "--snr", "-6", "--out", "x.wav",
        ],
        d,
    ));
    assert_eq!(read_wav(d.join("x.wav")).unwrap().len(), 32_000);

    ok(&bamctl(
        &[
            "bam",
            "--in",
            "x.wav",
            "--out",
            "enhanced.wav",
            "--alpha",
            "0.35",
            "--beta",
            "0.65",
        ],
        d,
    ));
    assert_eq!(read_wav(d.join("enhanced.wav")).unwrap().len(), 32_000);
    let diag = std::fs::read_to_string(d.join("enhanced.csv")).unwrap();
    assert!(diag.starts_with("frame_index,"));
    assert_eq!(diag.lines().count(), 1 + 63);

    let json = ok(&bamctl(
        &["stoi", "--clean", "s.wav", "--processed", "enhanced.wav", "--normalize"],
        d,
    ));
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["metric"], "stoi");
    let value = v["value"].as_f64().unwrap();
    assert!(value > 0.0 && value < 1.0);
}

#[test]
fn masks_and_ins() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixtures(d);
    ok(&bamctl(
        &[
            "ibm",
            "--clean",
            "s.wav",
            "--noise",
            "n.wav",
            "--snr",
            "0",
            "--out",
            "i.wav",
            "--mask-out",
            "i.mask",
        ],
        d,
    ));
    ok(&bamctl(
        &[
            "mix", "--clean", "s.wav", "--noise", "n.wav", "--snr", "0", "--out", "x.wav",
        ],
        d,
    ));
    ok(&bamctl(
        &[
            "tbm",
            "--clean",
            "s.wav",
            "--mixture",
            "x.wav",
            "--out",
            "t.wav",
            "--seed",
            "3",
        ],
        d,
    ));
    assert!(d.join("i.mask").exists());
    assert_eq!(read_wav(d.join("t.wav")).unwrap().len(), 32_000);

    let csv = ok(&bamctl(
        &[
            "ins",
            "--in",
            "x.wav",
            "--surrogates",
            "20",
            "--seed",
            "7",
            "--scales",
            "0.1,0.3",
        ],
        d,
    ));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "scale,ins,gamma,verdict");
    assert_eq!(lines.len(), 3);
    ok(&bamctl(
        &[
            "ins",
            "--in",
            "x.wav",
            "--surrogates",
            "20",
            "--seed",
            "7",
            "--scales",
            "0.1,0.3",
            "--out",
            "p.csv",
        ],
        d,
    ));
    assert_eq!(std::fs::read_to_string(d.join("p.csv")).unwrap(), csv);
}

#[test]
fn config_flag_sets_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixtures(d);
    ok(&bamctl(
        &[
            "mix", "--clean", "s.wav", "--noise", "n.wav", "--snr", "0", "--out", "x.wav",
        ],
        d,
    ));
    std::fs::write(d.join("p.toml"), "[bam]\nbeta = 1.0\nalpha = 0.0\n").unwrap();
    ok(&bamctl(
        &["bam", "--in", "x.wav", "--out", "y.wav", "--config", "p.toml"],
        d,
    ));
    // alpha 0 and beta 1 make the mask an identity
    let x = read_wav(d.join("x.wav")).unwrap();
    let y = read_wav(d.join("y.wav")).unwrap();
    assert_eq!(x.samples(), y.samples());

    std::fs::write(d.join("bad.toml"), "[bam]\nbeta = 3.0\n").unwrap();
    let out = bamctl(&["bam", "--in", "x.wav", "--out", "z.wav", "--config", "bad.toml"], d);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn corpus_then_eval_batch() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&bamctl(
        &[
            "corpus",
            "--out",
            "corpus",
            "--utterances",
            "2",
            "--utterance-secs",
            "1.5",
            "--noise-secs",
            "3",
        ],
        d,
    ));
    std::fs::write(
        d.join("exp.toml"),
        r#"clean_dir = "corpus/clean"
noise_files = ["corpus/noise/factory.wav"]
snrs_db = [0, 6]
methods = ["unp", "bam"]
metrics = ["stoi"]
output_dir = "results"
"#,
    )
    .unwrap();
    ok(&bamctl(&["eval-batch", "--config", "exp.toml", "--seed", "4"], d));
    let csv = std::fs::read_to_string(d.join("results/report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 2);
    assert!(d.join("results/summary.json").exists());
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["frobnicate"][..], &["bam", "--bogus"], &[]] {
        let out = bamctl(args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    }
}

#[test]
fn runtime_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = bamctl(
        &["stoi", "--clean", "missing.wav", "--processed", "missing.wav"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error:") && err.contains("missing.wav"));
    let out = bamctl(&["eval-batch"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

//! End-to-end runs of the `esser` binary against small generated corpora.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use esser_core::rng::seeded_rng;
use esser_core::signal::Waveform;
use esser_core::wav::{write_wav, SampleFormat};
use rand::Rng;
use serde_json::Value;
use tempfile::TempDir;

fn esser() -> Command {
    Command::new(env!("CARGO_BIN_EXE_esser"))
}

fn run(args: &[&str]) -> Output {
    esser().args(args).output().expect("spawn esser")
}

/// Run expecting success; returns the parsed summary line (last stdout line).
fn run_ok(args: &[&str]) -> Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "args {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    summary_of(&out)
}

fn summary_of(out: &Output) -> Value {
    let stdout = String::from_utf8_lossy(&out.stdout);
    let line = stdout.lines().last().expect("summary line on stdout");
    serde_json::from_str(line).expect("summary line is JSON")
}

fn noise_wav(path: &Path, seed: u64, label: &str, len: usize) {
    let mut rng = seeded_rng(seed, label);
    let samples: Vec<f64> = (0..len).map(|_| rng.gen_range(-0.4..0.4)).collect();
    let w = Waveform::new(samples, 16_000).unwrap();
    write_wav(path, &w, SampleFormat::Float32).unwrap();
}

fn tone_wav(path: &Path, freq: f64, len: usize) {
    let samples: Vec<f64> =
        (0..len).map(|i| 0.5 * (std::f64::consts::TAU * freq * i as f64).sin()).collect();
    let w = Waveform::new(samples, 16_000).unwrap();
    write_wav(path, &w, SampleFormat::Float32).unwrap();
}

/// Two trials, two sources each, with deliberately unequal member lengths.
fn write_corpus(dir: &Path) -> PathBuf {
    let mut manifest = String::new();
    for (t, base_len) in [(0usize, 1500usize), (1, 1600)] {
        let c0 = format!("t{t}_c0.wav");
        let c1 = format!("t{t}_c1.wav");
        let n0 = format!("t{t}_n0.wav");
        let n1 = format!("t{t}_n1.wav");
        tone_wav(&dir.join(&c0), 0.03 + 0.01 * t as f64, base_len);
        tone_wav(&dir.join(&c1), 0.07 + 0.01 * t as f64, base_len + 40);
        noise_wav(&dir.join(&n0), 90 + t as u64, "n0", base_len + 17);
        noise_wav(&dir.join(&n1), 90 + t as u64, "n1", base_len);
        manifest.push_str(&format!(
            "{}\n",
            serde_json::json!({
                "trial_id": format!("t{t}"),
                "clean": [c0, c1],
                "noises": [n0, n1],
            })
        ));
    }
    let path = dir.join("manifest.jsonl");
    fs::write(&path, manifest).unwrap();
    path
}

#[test]
fn no_arguments_prints_usage_and_exits_two() {
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8_lossy(&out.stderr);
    assert!(text.contains("Usage"), "stderr missing usage: {text}");
}

#[test]
fn unknown_flags_are_rejected() {
    let out = run(&["gradcheck", "--loss", "sisdr", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gradcheck_passes_within_tolerance() {
    let summary =
        run_ok(&["gradcheck", "--loss", "esser", "--lambda", "0.3", "--trials", "20", "--seed", "7"]);
    assert_eq!(summary["command"], "gradcheck");
    assert_eq!(summary["pass"], true);
    assert!(summary["max_rel_err"].as_f64().unwrap() < 1e-6);
}

#[test]
fn gradcheck_defaults_match_explicit_flags() {
    let a = run_ok(&["gradcheck", "--loss", "sisdr", "--seed", "3"]);
    let b = run_ok(&[
        "gradcheck", "--loss", "sisdr", "--seed", "3", "--trials", "100", "--t", "64", "--h",
        "1e-6",
    ]);
    assert_eq!(a, b);
}

#[test]
fn mix_then_eval_round_trips() {
    let tmp = TempDir::new().unwrap();
    let manifest = write_corpus(tmp.path());
    let dataset = tmp.path().join("ds");

    let summary = run_ok(&[
        "mix",
        "--manifest",
        manifest.to_str().unwrap(),
        "--snr",
        "5",
        "--oracle",
        "noisy",
        "--out",
        dataset.to_str().unwrap(),
    ]);
    assert_eq!(summary["command"], "mix");
    assert_eq!(summary["trials"], 2);
    assert!(dataset.join("manifest.jsonl").exists());

    // score the dataset's own clean references as estimates: near-perfect
    let estimates = tmp.path().join("est");
    for t in 0..2 {
        let sub = estimates.join(format!("t{t}"));
        fs::create_dir_all(&sub).unwrap();
        for i in 0..2 {
            fs::copy(
                dataset.join(format!("t{t}/clean_{i}.wav")),
                sub.join(format!("est_{i}.wav")),
            )
            .unwrap();
        }
    }
    let report = tmp.path().join("report.jsonl");
    let summary = run_ok(&[
        "eval",
        "--dataset",
        dataset.to_str().unwrap(),
        "--estimates",
        estimates.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(summary["command"], "eval");
    assert_eq!(summary["trials"], 2);
    assert!(summary["speech_si_sdr_db"]["mean"].as_f64().unwrap() > 40.0);

    let text = fs::read_to_string(&report).unwrap();
    let first: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first["kind"], "config");
}

#[test]
fn mix_outputs_are_byte_identical_across_runs() {
    let tmp = TempDir::new().unwrap();
    let manifest = write_corpus(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        run_ok(&[
            "mix",
            "--manifest",
            manifest.to_str().unwrap(),
            "--snr",
            "0",
            "--oracle",
            "clean",
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    for rel in ["manifest.jsonl", "t0/mixture.wav", "t1/oracle_2.wav"] {
        assert_eq!(
            fs::read(a.join(rel)).unwrap(),
            fs::read(b.join(rel)).unwrap(),
            "{rel} differs between identical runs"
        );
    }
}

#[test]
fn tune_selects_a_grid_lambda() {
    let tmp = TempDir::new().unwrap();
    let manifest = write_corpus(tmp.path());
    let dataset = tmp.path().join("ds");
    run_ok(&[
        "mix",
        "--manifest",
        manifest.to_str().unwrap(),
        "--snr",
        "5",
        "--oracle",
        "noisy",
        "--out",
        dataset.to_str().unwrap(),
    ]);

    let record = tmp.path().join("sweep.json");
    let summary = run_ok(&[
        "tune",
        "--dataset",
        dataset.to_str().unwrap(),
        "--max-lambda",
        "0.2",
        "--steps",
        "8",
        "--step-size",
        "0.5",
        "--seed",
        "11",
        "--out",
        record.to_str().unwrap(),
    ]);
    assert_eq!(summary["command"], "tune");
    assert_eq!(summary["trials"], 2);
    let grid: Vec<f64> =
        summary["lambda_values"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let selected = summary["selected_lambda"].as_f64().unwrap();
    assert!(grid.contains(&selected));
    assert_eq!(
        summary["proxy_scores"].as_array().unwrap().len(),
        grid.len(),
        "one proxy score per visited grid point"
    );

    let saved: Value = serde_json::from_str(&fs::read_to_string(&record).unwrap()).unwrap();
    assert_eq!(saved["selected_lambda"], summary["selected_lambda"]);
}

#[test]
fn toyrun_record_is_deterministic_per_seed() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a.jsonl"), tmp.path().join("b.jsonl"));
    for out in [&a, &b] {
        let summary = run_ok(&[
            "toyrun",
            "--scenario",
            "inseparable",
            "--snr",
            "5",
            "--loss",
            "esser",
            "--lambda",
            "0.4",
            "--steps",
            "30",
            "--seed",
            "21",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(summary["command"], "toyrun");
        assert_eq!(summary["lambda"], 0.4);
    }
    let bytes = fs::read(&a).unwrap();
    assert_eq!(bytes, fs::read(&b).unwrap(), "same seed, different record");

    let text = String::from_utf8(bytes).unwrap();
    let kinds: Vec<String> = text
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["kind"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(kinds.first().map(String::as_str), Some("config"));
    assert_eq!(kinds.last().map(String::as_str), Some("result"));
    assert_eq!(kinds.iter().filter(|k| *k == "step").count(), 30);
}

#[test]
fn toyrun_esser_without_lambda_is_a_domain_error() {
    let out = run(&["toyrun", "--scenario", "separable", "--snr", "5", "--loss", "esser"]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stderr);
    assert!(text.contains("--lambda"), "unexpected stderr: {text}");
}

#[test]
fn config_file_fills_missing_flags_and_flags_win() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"loss": "sisdr", "trials": 4, "t": 16, "seed": 9}"#).unwrap();

    let from_cfg = run_ok(&["gradcheck", "--config", cfg.to_str().unwrap()]);
    assert_eq!(from_cfg["trials"], 4);
    assert_eq!(from_cfg["seed"], 9);

    let overridden = run_ok(&["gradcheck", "--config", cfg.to_str().unwrap(), "--trials", "6"]);
    assert_eq!(overridden["trials"], 6, "explicit flag must beat the config value");
    assert_eq!(overridden["seed"], 9);
}

#[test]
fn quiet_leaves_only_the_summary_line() {
    let out = esser()
        .args([
            "toyrun", "--scenario", "separable", "--snr", "clean", "--loss", "sisdr", "--steps",
            "10", "--quiet",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out.stderr.is_empty(), "quiet run wrote to stderr");
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 1);
}

#[test]
fn eval_rejects_unknown_report_extension() {
    let tmp = TempDir::new().unwrap();
    let out = run(&[
        "eval",
        "--dataset",
        tmp.path().to_str().unwrap(),
        "--estimates",
        tmp.path().to_str().unwrap(),
        "--out",
        tmp.path().join("report.txt").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn orthostat_reports_every_pair() {
    let tmp = TempDir::new().unwrap();
    for i in 0..3u64 {
        noise_wav(&tmp.path().join(format!("w{i}.wav")), i, "orthostat", 4000);
    }
    let out = esser().args(["orthostat", "--corpus", tmp.path().to_str().unwrap()]).output().unwrap();
    assert!(out.status.success());
    let summary = summary_of(&out);
    assert_eq!(summary["files"], 3);
    assert_eq!(summary["pairs"], 3);
    assert!(summary["max_abs_correlation"].as_f64().unwrap() < 0.1);
    let per_pair = String::from_utf8_lossy(&out.stderr);
    assert_eq!(per_pair.lines().count(), 3, "one line per pair: {per_pair}");
}

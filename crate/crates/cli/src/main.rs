//! The `esser` binary: deterministic, scriptable front end for the
//! separation-objective toolkit.
//!
//! Every subcommand ends a successful run with exactly one machine-readable
//! JSON summary line on stdout; `--quiet` suppresses per-item progress lines
//! but never the summary. A JSON config file whose keys mirror the long flag
//! names may supply any value a flag can; explicit flags win on conflict.
//! Exit codes: 0 success, 1 domain failure, 2 usage error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use esser_core::error::{Error, Result};
use esser_core::eval::{
    evaluate_dataset, load_estimates, ReportConfig, ReportFormat, write_report,
};
use esser_core::gradcheck::run_check;
use esser_core::loss::LossConfig;
use esser_core::mixer::{build_dataset, load_dataset, DatasetConfig, OracleMode, SnrSpec};
use esser_core::pit::pit_apply;
use esser_core::signal::{pairwise_correlations, Waveform};
use esser_core::toyopt::{
    optimize, synth_scenario, Separability, ToyRunConfig, DEFAULT_SAMPLES,
};
use esser_core::tuner::{run_sweep, SweepConfig};
use esser_core::wav::read_wav;
use esser_core::{eval, mixer, LossFamily};

/// Gradient checks fail the run at this relative error.
const GRADCHECK_TOLERANCE: f64 = 1e-6;

#[derive(Parser)]
#[command(name = "esser", version, about = "Speech-separation objective toolkit")]
struct Cli {
    /// Seed feeding every random draw in the invoked subcommand.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress per-item lines; the summary line still prints.
    #[arg(long, global = true)]
    quiet: bool,
    /// Primary output path (a directory or file, depending on subcommand).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON object whose keys mirror long flag names; flags win on conflict.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a noisy-mixture dataset from an input manifest.
    Mix(MixArgs),
    /// Score an estimates directory against a dataset's clean references.
    Eval(EvalArgs),
    /// Sweep the discount weight over a validation dataset.
    Tune(TuneArgs),
    /// Train the toy mask separator against a configured loss.
    Toyrun(ToyrunArgs),
    /// Compare analytic loss gradients against central differences.
    Gradcheck(GradcheckArgs),
    /// Report pairwise normalized correlations across a WAV corpus.
    Orthostat(OrthostatArgs),
}

#[derive(Args)]
struct MixArgs {
    /// Line-delimited JSON manifest listing each trial's source files.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Per-source SNR in dB, or "clean" / "pure-noise".
    #[arg(long)]
    snr: Option<SnrSpec>,
    /// Which ground-truth regime the oracles follow: "clean" or "noisy".
    #[arg(long)]
    oracle: Option<OracleMode>,
    /// Expected sample rate of all input audio.
    #[arg(long)]
    sample_rate: Option<u32>,
}

#[derive(Args)]
struct EvalArgs {
    /// Dataset directory produced by `mix`.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Directory of system outputs: <trial_id>/est_<i>.wav plus optional noise.wav.
    #[arg(long)]
    estimates: Option<PathBuf>,
}

#[derive(Args)]
struct TuneArgs {
    /// Validation dataset directory produced by `mix`.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Score drop that stops the sweep.
    #[arg(long)]
    threshold: Option<f64>,
    /// Grid spacing of the discount weight.
    #[arg(long)]
    step: Option<f64>,
    /// Upper end of the grid.
    #[arg(long)]
    max_lambda: Option<f64>,
    /// Training steps per sweep point.
    #[arg(long)]
    steps: Option<usize>,
    /// Gradient-ascent step size per sweep point.
    #[arg(long)]
    step_size: Option<f64>,
}

#[derive(Args)]
struct ToyrunArgs {
    /// Interference layout: "separable" or "inseparable".
    #[arg(long)]
    scenario: Option<Separability>,
    /// Per-source SNR in dB, or "clean" / "pure-noise".
    #[arg(long)]
    snr: Option<SnrSpec>,
    /// Training objective: "sisdr", "sdr-noisy", or "esser".
    #[arg(long)]
    loss: Option<LossFamily>,
    /// Discount weight (required when the loss is esser).
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    step_size: Option<f64>,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Loss family to check: "sisdr", "sdr-noisy", or "esser".
    #[arg(long)]
    loss: Option<LossFamily>,
    /// Discount weight (required when the loss is esser).
    #[arg(long)]
    lambda: Option<f64>,
    /// Independent random cases.
    #[arg(long)]
    trials: Option<usize>,
    /// Waveform length per case.
    #[arg(long)]
    t: Option<usize>,
    /// Central-difference step.
    #[arg(long)]
    h: Option<f64>,
}

#[derive(Args)]
struct OrthostatArgs {
    /// Directory of WAV files; all pairs are correlated after truncation
    /// to the shortest member.
    #[arg(long)]
    corpus: Option<PathBuf>,
}

/// Values loaded from `--config`, keyed by flag name. Lookup accepts both
/// the flag spelling ("max-lambda") and the underscore spelling.
#[derive(Default)]
struct FileConfig(Map<String, Value>);

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        match value {
            Value::Object(map) => Ok(Self(map)),
            other => Err(Error::Config(format!(
                "{}: expected a JSON object, got {other}",
                path.display()
            ))),
        }
    }

    fn get(&self, key: &str) -> Option<&Value> {
        self.0.get(key).or_else(|| self.0.get(&key.replace('-', "_")))
    }

    /// A value parseable via `FromStr`, accepting native JSON scalars too.
    fn parsed<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: std::str::FromStr<Err = Error>,
    {
        let Some(v) = self.get(key) else { return Ok(None) };
        let text = match v {
            Value::String(s) => s.clone(),
            Value::Number(n) => n.to_string(),
            other => {
                return Err(Error::Config(format!(
                    "config key {key:?}: cannot parse {other} here"
                )))
            }
        };
        text.parse().map(Some)
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_f64()
                .or_else(|| v.as_str().and_then(|s| s.parse().ok()))
                .map(Some)
                .ok_or_else(|| Error::Config(format!("config key {key:?}: expected a number"))),
        }
    }

    fn u64(&self, key: &str) -> Result<Option<u64>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_u64()
                .or_else(|| v.as_str().and_then(|s| s.parse().ok()))
                .map(Some)
                .ok_or_else(|| {
                    Error::Config(format!("config key {key:?}: expected a non-negative integer"))
                }),
        }
    }

    fn usize(&self, key: &str) -> Result<Option<usize>> {
        Ok(self.u64(key)?.map(|v| v as usize))
    }

    fn bool(&self, key: &str) -> Result<Option<bool>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_bool()
                .map(Some)
                .ok_or_else(|| Error::Config(format!("config key {key:?}: expected a boolean"))),
        }
    }

    fn path(&self, key: &str) -> Result<Option<PathBuf>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(PathBuf::from(s))),
            Some(_) => Err(Error::Config(format!("config key {key:?}: expected a path string"))),
        }
    }
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| Error::Argument(format!("missing --{flag} (pass the flag or set it in --config)")))
}

/// Global values after flag/config merging.
struct Globals {
    seed: u64,
    quiet: bool,
    out: Option<PathBuf>,
}

fn print_summary(value: Value) {
    println!("{value}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // clap renders usage errors itself: exit 2, or 0 for --help/--version
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = FileConfig::load(cli.config.as_deref())?;
    let globals = Globals {
        seed: cli.seed.or(cfg.u64("seed")?).unwrap_or(0),
        quiet: cli.quiet || cfg.bool("quiet")?.unwrap_or(false),
        out: cli.out.or(cfg.path("out")?),
    };
    match cli.command {
        Command::Mix(args) => mix(args, &globals, &cfg),
        Command::Eval(args) => eval_cmd(args, &globals, &cfg),
        Command::Tune(args) => tune(args, &globals, &cfg),
        Command::Toyrun(args) => toyrun(args, &globals, &cfg),
        Command::Gradcheck(args) => gradcheck(args, &globals, &cfg),
        Command::Orthostat(args) => orthostat(args, &globals, &cfg),
    }
}

fn mix(args: MixArgs, globals: &Globals, cfg: &FileConfig) -> Result<ExitCode> {
    let manifest = require(args.manifest.or(cfg.path("manifest")?), "manifest")?;
    let snr = require(args.snr.or(cfg.parsed("snr")?), "snr")?;
    let oracle = require(args.oracle.or(cfg.parsed("oracle")?), "oracle")?;
    let out = require(globals.out.clone(), "out")?;

    let mut dataset_cfg = DatasetConfig::new(snr, oracle);
    if let Some(rate) = args.sample_rate.or(cfg.u64("sample-rate")?.map(|v| v as u32)) {
        dataset_cfg.sample_rate = rate;
    }
    let summary = build_dataset(&manifest, &dataset_cfg, &out)?;
    if !globals.quiet {
        eprintln!(
            "built {} trials under {} at snr {}",
            summary.trials, summary.out_dir, summary.snr_db
        );
    }
    let mut line = serde_json::to_value(&summary).map_err(|e| Error::Report(e.to_string()))?;
    line["command"] = json!("mix");
    line["seed"] = json!(globals.seed);
    print_summary(line);
    Ok(ExitCode::SUCCESS)
}

fn eval_cmd(args: EvalArgs, globals: &Globals, cfg: &FileConfig) -> Result<ExitCode> {
    let dataset = require(args.dataset.or(cfg.path("dataset")?), "dataset")?;
    let estimates = require(args.estimates.or(cfg.path("estimates")?), "estimates")?;
    let out = require(globals.out.clone(), "out")?;
    let format = report_format_for(&out)?;

    let trials = load_dataset(&dataset)?;
    let trial_estimates = load_estimates(&estimates, &trials)?;
    let report_cfg = ReportConfig {
        dataset: Some(dataset.display().to_string()),
        estimates: Some(estimates.display().to_string()),
        ..ReportConfig::default()
    };
    let report = evaluate_dataset(&trials, &trial_estimates, report_cfg)?;
    if !globals.quiet {
        for row in &report.per_trial {
            let mean = row.per_source_si_sdr_db.iter().sum::<f64>()
                / row.per_source_si_sdr_db.len() as f64;
            eprintln!("{}: mean speech si-sdr {mean:.2} dB", row.trial_id);
        }
    }
    write_report(&report, &out, format)?;
    print_summary(json!({
        "command": "eval",
        "trials": report.aggregates.trials,
        "speech_si_sdr_db": report.aggregates.speech_si_sdr_db,
        "noise_si_sdri_db": report.aggregates.noise_si_sdri_db,
        "out": out.display().to_string(),
    }));
    Ok(ExitCode::SUCCESS)
}

fn report_format_for(path: &Path) -> Result<ReportFormat> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => Ok(ReportFormat::Csv),
        Some("jsonl" | "json-lines") => Ok(ReportFormat::JsonLines),
        _ => Err(Error::Argument(format!(
            "cannot infer report format from {:?} (use .csv, .jsonl, or .json-lines)",
            path.display()
        ))),
    }
}

fn tune(args: TuneArgs, globals: &Globals, cfg: &FileConfig) -> Result<ExitCode> {
    let dataset = require(args.dataset.or(cfg.path("dataset")?), "dataset")?;
    let mut sweep_cfg = SweepConfig::default();
    if let Some(v) = args.threshold.or(cfg.f64("threshold")?) {
        sweep_cfg.threshold = v;
    }
    if let Some(v) = args.step.or(cfg.f64("step")?) {
        sweep_cfg.step = v;
    }
    if let Some(v) = args.max_lambda.or(cfg.f64("max-lambda")?) {
        sweep_cfg.max_lambda = v;
    }
    let steps = args.steps.or(cfg.usize("steps")?);
    let step_size = args.step_size.or(cfg.f64("step-size")?);

    let trials = load_dataset(&dataset)?;
    if trials.is_empty() {
        return Err(Error::Argument(format!("{}: dataset has no trials", dataset.display())));
    }

    // proxy: mean SI-SDR of trained toy estimates against the dataset's own
    // oracles; a sweep point whose training diverges scores at the floor
    // rather than aborting the whole sweep
    let proxy = LossConfig::si_sdr();
    let record = run_sweep(&sweep_cfg, |lambda| {
        let mut total = 0.0;
        for trial in &trials {
            let mut run_cfg = ToyRunConfig::new(LossConfig::esser(lambda)?);
            run_cfg.seed = globals.seed;
            run_cfg.snr = trial.snr();
            run_cfg.oracle_mode = trial.oracle_mode();
            if let Some(steps) = steps {
                run_cfg.steps = steps;
            }
            if let Some(h) = step_size {
                run_cfg.step_size = h;
            }
            let outcome = match optimize(trial, &run_cfg) {
                Ok(outcome) => outcome,
                Err(Error::Diverged { .. }) => {
                    total += -proxy.cap_db() * trials.len() as f64;
                    break;
                }
                Err(e) => return Err(e),
            };
            let scored = pit_apply(trial.speech_oracles(), &outcome.estimates, None, &proxy)?;
            total += scored.mean_value;
        }
        let score = total / trials.len() as f64;
        if !globals.quiet {
            eprintln!("lambda {lambda:.2}: proxy {score:.3} dB");
        }
        Ok(score)
    })?;

    let mut line = serde_json::to_value(&record).map_err(|e| Error::Report(e.to_string()))?;
    line["command"] = json!("tune");
    line["trials"] = json!(trials.len());
    line["seed"] = json!(globals.seed);
    if let Some(out) = &globals.out {
        let text = serde_json::to_string(&record).map_err(|e| Error::Report(e.to_string()))?;
        fs::write(out, text + "\n").map_err(|e| Error::Io { path: out.clone(), source: e })?;
        line["out"] = json!(out.display().to_string());
    }
    print_summary(line);
    Ok(ExitCode::SUCCESS)
}

fn toyrun(args: ToyrunArgs, globals: &Globals, cfg: &FileConfig) -> Result<ExitCode> {
    let scenario = require(args.scenario.or(cfg.parsed("scenario")?), "scenario")?;
    let snr = require(args.snr.or(cfg.parsed("snr")?), "snr")?;
    let family: LossFamily = require(args.loss.or(cfg.parsed("loss")?), "loss")?;
    let lambda = args.lambda.or(cfg.f64("lambda")?);
    let loss = loss_config(family, lambda)?;

    let mut run_cfg = ToyRunConfig::new(loss);
    run_cfg.seed = globals.seed;
    run_cfg.snr = snr;
    if let Some(steps) = args.steps.or(cfg.usize("steps")?) {
        run_cfg.steps = steps;
    }
    if let Some(h) = args.step_size.or(cfg.f64("step-size")?) {
        run_cfg.step_size = h;
    }

    let trial = synth_scenario(
        globals.seed,
        DEFAULT_SAMPLES,
        snr,
        scenario,
        run_cfg.oracle_mode,
    )?;
    let outcome = optimize(&trial, &run_cfg)?;
    let row = eval::eval_separation(&trial, &outcome.estimates)?;
    let noise_si_sdri_db = eval::eval_noise_estimate(&trial, &outcome.noise_estimate)?;
    let final_loss = *outcome.loss_trace.last().expect("at least one step");
    if !globals.quiet {
        eprintln!(
            "{} steps: loss {:.4} -> {final_loss:.4}",
            outcome.loss_trace.len(),
            outcome.loss_trace[0]
        );
    }

    if let Some(out) = &globals.out {
        let mut text = String::new();
        let mut header =
            serde_json::to_value(&run_cfg).map_err(|e| Error::Report(e.to_string()))?;
        header["kind"] = json!("config");
        header["scenario"] = json!(scenario.to_string());
        text.push_str(&header.to_string());
        text.push('\n');
        for (step, loss) in outcome.loss_trace.iter().enumerate() {
            text.push_str(&json!({"kind": "step", "step": step, "loss": loss}).to_string());
            text.push('\n');
        }
        let result = json!({
            "kind": "result",
            "final_loss": final_loss,
            "per_source_si_sdr_db": row.per_source_si_sdr_db,
            "noise_si_sdri_db": noise_si_sdri_db,
        });
        text.push_str(&result.to_string());
        text.push('\n');
        fs::write(out, text).map_err(|e| Error::Io { path: out.clone(), source: e })?;
    }

    let mean_clean =
        row.per_source_si_sdr_db.iter().sum::<f64>() / row.per_source_si_sdr_db.len() as f64;
    let mut line = json!({
        "command": "toyrun",
        "scenario": scenario.to_string(),
        "snr": snr.to_string(),
        "loss": family.to_string(),
        "steps": run_cfg.steps,
        "seed": globals.seed,
        "final_loss": final_loss,
        "mean_clean_si_sdr_db": mean_clean,
        "noise_si_sdri_db": noise_si_sdri_db,
    });
    if family == LossFamily::Esser {
        line["lambda"] = json!(loss.lambda);
    }
    if let Some(out) = &globals.out {
        line["out"] = json!(out.display().to_string());
    }
    print_summary(line);
    Ok(ExitCode::SUCCESS)
}

fn loss_config(family: LossFamily, lambda: Option<f64>) -> Result<LossConfig> {
    match family {
        LossFamily::SiSdr => Ok(LossConfig::si_sdr()),
        LossFamily::SdrNoisy => Ok(LossConfig::sdr_noisy()),
        LossFamily::Esser => {
            let lambda =
                lambda.ok_or_else(|| Error::Argument("--loss esser requires --lambda".into()))?;
            LossConfig::esser(lambda)
        }
    }
}

fn gradcheck(args: GradcheckArgs, globals: &Globals, cfg: &FileConfig) -> Result<ExitCode> {
    let family: LossFamily = require(args.loss.or(cfg.parsed("loss")?), "loss")?;
    let loss = loss_config(family, args.lambda.or(cfg.f64("lambda")?))?;
    let trials = args.trials.or(cfg.usize("trials")?).unwrap_or(100);
    let t = args.t.or(cfg.usize("t")?).unwrap_or(64);
    let h = args.h.or(cfg.f64("h")?).unwrap_or(1e-6);

    let report = run_check(&loss, globals.seed, trials, t, h)?;
    let pass = report.max_rel_err < GRADCHECK_TOLERANCE;
    let mut line = serde_json::to_value(&report).map_err(|e| Error::Report(e.to_string()))?;
    line["command"] = json!("gradcheck");
    line["seed"] = json!(globals.seed);
    line["tolerance"] = json!(GRADCHECK_TOLERANCE);
    line["pass"] = json!(pass);
    print_summary(line);
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn orthostat(args: OrthostatArgs, globals: &Globals, cfg: &FileConfig) -> Result<ExitCode> {
    let corpus = require(args.corpus.or(cfg.path("corpus")?), "corpus")?;
    let mut names = Vec::new();
    let entries = fs::read_dir(&corpus)
        .map_err(|e| Error::Io { path: corpus.clone(), source: e })?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::Io { path: corpus.clone(), source: e })?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) == Some("wav") {
            names.push(path);
        }
    }
    names.sort();
    if names.len() < 2 {
        return Err(Error::Argument(format!(
            "{}: need at least two wav files, found {}",
            corpus.display(),
            names.len()
        )));
    }
    let waveforms: Vec<Waveform> =
        names.iter().map(|p| read_wav(p)).collect::<Result<_>>()?;
    let truncated = mixer::min_truncate(&waveforms)?;
    let t = truncated[0].len();
    let pairs = pairwise_correlations(&truncated)?;

    let mut mean_abs = 0.0;
    let mut max_abs = 0.0f64;
    for &(i, j, corr) in &pairs {
        if !globals.quiet {
            eprintln!(
                "{} vs {}: {corr:+.6}",
                names[i].file_name().unwrap_or_default().to_string_lossy(),
                names[j].file_name().unwrap_or_default().to_string_lossy(),
            );
        }
        mean_abs += corr.abs();
        max_abs = max_abs.max(corr.abs());
    }
    mean_abs /= pairs.len() as f64;

    print_summary(json!({
        "command": "orthostat",
        "files": names.len(),
        "pairs": pairs.len(),
        "samples": t,
        "mean_abs_correlation": mean_abs,
        "max_abs_correlation": max_abs,
        "iid_bound": 3.0 / (t as f64).sqrt(),
    }));
    Ok(ExitCode::SUCCESS)
}

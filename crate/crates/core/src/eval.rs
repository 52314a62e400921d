//! Clean-reference evaluation and report plumbing.
//!
//! Speech estimates are scored by raw SI-SDR against the clean references
//! under the best permutation; across dataset conditions the clean speech
//! is identical, so raw values compare directly. Noise estimates are scored
//! as SI-SDR improvement over the unprocessed mixture, with the summed
//! noise as reference. Reports serialize to line-delimited JSON (the
//! authoritative, fully round-trippable form) and to CSV (a tabular
//! rendering of the per-source rows).
//!
//! Floor-capped scores stay in the aggregates but carry a cap flag; silent
//! exclusion or infinities would both distort means.

use crate::error::{Error, Result};
use crate::loss::{si_sdr, si_sdr_breakdown, CapState, LossConfig, DEFAULT_EPSILON};
use crate::mixer::Trial;
use crate::parallel;
use crate::pit::{pit_apply, PitResult};
use crate::signal::{energy, Waveform};
use crate::wav::read_wav;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::fs;
use std::path::Path;

/// One trial's scores: permutation maps estimate index to reference index,
/// values and cap flags are indexed by reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialEval {
    pub trial_id: String,
    pub permutation: Vec<usize>,
    pub per_source_si_sdr_db: Vec<f64>,
    pub caps: Vec<CapState>,
    pub noise_si_sdri_db: Option<f64>,
}

/// Summary statistics for one metric. `std` is the sample standard
/// deviation (n − 1 denominator) and is absent below two values; all three
/// are absent for an empty metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub count: usize,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub std: Option<f64>,
}

impl MetricSummary {
    fn from_values(mut values: Vec<f64>) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { count: 0, mean: None, median: None, std: None };
        }
        values.sort_by(f64::total_cmp);
        let mean = values.iter().sum::<f64>() / n as f64;
        let median = if n % 2 == 1 {
            values[n / 2]
        } else {
            (values[n / 2 - 1] + values[n / 2]) / 2.0
        };
        let std = (n >= 2).then(|| {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        });
        Self { count: n, mean: Some(mean), median: Some(median), std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub trials: usize,
    /// Over every (trial, source) pair.
    pub speech_si_sdr_db: MetricSummary,
    /// Over trials that produced a noise score.
    pub noise_si_sdri_db: MetricSummary,
}

/// Provenance echoed into the report so a file is self-describing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub epsilon: f64,
    #[serde(default)]
    pub dataset: Option<String>,
    #[serde(default)]
    pub estimates: Option<String>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self { epsilon: DEFAULT_EPSILON, dataset: None, estimates: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: ReportConfig,
    pub per_trial: Vec<TrialEval>,
    pub aggregates: Aggregates,
}

/// One trial's system outputs: K speech estimates, optionally a noise
/// estimate.
#[derive(Debug, Clone)]
pub struct TrialEstimates {
    pub trial_id: String,
    pub sources: Vec<Waveform>,
    pub noise: Option<Waveform>,
}

/// Score K speech estimates against a trial's clean references.
///
/// The permutation maximizes mean SI-SDR, with the same enumeration and
/// tie-break as training-time permutation search. Unlike the raw loss, a
/// zero-energy estimate is not an error here: its row lands on the floor
/// value with a `Min` cap flag, so dead outputs stay visible in reports.
pub fn eval_separation(trial: &Trial, estimates: &[Waveform]) -> Result<TrialEval> {
    let cfg = LossConfig::si_sdr();
    let refs = trial.clean_refs();
    let k = refs.len();
    if estimates.len() != k {
        return Err(Error::Argument(format!("{k} references but {} estimates", estimates.len())));
    }
    if k > crate::pit::MAX_SOURCES {
        return Err(Error::Capacity { max: crate::pit::MAX_SOURCES, got: k });
    }
    for est in estimates {
        crate::signal::check_pair(&refs[0], est)?;
    }

    let floor = (-cfg.cap_db(), CapState::Min);
    let mut score = vec![vec![0.0f64; k]; k];
    let mut cap_matrix = vec![vec![CapState::None; k]; k];
    for (i, est) in estimates.iter().enumerate() {
        let silent = energy(est) <= 0.0;
        for (j, reference) in refs.iter().enumerate() {
            let (value, cap) = if silent {
                floor
            } else {
                let b = si_sdr_breakdown(reference, est, cfg.epsilon)?;
                (b.value, b.cap)
            };
            score[i][j] = value;
            cap_matrix[i][j] = cap;
        }
    }

    let (permutation, per_source_si_sdr_db, _mean) = crate::pit::best_assignment(&score);
    let mut caps = vec![CapState::None; k];
    for (est, &r) in permutation.iter().enumerate() {
        caps[r] = cap_matrix[est][r];
    }
    Ok(TrialEval {
        trial_id: trial.trial_id().to_string(),
        permutation,
        per_source_si_sdr_db,
        caps,
        noise_si_sdri_db: None,
    })
}

/// SI-SDR improvement of a noise estimate over the unprocessed mixture:
/// si_sdr(Σ nₖ, n̂) − si_sdr(Σ nₖ, x). Returns `None` when the trial has no
/// noise to reference (clean datasets).
pub fn eval_noise_estimate(trial: &Trial, n_hat: &Waveform) -> Result<Option<f64>> {
    let summed = trial.summed_noise();
    if energy(&summed) <= 0.0 {
        return Ok(None);
    }
    let value = si_sdr(&summed, n_hat)?;
    let baseline = si_sdr(&summed, trial.mixture())?;
    Ok(Some(value - baseline))
}

/// Permutation-invariant SI-SDR improvement against an arbitrary reference
/// set (e.g. the noises of a pure-noise trial). Returns the raw-value PIT
/// result and, per reference slot, the improvement over scoring the
/// mixture itself.
pub fn si_sdri_vs_references(
    references: &[Waveform],
    estimates: &[Waveform],
    mixture: &Waveform,
) -> Result<(PitResult, Vec<f64>)> {
    let cfg = LossConfig::si_sdr();
    let pit = pit_apply(references, estimates, None, &cfg)?;
    let improvements = references
        .iter()
        .zip(&pit.per_source_values)
        .map(|(r, &v)| Ok(v - si_sdr(r, mixture)?))
        .collect::<Result<Vec<_>>>()?;
    Ok((pit, improvements))
}

/// Score one trial's speech estimates and, if present, its noise estimate.
pub fn evaluate_trial(trial: &Trial, estimates: &TrialEstimates) -> Result<TrialEval> {
    if estimates.trial_id != trial.trial_id() {
        return Err(Error::Report(format!(
            "estimates for {:?} paired with trial {:?}",
            estimates.trial_id,
            trial.trial_id()
        )));
    }
    let mut row = eval_separation(trial, &estimates.sources)?;
    if let Some(n_hat) = &estimates.noise {
        row.noise_si_sdri_db = eval_noise_estimate(trial, n_hat)?;
    }
    Ok(row)
}

/// Recompute summary statistics from per-trial rows.
pub fn aggregate(rows: &[TrialEval]) -> Aggregates {
    let speech: Vec<f64> = rows.iter().flat_map(|r| r.per_source_si_sdr_db.clone()).collect();
    let noise: Vec<f64> = rows.iter().filter_map(|r| r.noise_si_sdri_db).collect();
    Aggregates {
        trials: rows.len(),
        speech_si_sdr_db: MetricSummary::from_values(speech),
        noise_si_sdri_db: MetricSummary::from_values(noise),
    }
}

/// Evaluate a whole dataset. Trials and estimates are matched by trial id;
/// every trial must have estimates. Rows come back ordered by trial id.
pub fn evaluate_dataset(
    trials: &[Trial],
    estimates: &[TrialEstimates],
    config: ReportConfig,
) -> Result<EvalReport> {
    let pairs: Vec<(&Trial, &TrialEstimates)> = trials
        .iter()
        .map(|t| {
            estimates
                .iter()
                .find(|e| e.trial_id == t.trial_id())
                .map(|e| (t, e))
                .ok_or_else(|| {
                    Error::Report(format!("no estimates for trial {:?}", t.trial_id()))
                })
        })
        .collect::<Result<_>>()?;
    let mut per_trial = parallel::map(&pairs, |(t, e)| evaluate_trial(t, e))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    per_trial.sort_by(|a, b| a.trial_id.cmp(&b.trial_id));
    let aggregates = aggregate(&per_trial);
    Ok(EvalReport { config, per_trial, aggregates })
}

/// Load system outputs laid out as `dir/<trial_id>/est_<i>.wav` with an
/// optional `dir/<trial_id>/noise.wav`, one directory per trial.
pub fn load_estimates(dir: &Path, trials: &[Trial]) -> Result<Vec<TrialEstimates>> {
    trials
        .iter()
        .map(|trial| {
            let sub = dir.join(trial.trial_id());
            let k = trial.speaker_count();
            let sources = (0..k)
                .map(|i| {
                    let path = sub.join(format!("est_{i}.wav"));
                    let w = read_wav(&path)?;
                    if w.sample_rate() != trial.sample_rate() {
                        return Err(Error::SampleRateMismatch {
                            path,
                            got: w.sample_rate(),
                            expected: trial.sample_rate(),
                        });
                    }
                    Ok(w)
                })
                .collect::<Result<Vec<_>>>()?;
            if sub.join(format!("est_{k}.wav")).exists() {
                return Err(Error::Report(format!(
                    "trial {:?} has more estimate files than sources (expected {k})",
                    trial.trial_id()
                )));
            }
            let noise_path = sub.join("noise.wav");
            let noise = if noise_path.exists() { Some(read_wav(&noise_path)?) } else { None };
            Ok(TrialEstimates { trial_id: trial.trial_id().to_string(), sources, noise })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    JsonLines,
    Csv,
}

fn tagged_line(kind: &str, value: impl Serialize) -> Result<String> {
    let value = serde_json::to_value(value).map_err(|e| Error::Report(e.to_string()))?;
    let Value::Object(mut map) = value else {
        return Err(Error::Report("report record did not serialize to an object".into()));
    };
    map.insert("kind".into(), Value::String(kind.into()));
    serde_json::to_string(&Value::Object(map)).map_err(|e| Error::Report(e.to_string()))
}

fn write_jsonl(report: &EvalReport, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&tagged_line("config", &report.config)?);
    out.push('\n');
    for row in &report.per_trial {
        out.push_str(&tagged_line("trial", row)?);
        out.push('\n');
    }
    out.push_str(&tagged_line("aggregates", &report.aggregates)?);
    out.push('\n');
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn read_jsonl(path: &Path) -> Result<EvalReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut config: Option<ReportConfig> = None;
    let mut per_trial = Vec::new();
    let mut aggregates: Option<Aggregates> = None;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |e: String| Error::Report(format!("{}:{}: {e}", path.display(), lineno + 1));
        let mut value: Value = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        let kind = value
            .as_object_mut()
            .and_then(|m| m.remove("kind"))
            .and_then(|k| k.as_str().map(String::from))
            .ok_or_else(|| bad("missing kind tag".into()))?;
        match kind.as_str() {
            "config" => config = Some(serde_json::from_value(value).map_err(|e| bad(e.to_string()))?),
            "trial" => {
                per_trial.push(serde_json::from_value(value).map_err(|e| bad(e.to_string()))?)
            }
            "aggregates" => {
                aggregates = Some(serde_json::from_value(value).map_err(|e| bad(e.to_string()))?)
            }
            other => return Err(bad(format!("unknown record kind {other:?}"))),
        }
    }
    Ok(EvalReport {
        config: config.ok_or_else(|| Error::Report("report missing config record".into()))?,
        per_trial,
        aggregates: aggregates
            .ok_or_else(|| Error::Report("report missing aggregates record".into()))?,
    })
}

const CSV_HEADER: [&str; 6] =
    ["trial_id", "source", "estimate", "si_sdr_db", "cap", "noise_si_sdri_db"];

fn cap_to_str(cap: CapState) -> &'static str {
    match cap {
        CapState::None => "none",
        CapState::Max => "max",
        CapState::Min => "min",
    }
}

fn cap_from_str(s: &str) -> Result<CapState> {
    match s {
        "none" => Ok(CapState::None),
        "max" => Ok(CapState::Max),
        "min" => Ok(CapState::Min),
        other => Err(Error::Report(format!("unknown cap flag {other:?}"))),
    }
}

/// Rust's float Display prints the shortest string that parses back to the
/// same value, so these cells are lossless.
fn write_csv(report: &EvalReport, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let io_err = |e: csv::Error| Error::Report(format!("{}: {e}", path.display()));
    w.write_record(CSV_HEADER).map_err(io_err)?;
    for row in &report.per_trial {
        let mut assigned = vec![0usize; row.permutation.len()];
        for (est, &r) in row.permutation.iter().enumerate() {
            assigned[r] = est;
        }
        for (j, &value) in row.per_source_si_sdr_db.iter().enumerate() {
            let noise = row.noise_si_sdri_db.map(|v| v.to_string()).unwrap_or_default();
            w.write_record([
                row.trial_id.as_str(),
                &j.to_string(),
                &assigned[j].to_string(),
                &value.to_string(),
                cap_to_str(row.caps[j]),
                &noise,
            ])
            .map_err(io_err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Rebuild rows from the CSV rendering. The CSV carries no config record,
/// so the config comes back as defaults; aggregates are recomputed.
fn read_csv(path: &Path) -> Result<EvalReport> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let bad = |e: String| Error::Report(format!("{}: {e}", path.display()));
    let mut rows: Vec<TrialEval> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        if record.len() != CSV_HEADER.len() {
            return Err(bad(format!("expected {} columns, got {}", CSV_HEADER.len(), record.len())));
        }
        let trial_id = record[0].to_string();
        let source: usize = record[1].parse().map_err(|_| bad("bad source index".into()))?;
        let estimate: usize = record[2].parse().map_err(|_| bad("bad estimate index".into()))?;
        let value: f64 = record[3].parse().map_err(|_| bad("bad si_sdr value".into()))?;
        let cap = cap_from_str(&record[4])?;
        let noise = if record[5].is_empty() {
            None
        } else {
            Some(record[5].parse().map_err(|_| bad("bad noise value".into()))?)
        };
        if rows.last().map(|r: &TrialEval| r.trial_id != trial_id).unwrap_or(true) {
            rows.push(TrialEval {
                trial_id,
                permutation: Vec::new(),
                per_source_si_sdr_db: Vec::new(),
                caps: Vec::new(),
                noise_si_sdri_db: noise,
            });
        }
        let row = rows.last_mut().expect("just pushed");
        if source != row.per_source_si_sdr_db.len() {
            return Err(bad(format!("source indices out of order in trial {}", row.trial_id)));
        }
        row.per_source_si_sdr_db.push(value);
        row.caps.push(cap);
        row.permutation.push(estimate);
    }
    for row in &mut rows {
        // stored per-source as assigned estimate; invert back to est → ref
        let mut perm = vec![0usize; row.permutation.len()];
        for (r, &est) in row.permutation.iter().enumerate() {
            if est >= perm.len() {
                return Err(bad(format!("estimate index {est} out of range")));
            }
            perm[est] = r;
        }
        row.permutation = perm;
    }
    let aggregates = aggregate(&rows);
    Ok(EvalReport { config: ReportConfig::default(), per_trial: rows, aggregates })
}

pub fn write_report(report: &EvalReport, path: &Path, format: ReportFormat) -> Result<()> {
    match format {
        ReportFormat::JsonLines => write_jsonl(report, path),
        ReportFormat::Csv => write_csv(report, path),
    }
}

pub fn read_report(path: &Path, format: ReportFormat) -> Result<EvalReport> {
    match format {
        ReportFormat::JsonLines => read_jsonl(path),
        ReportFormat::Csv => read_csv(path),
    }
}

//! Synthetic noisy-mixture fabrication.
//!
//! Each trial pairs K clean sources with K noises, scales every noise to a
//! per-source target SNR, truncates everything to the shortest member, and
//! assembles the mixture plus training oracles:
//!
//! * noisy-oracle mode: oracles are s_clean_k + n_k — the realistic regime
//!   where per-speaker targets carry their own noise,
//! * clean-oracle mode: oracles are the clean sources plus one summed-noise
//!   waveform — the idealized regime.
//!
//! The mixture is accumulated pairwise in ascending source order, so the
//! same members always yield a bit-identical mixture no matter the oracle
//! mode, and in noisy-oracle mode the oracles sum back to the mixture bit
//! for bit.
//!
//! Two special SNR settings replace the finite target: `clean` zeroes the
//! noises (upper-bound datasets), `pure-noise` zeroes the speech and
//! unit-scales the noises (noise-only separation studies). Pure-noise
//! trials pair naturally with noisy-oracle mode, where the oracles are the
//! noises themselves.

use crate::error::{Error, Result};
use crate::parallel;
use crate::signal::{ComponentSet, Waveform};
use crate::wav::{read_wav, write_wav, SampleFormat};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

/// Which ground-truth regime the dataset's oracles follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    CleanOracle,
    NoisyOracle,
}

impl fmt::Display for OracleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OracleMode::CleanOracle => "clean_oracle",
            OracleMode::NoisyOracle => "noisy_oracle",
        })
    }
}

impl std::str::FromStr for OracleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clean" | "clean_oracle" | "clean-oracle" => Ok(OracleMode::CleanOracle),
            "noisy" | "noisy_oracle" | "noisy-oracle" => Ok(OracleMode::NoisyOracle),
            other => Err(Error::Argument(format!(
                "unknown oracle mode {other:?} (expected clean or noisy)"
            ))),
        }
    }
}

/// Target per-source SNR, or one of the two special dataset conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SnrSpecRepr", into = "SnrSpecRepr")]
pub enum SnrSpec {
    /// Scale each noise so 10·log₁₀(‖s_k‖²/‖g·n_k‖²) equals this value.
    Db(f64),
    /// Noises replaced by silence.
    Clean,
    /// Speech replaced by silence; noises normalized to unit energy.
    PureNoise,
}

/// Wire form: a bare number or one of the two keywords.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SnrSpecRepr {
    Num(f64),
    Text(String),
}

impl From<SnrSpec> for SnrSpecRepr {
    fn from(value: SnrSpec) -> Self {
        match value {
            SnrSpec::Db(db) => SnrSpecRepr::Num(db),
            SnrSpec::Clean => SnrSpecRepr::Text("clean".into()),
            SnrSpec::PureNoise => SnrSpecRepr::Text("pure-noise".into()),
        }
    }
}

impl TryFrom<SnrSpecRepr> for SnrSpec {
    type Error = String;

    fn try_from(value: SnrSpecRepr) -> std::result::Result<Self, String> {
        match value {
            SnrSpecRepr::Num(db) if db.is_finite() => Ok(SnrSpec::Db(db)),
            SnrSpecRepr::Num(db) => Err(format!("non-finite snr {db}")),
            SnrSpecRepr::Text(s) => s.parse().map_err(|e: Error| e.to_string()),
        }
    }
}

impl fmt::Display for SnrSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SnrSpec::Db(db) => write!(f, "{db}"),
            SnrSpec::Clean => f.write_str("clean"),
            SnrSpec::PureNoise => f.write_str("pure-noise"),
        }
    }
}

impl std::str::FromStr for SnrSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clean" => Ok(SnrSpec::Clean),
            "pure-noise" | "pure_noise" => Ok(SnrSpec::PureNoise),
            other => match other.parse::<f64>() {
                Ok(db) if db.is_finite() => Ok(SnrSpec::Db(db)),
                _ => Err(Error::Argument(format!(
                    "snr must be a finite dB value, \"clean\", or \"pure-noise\"; got {other:?}"
                ))),
            },
        }
    }
}

/// Length policy when members disagree; only the shortest-member rule
/// exists, named so manifests are self-describing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    Min,
}

/// How one dataset is built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub snr: SnrSpec,
    pub oracle_mode: OracleMode,
    /// Expected rate of all input audio; file loading rejects others.
    #[serde(default = "default_sample_rate")]
    pub sample_rate: u32,
    #[serde(default = "default_truncation")]
    pub truncation: Truncation,
}

fn default_sample_rate() -> u32 {
    16_000
}

fn default_truncation() -> Truncation {
    Truncation::Min
}

impl DatasetConfig {
    pub fn new(snr: SnrSpec, oracle_mode: OracleMode) -> Self {
        Self { snr, oracle_mode, sample_rate: default_sample_rate(), truncation: Truncation::Min }
    }
}

/// One evaluation/training unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    trial_id: String,
    mixture: Waveform,
    oracles: Vec<Waveform>,
    clean_refs: Vec<Waveform>,
    noises: Vec<Waveform>,
    snr: SnrSpec,
    oracle_mode: OracleMode,
}

impl Trial {
    /// Assemble a trial from already-built members, checking shape
    /// consistency (K ≥ 1, uniform length/rate, oracle count matching the
    /// mode). Exact summation identities are guaranteed by [`build_trial`],
    /// not re-checked here, so trials reloaded from quantized files pass.
    pub fn from_parts(
        trial_id: impl Into<String>,
        mixture: Waveform,
        oracles: Vec<Waveform>,
        clean_refs: Vec<Waveform>,
        noises: Vec<Waveform>,
        snr: SnrSpec,
        oracle_mode: OracleMode,
    ) -> Result<Self> {
        let k = clean_refs.len();
        if k == 0 {
            return Err(Error::Construction("trial needs at least one source".into()));
        }
        if noises.len() != k {
            return Err(Error::Construction(format!(
                "trial has {k} clean references but {} noises",
                noises.len()
            )));
        }
        let expected_oracles = match oracle_mode {
            OracleMode::NoisyOracle => k,
            OracleMode::CleanOracle => k + 1,
        };
        if oracles.len() != expected_oracles {
            return Err(Error::Construction(format!(
                "{oracle_mode} trial with K={k} needs {expected_oracles} oracles, got {}",
                oracles.len()
            )));
        }
        for w in oracles.iter().chain(&clean_refs).chain(&noises) {
            crate::signal::check_pair(&mixture, w).map_err(|_| {
                Error::Construction("trial members must share length and sample rate".into())
            })?;
        }
        Ok(Self {
            trial_id: trial_id.into(),
            mixture,
            oracles,
            clean_refs,
            noises,
            snr,
            oracle_mode,
        })
    }

    pub fn trial_id(&self) -> &str {
        &self.trial_id
    }

    pub fn mixture(&self) -> &Waveform {
        &self.mixture
    }

    /// All oracles: K speech targets, plus the summed-noise target in
    /// clean-oracle mode.
    pub fn oracles(&self) -> &[Waveform] {
        &self.oracles
    }

    /// The K per-speaker training targets.
    pub fn speech_oracles(&self) -> &[Waveform] {
        &self.oracles[..self.speaker_count()]
    }

    /// The summed-noise oracle (clean-oracle mode only).
    pub fn noise_oracle(&self) -> Option<&Waveform> {
        match self.oracle_mode {
            OracleMode::CleanOracle => self.oracles.last(),
            OracleMode::NoisyOracle => None,
        }
    }

    pub fn clean_refs(&self) -> &[Waveform] {
        &self.clean_refs
    }

    pub fn noises(&self) -> &[Waveform] {
        &self.noises
    }

    pub fn snr(&self) -> SnrSpec {
        self.snr
    }

    pub fn oracle_mode(&self) -> OracleMode {
        self.oracle_mode
    }

    pub fn speaker_count(&self) -> usize {
        self.clean_refs.len()
    }

    pub fn len_samples(&self) -> usize {
        self.mixture.len()
    }

    pub fn sample_rate(&self) -> u32 {
        self.mixture.sample_rate()
    }

    /// Σ_k n_k in ascending order; the noise-estimation target.
    pub fn summed_noise(&self) -> Waveform {
        let mut acc = vec![0.0f64; self.len_samples()];
        for n in &self.noises {
            for (slot, v) in acc.iter_mut().zip(n.samples()) {
                *slot += v;
            }
        }
        Waveform::new(acc, self.sample_rate()).expect("sum of valid members")
    }
}

/// Scale `noise` so that 10·log₁₀(‖source‖²/‖g·noise‖²) == snr_db, i.e.
/// g = sqrt(‖source‖² / (‖noise‖² · 10^(snr_db/10))).
pub fn scale_noise_to_snr(source: &Waveform, noise: &Waveform, snr_db: f64) -> Result<Waveform> {
    if !snr_db.is_finite() {
        return Err(Error::Domain(format!("snr target must be finite, got {snr_db}")));
    }
    let es = crate::signal::energy(source);
    let en = crate::signal::energy(noise);
    if es <= 0.0 {
        return Err(Error::ZeroEnergy("snr scaling source"));
    }
    if en <= 0.0 {
        return Err(Error::ZeroEnergy("snr scaling noise"));
    }
    let gain = (es / (en * 10f64.powf(snr_db / 10.0))).sqrt();
    noise.scaled(gain)
}

/// Truncate every signal to the shortest one's length, from sample 0.
pub fn min_truncate(signals: &[Waveform]) -> Result<Vec<Waveform>> {
    let min_len = signals
        .iter()
        .map(Waveform::len)
        .min()
        .ok_or_else(|| Error::Argument("min_truncate needs at least one signal".into()))?;
    signals.iter().map(|w| w.truncated(min_len)).collect()
}

/// Build one trial: truncate, apply the SNR rule, assemble mixture and
/// oracles. See the module docs for the special `clean` and `pure-noise`
/// conditions.
pub fn build_trial(
    trial_id: impl Into<String>,
    clean_sources: Vec<Waveform>,
    noises: Vec<Waveform>,
    cfg: &DatasetConfig,
) -> Result<Trial> {
    let k = clean_sources.len();
    if k == 0 {
        return Err(Error::Construction("trial needs at least one source".into()));
    }
    if noises.len() != k {
        return Err(Error::Construction(format!(
            "{k} clean sources but {} noises",
            noises.len()
        )));
    }
    let mut all = clean_sources;
    all.extend(noises);
    let all = min_truncate(&all)?;
    let (cleans, noises) = all.split_at(k);
    let t = cleans[0].len();
    let rate = cleans[0].sample_rate();

    let (cleans, noises): (Vec<Waveform>, Vec<Waveform>) = match cfg.snr {
        SnrSpec::Db(snr) => {
            let scaled: Vec<Waveform> = cleans
                .iter()
                .zip(noises)
                .map(|(s, n)| scale_noise_to_snr(s, n, snr))
                .collect::<Result<_>>()?;
            (cleans.to_vec(), scaled)
        }
        SnrSpec::Clean => {
            let silent = vec![Waveform::zeros(t, rate)?; k];
            (cleans.to_vec(), silent)
        }
        SnrSpec::PureNoise => {
            let silent = vec![Waveform::zeros(t, rate)?; k];
            let unit: Vec<Waveform> = noises
                .iter()
                .map(|n| {
                    let e = crate::signal::energy(n);
                    if e <= 0.0 {
                        return Err(Error::ZeroEnergy("pure-noise trial noise"));
                    }
                    n.scaled(1.0 / e.sqrt())
                })
                .collect::<Result<_>>()?;
            (silent, unit)
        }
    };

    let set = ComponentSet::new(cleans, noises)?;
    let mixture = set.mixture();
    let oracles = match cfg.oracle_mode {
        OracleMode::NoisyOracle => set
            .clean_sources()
            .iter()
            .zip(set.noises())
            .map(|(s, n)| {
                let sum: Vec<f64> =
                    s.samples().iter().zip(n.samples()).map(|(a, b)| a + b).collect();
                Waveform::new(sum, rate)
            })
            .collect::<Result<Vec<_>>>()?,
        OracleMode::CleanOracle => {
            let mut oracles = set.clean_sources().to_vec();
            let mut acc = vec![0.0f64; t];
            for n in set.noises() {
                for (slot, v) in acc.iter_mut().zip(n.samples()) {
                    *slot += v;
                }
            }
            oracles.push(Waveform::new(acc, rate)?);
            oracles
        }
    };

    Trial::from_parts(
        trial_id,
        mixture,
        oracles,
        set.clean_sources().to_vec(),
        set.noises().to_vec(),
        cfg.snr,
        cfg.oracle_mode,
    )
}

/// One line of the input manifest: where to find a trial's raw audio.
/// Paths are resolved relative to the manifest file's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputTrial {
    pub trial_id: String,
    pub clean: Vec<String>,
    pub noises: Vec<String>,
}

/// A written file plus its content digest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

/// One line of the output manifest: everything needed to reload and verify
/// a built trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: String,
    pub snr_db: SnrSpec,
    pub oracle_mode: OracleMode,
    pub sample_rate: u32,
    pub mixture: FileRecord,
    pub oracles: Vec<FileRecord>,
    pub clean_refs: Vec<FileRecord>,
    pub noises: Vec<FileRecord>,
}

/// What [`build_dataset`] hands back.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub trials: usize,
    pub out_dir: String,
    pub manifest_path: String,
    pub manifest_sha256: String,
    pub snr_db: SnrSpec,
    pub oracle_mode: OracleMode,
    pub sample_rate: u32,
    pub truncation: Truncation,
}

pub const DATASET_MANIFEST: &str = "manifest.jsonl";

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn valid_trial_id(id: &str) -> bool {
    !id.is_empty()
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        && !id.starts_with('.')
}

/// Read and parse the line-delimited input manifest.
pub fn read_input_manifest(path: &Path) -> Result<Vec<InputTrial>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: InputTrial = serde_json::from_str(line).map_err(|e| {
            Error::Manifest(format!("{}:{}: {e}", path.display(), lineno + 1))
        })?;
        entries.push(entry);
    }
    Ok(entries)
}

fn load_audio(path: &Path, expected_rate: u32) -> Result<Waveform> {
    let w = read_wav(path)?;
    if w.sample_rate() != expected_rate {
        return Err(Error::SampleRateMismatch {
            path: path.to_path_buf(),
            got: w.sample_rate(),
            expected: expected_rate,
        });
    }
    Ok(w)
}

fn write_trial_files(trial: &Trial, out_dir: &Path) -> Result<TrialRecord> {
    let trial_dir = out_dir.join(trial.trial_id());
    fs::create_dir_all(&trial_dir).map_err(|e| Error::io(&trial_dir, e))?;

    let write_one = |name: String, w: &Waveform| -> Result<FileRecord> {
        let rel = format!("{}/{}", trial.trial_id(), name);
        let abs = trial_dir.join(&name);
        write_wav(&abs, w, SampleFormat::Float32)?;
        let bytes = fs::read(&abs).map_err(|e| Error::io(&abs, e))?;
        Ok(FileRecord { path: rel, sha256: hex_digest(&bytes) })
    };

    let mixture = write_one("mixture.wav".into(), trial.mixture())?;
    let oracles = trial
        .oracles()
        .iter()
        .enumerate()
        .map(|(i, w)| write_one(format!("oracle_{i}.wav"), w))
        .collect::<Result<Vec<_>>>()?;
    let clean_refs = trial
        .clean_refs()
        .iter()
        .enumerate()
        .map(|(i, w)| write_one(format!("clean_{i}.wav"), w))
        .collect::<Result<Vec<_>>>()?;
    let noises = trial
        .noises()
        .iter()
        .enumerate()
        .map(|(i, w)| write_one(format!("noise_{i}.wav"), w))
        .collect::<Result<Vec<_>>>()?;

    Ok(TrialRecord {
        trial_id: trial.trial_id().to_string(),
        snr_db: trial.snr(),
        oracle_mode: trial.oracle_mode(),
        sample_rate: trial.sample_rate(),
        mixture,
        oracles,
        clean_refs,
        noises,
    })
}

/// Build every trial listed in `manifest_in` and write the dataset under
/// `out_dir`: one directory per trial plus a line-delimited manifest with
/// per-file digests. Trials build in parallel; the manifest is written
/// once, ordered by trial id. Any failing trial fails the whole build.
pub fn build_dataset(
    manifest_in: &Path,
    cfg: &DatasetConfig,
    out_dir: &Path,
) -> Result<DatasetSummary> {
    let entries = read_input_manifest(manifest_in)?;
    if entries.is_empty() {
        return Err(Error::Manifest(format!("{}: no trials listed", manifest_in.display())));
    }
    let mut seen = HashSet::new();
    for e in &entries {
        if !valid_trial_id(&e.trial_id) {
            return Err(Error::Manifest(format!(
                "invalid trial id {:?} (letters, digits, '-', '_', '.' only)",
                e.trial_id
            )));
        }
        if !seen.insert(e.trial_id.as_str()) {
            return Err(Error::Manifest(format!("duplicate trial id {:?}", e.trial_id)));
        }
    }
    let base = manifest_in.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let built: Vec<(String, Result<TrialRecord>)> = parallel::map(&entries, |entry| {
        let record = (|| -> Result<TrialRecord> {
            let load =
                |rel: &String| load_audio(&base.join(rel), cfg.sample_rate);
            let cleans = entry.clean.iter().map(load).collect::<Result<Vec<_>>>()?;
            let noises = entry.noises.iter().map(load).collect::<Result<Vec<_>>>()?;
            let trial = build_trial(entry.trial_id.clone(), cleans, noises, cfg)?;
            write_trial_files(&trial, out_dir)
        })();
        (entry.trial_id.clone(), record)
    });

    let total = built.len();
    let mut records = Vec::with_capacity(total);
    let mut failures: Vec<(String, String)> = Vec::new();
    for (trial_id, outcome) in built {
        match outcome {
            Ok(r) => records.push(r),
            Err(e) => failures.push((trial_id, e.to_string())),
        }
    }
    if let Some((trial_id, reason)) = failures.first() {
        return Err(Error::DatasetBuild {
            failed: failures.len(),
            total,
            trial_id: trial_id.clone(),
            reason: reason.clone(),
        });
    }

    records.sort_by(|a, b| a.trial_id.cmp(&b.trial_id));
    let mut manifest = String::new();
    for r in &records {
        manifest.push_str(&serde_json::to_string(r).map_err(|e| {
            Error::Manifest(format!("serializing record {}: {e}", r.trial_id))
        })?);
        manifest.push('\n');
    }
    let manifest_path = out_dir.join(DATASET_MANIFEST);
    fs::write(&manifest_path, manifest.as_bytes()).map_err(|e| Error::io(&manifest_path, e))?;

    Ok(DatasetSummary {
        trials: records.len(),
        out_dir: out_dir.display().to_string(),
        manifest_path: manifest_path.display().to_string(),
        manifest_sha256: hex_digest(manifest.as_bytes()),
        snr_db: cfg.snr,
        oracle_mode: cfg.oracle_mode,
        sample_rate: cfg.sample_rate,
        truncation: cfg.truncation,
    })
}

/// Parse a built dataset's manifest.
pub fn read_dataset_manifest(dataset_dir: &Path) -> Result<Vec<TrialRecord>> {
    let path = dataset_dir.join(DATASET_MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: TrialRecord = serde_json::from_str(line).map_err(|e| {
            Error::Manifest(format!("{}:{}: {e}", path.display(), lineno + 1))
        })?;
        records.push(record);
    }
    Ok(records)
}

fn load_verified(dataset_dir: &Path, file: &FileRecord, expected_rate: u32) -> Result<Waveform> {
    let abs = dataset_dir.join(&file.path);
    let bytes = fs::read(&abs).map_err(|e| Error::io(&abs, e))?;
    let digest = hex_digest(&bytes);
    if digest != file.sha256 {
        return Err(Error::Manifest(format!(
            "digest mismatch for {}: manifest says {}, file is {digest}",
            file.path, file.sha256
        )));
    }
    load_audio(&abs, expected_rate)
}

/// Reload one manifest record's audio, verifying digests.
pub fn load_trial(dataset_dir: &Path, record: &TrialRecord) -> Result<Trial> {
    let rate = record.sample_rate;
    let mixture = load_verified(dataset_dir, &record.mixture, rate)?;
    let oracles = record
        .oracles
        .iter()
        .map(|f| load_verified(dataset_dir, f, rate))
        .collect::<Result<Vec<_>>>()?;
    let clean_refs = record
        .clean_refs
        .iter()
        .map(|f| load_verified(dataset_dir, f, rate))
        .collect::<Result<Vec<_>>>()?;
    let noises = record
        .noises
        .iter()
        .map(|f| load_verified(dataset_dir, f, rate))
        .collect::<Result<Vec<_>>>()?;
    Trial::from_parts(
        record.trial_id.clone(),
        mixture,
        oracles,
        clean_refs,
        noises,
        record.snr_db,
        record.oracle_mode,
    )
}

/// Reload a whole dataset in manifest order.
pub fn load_dataset(dataset_dir: &Path) -> Result<Vec<Trial>> {
    let records = read_dataset_manifest(dataset_dir)?;
    let loaded = parallel::map(&records, |r| load_trial(dataset_dir, r));
    loaded.into_iter().collect()
}

use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty waveform: every operation requires at least one sample")]
    EmptyWaveform,
    #[error("waveform contains a non-finite sample at index {0}")]
    NonFiniteSample(usize),
    #[error("operand mismatch: lengths {left_len} vs {right_len}, rates {left_rate} vs {right_rate} Hz")]
    OperandMismatch {
        left_len: usize,
        right_len: usize,
        left_rate: u32,
        right_rate: u32,
    },
    #[error("degenerate projection: the vector projected onto has zero energy")]
    DegenerateProjection,
    #[error("zero-energy operand where nonzero energy is required: {0}")]
    ZeroEnergy(&'static str),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("fixture construction infeasible: {0}")]
    Construction(String),
    #[error("invalid loss configuration: {0}")]
    Config(String),
    #[error("permutation enumeration capped at K = {max}, got K = {got}")]
    Capacity { max: usize, got: usize },
    #[error("gradient undefined: denominator hit the floor (perturb the inputs or reduce lambda)")]
    GradientUndefined,
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("wav format error in {path}: {reason}")]
    WavFormat { path: PathBuf, reason: String },
    #[error("sample rate mismatch in {path}: got {got} Hz, expected {expected} Hz")]
    SampleRateMismatch {
        path: PathBuf,
        got: u32,
        expected: u32,
    },
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("dataset build failed for {failed} of {total} trials; first failure ({trial_id}): {reason}")]
    DatasetBuild {
        failed: usize,
        total: usize,
        trial_id: String,
        reason: String,
    },
    #[error("lambda sweep aborted at lambda = {lambda} after {} completed points: {reason}", .completed.len())]
    SweepAborted {
        lambda: f64,
        reason: String,
        /// (λ, proxy score) pairs finished before the abort.
        completed: Vec<(f64, f64)>,
    },
    #[error("optimization diverged at step {step}: loss became non-finite")]
    Diverged { step: usize, trace: Vec<f64> },
    #[error("report error: {0}")]
    Report(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

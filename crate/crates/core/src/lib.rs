//! Numerical toolkit for training and evaluating single-channel speech
//! separation on mixtures of noisy sources.
//!
//! The crate provides, in rough dependency order:
//!
//! - [`signal`]: waveform vector math (inner products, projections, dB
//!   ratios) and exactly-orthogonal test fixtures,
//! - [`loss`]: the SDR / SI-SDR / ESSER objectives with analytic gradients
//!   and the mixture-projection scaling rule,
//! - [`pit`]: utterance-level permutation-invariant wrapping of any loss,
//! - [`mixer`]: synthetic noisy-mixture construction at exact per-source
//!   SNR, with WAV and manifest I/O,
//! - [`eval`]: clean-reference SI-SDR evaluation and report serialization,
//! - [`tuner`]: the lambda validation sweep with its early-stop rule,
//! - [`toyopt`]: a desk-scale mask-based separator optimized directly
//!   against the losses, used to demonstrate paradigm gaps end to end,
//! - [`gradcheck`]: finite-difference verification of every analytic
//!   gradient.
//!
//! All loss and metric math runs in `f64` regardless of on-disk sample
//! format. Batch entry points parallelize over independent units (trials,
//! cases, seeds) when the `parallel` feature is enabled (default); results
//! are bit-identical to the sequential fallback.

pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod loss;
pub mod mixer;
pub(crate) mod parallel;
pub mod pit;
pub mod rng;
pub mod signal;
pub mod tuner;
pub mod toyopt;
pub mod wav;

pub use error::{Error, Result};
pub use loss::{LossBreakdown, LossConfig, LossFamily};
pub use mixer::{DatasetConfig, OracleMode, SnrSpec, Trial};
pub use pit::PitResult;
pub use signal::{ComponentSet, Waveform};

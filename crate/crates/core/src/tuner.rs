//! λ selection by validation sweep.
//!
//! The discount weight is swept upward from 0 in steps of 0.1 while a
//! caller-supplied train-and-validate callback reports a proxy score
//! (noisy-oracle validation SI-SDR, in dB) per λ. The sweep stops at the
//! first score drop exceeding the threshold and selects the λ just before
//! it; if no drop fires, the last grid point wins.
//!
//! "Drop" is measured against the immediately preceding λ's score by
//! default. Measuring against the λ = 0 score instead is exposed as
//! [`DropBaseline::LambdaZero`], since either reading of a sequential
//! sweep is defensible and the selection is known to be sensitive.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub const DEFAULT_THRESHOLD: f64 = 0.667;
pub const DEFAULT_MAX_LAMBDA: f64 = 1.0;
pub const DEFAULT_STEP: f64 = 0.1;

/// How a sweep ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ThresholdDrop,
    SweepExhausted,
}

/// What a score is compared against when testing for a drop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropBaseline {
    /// The previous grid point's score.
    #[default]
    Previous,
    /// The score at λ = 0.
    LambdaZero,
}

/// Full trace of one sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    /// Ascending grid, starting at 0.
    pub lambda_values: Vec<f64>,
    /// Proxy score per grid point, same order.
    pub proxy_scores: Vec<f64>,
    pub selected_lambda: f64,
    pub stop_reason: StopReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub threshold: f64,
    pub max_lambda: f64,
    pub step: f64,
    #[serde(default)]
    pub baseline: DropBaseline,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            max_lambda: DEFAULT_MAX_LAMBDA,
            step: DEFAULT_STEP,
            baseline: DropBaseline::Previous,
        }
    }
}

impl SweepConfig {
    fn validate(&self) -> Result<()> {
        if !self.threshold.is_finite() || self.threshold < 0.0 {
            return Err(Error::Config(format!(
                "sweep threshold must be finite and nonnegative, got {}",
                self.threshold
            )));
        }
        if !self.step.is_finite() || self.step <= 0.0 {
            return Err(Error::Config(format!(
                "sweep step must be finite and positive, got {}",
                self.step
            )));
        }
        if !self.max_lambda.is_finite() || self.max_lambda < 0.0 {
            return Err(Error::Config(format!(
                "sweep max lambda must be finite and nonnegative, got {}",
                self.max_lambda
            )));
        }
        if self.max_lambda / self.step > 10_000.0 {
            return Err(Error::Config(format!(
                "sweep grid of {} points is unreasonably large",
                (self.max_lambda / self.step) as u64
            )));
        }
        Ok(())
    }
}

fn validate_scores(scores: &[f64]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::Argument("score list is empty".into()));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::Argument(format!("non-finite proxy score {bad}")));
    }
    Ok(())
}

/// Scan scores in grid order against `baseline`; at the first drop
/// exceeding `threshold`, return the index just before it. No drop returns
/// the last index with [`StopReason::SweepExhausted`].
pub fn select_lambda_against(
    scores: &[f64],
    threshold: f64,
    baseline: DropBaseline,
) -> Result<(usize, StopReason)> {
    validate_scores(scores)?;
    if !threshold.is_finite() || threshold < 0.0 {
        return Err(Error::Argument(format!(
            "threshold must be finite and nonnegative, got {threshold}"
        )));
    }
    for i in 0..scores.len() - 1 {
        let base = match baseline {
            DropBaseline::Previous => scores[i],
            DropBaseline::LambdaZero => scores[0],
        };
        if scores[i + 1] < base - threshold {
            return Ok((i, StopReason::ThresholdDrop));
        }
    }
    Ok((scores.len() - 1, StopReason::SweepExhausted))
}

/// The default previous-score rule.
pub fn select_lambda(scores: &[f64], threshold: f64) -> Result<(usize, StopReason)> {
    select_lambda_against(scores, threshold, DropBaseline::Previous)
}

/// Sweep λ over the grid, calling `train_and_validate` per point and
/// stopping lazily: once a drop fires, no further grid point is evaluated.
/// A callback error or non-finite score aborts the sweep, carrying the
/// grid points completed so far.
pub fn run_sweep(
    cfg: &SweepConfig,
    mut train_and_validate: impl FnMut(f64) -> Result<f64>,
) -> Result<SweepRecord> {
    cfg.validate()?;
    let mut lambda_values: Vec<f64> = Vec::new();
    let mut proxy_scores: Vec<f64> = Vec::new();
    let mut stop_reason = StopReason::SweepExhausted;
    let selected;

    let mut i = 0usize;
    loop {
        let lambda = i as f64 * cfg.step;
        if lambda > cfg.max_lambda + 1e-12 {
            selected = lambda_values.len() - 1;
            break;
        }
        let completed = || lambda_values.iter().copied().zip(proxy_scores.iter().copied()).collect();
        let score = train_and_validate(lambda).map_err(|e| Error::SweepAborted {
            lambda,
            reason: e.to_string(),
            completed: completed(),
        })?;
        if !score.is_finite() {
            return Err(Error::SweepAborted {
                lambda,
                reason: format!("callback returned non-finite proxy score {score}"),
                completed: completed(),
            });
        }
        lambda_values.push(lambda);
        proxy_scores.push(score);

        let n = proxy_scores.len();
        if n >= 2 {
            let base = match cfg.baseline {
                DropBaseline::Previous => proxy_scores[n - 2],
                DropBaseline::LambdaZero => proxy_scores[0],
            };
            if proxy_scores[n - 1] < base - cfg.threshold {
                selected = n - 2;
                stop_reason = StopReason::ThresholdDrop;
                break;
            }
        }
        i += 1;
    }

    debug_assert_eq!(
        select_lambda_against(&proxy_scores, cfg.threshold, cfg.baseline)?,
        (selected, stop_reason),
        "incremental detection must match the scan rule"
    );
    Ok(SweepRecord {
        selected_lambda: lambda_values[selected],
        lambda_values,
        proxy_scores,
        stop_reason,
    })
}

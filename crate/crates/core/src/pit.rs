//! Permutation-invariant loss application.
//!
//! A separator emits K source estimates in arbitrary order; the loss is
//! whatever the best assignment of estimates to references achieves. All K!
//! assignments are enumerated (K ≤ 4), the mean per-source value decides,
//! and ties go to the lexicographically-first permutation so results are
//! reproducible. The noise estimate, when present, is a single shared
//! estimate of the summed noise and is never permuted.

use crate::error::{Error, Result};
use crate::loss::{
    esser_grad, evaluate_family, sdr_noisy_grad, si_sdr_grad, LossConfig, LossFamily,
};
use crate::signal::{check_pair, Waveform};
use serde::{Deserialize, Serialize};

/// Largest supported source count for factorial enumeration.
pub const MAX_SOURCES: usize = 4;

/// Outcome of one permutation-invariant evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitResult {
    /// `best_permutation[i]` is the reference index served by estimate `i`.
    pub best_permutation: Vec<usize>,
    /// Loss values under the best permutation, indexed by reference.
    pub per_source_values: Vec<f64>,
    /// Arithmetic mean of `per_source_values`.
    pub mean_value: f64,
}

/// Gradients of [`PitResult::mean_value`] under the fixed best permutation.
#[derive(Debug, Clone)]
pub struct PitGradients {
    /// One gradient per estimate, in estimate order.
    pub estimate_grads: Vec<Waveform>,
    /// Present only for the ESSER family.
    pub noise_grad: Option<Waveform>,
}

/// All permutations of 0..k in lexicographic order.
fn lex_permutations(k: usize) -> Vec<Vec<usize>> {
    fn extend(k: usize, cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for j in 0..k {
            if !used[j] {
                used[j] = true;
                cur.push(j);
                extend(k, cur, used, out);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut out = Vec::new();
    extend(k, &mut Vec::with_capacity(k), &mut vec![false; k], &mut out);
    out
}

fn validate_inputs(
    references: &[Waveform],
    estimates: &[Waveform],
    noise_estimate: Option<&Waveform>,
    cfg: &LossConfig,
) -> Result<()> {
    let k = references.len();
    if k == 0 {
        return Err(Error::Argument("permutation search needs at least one reference".into()));
    }
    if k > MAX_SOURCES {
        return Err(Error::Capacity { max: MAX_SOURCES, got: k });
    }
    if estimates.len() != k {
        return Err(Error::Argument(format!(
            "{} references but {} estimates",
            k,
            estimates.len()
        )));
    }
    for w in references.iter().chain(estimates.iter()).chain(noise_estimate) {
        check_pair(&references[0], w)?;
    }
    if cfg.family == LossFamily::Esser && noise_estimate.is_none() {
        return Err(Error::Config("the esser family needs a noise estimate".into()));
    }
    Ok(())
}

/// Per-source values for one permutation, reference-indexed.
fn assemble(permutation: &[usize], score: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let k = permutation.len();
    let mut inverse = vec![0usize; k];
    for (est, &reference) in permutation.iter().enumerate() {
        inverse[reference] = est;
    }
    let values: Vec<f64> = (0..k).map(|j| score[inverse[j]][j]).collect();
    let mean = values.iter().sum::<f64>() / k as f64;
    (values, mean)
}

/// Best-assignment search over a prebuilt value matrix indexed
/// `score[estimate][reference]`. Higher mean wins; an exact tie keeps the
/// lexicographically-first permutation. Returns (permutation, values by
/// reference, mean).
pub(crate) fn best_assignment(score: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>, f64) {
    let k = score.len();
    let mut best: Option<(Vec<usize>, Vec<f64>, f64)> = None;
    for permutation in lex_permutations(k) {
        let (values, mean) = assemble(&permutation, score);
        let better = match &best {
            None => true,
            Some((_, _, best_mean)) => mean > *best_mean,
        };
        if better {
            best = Some((permutation, values, mean));
        }
    }
    best.expect("k ≥ 1")
}

/// Evaluate the configured loss under the best of all K! assignments.
///
/// `noise_estimate` participates in every ESSER term unpermuted and is
/// ignored by the other families.
pub fn pit_apply(
    references: &[Waveform],
    estimates: &[Waveform],
    noise_estimate: Option<&Waveform>,
    cfg: &LossConfig,
) -> Result<PitResult> {
    search(references, estimates, noise_estimate, cfg)
}

fn search(
    references: &[Waveform],
    estimates: &[Waveform],
    noise_estimate: Option<&Waveform>,
    cfg: &LossConfig,
) -> Result<PitResult> {
    validate_inputs(references, estimates, noise_estimate, cfg)?;
    let k = references.len();

    let mut score = Vec::with_capacity(k);
    for est in estimates {
        let mut row = Vec::with_capacity(k);
        for reference in references {
            row.push(evaluate_family(reference, est, noise_estimate, cfg)?.value);
        }
        score.push(row);
    }

    let (best_permutation, per_source_values, mean_value) = best_assignment(&score);
    Ok(PitResult { best_permutation, per_source_values, mean_value })
}

/// Gradients of the mean loss through the fixed best permutation, plus the
/// result itself.
///
/// Standard straight-through convention: the permutation chosen by
/// [`pit_apply`] is held constant and the mean of the per-source losses is
/// differentiated. At an exact permutation tie the lexicographically-first
/// permutation's gradient is returned.
pub fn pit_grad(
    references: &[Waveform],
    estimates: &[Waveform],
    noise_estimate: Option<&Waveform>,
    cfg: &LossConfig,
) -> Result<(PitResult, PitGradients)> {
    let result = search(references, estimates, noise_estimate, cfg)?;
    let k = references.len();
    let weight = 1.0 / k as f64;

    let mut estimate_grads = Vec::with_capacity(k);
    let mut noise_acc: Option<Vec<f64>> = None;
    for (i, est) in estimates.iter().enumerate() {
        let reference = &references[result.best_permutation[i]];
        let grad = match cfg.family {
            LossFamily::SdrNoisy => sdr_noisy_grad(reference, est, cfg.epsilon)?,
            LossFamily::SiSdr => si_sdr_grad(reference, est, cfg.epsilon)?,
            LossFamily::Esser => {
                let n_hat = noise_estimate.expect("validated");
                let (gs, gn) = esser_grad(est, n_hat, reference, cfg)?;
                let acc = noise_acc.get_or_insert_with(|| vec![0.0; n_hat.len()]);
                for (slot, g) in acc.iter_mut().zip(gn.samples()) {
                    *slot += weight * g;
                }
                gs
            }
        };
        estimate_grads.push(grad.scaled(weight)?);
    }
    let noise_grad = match noise_acc {
        Some(acc) => Some(noise_estimate.expect("validated").with_samples(acc)?),
        None => None,
    };
    Ok((result, PitGradients { estimate_grads, noise_grad }))
}

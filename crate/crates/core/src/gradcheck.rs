//! Finite-difference verification of the analytic gradients.
//!
//! The oracle is the two-sided difference (f(x+h·eᵢ) − f(x−h·eᵢ))/(2h) per
//! coordinate. Agreement is scored as the worst absolute deviation relative
//! to the larger of the two gradients' ∞-norms, which stays meaningful when
//! individual components pass through zero.

use crate::error::Result;
use crate::loss::{
    esser, esser_grad, sdr_noisy_breakdown, sdr_noisy_grad, si_sdr_breakdown, si_sdr_grad,
    LossConfig, LossFamily,
};
use crate::parallel;
use crate::rng::seeded_rng;
use crate::signal::Waveform;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Central finite-difference gradient of `f` at `x`.
pub fn central_difference<F>(x: &[f64], h: f64, mut f: F) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let plus = f(&probe);
        probe[i] = orig - h;
        let minus = f(&probe);
        probe[i] = orig;
        grad.push((plus - minus) / (2.0 * h));
    }
    grad
}

/// max_i |a_i − b_i| / max(‖a‖_∞, ‖b‖_∞), with a tiny absolute guard so two
/// all-zero gradients compare equal.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = analytic
        .iter()
        .chain(numeric)
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    analytic
        .iter()
        .zip(numeric)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs() / scale))
}

/// Outcome of a batch gradient check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub family: LossFamily,
    pub lambda: f64,
    pub trials: usize,
    pub waveform_len: usize,
    pub step: f64,
    /// Worst per-trial relative error across the whole batch.
    pub max_rel_err: f64,
    /// Trial index attaining `max_rel_err`.
    pub worst_trial: usize,
}

fn random_wf(seed: u64, label: &str, t: usize) -> Waveform {
    let mut rng = seeded_rng(seed, label);
    let samples: Vec<f64> = (0..t).map(|_| rng.sample(StandardNormal)).collect();
    Waveform::new(samples, 16_000).expect("finite gaussian draw")
}

fn check_one(cfg: &LossConfig, seed: u64, trial: usize, t: usize, h: f64) -> Result<f64> {
    match cfg.family {
        LossFamily::SiSdr => {
            let r = random_wf(seed, &format!("gradcheck-{trial}-ref"), t);
            let e = random_wf(seed, &format!("gradcheck-{trial}-est"), t);
            let g = si_sdr_grad(&r, &e, cfg.epsilon)?;
            let fd = central_difference(e.samples(), h, |v| {
                si_sdr_breakdown(&r, &e.with_samples(v.to_vec()).unwrap(), cfg.epsilon)
                    .unwrap()
                    .value
            });
            Ok(max_relative_error(g.samples(), &fd))
        }
        LossFamily::SdrNoisy => {
            let r = random_wf(seed, &format!("gradcheck-{trial}-ref"), t);
            let e = random_wf(seed, &format!("gradcheck-{trial}-est"), t);
            let g = sdr_noisy_grad(&r, &e, cfg.epsilon)?;
            let fd = central_difference(e.samples(), h, |v| {
                sdr_noisy_breakdown(&r, &e.with_samples(v.to_vec()).unwrap(), cfg.epsilon)
                    .unwrap()
                    .value
            });
            Ok(max_relative_error(g.samples(), &fd))
        }
        LossFamily::Esser => {
            let s_noisy = random_wf(seed, &format!("gradcheck-{trial}-mix"), t);
            let s_hat = random_wf(seed, &format!("gradcheck-{trial}-src"), t);
            let n_hat = random_wf(seed, &format!("gradcheck-{trial}-noise"), t);
            let (gs, gn) = esser_grad(&s_hat, &n_hat, &s_noisy, cfg)?;
            let fd_s = central_difference(s_hat.samples(), h, |v| {
                esser(&s_hat.with_samples(v.to_vec()).unwrap(), &n_hat, &s_noisy, cfg)
                    .unwrap()
                    .value
            });
            let fd_n = central_difference(n_hat.samples(), h, |v| {
                esser(&s_hat, &n_hat.with_samples(v.to_vec()).unwrap(), &s_noisy, cfg)
                    .unwrap()
                    .value
            });
            Ok(max_relative_error(gs.samples(), &fd_s)
                .max(max_relative_error(gn.samples(), &fd_n)))
        }
    }
}

/// Check `trials` independent random cases of length `t` with step `h`,
/// returning the worst relative error seen.
///
/// Cases are generated from (seed, trial index) so the batch is
/// reproducible and order-independent; trials run in parallel when the
/// `parallel` feature is on.
pub fn run_check(cfg: &LossConfig, seed: u64, trials: usize, t: usize, h: f64) -> Result<GradCheckReport> {
    let errs = parallel::map_indices(trials, |trial| check_one(cfg, seed, trial, t, h));
    let mut max_rel_err = 0.0f64;
    let mut worst_trial = 0usize;
    for (trial, e) in errs.into_iter().enumerate() {
        let e = e?;
        if e > max_rel_err {
            max_rel_err = e;
            worst_trial = trial;
        }
    }
    Ok(GradCheckReport {
        family: cfg.family,
        lambda: cfg.lambda,
        trials,
        waveform_len: t,
        step: h,
        max_rel_err,
        worst_trial,
    })
}

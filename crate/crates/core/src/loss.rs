//! Separation objectives and their analytic gradients.
//!
//! Three loss families, all expressed in dB and meant to be maximized
//! (training code negates them):
//!
//! * `sdr_noisy` — plain SDR against a noisy ground truth,
//!   10·log₁₀(‖s‖²/‖s−ŝ‖²).
//! * `si_sdr` — scale-invariant SDR: the estimate is compared against the
//!   best scaling α·r of the reference.
//! * `esser` — SDR against a noisy ground truth with three modifications:
//!   the component of the error explainable by the noise estimate is
//!   discounted (weighted by λ), the component of the noise estimate lying
//!   along the source estimate is penalized, and the numerator uses the
//!   estimate's own energy.
//!
//! Denominators are floored at `epsilon` times the numerator energy, so the
//! value is capped at 10·log₁₀(1/ε) dB (120 dB at the default ε = 1e-12)
//! no matter the signal scale. A capped value is flagged in the breakdown.
//!
//! `esser` expects its estimates already scaled; apply [`mixture_scale`]
//! first when the producing model does not fix the output scale itself.

use crate::error::{Error, Result};
use crate::signal::{check_pair, db_ratio, dot_slices, energy_slice, project, Waveform};
use serde::{Deserialize, Serialize};

/// 10/ln 10, the slope of 10·log₁₀.
const DB_SCALE: f64 = 10.0 / std::f64::consts::LN_10;

/// Default relative denominator floor; caps losses at 120 dB.
pub const DEFAULT_EPSILON: f64 = 1e-12;

/// Loss value cap in dB implied by a relative floor: 10·log₁₀(1/ε).
pub fn cap_db(epsilon: f64) -> f64 {
    10.0 * (1.0 / epsilon).log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossFamily {
    SdrNoisy,
    SiSdr,
    Esser,
}

impl std::fmt::Display for LossFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LossFamily::SdrNoisy => "sdr_noisy",
            LossFamily::SiSdr => "si_sdr",
            LossFamily::Esser => "esser",
        })
    }
}

impl std::str::FromStr for LossFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sdr_noisy" | "sdr-noisy" | "sdrnoisy" => Ok(LossFamily::SdrNoisy),
            "si_sdr" | "si-sdr" | "sisdr" => Ok(LossFamily::SiSdr),
            "esser" => Ok(LossFamily::Esser),
            other => Err(Error::Argument(format!(
                "unknown loss family {other:?} (expected sdr_noisy, si_sdr, or esser)"
            ))),
        }
    }
}

/// Loss family plus its two numeric knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub family: LossFamily,
    /// Noise-discount weight λ. Only read by the ESSER family.
    pub lambda: f64,
    /// Relative denominator floor; the effective floor for one evaluation is
    /// `epsilon` times that evaluation's numerator energy.
    pub epsilon: f64,
}

impl LossConfig {
    pub fn new(family: LossFamily, lambda: f64, epsilon: f64) -> Result<Self> {
        if !lambda.is_finite() || !(0.0..=2.0).contains(&lambda) {
            return Err(Error::Config(format!("lambda must lie in [0, 2], got {lambda}")));
        }
        if !epsilon.is_finite() || epsilon <= 0.0 {
            return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(Self { family, lambda, epsilon })
    }

    pub fn esser(lambda: f64) -> Result<Self> {
        Self::new(LossFamily::Esser, lambda, DEFAULT_EPSILON)
    }

    pub fn si_sdr() -> Self {
        Self { family: LossFamily::SiSdr, lambda: 0.0, epsilon: DEFAULT_EPSILON }
    }

    pub fn sdr_noisy() -> Self {
        Self { family: LossFamily::SdrNoisy, lambda: 0.0, epsilon: DEFAULT_EPSILON }
    }

    /// Largest value this configuration can emit.
    pub fn cap_db(&self) -> f64 {
        cap_db(self.epsilon)
    }
}

/// Whether a loss value hit the denominator floor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapState {
    /// Denominator above the floor; value is the true ratio.
    None,
    /// Denominator floored; value equals the +cap.
    Max,
    /// Numerator energy was exactly zero (orthogonal SI-SDR pair); value is
    /// pinned at −cap rather than −∞.
    Min,
}

/// One loss evaluation with the energies that produced it.
///
/// Outside the [`CapState::Min`] case, `value` equals
/// `db_ratio(numerator_energy, denominator_energy, floor_energy)` bit for
/// bit, so archived breakdowns can be re-verified from their parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// The loss in dB (larger is better).
    pub value: f64,
    pub numerator_energy: f64,
    /// ‖reference − estimate‖² before any discount (for SI-SDR, the
    /// residual against the scaled reference).
    pub residual_energy: f64,
    /// Energy removed from the error by the λ noise discount.
    pub discount_energy: f64,
    /// Energy added by the noise-on-source orthogonality penalty.
    pub ortho_penalty_energy: f64,
    /// ‖d‖² actually handed to the dB ratio (pre-floor).
    pub denominator_energy: f64,
    /// Effective absolute floor, `epsilon × numerator_energy`.
    pub floor_energy: f64,
    pub cap: CapState,
}

impl LossBreakdown {
    fn from_parts(
        numerator_energy: f64,
        residual_energy: f64,
        discount_energy: f64,
        ortho_penalty_energy: f64,
        denominator_energy: f64,
        epsilon: f64,
    ) -> Result<Self> {
        let floor_energy = epsilon * numerator_energy;
        let value = db_ratio(numerator_energy, denominator_energy, floor_energy)?;
        let cap = if denominator_energy < floor_energy { CapState::Max } else { CapState::None };
        Ok(Self {
            value,
            numerator_energy,
            residual_energy,
            discount_energy,
            ortho_penalty_energy,
            denominator_energy,
            floor_energy,
            cap,
        })
    }

    pub fn is_capped(&self) -> bool {
        self.cap != CapState::None
    }
}

/// SDR against a noisy ground truth at the default floor. See
/// [`sdr_noisy_breakdown`].
pub fn sdr_noisy(s_noisy: &Waveform, s_hat: &Waveform) -> Result<f64> {
    Ok(sdr_noisy_breakdown(s_noisy, s_hat, DEFAULT_EPSILON)?.value)
}

/// 10·log₁₀(‖s_noisy‖² / max(‖s_noisy − ŝ‖², ε·‖s_noisy‖²)).
pub fn sdr_noisy_breakdown(
    s_noisy: &Waveform,
    s_hat: &Waveform,
    epsilon: f64,
) -> Result<LossBreakdown> {
    check_pair(s_noisy, s_hat)?;
    let num = energy_slice(s_noisy.samples());
    if num <= 0.0 {
        return Err(Error::ZeroEnergy("sdr_noisy ground truth"));
    }
    let residual: f64 = s_noisy
        .samples()
        .iter()
        .zip(s_hat.samples())
        .map(|(s, e)| (s - e) * (s - e))
        .sum();
    LossBreakdown::from_parts(num, residual, 0.0, 0.0, residual, epsilon)
}

/// Gradient of [`sdr_noisy`] with respect to every sample of `s_hat`.
pub fn sdr_noisy_grad(s_noisy: &Waveform, s_hat: &Waveform, epsilon: f64) -> Result<Waveform> {
    check_pair(s_noisy, s_hat)?;
    let num = energy_slice(s_noisy.samples());
    if num <= 0.0 {
        return Err(Error::ZeroEnergy("sdr_noisy ground truth"));
    }
    let diff: Vec<f64> =
        s_noisy.samples().iter().zip(s_hat.samples()).map(|(s, e)| s - e).collect();
    let residual = energy_slice(&diff);
    if residual <= epsilon * num {
        return Err(Error::GradientUndefined);
    }
    let scale = 2.0 * DB_SCALE / residual;
    s_hat.with_samples(diff.iter().map(|d| scale * d).collect())
}

/// Scale-invariant SDR at the default floor. See [`si_sdr_breakdown`].
pub fn si_sdr(reference: &Waveform, estimate: &Waveform) -> Result<f64> {
    Ok(si_sdr_breakdown(reference, estimate, DEFAULT_EPSILON)?.value)
}

/// With α = ⟨estimate,reference⟩/‖reference‖²:
/// 10·log₁₀(‖α·reference‖² / max(‖α·reference − estimate‖², ε·‖α·reference‖²)).
///
/// Invariant to positive rescaling of `estimate`. An estimate exactly
/// orthogonal to the reference has α = 0 and no meaningful ratio; the value
/// is pinned at −cap and flagged [`CapState::Min`].
pub fn si_sdr_breakdown(
    reference: &Waveform,
    estimate: &Waveform,
    epsilon: f64,
) -> Result<LossBreakdown> {
    check_pair(reference, estimate)?;
    let ref_energy = energy_slice(reference.samples());
    if ref_energy <= 0.0 {
        return Err(Error::ZeroEnergy("si_sdr reference"));
    }
    if energy_slice(estimate.samples()) <= 0.0 {
        return Err(Error::ZeroEnergy("si_sdr estimate"));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    let alpha = dot_slices(estimate.samples(), reference.samples()) / ref_energy;
    let num = alpha * alpha * ref_energy;
    let residual: f64 = reference
        .samples()
        .iter()
        .zip(estimate.samples())
        .map(|(r, e)| {
            let d = alpha * r - e;
            d * d
        })
        .sum();
    if num == 0.0 {
        return Ok(LossBreakdown {
            value: -cap_db(epsilon),
            numerator_energy: 0.0,
            residual_energy: residual,
            discount_energy: 0.0,
            ortho_penalty_energy: 0.0,
            denominator_energy: residual,
            floor_energy: 0.0,
            cap: CapState::Min,
        });
    }
    LossBreakdown::from_parts(num, residual, 0.0, 0.0, residual, epsilon)
}

/// Gradient of [`si_sdr`] with respect to every sample of `estimate`.
///
/// Scale invariance makes the gradient orthogonal to the estimate itself:
/// ⟨grad, estimate⟩ = 0 analytically. Undefined (error) when the residual is
/// floored, including at the exact maximum estimate == α·reference.
pub fn si_sdr_grad(reference: &Waveform, estimate: &Waveform, epsilon: f64) -> Result<Waveform> {
    check_pair(reference, estimate)?;
    let ref_energy = energy_slice(reference.samples());
    if ref_energy <= 0.0 {
        return Err(Error::ZeroEnergy("si_sdr reference"));
    }
    if energy_slice(estimate.samples()) <= 0.0 {
        return Err(Error::ZeroEnergy("si_sdr estimate"));
    }
    let alpha = dot_slices(estimate.samples(), reference.samples()) / ref_energy;
    if alpha == 0.0 {
        return Err(Error::GradientUndefined);
    }
    let rho: Vec<f64> = reference
        .samples()
        .iter()
        .zip(estimate.samples())
        .map(|(r, e)| alpha * r - e)
        .collect();
    let residual = energy_slice(&rho);
    let num = alpha * alpha * ref_energy;
    if residual <= epsilon * num {
        return Err(Error::GradientUndefined);
    }
    // V = 10·log₁₀(α²R / ‖ρ‖²), ρ = αr − est. Using ⟨r,ρ⟩ = 0:
    // ∇V = (20/ln10)·(r/(αR) + ρ/‖ρ‖²).
    let ref_term = 1.0 / (alpha * ref_energy);
    let grad: Vec<f64> = reference
        .samples()
        .iter()
        .zip(&rho)
        .map(|(r, p)| 2.0 * DB_SCALE * (r * ref_term + p / residual))
        .collect();
    estimate.with_samples(grad)
}

/// Projection of the mixture onto the estimate, (⟨x,ŝ⟩/‖ŝ‖²)·ŝ.
///
/// Fixes the free output scale of a mask or network estimate before an
/// ESSER evaluation. When x = ŝ + e with e ⊥ ŝ this returns ŝ exactly; in
/// general it under-scales by ‖ŝ‖²/‖ŝ+e‖².
pub fn mixture_scale(x: &Waveform, estimate: &Waveform) -> Result<Waveform> {
    project(x, estimate)
}

/// Vector-Jacobian product of [`mixture_scale`] in its `estimate` argument:
/// the gradient of any scalar loss with respect to the raw estimate, given
/// the gradient `upstream` with respect to the scaled estimate.
pub fn mixture_scale_vjp(
    x: &Waveform,
    estimate: &Waveform,
    upstream: &Waveform,
) -> Result<Waveform> {
    check_pair(x, estimate)?;
    check_pair(x, upstream)?;
    let est_energy = energy_slice(estimate.samples());
    if est_energy <= 0.0 {
        return Err(Error::DegenerateProjection);
    }
    let coeff = dot_slices(x.samples(), estimate.samples()) / est_energy;
    let g_dot_est = dot_slices(upstream.samples(), estimate.samples());
    let grad: Vec<f64> = (0..x.len())
        .map(|i| {
            let xi = x.samples()[i];
            let si = estimate.samples()[i];
            let gi = upstream.samples()[i];
            coeff * gi + g_dot_est * (xi / est_energy - 2.0 * coeff * si / est_energy)
        })
        .collect();
    estimate.with_samples(grad)
}

struct EsserParts {
    error: Vec<f64>,
    error_energy: f64,
    s_energy: f64,
    noise_on_error: f64,
    noise_on_source: f64,
    u: f64,
    v: f64,
    d: Vec<f64>,
    d_energy: f64,
}

fn esser_parts(
    s_hat: &Waveform,
    n_hat: &Waveform,
    s_noisy: &Waveform,
    cfg: &LossConfig,
) -> Result<EsserParts> {
    check_pair(s_noisy, s_hat)?;
    check_pair(s_noisy, n_hat)?;
    let s_energy = energy_slice(s_hat.samples());
    if s_energy <= 0.0 {
        return Err(Error::ZeroEnergy("esser source estimate"));
    }
    let error: Vec<f64> =
        s_noisy.samples().iter().zip(s_hat.samples()).map(|(x, s)| x - s).collect();
    let error_energy = energy_slice(&error);
    let noise_on_error = dot_slices(n_hat.samples(), &error);
    let noise_on_source = dot_slices(n_hat.samples(), s_hat.samples());
    // e = 0 leaves nothing to discount; the projection limit is zero
    let u = if error_energy > 0.0 { cfg.lambda * noise_on_error / error_energy } else { 0.0 };
    let v = noise_on_source / s_energy;
    let d: Vec<f64> = error
        .iter()
        .zip(s_hat.samples())
        .map(|(e, s)| (1.0 - u) * e + v * s)
        .collect();
    let d_energy = energy_slice(&d);
    Ok(EsserParts {
        error,
        error_energy,
        s_energy,
        noise_on_error,
        noise_on_source,
        u,
        v,
        d,
        d_energy,
    })
}

/// The ESSER objective.
///
/// With e = s_noisy − ŝ, the denominator vector is
/// d = e − λ·proj_e(n̂) + proj_ŝ(n̂) and the value is
/// 10·log₁₀(‖ŝ‖² / max(‖d‖², ε·‖ŝ‖²)).
///
/// Estimates should be pre-scaled (see [`mixture_scale`]); this function
/// does not rescale.
pub fn esser(
    s_hat: &Waveform,
    n_hat: &Waveform,
    s_noisy: &Waveform,
    cfg: &LossConfig,
) -> Result<LossBreakdown> {
    let p = esser_parts(s_hat, n_hat, s_noisy, cfg)?;
    let discount_energy = if p.error_energy > 0.0 {
        let w = cfg.lambda * p.noise_on_error;
        w * w / p.error_energy
    } else {
        0.0
    };
    let ortho_penalty_energy = p.noise_on_source * p.noise_on_source / p.s_energy;
    LossBreakdown::from_parts(
        p.s_energy,
        p.error_energy,
        discount_energy,
        ortho_penalty_energy,
        p.d_energy,
        cfg.epsilon,
    )
}

/// Analytic gradients of the ESSER value with respect to every sample of
/// ŝ and n̂, in that order.
///
/// Only defined off the denominator floor; a floored evaluation yields
/// [`Error::GradientUndefined`] (perturb the inputs or reduce λ).
pub fn esser_grad(
    s_hat: &Waveform,
    n_hat: &Waveform,
    s_noisy: &Waveform,
    cfg: &LossConfig,
) -> Result<(Waveform, Waveform)> {
    let p = esser_parts(s_hat, n_hat, s_noisy, cfg)?;
    if p.d_energy <= cfg.epsilon * p.s_energy {
        return Err(Error::GradientUndefined);
    }
    let d_dot_e = dot_slices(&p.d, &p.error);
    let d_dot_s = dot_slices(&p.d, s_hat.samples());

    // n̂ enters only through u and v:
    //   ∂u/∂n̂ = λe/E, ∂v/∂n̂ = ŝ/S
    //   ∇_n̂ ‖d‖² = −2λ⟨d,e⟩/E·e + 2⟨d,ŝ⟩/S·ŝ
    let noise_grad: Vec<f64> = {
        let e_coeff =
            if p.error_energy > 0.0 { -2.0 * cfg.lambda * d_dot_e / p.error_energy } else { 0.0 };
        let s_coeff = 2.0 * d_dot_s / p.s_energy;
        let scale = -DB_SCALE / p.d_energy;
        p.error
            .iter()
            .zip(s_hat.samples())
            .map(|(e, s)| scale * (e_coeff * e + s_coeff * s))
            .collect()
    };

    // ŝ enters through the numerator, e = s_noisy − ŝ, u, and v:
    //   ∇u = λ(−E·n̂ + 2A·e)/E², ∇v = (S·n̂ − 2B·ŝ)/S²
    //   ∇‖d‖² = 2[−⟨d,e⟩∇u + ⟨d,ŝ⟩∇v + (v − 1 + u)·d]
    let source_grad: Vec<f64> = {
        let (ue_n, ue_e) = if p.error_energy > 0.0 {
            let e2 = p.error_energy * p.error_energy;
            (
                -cfg.lambda / p.error_energy,
                2.0 * cfg.lambda * p.noise_on_error / e2,
            )
        } else {
            (0.0, 0.0)
        };
        let vn = 1.0 / p.s_energy;
        let vs = -2.0 * p.noise_on_source / (p.s_energy * p.s_energy);
        let d_coeff = p.v - 1.0 + p.u;
        (0..s_hat.len())
            .map(|i| {
                let grad_u = ue_n * n_hat.samples()[i] + ue_e * p.error[i];
                let grad_v = vn * n_hat.samples()[i] + vs * s_hat.samples()[i];
                let grad_d2 = 2.0 * (-d_dot_e * grad_u + d_dot_s * grad_v + d_coeff * p.d[i]);
                DB_SCALE * (2.0 * s_hat.samples()[i] / p.s_energy - grad_d2 / p.d_energy)
            })
            .collect()
    };

    Ok((s_hat.with_samples(source_grad)?, n_hat.with_samples(noise_grad)?))
}

/// Evaluate whichever family `cfg` selects against one reference.
///
/// The ESSER family needs `noise_estimate`; the others ignore it.
pub fn evaluate_family(
    reference: &Waveform,
    estimate: &Waveform,
    noise_estimate: Option<&Waveform>,
    cfg: &LossConfig,
) -> Result<LossBreakdown> {
    match cfg.family {
        LossFamily::SdrNoisy => sdr_noisy_breakdown(reference, estimate, cfg.epsilon),
        LossFamily::SiSdr => si_sdr_breakdown(reference, estimate, cfg.epsilon),
        LossFamily::Esser => {
            let n_hat = noise_estimate.ok_or(Error::Config(
                "the esser family needs a noise estimate".into(),
            ))?;
            esser(estimate, n_hat, reference, cfg)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::central_difference;
    use crate::rng::seeded_rng;
    use crate::signal::{dot, energy, make_orthogonal_fixture};
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn wf(samples: &[f64]) -> Waveform {
        Waveform::new(samples.to_vec(), 16_000).unwrap()
    }

    fn random_wf(seed: u64, label: &str, t: usize) -> Waveform {
        let mut rng = seeded_rng(seed, label);
        wf(&(0..t).map(|_| rng.sample::<f64, _>(StandardNormal)).collect::<Vec<_>>())
    }

    const DB2: f64 = 3.010_299_956_639_812; // 10·log₁₀ 2

    #[test]
    fn config_validates_ranges() {
        assert!(LossConfig::new(LossFamily::Esser, -0.1, 1e-12).is_err());
        assert!(LossConfig::new(LossFamily::Esser, 2.1, 1e-12).is_err());
        assert!(LossConfig::new(LossFamily::Esser, 2.0, 1e-12).is_ok());
        assert!(LossConfig::new(LossFamily::Esser, 0.3, 0.0).is_err());
        assert!(LossConfig::new(LossFamily::Esser, 0.3, -1.0).is_err());
        assert!(LossConfig::new(LossFamily::Esser, f64::NAN, 1e-12).is_err());
    }

    #[test]
    fn family_round_trips_text() {
        for f in [LossFamily::SdrNoisy, LossFamily::SiSdr, LossFamily::Esser] {
            assert_eq!(f.to_string().parse::<LossFamily>().unwrap(), f);
        }
        assert!("bss_eval".parse::<LossFamily>().is_err());
    }

    #[test]
    fn sdr_noisy_perfect_reconstruction_hits_cap() {
        let b = sdr_noisy_breakdown(&wf(&[1.0, 1.0]), &wf(&[1.0, 1.0]), 1e-12).unwrap();
        assert_eq!(b.cap, CapState::Max);
        assert!((b.value - 120.0).abs() < 1e-9);
    }

    #[test]
    fn sdr_noisy_known_values() {
        let v = sdr_noisy(&wf(&[1.0, 1.0]), &wf(&[1.0, 0.0])).unwrap();
        assert!((v - DB2).abs() < 1e-12);
        let v = sdr_noisy(&wf(&[1.0, 0.0]), &wf(&[0.0, 1.0])).unwrap();
        assert!((v + DB2).abs() < 1e-12);
    }

    #[test]
    fn sdr_noisy_rejects_zero_ground_truth() {
        assert!(matches!(
            sdr_noisy(&wf(&[0.0, 0.0]), &wf(&[1.0, 0.0])),
            Err(Error::ZeroEnergy(_))
        ));
    }

    #[test]
    fn si_sdr_identity_hits_cap() {
        let r = wf(&[0.3, -0.7, 0.2]);
        let b = si_sdr_breakdown(&r, &r, 1e-12).unwrap();
        assert_eq!(b.cap, CapState::Max);
        assert!((b.value - 120.0).abs() < 1e-9);
    }

    #[test]
    fn si_sdr_known_value() {
        // α = 1, target [1,0], residual [0,1]
        let v = si_sdr(&wf(&[1.0, 0.0]), &wf(&[1.0, 1.0])).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn si_sdr_is_scale_invariant() {
        let r = random_wf(11, "ref", 128);
        let e = random_wf(11, "est", 128);
        let base = si_sdr(&r, &e).unwrap();
        for c in [7.3, 0.1, 10.0, 1e-3, 1e3] {
            let scaled = si_sdr(&r, &e.scaled(c).unwrap()).unwrap();
            assert!((scaled - base).abs() < 1e-9, "c={c}: {scaled} vs {base}");
        }
    }

    #[test]
    fn si_sdr_orthogonal_pair_is_flagged_min() {
        let b = si_sdr_breakdown(&wf(&[1.0, 0.0]), &wf(&[0.0, 1.0]), 1e-12).unwrap();
        assert_eq!(b.cap, CapState::Min);
        assert!((b.value + 120.0).abs() < 1e-9);
        assert_eq!(b.numerator_energy, 0.0);
    }

    #[test]
    fn si_sdr_rejects_zero_energy_operands() {
        assert!(si_sdr(&wf(&[0.0]), &wf(&[1.0])).is_err());
        assert!(si_sdr(&wf(&[1.0]), &wf(&[0.0])).is_err());
    }

    #[test]
    fn mixture_scale_known_values() {
        let s = mixture_scale(&wf(&[2.0, 2.0]), &wf(&[1.0, 1.0])).unwrap();
        assert_eq!(s.samples(), &[2.0, 2.0]);
        let s = mixture_scale(&wf(&[2.0, 2.0]), &wf(&[1.0, 0.0])).unwrap();
        assert_eq!(s.samples(), &[2.0, 0.0]);
        assert!(matches!(
            mixture_scale(&wf(&[1.0, 0.0]), &wf(&[0.0, 0.0])),
            Err(Error::DegenerateProjection)
        ));
    }

    #[test]
    fn mixture_scale_recovers_estimate_under_orthogonal_error() {
        let set = make_orthogonal_fixture(5, 2, 64).unwrap();
        let s_hat = &set.clean_sources()[0];
        let e = &set.noises()[1];
        let x = s_hat
            .with_samples(s_hat.samples().iter().zip(e.samples()).map(|(a, b)| a + b).collect())
            .unwrap();
        let scaled = mixture_scale(&x, s_hat).unwrap();
        for (a, b) in scaled.samples().iter().zip(s_hat.samples()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn esser_perfect_noise_identification_hits_cap() {
        let cfg = LossConfig::esser(1.0).unwrap();
        let b = esser(&wf(&[1.0, 0.0, 0.0]), &wf(&[0.0, 1.0, 0.0]), &wf(&[1.0, 1.0, 0.0]), &cfg)
            .unwrap();
        assert_eq!(b.cap, CapState::Max);
        assert!((b.value - 120.0).abs() < 1e-9);
        assert!(b.denominator_energy < 1e-24);
    }

    #[test]
    fn esser_known_value_at_lambda_zero() {
        let cfg = LossConfig::esser(0.0).unwrap();
        let b = esser(&wf(&[1.0, 0.0]), &wf(&[1.0, 0.0]), &wf(&[1.0, 1.0]), &cfg).unwrap();
        assert!((b.value + DB2).abs() < 1e-12);
        assert_eq!(b.denominator_energy, 2.0);
        assert_eq!(b.ortho_penalty_energy, 1.0);
        assert_eq!(b.discount_energy, 0.0);
    }

    #[test]
    fn esser_lambda_zero_orthogonal_noise_reduces_to_plain_ratio() {
        let set = make_orthogonal_fixture(9, 2, 64).unwrap();
        let s_hat = &set.clean_sources()[0];
        let err_part = &set.clean_sources()[1];
        let n_hat = &set.noises()[0]; // orthogonal to both ŝ and e
        let s_noisy = s_hat
            .with_samples(
                s_hat.samples().iter().zip(err_part.samples()).map(|(a, b)| a + 0.5 * b).collect(),
            )
            .unwrap();
        let cfg = LossConfig::esser(0.0).unwrap();
        let b = esser(s_hat, n_hat, &s_noisy, &cfg).unwrap();
        let expected = 10.0 * (energy(s_hat) / b.residual_energy).log10();
        assert!((b.value - expected).abs() < 1e-9);
    }

    #[test]
    fn esser_zero_error_skips_discount() {
        // s_noisy == ŝ: e = 0, discount degenerate, value from ortho term only
        let cfg = LossConfig::esser(1.0).unwrap();
        let s = wf(&[1.0, 1.0]);
        let b = esser(&s, &wf(&[1.0, 0.0]), &s, &cfg).unwrap();
        assert_eq!(b.discount_energy, 0.0);
        assert_eq!(b.residual_energy, 0.0);
        // d = proj_ŝ(n̂) = [0.5, 0.5], ‖d‖² = 0.5, value = 10·log₁₀(2/0.5)
        assert!((b.value - 2.0 * DB2).abs() < 1e-9);
    }

    #[test]
    fn esser_rejects_zero_source_estimate() {
        let cfg = LossConfig::esser(0.5).unwrap();
        assert!(matches!(
            esser(&wf(&[0.0, 0.0]), &wf(&[1.0, 0.0]), &wf(&[1.0, 1.0]), &cfg),
            Err(Error::ZeroEnergy(_))
        ));
    }

    #[test]
    fn esser_degeneracy_on_orthogonal_fixture() {
        // ŝ = s_clean_k, n̂ = Σ n_j: denominator collapses to (1−λ)²‖n_k‖²
        let set = make_orthogonal_fixture(21, 2, 128).unwrap();
        let k = 0;
        let s_hat = &set.clean_sources()[k];
        let n_k = &set.noises()[k];
        let mut summed = vec![0.0f64; set.len_samples()];
        for n in set.noises() {
            for (slot, v) in summed.iter_mut().zip(n.samples()) {
                *slot += v;
            }
        }
        let n_hat = s_hat.with_samples(summed).unwrap();
        let s_noisy = s_hat
            .with_samples(s_hat.samples().iter().zip(n_k.samples()).map(|(a, b)| a + b).collect())
            .unwrap();
        for lambda in [0.0, 0.5] {
            let cfg = LossConfig::esser(lambda).unwrap();
            let b = esser(s_hat, &n_hat, &s_noisy, &cfg).unwrap();
            let expected = (1.0 - lambda) * (1.0 - lambda) * energy(n_k);
            assert!(
                (b.denominator_energy - expected).abs() <= 1e-9 * expected.max(1e-30),
                "λ={lambda}: {} vs {expected}",
                b.denominator_energy
            );
        }
        let cfg = LossConfig::esser(1.0).unwrap();
        let b = esser(s_hat, &n_hat, &s_noisy, &cfg).unwrap();
        assert_eq!(b.cap, CapState::Max);
    }

    #[test]
    fn esser_monotone_in_lambda_when_noise_explains_error() {
        // n̂ = 0.8e + w with w ⊥ e, w ⊥ ŝ and ⟨n̂,ŝ⟩ = 0: value rises with λ
        let set = make_orthogonal_fixture(33, 2, 64).unwrap();
        let s_hat = &set.clean_sources()[0];
        let e = &set.clean_sources()[1];
        let w = &set.noises()[0];
        let n_hat = e
            .with_samples(e.samples().iter().zip(w.samples()).map(|(a, b)| 0.8 * a + b).collect())
            .unwrap();
        let s_noisy = s_hat
            .with_samples(s_hat.samples().iter().zip(e.samples()).map(|(a, b)| a + b).collect())
            .unwrap();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=10 {
            let cfg = LossConfig::esser(i as f64 / 10.0).unwrap();
            let v = esser(s_hat, &n_hat, &s_noisy, &cfg).unwrap().value;
            assert!(v > prev, "λ={}: {v} not above {prev}", i as f64 / 10.0);
            prev = v;
        }
    }

    #[test]
    fn evaluate_family_dispatches_and_validates() {
        let r = random_wf(3, "r", 32);
        let e = random_wf(3, "e", 32);
        let n = random_wf(3, "n", 32);
        let cfg = LossConfig::si_sdr();
        let direct = si_sdr_breakdown(&r, &e, cfg.epsilon).unwrap();
        assert_eq!(evaluate_family(&r, &e, None, &cfg).unwrap(), direct);
        let cfg = LossConfig::esser(0.3).unwrap();
        assert!(matches!(evaluate_family(&r, &e, None, &cfg), Err(Error::Config(_))));
        let direct = esser(&e, &n, &r, &cfg).unwrap();
        assert_eq!(evaluate_family(&r, &e, Some(&n), &cfg).unwrap(), direct);
    }

    use crate::gradcheck::max_relative_error as max_rel_err;

    #[test]
    fn si_sdr_grad_matches_finite_differences() {
        for seed in 0..5u64 {
            let r = random_wf(seed, "fd-ref", 16);
            let e = random_wf(seed, "fd-est", 16);
            let g = si_sdr_grad(&r, &e, 1e-12).unwrap();
            let fd = central_difference(e.samples(), 1e-6, |v| {
                si_sdr(&r, &e.with_samples(v.to_vec()).unwrap()).unwrap()
            });
            assert!(max_rel_err(g.samples(), &fd) < 1e-6, "seed {seed}");
        }
    }

    #[test]
    fn si_sdr_grad_is_orthogonal_to_estimate() {
        for seed in 0..20u64 {
            let r = random_wf(seed, "orth-ref", 64);
            let e = random_wf(seed, "orth-est", 64);
            let g = si_sdr_grad(&r, &e, 1e-12).unwrap();
            let d = dot(&g, &e).unwrap().abs();
            assert!(d <= 1e-9 * energy(&g).sqrt() * energy(&e).sqrt());
        }
    }

    #[test]
    fn si_sdr_grad_errors_at_exact_maximum() {
        let r = wf(&[1.0, 2.0, -1.0]);
        assert!(matches!(si_sdr_grad(&r, &r, 1e-12), Err(Error::GradientUndefined)));
        let scaled = r.scaled(0.5).unwrap();
        assert!(matches!(si_sdr_grad(&r, &scaled, 1e-12), Err(Error::GradientUndefined)));
    }

    #[test]
    fn si_sdr_near_maximum_pushes_back_toward_it() {
        // est = r + δw with w ⊥ r: the ascent direction opposes w
        let r = wf(&[1.0, 1.0, 0.0, -2.0]);
        let w = wf(&[1.0, -1.0, 2.0, 0.0]);
        assert_eq!(dot(&r, &w).unwrap(), 0.0);
        let est = r
            .with_samples(r.samples().iter().zip(w.samples()).map(|(a, b)| a + 1e-3 * b).collect())
            .unwrap();
        let g = si_sdr_grad(&r, &est, 1e-12).unwrap();
        assert!(dot(&g, &w).unwrap() < 0.0);
    }

    #[test]
    fn esser_grad_matches_finite_differences() {
        for seed in 0..5u64 {
            for lambda in [0.0, 0.3, 1.0] {
                let cfg = LossConfig::esser(lambda).unwrap();
                let s_noisy = random_wf(seed, "fd-x", 16);
                let s_hat = random_wf(seed, "fd-s", 16);
                let n_hat = random_wf(seed, "fd-n", 16);
                let (gs, gn) = esser_grad(&s_hat, &n_hat, &s_noisy, &cfg).unwrap();
                let fd_s = central_difference(s_hat.samples(), 1e-6, |v| {
                    esser(&s_hat.with_samples(v.to_vec()).unwrap(), &n_hat, &s_noisy, &cfg)
                        .unwrap()
                        .value
                });
                let fd_n = central_difference(n_hat.samples(), 1e-6, |v| {
                    esser(&s_hat, &n_hat.with_samples(v.to_vec()).unwrap(), &s_noisy, &cfg)
                        .unwrap()
                        .value
                });
                assert!(max_rel_err(gs.samples(), &fd_s) < 1e-6, "seed {seed} λ={lambda} (ŝ)");
                assert!(max_rel_err(gn.samples(), &fd_n) < 1e-6, "seed {seed} λ={lambda} (n̂)");
            }
        }
    }

    #[test]
    fn esser_grad_noise_direction_confined_at_lambda_zero() {
        // λ=0: ∇_n̂ lies along ŝ, so any w ⊥ ŝ (and ⊥ e) sees nothing
        let set = make_orthogonal_fixture(44, 2, 64).unwrap();
        let s_hat = &set.clean_sources()[0];
        let e_dir = &set.clean_sources()[1];
        let w = &set.noises()[1];
        let s_noisy = s_hat
            .with_samples(
                s_hat.samples().iter().zip(e_dir.samples()).map(|(a, b)| a + 0.7 * b).collect(),
            )
            .unwrap();
        let n_hat = random_wf(44, "nh", 64);
        let cfg = LossConfig::esser(0.0).unwrap();
        let (_, gn) = esser_grad(s_hat, &n_hat, &s_noisy, &cfg).unwrap();
        let leak = dot(&gn, w).unwrap().abs();
        assert!(leak <= 1e-12 * energy(&gn).sqrt().max(1.0));
    }

    #[test]
    fn esser_grad_scale_direction_matches_symbolic_derivative() {
        // f(c) = esser value at c·ŝ; compare ⟨∇ŝ, ŝ⟩ against the closed-form
        // f'(1) from the scalar chain (d(c) = (1−u(c))e(c) + (B/S)ŝ).
        for seed in 0..5u64 {
            for lambda in [0.0, 0.5, 1.0] {
                let cfg = LossConfig::esser(lambda).unwrap();
                let m = random_wf(seed, "sym-x", 24);
                let s = random_wf(seed, "sym-s", 24);
                let n = random_wf(seed, "sym-n", 24);
                let (gs, _) = esser_grad(&s, &n, &m, &cfg).unwrap();
                let directional = dot(&gs, &s).unwrap();

                let e: Vec<f64> =
                    m.samples().iter().zip(s.samples()).map(|(x, y)| x - y).collect();
                let e_energy = energy_slice(&e);
                let s_energy = energy(&s);
                let a_val = dot_slices(n.samples(), &e);
                let b0 = dot(&n, &s).unwrap();
                let u = lambda * a_val / e_energy;
                let u_prime = lambda * (-b0 * e_energy - a_val * (-2.0 * dot_slices(s.samples(), &e)))
                    / (e_energy * e_energy);
                let d: Vec<f64> = e
                    .iter()
                    .zip(s.samples())
                    .map(|(ei, si)| (1.0 - u) * ei + (b0 / s_energy) * si)
                    .collect();
                let d_energy = energy_slice(&d);
                let d_dot_e = dot_slices(&d, &e);
                let d_dot_s = dot_slices(&d, s.samples());
                let d2_prime = 2.0 * (-u_prime * d_dot_e - (1.0 - u) * d_dot_s);
                let f_prime = DB_SCALE * (2.0 - d2_prime / d_energy);
                let scale = directional.abs().max(f_prime.abs()).max(1.0);
                assert!(
                    (directional - f_prime).abs() < 1e-9 * scale,
                    "seed {seed} λ={lambda}: {directional} vs {f_prime}"
                );
            }
        }
    }

    #[test]
    fn esser_grad_errors_on_floored_denominator() {
        let cfg = LossConfig::esser(1.0).unwrap();
        let r = esser_grad(
            &wf(&[1.0, 0.0, 0.0]),
            &wf(&[0.0, 1.0, 0.0]),
            &wf(&[1.0, 1.0, 0.0]),
            &cfg,
        );
        assert!(matches!(r, Err(Error::GradientUndefined)));
    }

    #[test]
    fn sdr_noisy_grad_matches_finite_differences() {
        for seed in 0..5u64 {
            let s = random_wf(seed, "sn-ref", 16);
            let e = random_wf(seed, "sn-est", 16);
            let g = sdr_noisy_grad(&s, &e, 1e-12).unwrap();
            let fd = central_difference(e.samples(), 1e-6, |v| {
                sdr_noisy(&s, &e.with_samples(v.to_vec()).unwrap()).unwrap()
            });
            assert!(max_rel_err(g.samples(), &fd) < 1e-6, "seed {seed}");
        }
    }

    #[test]
    fn mixture_scale_vjp_matches_finite_differences() {
        for seed in 0..5u64 {
            let x = random_wf(seed, "vjp-x", 16);
            let s = random_wf(seed, "vjp-s", 16);
            let g = random_wf(seed, "vjp-g", 16);
            // scalar head L = ⟨g, mixture_scale(x, ŝ)⟩
            let vjp = mixture_scale_vjp(&x, &s, &g).unwrap();
            let fd = central_difference(s.samples(), 1e-6, |v| {
                let scaled = mixture_scale(&x, &s.with_samples(v.to_vec()).unwrap()).unwrap();
                dot(&g, &scaled).unwrap()
            });
            assert!(max_rel_err(vjp.samples(), &fd) < 1e-6, "seed {seed}");
        }
    }

    proptest! {
        #[test]
        fn breakdown_reconstructs_from_parts(seed in 0u64..200, lambda in 0.0..1.0f64) {
            let s_noisy = random_wf(seed, "bk-x", 24);
            let s_hat = random_wf(seed, "bk-s", 24);
            let n_hat = random_wf(seed, "bk-n", 24);
            let cfg = LossConfig::new(LossFamily::Esser, lambda, 1e-12).unwrap();
            for b in [
                esser(&s_hat, &n_hat, &s_noisy, &cfg).unwrap(),
                si_sdr_breakdown(&s_noisy, &s_hat, 1e-12).unwrap(),
                sdr_noisy_breakdown(&s_noisy, &s_hat, 1e-12).unwrap(),
            ] {
                if b.cap != CapState::Min {
                    let rebuilt =
                        db_ratio(b.numerator_energy, b.denominator_energy, b.floor_energy).unwrap();
                    prop_assert_eq!(b.value, rebuilt);
                }
            }
        }

        #[test]
        fn si_sdr_invariant_under_positive_scaling(seed in 0u64..100, c in prop::sample::select(vec![0.1f64, 1.0, 10.0])) {
            let r = random_wf(seed, "prop-ref", 48);
            let e = random_wf(seed, "prop-est", 48);
            let base = si_sdr(&r, &e).unwrap();
            let scaled = si_sdr(&r, &e.scaled(c).unwrap()).unwrap();
            prop_assert!((scaled - base).abs() < 1e-9);
        }
    }
}

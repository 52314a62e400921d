//! Vector operations on waveforms: inner products, energies, projections,
//! dB ratios, orthogonality statistics, and exactly-orthogonal test fixtures.
//!
//! Everything here treats a waveform as a vector in ℝ^T. All math is f64
//! regardless of any on-disk sample format; the gradient checks elsewhere in
//! the crate depend on that.

use crate::error::{Error, Result};
use crate::rng::seeded_rng;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

/// A finite sequence of audio samples at a fixed sample rate.
///
/// Construction validates the invariants every operation relies on: at least
/// one sample, every sample finite, positive sample rate. Paired operations
/// additionally require equal length and equal sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyWaveform);
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFiniteSample(i));
        }
        if sample_rate == 0 {
            return Err(Error::Construction("sample rate must be positive".into()));
        }
        Ok(Self { samples, sample_rate })
    }

    /// All-zero waveform of the given length.
    pub fn zeros(len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false; kept so clippy-style `len`/`is_empty` pairing holds.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Same-rate waveform with new samples (revalidates finiteness).
    pub fn with_samples(&self, samples: Vec<f64>) -> Result<Self> {
        Self::new(samples, self.sample_rate)
    }

    /// First `len` samples as a new waveform.
    pub fn truncated(&self, len: usize) -> Result<Self> {
        if len == 0 || len > self.samples.len() {
            return Err(Error::Argument(format!(
                "cannot truncate length-{} waveform to {} samples",
                self.samples.len(),
                len
            )));
        }
        Self::new(self.samples[..len].to_vec(), self.sample_rate)
    }

    /// Per-sample scaling by a finite factor.
    pub fn scaled(&self, gain: f64) -> Result<Self> {
        if !gain.is_finite() {
            return Err(Error::Argument(format!("non-finite gain {gain}")));
        }
        self.with_samples(self.samples.iter().map(|s| s * gain).collect())
    }
}

pub(crate) fn check_pair(a: &Waveform, b: &Waveform) -> Result<()> {
    if a.len() != b.len() || a.sample_rate() != b.sample_rate() {
        return Err(Error::OperandMismatch {
            left_len: a.len(),
            right_len: b.len(),
            left_rate: a.sample_rate(),
            right_rate: b.sample_rate(),
        });
    }
    Ok(())
}

/// Inner product of two equal-shape slices. No validation; callers that take
/// `Waveform`s have already checked shapes.
pub(crate) fn dot_slices(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn energy_slice(a: &[f64]) -> f64 {
    dot_slices(a, a)
}

/// Inner product ⟨a,b⟩ = Σ_t a(t)·b(t).
pub fn dot(a: &Waveform, b: &Waveform) -> Result<f64> {
    check_pair(a, b)?;
    Ok(dot_slices(a.samples(), b.samples()))
}

/// Signal energy ‖a‖² = ⟨a,a⟩. Zero iff the waveform is all-zero.
pub fn energy(a: &Waveform) -> f64 {
    energy_slice(a.samples())
}

/// Orthogonal projection of `target` onto the line spanned by `onto`:
/// (⟨target,onto⟩/‖onto‖²)·onto. The residual `target − result` is
/// orthogonal to `onto` up to rounding.
pub fn project(target: &Waveform, onto: &Waveform) -> Result<Waveform> {
    check_pair(target, onto)?;
    let denom = energy(onto);
    if denom <= 0.0 {
        return Err(Error::DegenerateProjection);
    }
    let coeff = dot_slices(target.samples(), onto.samples()) / denom;
    onto.scaled(coeff)
}

/// 10·log₁₀(numerator_energy / max(denominator_energy, floor)) in dB.
///
/// The floor bounds the ratio above; a zero numerator still yields −∞.
pub fn db_ratio(numerator_energy: f64, denominator_energy: f64, floor: f64) -> Result<f64> {
    if numerator_energy < 0.0 || denominator_energy < 0.0 {
        return Err(Error::Domain(format!(
            "negative energy in dB ratio: numerator {numerator_energy}, denominator {denominator_energy}"
        )));
    }
    if !(floor > 0.0) {
        return Err(Error::Domain(format!("dB ratio floor must be positive, got {floor}")));
    }
    Ok(10.0 * (numerator_energy / denominator_energy.max(floor)).log10())
}

/// |⟨a,b⟩| / (‖a‖·‖b‖), clamped into [0,1] against rounding overshoot.
pub fn normalized_correlation(a: &Waveform, b: &Waveform) -> Result<f64> {
    check_pair(a, b)?;
    let ea = energy(a);
    let eb = energy(b);
    if ea <= 0.0 || eb <= 0.0 {
        return Err(Error::ZeroEnergy("normalized correlation operand"));
    }
    let d = dot_slices(a.samples(), b.samples()).abs();
    Ok((d / (ea.sqrt() * eb.sqrt())).min(1.0))
}

/// All pairwise normalized correlations over a list, as (i, j, value) with
/// i < j in index order.
pub fn pairwise_correlations(waveforms: &[Waveform]) -> Result<Vec<(usize, usize, f64)>> {
    let mut out = Vec::new();
    for i in 0..waveforms.len() {
        for j in i + 1..waveforms.len() {
            out.push((i, j, normalized_correlation(&waveforms[i], &waveforms[j])?));
        }
    }
    Ok(out)
}

/// The independent components of one mixture: K clean sources and the K
/// noises that ride along with them.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSet {
    clean_sources: Vec<Waveform>,
    noises: Vec<Waveform>,
}

impl ComponentSet {
    pub fn new(clean_sources: Vec<Waveform>, noises: Vec<Waveform>) -> Result<Self> {
        if clean_sources.is_empty() {
            return Err(Error::Construction("component set needs at least one source".into()));
        }
        if clean_sources.len() != noises.len() {
            return Err(Error::Construction(format!(
                "source/noise count mismatch: {} clean vs {} noise",
                clean_sources.len(),
                noises.len()
            )));
        }
        let first = &clean_sources[0];
        for w in clean_sources.iter().chain(noises.iter()) {
            check_pair(first, w).map_err(|_| {
                Error::Construction("component set members must share length and sample rate".into())
            })?;
        }
        Ok(Self { clean_sources, noises })
    }

    pub fn speaker_count(&self) -> usize {
        self.clean_sources.len()
    }

    pub fn clean_sources(&self) -> &[Waveform] {
        &self.clean_sources
    }

    pub fn noises(&self) -> &[Waveform] {
        &self.noises
    }

    pub fn len_samples(&self) -> usize {
        self.clean_sources[0].len()
    }

    pub fn sample_rate(&self) -> u32 {
        self.clean_sources[0].sample_rate()
    }

    /// The mixture x = Σ_k (s_clean_k + n_k), accumulated pairwise in
    /// ascending source order. The order is fixed so that the same members
    /// always produce a bit-identical mixture.
    pub fn mixture(&self) -> Waveform {
        let t = self.len_samples();
        let mut acc = vec![0.0f64; t];
        for k in 0..self.speaker_count() {
            let s = self.clean_sources[k].samples();
            let n = self.noises[k].samples();
            for (i, slot) in acc.iter_mut().enumerate() {
                *slot += s[i] + n[i];
            }
        }
        // members are finite so the pairwise sum is too
        Waveform::new(acc, self.sample_rate()).expect("mixture of valid members")
    }

    /// All 2K components in a flat list: clean sources first, then noises.
    pub fn members(&self) -> Vec<&Waveform> {
        self.clean_sources.iter().chain(self.noises.iter()).collect()
    }

    /// Largest |⟨a,b⟩| over all distinct member pairs.
    pub fn max_abs_pairwise_dot(&self) -> f64 {
        let members = self.members();
        let mut worst = 0.0f64;
        for i in 0..members.len() {
            for j in i + 1..members.len() {
                let d = dot_slices(members[i].samples(), members[j].samples()).abs();
                worst = worst.max(d);
            }
        }
        worst
    }
}

#[derive(Clone, Copy)]
enum Quadrature {
    Cos,
    Sin,
}

/// Sample rate stamped on generated fixtures; the vector math never reads it.
pub(crate) const FIXTURE_RATE: u32 = 16_000;

/// Build K clean sources and K noises of length T that are pairwise
/// orthogonal and each unit energy.
///
/// Each component is synthesized from a private set of DFT bins: the T
/// real cosine/sine basis atoms are shuffled by the seed and dealt out in
/// equal shares, so by Parseval no two components share any spectral
/// support. The pairwise inner products vanish up to rounding (≲1e-15 at
/// unit energy) and the construction is deterministic in the seed.
pub fn make_orthogonal_fixture(seed: u64, k: usize, t: usize) -> Result<ComponentSet> {
    if k == 0 {
        return Err(Error::Construction("fixture needs at least one source".into()));
    }
    if 2 * k > t {
        return Err(Error::Construction(format!(
            "cannot fit {} orthogonal components in {} samples",
            2 * k,
            t
        )));
    }

    // Real DFT atom inventory: DC, (cos, sin) per interior bin, and for even
    // T the Nyquist alternation. Exactly T atoms in total.
    let mut atoms: Vec<(usize, Quadrature)> = Vec::with_capacity(t);
    atoms.push((0, Quadrature::Cos));
    for bin in 1..=(t - 1) / 2 {
        atoms.push((bin, Quadrature::Cos));
        atoms.push((bin, Quadrature::Sin));
    }
    if t % 2 == 0 {
        atoms.push((t / 2, Quadrature::Cos));
    }
    debug_assert_eq!(atoms.len(), t);

    let mut rng = seeded_rng(seed, "orthogonal-fixture");
    atoms.shuffle(&mut rng);

    // Tabulated cos/sin over one period: atom values at congruent phase
    // indices are then bit-identical, which keeps the cross terms of the
    // pairwise dots cancelling as cleanly as f64 allows.
    let period = std::f64::consts::TAU / t as f64;
    let cos_table: Vec<f64> = (0..t).map(|m| (period * m as f64).cos()).collect();
    let sin_table: Vec<f64> = (0..t).map(|m| (period * m as f64).sin()).collect();

    let share = t / (2 * k);
    let mut components = Vec::with_capacity(2 * k);
    for c in 0..2 * k {
        let mut samples = vec![0.0f64; t];
        for &(bin, quad) in &atoms[c * share..(c + 1) * share] {
            let coeff: f64 = rng.sample(StandardNormal);
            let table = match quad {
                Quadrature::Cos => &cos_table,
                Quadrature::Sin => &sin_table,
            };
            for (time, slot) in samples.iter_mut().enumerate() {
                *slot += coeff * table[(bin * time) % t];
            }
        }
        let e = energy_slice(&samples);
        if e <= 0.0 {
            return Err(Error::Construction(format!(
                "fixture component {c} degenerated to zero energy"
            )));
        }
        let scale = 1.0 / e.sqrt();
        for s in &mut samples {
            *s *= scale;
        }
        components.push(Waveform::new(samples, FIXTURE_RATE)?);
    }

    let noises = components.split_off(k);
    ComponentSet::new(components, noises)
}

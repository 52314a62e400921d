//! Fixed-geometry short-time transform for the mask separator.
//!
//! Analysis uses a periodic Hann window at 50% overlap, which sums to
//! exactly 1 across overlapping frames; synthesis is plain overlap-add of
//! the inverse transforms with no synthesis window. The signal is padded
//! with one hop of leading zeros plus a zero tail so every real sample is
//! covered by exactly two frames, making the identity mask reconstruct the
//! input to machine precision.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub(crate) const FRAME: usize = 256;
pub(crate) const HOP: usize = 128;
/// Distinct real-mask bins per frame: DC through Nyquist.
pub(crate) const BINS: usize = FRAME / 2 + 1;

/// Windowed mixture spectra, one complex frame per hop.
pub(crate) struct Spectra {
    frames: Vec<Vec<Complex<f64>>>,
    len: usize,
}

impl Spectra {
    pub(crate) fn num_frames(&self) -> usize {
        self.frames.len()
    }
}

pub(crate) struct Stft {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
}

impl Stft {
    pub(crate) fn new() -> Self {
        let mut planner = FftPlanner::new();
        let window = (0..FRAME)
            .map(|n| 0.5 * (1.0 - (std::f64::consts::TAU * n as f64 / FRAME as f64).cos()))
            .collect();
        Self {
            forward: planner.plan_fft_forward(FRAME),
            inverse: planner.plan_fft_inverse(FRAME),
            window,
        }
    }

    pub(crate) fn num_frames(len: usize) -> usize {
        len.div_ceil(HOP) + 1
    }

    fn padded_len(len: usize) -> usize {
        (Self::num_frames(len) - 1) * HOP + FRAME
    }

    pub(crate) fn analyze(&self, x: &[f64]) -> Spectra {
        let mut padded = vec![0.0f64; Self::padded_len(x.len())];
        padded[HOP..HOP + x.len()].copy_from_slice(x);
        let frames = (0..Self::num_frames(x.len()))
            .map(|f| {
                let start = f * HOP;
                let mut buf: Vec<Complex<f64>> = (0..FRAME)
                    .map(|n| Complex::new(padded[start + n] * self.window[n], 0.0))
                    .collect();
                self.forward.process(&mut buf);
                buf
            })
            .collect();
        Spectra { frames, len: x.len() }
    }

    /// Apply one output's mask (frame-major, `BINS` real weights per frame,
    /// shared by conjugate bin pairs), inverse transform, overlap-add, and
    /// trim back to the original length.
    pub(crate) fn synthesize(&self, spectra: &Spectra, mask: &[f64]) -> Vec<f64> {
        debug_assert_eq!(mask.len(), spectra.frames.len() * BINS);
        let mut out = vec![0.0f64; Self::padded_len(spectra.len)];
        let norm = 1.0 / FRAME as f64;
        for (f, frame) in spectra.frames.iter().enumerate() {
            let row = &mask[f * BINS..(f + 1) * BINS];
            let mut buf: Vec<Complex<f64>> = frame
                .iter()
                .enumerate()
                .map(|(b, &v)| v * row[b.min(FRAME - b)])
                .collect();
            self.inverse.process(&mut buf);
            let start = f * HOP;
            for (n, v) in buf.iter().enumerate() {
                out[start + n] += v.re * norm;
            }
        }
        out[HOP..HOP + spectra.len].to_vec()
    }

    /// Adjoint of [`synthesize`] in the mask argument: the gradient of a
    /// scalar loss with respect to each mask weight, given the gradient
    /// `upstream` with respect to the output samples.
    ///
    /// With X the stored frame spectrum and G the forward transform of the
    /// (unwindowed) upstream frame, the weight at bin b receives
    /// (c_b/FRAME)·Re(X[b]·conj(G[b])), c_b = 1 at DC and Nyquist where the
    /// bin is self-conjugate, 2 elsewhere.
    pub(crate) fn mask_grad(&self, spectra: &Spectra, upstream: &[f64]) -> Vec<f64> {
        debug_assert_eq!(upstream.len(), spectra.len);
        let mut padded = vec![0.0f64; Self::padded_len(spectra.len)];
        padded[HOP..HOP + spectra.len].copy_from_slice(upstream);
        let mut grads = vec![0.0f64; spectra.frames.len() * BINS];
        let norm = 1.0 / FRAME as f64;
        for (f, frame) in spectra.frames.iter().enumerate() {
            let start = f * HOP;
            let mut gbuf: Vec<Complex<f64>> =
                (0..FRAME).map(|n| Complex::new(padded[start + n], 0.0)).collect();
            self.forward.process(&mut gbuf);
            let row = &mut grads[f * BINS..(f + 1) * BINS];
            for (b, slot) in row.iter_mut().enumerate() {
                let pair_weight = if b == 0 || b == FRAME / 2 { 1.0 } else { 2.0 };
                *slot = pair_weight * norm * (frame[b] * gbuf[b].conj()).re;
            }
        }
        grads
    }
}

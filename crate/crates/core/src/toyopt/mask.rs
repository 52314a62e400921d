//! Softmax-parameterized masks over a fixed time-frequency grid.
//!
//! Each (frame, bin) cell carries one logit per output; the masks are the
//! softmax across outputs, so they are positive and sum to exactly one in
//! every cell. Splitting the mixture this way keeps the sum of the masked
//! outputs equal to the mixture itself, whatever the parameters.

use super::stft::BINS;

pub(crate) struct MaskModel {
    outputs: usize,
    cells: usize,
    /// Logits laid out output-major: `theta[j * cells + cell]`.
    theta: Vec<f64>,
}

impl MaskModel {
    /// All-zero logits, i.e. uniform 1/outputs masks everywhere.
    pub(crate) fn new(outputs: usize, frames: usize) -> Self {
        let cells = frames * BINS;
        Self { outputs, cells, theta: vec![0.0; outputs * cells] }
    }

    pub(crate) fn outputs(&self) -> usize {
        self.outputs
    }

    /// One mask per output, frame-major, cells aligned with the logits.
    pub(crate) fn masks(&self) -> Vec<Vec<f64>> {
        let mut masks = vec![vec![0.0f64; self.cells]; self.outputs];
        for cell in 0..self.cells {
            let max = (0..self.outputs)
                .map(|j| self.theta[j * self.cells + cell])
                .fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for j in 0..self.outputs {
                let e = (self.theta[j * self.cells + cell] - max).exp();
                masks[j][cell] = e;
                denom += e;
            }
            for m in &mut masks {
                m[cell] /= denom;
            }
        }
        masks
    }

    /// Pull per-mask gradients back through the softmax:
    /// dtheta_j = mu_j * (g_j - sum_l mu_l g_l) in every cell.
    pub(crate) fn backprop(&self, masks: &[Vec<f64>], mask_grads: &[Vec<f64>]) -> Vec<f64> {
        debug_assert_eq!(masks.len(), self.outputs);
        debug_assert_eq!(mask_grads.len(), self.outputs);
        let mut theta_grad = vec![0.0f64; self.theta.len()];
        for cell in 0..self.cells {
            let mean: f64 = (0..self.outputs).map(|j| masks[j][cell] * mask_grads[j][cell]).sum();
            for j in 0..self.outputs {
                theta_grad[j * self.cells + cell] =
                    masks[j][cell] * (mask_grads[j][cell] - mean);
            }
        }
        theta_grad
    }

    /// Take one gradient-ascent step in logit space.
    pub(crate) fn ascend(&mut self, theta_grad: &[f64], step: f64) {
        debug_assert_eq!(theta_grad.len(), self.theta.len());
        for (t, g) in self.theta.iter_mut().zip(theta_grad) {
            *t += step * g;
        }
    }
}

//! Fully connected networks with ReLU hidden layers and reverse-mode
//! gradients.
//!
//! Parameters live in one flat vector (per layer: row-major `in x out`
//! weights, then `out` biases) so optimizers and target-network averaging
//! work on plain slices.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Treat subnormal floats as zero on the calling thread from now on.
///
/// Long training runs push Adam moments of idle parameters and some
/// backpropagated products into the subnormal range, where each operation
/// takes a slow microcode path. No-op off x86-64.
pub fn flush_denormals() {
    #[cfg(target_arch = "x86_64")]
    #[allow(deprecated)]
    // SAFETY: only sets the FTZ (bit 15) and DAZ (bit 6) flags of MXCSR,
    // which every x86-64 CPU with SSE2 supports.
    unsafe {
        use std::arch::x86_64::{_mm_getcsr, _mm_setcsr};
        _mm_setcsr(_mm_getcsr() | 0x8040);
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    dims: Vec<usize>,
    params: Vec<f64>,
}

/// Activations recorded by [`Mlp::forward_batch`] for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    batch: usize,
    acts: Vec<Vec<f64>>,
}

impl Tape {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

/// `c = alpha * op(a) * op(b) + beta * c` on row-major buffers.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    beta: f64,
    c: &mut [f64],
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: strides describe matrices that lie entirely inside the slices
    // checked above, and `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m, k, n, 1.0, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), n as isize, 1,
        );
    }
}

impl Mlp {
    /// Network with layer widths `dims` (input first, output last) and
    /// uniform `±1/sqrt(fan_in)` initialization.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Self {
        let mut net = Self::zeros(dims);
        let mut off = 0;
        for w in dims.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for p in &mut net.params[off..off + w[0] * w[1] + w[1]] {
                *p = rng.gen_range(-bound..bound);
            }
            off += w[0] * w[1] + w[1];
        }
        net
    }

    pub fn zeros(dims: &[usize]) -> Self {
        assert!(dims.len() >= 2, "need at least an input and an output layer");
        let n = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Self { dims: dims.to_vec(), params: vec![0.0; n] }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        self.dims[self.dims.len() - 1]
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layers(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let mut off = 0;
        self.dims.windows(2).map(move |w| {
            let o = off;
            off += w[0] * w[1] + w[1];
            (o, w[0], w[1])
        })
    }

    /// Single-sample forward pass.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        let mut tape = Tape::default();
        self.forward_batch(x, 1, &mut tape)?;
        Ok(tape.output().to_vec())
    }

    /// Forward pass over `batch` row-major inputs, recording activations.
    pub fn forward_batch<'t>(&self, x: &[f64], batch: usize, tape: &'t mut Tape) -> Result<&'t [f64], NnError> {
        let expected = batch * self.input_dim();
        if x.len() != expected {
            return Err(NnError::DimensionMismatch { expected, got: x.len() });
        }
        let n_layers = self.dims.len() - 1;
        tape.batch = batch;
        tape.acts.resize_with(n_layers + 1, Vec::new);
        tape.acts[0].clear();
        tape.acts[0].extend_from_slice(x);
        for (l, (off, din, dout)) in self.layers().enumerate() {
            let (w, b) = self.params[off..off + din * dout + dout].split_at(din * dout);
            let (prev, rest) = tape.acts.split_at_mut(l + 1);
            let out = &mut rest[0];
            out.clear();
            out.reserve(batch * dout);
            for _ in 0..batch {
                out.extend_from_slice(b);
            }
            gemm(batch, din, dout, &prev[l], false, w, false, 1.0, out);
            if l + 1 < n_layers {
                for v in out.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
        }
        Ok(tape.output())
    }

    /// Backpropagate `d_out` (gradient of the loss with respect to the
    /// recorded outputs). Parameter gradients are added into `grads`; the
    /// gradient with respect to the inputs is returned.
    pub fn backward(&self, tape: &Tape, d_out: &[f64], grads: &mut [f64]) -> Vec<f64> {
        assert_eq!(grads.len(), self.params.len());
        assert_eq!(d_out.len(), tape.batch * self.output_dim());
        let batch = tape.batch;
        let layers: Vec<_> = self.layers().collect();
        let mut delta = d_out.to_vec();
        for (l, &(off, din, dout)) in layers.iter().enumerate().rev() {
            let input = &tape.acts[l];
            let (gw, gb) = grads[off..off + din * dout + dout].split_at_mut(din * dout);
            gemm(din, batch, dout, input, true, &delta, false, 1.0, gw);
            for row in delta.chunks_exact(dout) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            let w = &self.params[off..off + din * dout];
            let mut d_in = vec![0.0; batch * din];
            gemm(batch, dout, din, &delta, false, w, true, 0.0, &mut d_in);
            if l > 0 {
                // ReLU: the recorded activation is zero exactly where the unit was off
                for (d, a) in d_in.iter_mut().zip(input) {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            delta = d_in;
        }
        delta
    }

    /// `target <- tau * source + (1 - tau) * target`, element-wise.
    pub fn polyak_from(&mut self, source: &Mlp, tau: f64) {
        assert_eq!(self.dims, source.dims);
        for (t, s) in self.params.iter_mut().zip(&source.params) {
            *t = tau * s + (1.0 - tau) * *t;
        }
    }
}

//! Tanh-squashed Gaussian policy over a scalar action.

use super::nn::{Mlp, NnError, Tape};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `ln(1 - tanh(u)^2)`, exact for every finite `u`.
pub fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

/// Network emitting `(mean, log_std)` of the pre-squash Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicy {
    pub net: Mlp,
}

/// Reparameterized samples for a batch of states.
#[derive(Debug, Clone, Default)]
pub struct PolicySample {
    pub actions: Vec<f64>,
    pub log_probs: Vec<f64>,
    noise: Vec<f64>,
    std: Vec<f64>,
    log_std_clamped: Vec<bool>,
}

impl GaussianPolicy {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut dims = vec![state_dim];
        dims.extend_from_slice(hidden);
        dims.push(2);
        Self { net: Mlp::new(&dims, rng) }
    }

    pub fn state_dim(&self) -> usize {
        self.net.input_dim()
    }

    /// `a = tanh(mean + std * noise)` with its log-density, recording the
    /// forward pass in `tape`.
    pub fn sample_batch(
        &self,
        states: &[f64],
        batch: usize,
        noise: &[f64],
        tape: &mut Tape,
    ) -> Result<PolicySample, NnError> {
        assert_eq!(noise.len(), batch);
        let out = self.net.forward_batch(states, batch, tape)?;
        let mut s = PolicySample { noise: noise.to_vec(), ..Default::default() };
        for (row, &eps) in out.chunks_exact(2).zip(noise) {
            let mean = row[0];
            let raw = row[1];
            let log_std = raw.clamp(LOG_STD_MIN, LOG_STD_MAX);
            let std = log_std.exp();
            let u = mean + std * eps;
            let a = u.tanh();
            let logp = -0.5 * eps * eps - log_std - HALF_LN_2PI - log_one_minus_tanh_sq(u);
            s.actions.push(a);
            s.log_probs.push(logp);
            s.std.push(std);
            s.log_std_clamped.push(raw != log_std);
        }
        Ok(s)
    }

    /// Accumulate parameter gradients given `dL/da` and `dL/dlogp` per row.
    pub fn backward(
        &self,
        tape: &Tape,
        sample: &PolicySample,
        d_action: &[f64],
        d_logp: &[f64],
        grads: &mut [f64],
    ) {
        let n = sample.actions.len();
        let mut d_out = vec![0.0; 2 * n];
        for i in 0..n {
            let a = sample.actions[i];
            let du = d_action[i] * (1.0 - a * a) + d_logp[i] * 2.0 * a;
            d_out[2 * i] = du;
            if !sample.log_std_clamped[i] {
                d_out[2 * i + 1] = du * sample.std[i] * sample.noise[i] - d_logp[i];
            }
        }
        self.net.backward(tape, &d_out, grads);
    }

    /// Draw one action for `state`.
    pub fn act<R: Rng + ?Sized>(&self, state: &[f64], rng: &mut R) -> f64 {
        let eps: f64 = rng.sample(StandardNormal);
        let mut tape = Tape::default();
        self.sample_batch(state, 1, &[eps], &mut tape).expect("state dimension").actions[0]
    }

    /// Squashed mean action.
    pub fn deterministic_action(&self, state: &[f64]) -> f64 {
        let out = self.net.forward(state).expect("state dimension");
        out[0].tanh()
    }

    /// Squashed mean actions for a batch, recording the pass for
    /// [`GaussianPolicy::backward_mean`].
    pub fn mean_actions(&self, states: &[f64], batch: usize, tape: &mut Tape) -> Result<Vec<f64>, NnError> {
        let out = self.net.forward_batch(states, batch, tape)?;
        Ok(out.chunks_exact(2).map(|r| r[0].tanh()).collect())
    }

    /// Gradients for a loss on the squashed mean actions.
    pub fn backward_mean(&self, tape: &Tape, actions: &[f64], d_action: &[f64], grads: &mut [f64]) {
        let mut d_out = vec![0.0; 2 * actions.len()];
        for (i, (a, d)) in actions.iter().zip(d_action).enumerate() {
            d_out[2 * i] = d * (1.0 - a * a);
        }
        self.net.backward(tape, &d_out, grads);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stable_log_correction() {
        for u in [-30.0, -3.0, -0.2, 0.0, 0.7, 5.0, 40.0] {
            let v = log_one_minus_tanh_sq(u);
            assert!(v.is_finite());
            if (u as f64).abs() < 5.0 {
                let t: f64 = (u as f64).tanh();
                assert!((v - (1.0 - t * t).ln()).abs() < 1e-10);
            }
        }
        // |a| = 1 - 1e-6 still has a finite correction
        let u = (1.0f64 - 1e-6).atanh();
        assert!(log_one_minus_tanh_sq(u).is_finite());
    }

    #[test]
    fn log_prob_matches_change_of_variables() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pi = GaussianPolicy::new(3, &[8], &mut rng);
        let s = [0.2, -0.1, 0.4];
        let out = pi.net.forward(&s).unwrap();
        let (mean, std) = (out[0], out[1].clamp(LOG_STD_MIN, LOG_STD_MAX).exp());
        let mut tape = Tape::default();
        let sm = pi.sample_batch(&s, 1, &[0.3], &mut tape).unwrap();
        let a = sm.actions[0];
        let u = a.atanh();
        let normal = (-0.5 * ((u - mean) / std).powi(2)).exp() / (std * (2.0 * std::f64::consts::PI).sqrt());
        let density = normal / (1.0 - a * a);
        assert!((sm.log_probs[0] - density.ln()).abs() < 1e-8);
    }

    #[test]
    fn actions_strictly_inside_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pi = GaussianPolicy::new(2, &[4], &mut rng);
        for _ in 0..1000 {
            let a = pi.act(&[rng.gen_range(-3.0..3.0), 1.0], &mut rng);
            assert!(a > -1.0 && a < 1.0);
        }
    }
}

//! Behavior cloning: regress the squashed mean action of a policy network
//! onto expert actions.

use super::adam::Adam;
use super::nn::Tape;
use super::policy::GaussianPolicy;
use super::rlil::LearnError;
use crate::env::{rollout, Env, PhysicsConstants, STATE_DIM};
use crate::expert::{ExpertBounds, ExpertPolicy};
use crate::mcsearch::{mix_seed, GsRecord};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcConfig {
    pub lr: f64,
    pub lr_decay: f64,
    pub decay_every: usize,
    pub batch: usize,
    pub epochs: usize,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for BcConfig {
    fn default() -> Self {
        Self { lr: 1e-3, lr_decay: 0.5, decay_every: 100, batch: 512, epochs: 500, hidden: vec![256, 256], seed: 0 }
    }
}

impl BcConfig {
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr * self.lr_decay.powi((epoch / self.decay_every.max(1)) as i32)
    }
}

/// State-action pairs in row-major layout.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BcDataset {
    pub states: Vec<f64>,
    pub actions: Vec<f64>,
}

impl BcDataset {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn push(&mut self, s: &[f64], a: f64) {
        self.states.extend_from_slice(s);
        self.actions.push(a);
    }
}

/// Expert transitions from rolling out database records in order, stopping
/// once `max_transitions` pairs are collected.
pub fn bc_dataset(
    env: &mut Env,
    records: &[GsRecord],
    physics: &PhysicsConstants,
    bounds: &ExpertBounds,
    max_transitions: usize,
) -> Result<BcDataset, LearnError> {
    let mut ds = BcDataset::default();
    for rec in records {
        if ds.len() >= max_transitions {
            break;
        }
        let ep = rollout(env, &rec.settings(physics), &mut ExpertPolicy(rec.params(bounds)))?;
        for t in ep.transitions.iter().take(max_transitions - ds.len()) {
            ds.push(t.s.as_slice(), t.a);
        }
    }
    Ok(ds)
}

#[derive(Debug, Clone)]
pub struct BcOutput {
    pub policy: GaussianPolicy,
    /// Mean squared error over the whole dataset after each epoch.
    pub loss_curve: Vec<f64>,
}

/// `mean((tanh(mean(s)) - a)^2)` with its gradient added into `grads`.
pub fn bc_loss_grad(policy: &GaussianPolicy, states: &[f64], actions: &[f64], grads: &mut [f64]) -> f64 {
    let n = actions.len();
    let mut tape = Tape::default();
    let pred = policy.mean_actions(states, n, &mut tape).expect("state dimension");
    let mut loss = 0.0;
    let mut d = vec![0.0; n];
    for i in 0..n {
        let e = pred[i] - actions[i];
        loss += e * e / n as f64;
        d[i] = 2.0 * e / n as f64;
    }
    policy.backward_mean(&tape, &pred, &d, grads);
    loss
}

pub fn dataset_mse(policy: &GaussianPolicy, ds: &BcDataset) -> f64 {
    let mut tape = Tape::default();
    let pred = policy.mean_actions(&ds.states, ds.len(), &mut tape).expect("state dimension");
    pred.iter().zip(&ds.actions).map(|(p, a)| (p - a) * (p - a)).sum::<f64>() / ds.len() as f64
}

pub fn train_bc(ds: &BcDataset, cfg: &BcConfig) -> Result<BcOutput, LearnError> {
    if ds.is_empty() {
        return Err(LearnError::EmptyDataset);
    }
    super::nn::flush_denormals();
    if cfg.batch == 0 || !(cfg.lr > 0.0) {
        return Err(LearnError::Config("batch and lr must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 0x0b));
    let mut policy = GaussianPolicy::new(STATE_DIM, &cfg.hidden, &mut rng);
    let mut adam = Adam::new(policy.net.num_params(), cfg.lr);
    let mut grads = vec![0.0; policy.net.num_params()];
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut bs = Vec::with_capacity(cfg.batch * STATE_DIM);
    let mut ba = Vec::with_capacity(cfg.batch);
    let mut loss_curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        adam.lr = cfg.lr_at(epoch);
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch) {
            bs.clear();
            ba.clear();
            for &i in chunk {
                bs.extend_from_slice(&ds.states[i * STATE_DIM..(i + 1) * STATE_DIM]);
                ba.push(ds.actions[i]);
            }
            grads.iter_mut().for_each(|g| *g = 0.0);
            bc_loss_grad(&policy, &bs, &ba, &mut grads);
            adam.step(policy.net.params_mut(), &grads);
        }
        loss_curve.push(dataset_mse(&policy, ds));
    }
    Ok(BcOutput { policy, loss_curve })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_halves_every_hundred() {
        let c = BcConfig::default();
        assert_eq!(c.lr_at(0), 1e-3);
        assert_eq!(c.lr_at(100), 5e-4);
        assert_eq!(c.lr_at(250), 2.5e-4);
    }

    #[test]
    fn repeated_pair_is_memorized() {
        let mut ds = BcDataset::default();
        for _ in 0..16 {
            ds.push(&[0.1; STATE_DIM], 0.4);
        }
        let cfg = BcConfig { hidden: vec![8, 8], epochs: 1000, batch: 16, decay_every: 10_000, ..Default::default() };
        let out = train_bc(&ds, &cfg).unwrap();
        let last = *out.loss_curve.last().unwrap();
        assert!(last < 1e-6, "{last}");
    }

    #[test]
    fn empty_dataset_rejected() {
        assert!(matches!(train_bc(&BcDataset::default(), &BcConfig::default()), Err(LearnError::EmptyDataset)));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let policy = GaussianPolicy::new(3, &[8], &mut rng);
        let states = [0.2, -0.4, 0.9, -0.3, 0.5, 0.1];
        let actions = [0.3, -0.7];
        let mut g = vec![0.0; policy.net.num_params()];
        bc_loss_grad(&policy, &states, &actions, &mut g);
        let h = 1e-5;
        for i in 0..g.len() {
            let mut p = policy.clone();
            let mut m = policy.clone();
            p.net.params_mut()[i] += h;
            m.net.params_mut()[i] -= h;
            let mut scratch = vec![0.0; g.len()];
            let fd = (bc_loss_grad(&p, &states, &actions, &mut scratch) - bc_loss_grad(&m, &states, &actions, &mut scratch))
                / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-8 * (1.0 + fd.abs()), "{i}: {fd} vs {}", g[i]);
        }
    }
}

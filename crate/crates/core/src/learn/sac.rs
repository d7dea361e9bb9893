//! Soft actor-critic with separate state-value network, two Q networks and
//! a Polyak-averaged value target.

use super::adam::Adam;
use super::buffer::Batch;
use super::nn::{Mlp, Tape};
use super::policy::{GaussianPolicy, PolicySample};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SacConfig {
    pub lr: f64,
    pub batch: usize,
    /// Polyak coefficient for the value target.
    pub tau: f64,
    pub gamma: f64,
    /// Frames of uniformly random actions before learning starts.
    pub warm_start: usize,
    pub epoch_frames: usize,
    /// Entropy coefficient (initial value when auto-tuning).
    pub alpha: f64,
    pub auto_alpha: bool,
    pub target_entropy: f64,
    /// Demo-use ratio: fraction of each minibatch taken from demonstrations.
    pub dur: f64,
    pub hidden: Vec<usize>,
    pub agent_capacity: usize,
    pub demo_capacity: usize,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            batch: 32,
            tau: 0.01,
            gamma: 0.99,
            warm_start: 10_000,
            epoch_frames: 1000,
            alpha: 0.2,
            auto_alpha: false,
            target_entropy: -1.0,
            dur: 0.1,
            hidden: vec![256, 256],
            agent_capacity: 1_000_000,
            demo_capacity: 1_000_000,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (k, v) in [("lr", self.lr), ("tau", self.tau), ("gamma", self.gamma), ("alpha", self.alpha)] {
            if !(v > 0.0) {
                return Err(format!("{k} must be positive"));
            }
        }
        if self.batch == 0 || self.epoch_frames == 0 || self.agent_capacity == 0 || self.demo_capacity == 0 {
            return Err("batch, epoch_frames and capacities must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.dur) {
            return Err("dur must lie in [0, 1]".into());
        }
        if self.tau > 1.0 || self.gamma > 1.0 {
            return Err("tau and gamma must not exceed 1".into());
        }
        Ok(())
    }
}

/// Policy, critics and value networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SacNets {
    pub policy: GaussianPolicy,
    pub q1: Mlp,
    pub q2: Mlp,
    pub v: Mlp,
    pub v_target: Mlp,
    pub log_alpha: f64,
}

impl SacNets {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, hidden: &[usize], alpha: f64, rng: &mut R) -> Self {
        let dims = |input: usize| {
            let mut d = vec![input];
            d.extend_from_slice(hidden);
            d.push(1);
            d
        };
        let policy = GaussianPolicy::new(state_dim, hidden, rng);
        let q1 = Mlp::new(&dims(state_dim + 1), rng);
        let q2 = Mlp::new(&dims(state_dim + 1), rng);
        let v = Mlp::new(&dims(state_dim), rng);
        let v_target = v.clone();
        Self { policy, q1, q2, v, v_target, log_alpha: alpha.ln() }
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn state_dim(&self) -> usize {
        self.policy.state_dim()
    }
}

/// Loss values from one update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SacLosses {
    pub q1: f64,
    pub q2: f64,
    pub v: f64,
    pub policy: f64,
    pub alpha: f64,
}

/// Gradients of every loss with respect to its own network.
#[derive(Debug, Clone)]
pub struct SacGrads {
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
    pub v: Vec<f64>,
    pub policy: Vec<f64>,
    pub log_alpha: f64,
    pub losses: SacLosses,
}

fn with_actions(states: &[f64], actions: &[f64], dim: usize) -> Vec<f64> {
    let mut x = Vec::with_capacity(actions.len() * (dim + 1));
    for (s, a) in states.chunks_exact(dim).zip(actions) {
        x.extend_from_slice(s);
        x.push(*a);
    }
    x
}

/// Policy sample at the batch states, evaluated by both critics.
struct PolicyBranch {
    tape_pi: Tape,
    sample: PolicySample,
    tape_q1: Tape,
    tape_q2: Tape,
    q1: Vec<f64>,
    q2: Vec<f64>,
}

impl PolicyBranch {
    fn new(nets: &SacNets, batch: &Batch, noise: &[f64]) -> Self {
        let n = batch.len();
        let dim = batch.state_dim;
        let mut tape_pi = Tape::default();
        let sample = nets.policy.sample_batch(&batch.states, n, noise, &mut tape_pi).expect("state dimension");
        let x = with_actions(&batch.states, &sample.actions, dim);
        let mut tape_q1 = Tape::default();
        let mut tape_q2 = Tape::default();
        let q1 = nets.q1.forward_batch(&x, n, &mut tape_q1).expect("critic input").to_vec();
        let q2 = nets.q2.forward_batch(&x, n, &mut tape_q2).expect("critic input").to_vec();
        Self { tape_pi, sample, tape_q1, tape_q2, q1, q2 }
    }

    fn min_q(&self, i: usize) -> f64 {
        self.q1[i].min(self.q2[i])
    }
}

/// `mean((q(s,a) - y)^2)` with `y = r + gamma * (1 - done) * v_target(s')`.
fn q_loss(q: &Mlp, targets: &[f64], batch: &Batch) -> (f64, Vec<f64>) {
    let n = batch.len();
    let x = with_actions(&batch.states, &batch.actions, batch.state_dim);
    let mut tape = Tape::default();
    let out = q.forward_batch(&x, n, &mut tape).expect("critic input");
    let mut loss = 0.0;
    let mut d = vec![0.0; n];
    for i in 0..n {
        let e = out[i] - targets[i];
        loss += e * e / n as f64;
        d[i] = 2.0 * e / n as f64;
    }
    let mut g = vec![0.0; q.num_params()];
    q.backward(&tape, &d, &mut g);
    (loss, g)
}

fn q_targets(nets: &SacNets, batch: &Batch, gamma: f64) -> Vec<f64> {
    let mut tape = Tape::default();
    let vt = nets.v_target.forward_batch(&batch.next_states, batch.len(), &mut tape).expect("state dimension");
    (0..batch.len()).map(|i| batch.rewards[i] + gamma * (1.0 - batch.dones[i]) * vt[i]).collect()
}

/// `mean((v(s) - (min_q(s, ã) - alpha * logπ(ã|s)))^2)`, target held fixed.
fn v_loss(nets: &SacNets, batch: &Batch, branch: &PolicyBranch, alpha: f64) -> (f64, Vec<f64>) {
    let n = batch.len();
    let mut tape = Tape::default();
    let out = nets.v.forward_batch(&batch.states, n, &mut tape).expect("state dimension");
    let mut loss = 0.0;
    let mut d = vec![0.0; n];
    for i in 0..n {
        let target = branch.min_q(i) - alpha * branch.sample.log_probs[i];
        let e = out[i] - target;
        loss += e * e / n as f64;
        d[i] = 2.0 * e / n as f64;
    }
    let mut g = vec![0.0; nets.v.num_params()];
    nets.v.backward(&tape, &d, &mut g);
    (loss, g)
}

/// `mean(alpha * logπ(ã|s) - min_q(s, ã))` through the reparameterized ã.
fn policy_loss(nets: &SacNets, branch: &PolicyBranch, alpha: f64) -> (f64, Vec<f64>) {
    let n = branch.q1.len();
    let dim = nets.state_dim();
    let mut loss = 0.0;
    let mut d_q1 = vec![0.0; n];
    let mut d_q2 = vec![0.0; n];
    for i in 0..n {
        loss += (alpha * branch.sample.log_probs[i] - branch.min_q(i)) / n as f64;
        if branch.q1[i] <= branch.q2[i] {
            d_q1[i] = -1.0 / n as f64;
        } else {
            d_q2[i] = -1.0 / n as f64;
        }
    }
    // critic parameter gradients are discarded; only input gradients matter
    let mut scratch = vec![0.0; nets.q1.num_params()];
    let dx1 = nets.q1.backward(&branch.tape_q1, &d_q1, &mut scratch);
    scratch.iter_mut().for_each(|v| *v = 0.0);
    let dx2 = nets.q2.backward(&branch.tape_q2, &d_q2, &mut scratch);
    let d_action: Vec<f64> = (0..n).map(|i| dx1[i * (dim + 1) + dim] + dx2[i * (dim + 1) + dim]).collect();
    let d_logp = vec![alpha / n as f64; n];
    let mut g = vec![0.0; nets.policy.net.num_params()];
    nets.policy.backward(&branch.tape_pi, &branch.sample, &d_action, &d_logp, &mut g);
    (loss, g)
}

/// Temperature loss `-mean(log_alpha * (logπ + target_entropy))`.
fn alpha_loss(log_alpha: f64, log_probs: &[f64], target_entropy: f64) -> (f64, f64) {
    let n = log_probs.len() as f64;
    let m = log_probs.iter().map(|lp| lp + target_entropy).sum::<f64>() / n;
    (-log_alpha * m, -m)
}

/// All four losses and their gradients at the current parameters, using
/// `noise` for the reparameterized policy sample.
pub fn compute_grads(nets: &SacNets, batch: &Batch, noise: &[f64], cfg: &SacConfig) -> SacGrads {
    let alpha = nets.alpha();
    let targets = q_targets(nets, batch, cfg.gamma);
    let (lq1, gq1) = q_loss(&nets.q1, &targets, batch);
    let (lq2, gq2) = q_loss(&nets.q2, &targets, batch);
    let branch = PolicyBranch::new(nets, batch, noise);
    let (lv, gv) = v_loss(nets, batch, &branch, alpha);
    let (lp, gp) = policy_loss(nets, &branch, alpha);
    let (la, ga) = alpha_loss(nets.log_alpha, &branch.sample.log_probs, cfg.target_entropy);
    SacGrads {
        q1: gq1,
        q2: gq2,
        v: gv,
        policy: gp,
        log_alpha: ga,
        losses: SacLosses { q1: lq1, q2: lq2, v: lv, policy: lp, alpha: la },
    }
}

/// Networks plus their optimizers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SacAgent {
    pub nets: SacNets,
    pub opt_policy: Adam,
    pub opt_q1: Adam,
    pub opt_q2: Adam,
    pub opt_v: Adam,
    pub opt_alpha: Adam,
    pub cfg: SacConfig,
}

impl SacAgent {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, cfg: SacConfig, rng: &mut R) -> Self {
        let nets = SacNets::new(state_dim, &cfg.hidden, cfg.alpha, rng);
        Self {
            opt_policy: Adam::new(nets.policy.net.num_params(), cfg.lr),
            opt_q1: Adam::new(nets.q1.num_params(), cfg.lr),
            opt_q2: Adam::new(nets.q2.num_params(), cfg.lr),
            opt_v: Adam::new(nets.v.num_params(), cfg.lr),
            opt_alpha: Adam::new(1, cfg.lr),
            nets,
            cfg,
        }
    }

    /// One gradient step on every network followed by the target update.
    pub fn update<R: Rng + ?Sized>(&mut self, batch: &Batch, rng: &mut R) -> SacLosses {
        let noise: Vec<f64> = (0..batch.len()).map(|_| rng.sample(StandardNormal)).collect();
        let g = compute_grads(&self.nets, batch, &noise, &self.cfg);
        self.opt_q1.step(self.nets.q1.params_mut(), &g.q1);
        self.opt_q2.step(self.nets.q2.params_mut(), &g.q2);
        self.opt_v.step(self.nets.v.params_mut(), &g.v);
        self.opt_policy.step(self.nets.policy.net.params_mut(), &g.policy);
        if self.cfg.auto_alpha {
            let mut la = [self.nets.log_alpha];
            self.opt_alpha.step(&mut la, &[g.log_alpha]);
            self.nets.log_alpha = la[0];
        }
        let tau = self.cfg.tau;
        let SacNets { v, v_target, .. } = &mut self.nets;
        v_target.polyak_from(v, tau);
        g.losses
    }
}

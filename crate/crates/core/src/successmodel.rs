//! Outcome classifier over `(state, action)` pairs and the action-sweep
//! explanations built on it.
//!
//! Every transition of an episode is labeled with the episode outcome
//! (success iff the return is 20). Successes are rare under general
//! sampling, so the expert dataset draws half of its episodes from the
//! search database.

use crate::env::{rollout, Env, EnvError, EpisodeRecord, PhysicsConstants, StateVector, STATE_DIM};
use crate::expert::{ExpertBounds, ExpertPolicy};
use crate::learn::nn::{Mlp, Tape};
use crate::learn::{Adam, GaussianPolicy};
use crate::mcsearch::{mix_seed, sample_settings, GsRecord, SamplingConfig};
use crate::traj::TrajectorySet;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::sync::Arc;
use thiserror::Error;

/// Classifier input: state followed by the action.
pub const INPUT_DIM: usize = STATE_DIM + 1;
/// Number of actions in an explanation sweep.
pub const GRID_POINTS: usize = 51;

#[derive(Debug, Error)]
pub enum SmError {
    #[error("dataset contains a single class")]
    SingleClassDataset,
    #[error("search database is empty")]
    EmptyDatabase,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dataset format, line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    #[serde(rename = "EX")]
    Expert,
    #[serde(rename = "RL")]
    Learned,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSample {
    pub s: StateVector,
    pub a: f64,
    pub o: u8,
    pub source: Source,
    /// Episode index within the dataset; the split keeps episodes whole.
    pub episode: usize,
}

impl OutcomeSample {
    pub fn input(&self) -> [f64; INPUT_DIM] {
        let mut x = [0.0; INPUT_DIM];
        x[..STATE_DIM].copy_from_slice(&self.s.0);
        x[STATE_DIM] = self.a;
        x
    }
}

/// Per-class and per-source sample counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub ex_success: usize,
    pub ex_failure: usize,
    pub rl_success: usize,
    pub rl_failure: usize,
}

impl Counts {
    pub fn of(samples: &[OutcomeSample]) -> Self {
        let mut c = Counts::default();
        for s in samples {
            match (s.source, s.o == 1) {
                (Source::Expert, true) => c.ex_success += 1,
                (Source::Expert, false) => c.ex_failure += 1,
                (Source::Learned, true) => c.rl_success += 1,
                (Source::Learned, false) => c.rl_failure += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.ex_success + self.ex_failure + self.rl_success + self.rl_failure
    }

    pub fn success_fraction(&self) -> f64 {
        (self.ex_success + self.rl_success) as f64 / self.total() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub state_dim: usize,
    pub counts: Counts,
    pub episodes_ex: usize,
    pub episodes_rl: usize,
    /// Learned-policy episodes per expert episode.
    pub rl_to_ex_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub samples: Vec<OutcomeSample>,
}

impl Dataset {
    /// Concatenate an expert and a learned-policy dataset, renumbering the
    /// second one's episodes.
    pub fn combine(ex: Vec<OutcomeSample>, rl: Vec<OutcomeSample>) -> Self {
        let episodes = |v: &[OutcomeSample]| v.iter().map(|s| s.episode + 1).max().unwrap_or(0);
        let episodes_ex = episodes(&ex);
        let episodes_rl = episodes(&rl);
        let mut samples = ex;
        samples.extend(rl.into_iter().map(|mut s| {
            s.episode += episodes_ex;
            s
        }));
        let rl_to_ex_ratio = if episodes_ex == 0 { f64::INFINITY } else { episodes_rl as f64 / episodes_ex as f64 };
        let meta = DatasetMeta { state_dim: STATE_DIM, counts: Counts::of(&samples), episodes_ex, episodes_rl, rl_to_ex_ratio };
        Self { meta, samples }
    }

    /// JSON lines: a `{"meta": ...}` header followed by one sample per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), SmError> {
        writeln!(w, "{}", serde_json::json!({ "meta": self.meta }))?;
        for s in &self.samples {
            serde_json::to_writer(&mut w, s).map_err(std::io::Error::other)?;
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, SmError> {
        #[derive(Deserialize)]
        struct Header {
            meta: DatasetMeta,
        }
        let mut lines = r.lines();
        let first = lines.next().ok_or(SmError::Format { line: 1, msg: "missing header".into() })??;
        let meta = serde_json::from_str::<Header>(&first)
            .map_err(|e| SmError::Format { line: 1, msg: e.to_string() })?
            .meta;
        let mut samples = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            samples.push(serde_json::from_str(&line).map_err(|e| SmError::Format { line: i + 2, msg: e.to_string() })?);
        }
        if meta.state_dim != STATE_DIM {
            return Err(SmError::Format { line: 1, msg: format!("state_dim {} != {STATE_DIM}", meta.state_dim) });
        }
        Ok(Self { meta, samples })
    }
}

/// Episode sampling parameters shared by both dataset builders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub n_episodes: usize,
    pub seed: u64,
    pub workers: usize,
    pub sampling: SamplingConfig,
    pub physics: PhysicsConstants,
    pub expert: ExpertBounds,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_episodes: 2000,
            seed: 0,
            workers: 1,
            sampling: SamplingConfig::default(),
            physics: PhysicsConstants::default(),
            expert: ExpertBounds::default(),
        }
    }
}

fn label(ep: &EpisodeRecord, source: Source, episode: usize) -> Vec<OutcomeSample> {
    let o = ep.outcome() as u8;
    ep.transitions.iter().map(|t| OutcomeSample { s: t.s, a: t.a, o, source, episode }).collect()
}

fn parallel_episodes<F>(
    trajectories: &Arc<TrajectorySet>,
    cfg: &DatasetConfig,
    episode: F,
) -> Result<Vec<EpisodeRecord>, SmError>
where
    F: Fn(&mut Env, &mut ChaCha8Rng) -> Result<EpisodeRecord, EnvError> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| SmError::Config(e.to_string()))?;
    let eps: Result<Vec<_>, EnvError> = pool.install(|| {
        (0..cfg.n_episodes)
            .into_par_iter()
            .map_init(
                || Env::new(Arc::clone(trajectories)),
                |env, i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, i as u64));
                    episode(env, &mut rng)
                },
            )
            .collect()
    });
    Ok(eps?)
}

/// Expert episodes: with probability one half the settings and controller
/// come from a uniformly chosen database record, otherwise both are drawn
/// fresh.
pub fn expert_episodes(
    trajectories: &Arc<TrajectorySet>,
    records: &[GsRecord],
    cfg: &DatasetConfig,
) -> Result<Vec<EpisodeRecord>, SmError> {
    if records.is_empty() {
        return Err(SmError::EmptyDatabase);
    }
    parallel_episodes(trajectories, cfg, |env, rng| {
        if rng.gen_bool(0.5) {
            let rec = records[rng.gen_range(0..records.len())];
            rollout(env, &rec.settings(&cfg.physics), &mut ExpertPolicy(rec.params(&cfg.expert)))
        } else {
            general_episode(env, rng, trajectories, cfg)
        }
    })
}

fn general_episode(
    env: &mut Env,
    rng: &mut ChaCha8Rng,
    trajectories: &TrajectorySet,
    cfg: &DatasetConfig,
) -> Result<EpisodeRecord, EnvError> {
    let seed = rng.gen();
    let settings = sample_settings(rng, &cfg.sampling, trajectories, &cfg.physics, seed);
    let params = cfg.expert.sample(rng);
    rollout(env, &settings, &mut ExpertPolicy(params))
}

/// Expert episodes without oversampling; used to measure the raw class
/// imbalance.
pub fn general_episodes(trajectories: &Arc<TrajectorySet>, cfg: &DatasetConfig) -> Result<Vec<EpisodeRecord>, SmError> {
    parallel_episodes(trajectories, cfg, |env, rng| general_episode(env, rng, trajectories, cfg))
}

pub fn build_dataset_ex(
    trajectories: &Arc<TrajectorySet>,
    records: &[GsRecord],
    cfg: &DatasetConfig,
) -> Result<Vec<OutcomeSample>, SmError> {
    let eps = expert_episodes(trajectories, records, cfg)?;
    Ok(eps.iter().enumerate().flat_map(|(i, ep)| label(ep, Source::Expert, i)).collect())
}

/// Episodes of the deterministic learned policy in database settings.
pub fn learned_episodes(
    policy: &GaussianPolicy,
    trajectories: &Arc<TrajectorySet>,
    records: &[GsRecord],
    cfg: &DatasetConfig,
) -> Result<Vec<EpisodeRecord>, SmError> {
    if records.is_empty() {
        return Err(SmError::EmptyDatabase);
    }
    parallel_episodes(trajectories, cfg, |env, rng| {
        let rec = records[rng.gen_range(0..records.len())];
        let mut act = |_: &_, obs: &StateVector| policy.deterministic_action(obs.as_slice());
        rollout(env, &rec.settings(&cfg.physics), &mut act)
    })
}

pub fn build_dataset_rl(
    policy: &GaussianPolicy,
    trajectories: &Arc<TrajectorySet>,
    records: &[GsRecord],
    cfg: &DatasetConfig,
) -> Result<Vec<OutcomeSample>, SmError> {
    let eps = learned_episodes(policy, trajectories, records, cfg)?;
    Ok(eps.iter().enumerate().flat_map(|(i, ep)| label(ep, Source::Learned, i)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub lr_decay: f64,
    pub decay_every: usize,
    pub batch: usize,
    pub epochs: usize,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SmConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 256],
            lr: 1e-3,
            lr_decay: 0.5,
            decay_every: 100,
            batch: 1024,
            epochs: 30,
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

impl SmConfig {
    pub fn validate(&self) -> Result<(), SmError> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(SmError::Config("train_fraction must lie in (0, 1)".into()));
        }
        if !(self.lr > 0.0) || self.batch == 0 || self.decay_every == 0 || !(self.lr_decay > 0.0) {
            return Err(SmError::Config("lr, lr_decay, batch and decay_every must be positive".into()));
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr * self.lr_decay.powi((epoch / self.decay_every) as i32)
    }
}

/// Two-logit classifier with standardized inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessModel {
    pub net: Mlp,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

/// `ln(e^a + e^b)` without overflow.
fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Softmax over two logits.
pub fn softmax2(z: [f64; 2]) -> [f64; 2] {
    let l = log_sum_exp(z[0], z[1]);
    [(z[0] - l).exp(), (z[1] - l).exp()]
}

impl SuccessModel {
    pub fn new<R: Rng + ?Sized>(hidden: &[usize], rng: &mut R) -> Self {
        let mut dims = vec![INPUT_DIM];
        dims.extend_from_slice(hidden);
        dims.push(2);
        Self { net: Mlp::new(&dims, rng), mean: vec![0.0; INPUT_DIM], scale: vec![1.0; INPUT_DIM] }
    }

    /// Set the input standardization from `inputs` (row-major).
    pub fn fit_scaler(&mut self, inputs: &[f64]) {
        let n = (inputs.len() / INPUT_DIM).max(1) as f64;
        let mut mean = vec![0.0; INPUT_DIM];
        for row in inputs.chunks_exact(INPUT_DIM) {
            mean.iter_mut().zip(row).for_each(|(m, x)| *m += x / n);
        }
        let mut var = vec![0.0; INPUT_DIM];
        for row in inputs.chunks_exact(INPUT_DIM) {
            var.iter_mut().zip(row).zip(&mean).for_each(|((v, x), m)| *v += (x - m) * (x - m) / n);
        }
        self.scale = var.iter().map(|v| if v.sqrt() > 1e-8 { 1.0 / v.sqrt() } else { 1.0 }).collect();
        self.mean = mean;
    }

    fn standardize(&self, inputs: &[f64]) -> Vec<f64> {
        inputs
            .chunks_exact(INPUT_DIM)
            .flat_map(|row| row.iter().zip(&self.mean).zip(&self.scale).map(|((x, m), s)| (x - m) * s))
            .collect()
    }

    pub fn logits(&self, s: &StateVector, a: f64) -> [f64; 2] {
        let mut x = s.0.to_vec();
        x.push(a);
        let out = self.net.forward(&self.standardize(&x)).expect("input dimension");
        [out[0], out[1]]
    }

    /// Predicted probability of success for taking `a` in `s`.
    pub fn probability(&self, s: &StateVector, a: f64) -> f64 {
        softmax2(self.logits(s, a))[1]
    }

    /// Success probabilities for a batch of raw inputs.
    pub fn probabilities(&self, inputs: &[f64]) -> Vec<f64> {
        let n = inputs.len() / INPUT_DIM;
        let mut tape = Tape::default();
        let out = self.net.forward_batch(&self.standardize(inputs), n, &mut tape).expect("input dimension");
        out.chunks_exact(2).map(|z| softmax2([z[0], z[1]])[1]).collect()
    }
}

/// Mean cross-entropy of the network on already standardized inputs, with
/// its parameter gradient added into `grads`.
pub fn cross_entropy_grad(net: &Mlp, x: &[f64], labels: &[u8], grads: &mut [f64]) -> f64 {
    let n = labels.len();
    let mut tape = Tape::default();
    let out = net.forward_batch(x, n, &mut tape).expect("input dimension");
    let mut loss = 0.0;
    let mut d = vec![0.0; 2 * n];
    for (i, (z, &o)) in out.chunks_exact(2).zip(labels).enumerate() {
        let l = log_sum_exp(z[0], z[1]);
        loss += (l - z[o as usize]) / n as f64;
        for c in 0..2 {
            let p = (z[c] - l).exp();
            d[2 * i + c] = (p - if c == o as usize { 1.0 } else { 0.0 }) / n as f64;
        }
    }
    net.backward(&tape, &d, grads);
    loss
}

/// Episode-grouped split stratified by outcome. Returns sample indices of
/// the training and test sides.
pub fn split(samples: &[OutcomeSample], train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let n_episodes = samples.iter().map(|s| s.episode + 1).max().unwrap_or(0);
    let mut outcome = vec![None; n_episodes];
    for s in samples {
        outcome[s.episode] = Some(s.o);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; n_episodes];
    for class in [0u8, 1] {
        let mut eps: Vec<usize> = (0..n_episodes).filter(|&e| outcome[e] == Some(class)).collect();
        eps.shuffle(&mut rng);
        let k = (eps.len() as f64 * train_fraction).round() as usize;
        for &e in &eps[..k] {
            in_train[e] = true;
        }
    }
    (0..samples.len()).partition(|&i| in_train[samples[i].episode])
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub majority_baseline: f64,
    pub precision_success: f64,
    pub recall_success: f64,
    pub precision_failure: f64,
    pub recall_failure: f64,
    pub n: usize,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Classification metrics at threshold 0.5.
pub fn metrics(probabilities: &[f64], labels: &[u8]) -> Metrics {
    let mut tp = 0;
    let mut tn = 0;
    let mut fp = 0;
    let mut fneg = 0;
    for (&p, &o) in probabilities.iter().zip(labels) {
        match (p > 0.5, o == 1) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
        }
    }
    let n = labels.len();
    let pos = tp + fneg;
    Metrics {
        accuracy: ratio(tp + tn, n),
        majority_baseline: ratio(pos.max(n - pos), n),
        precision_success: ratio(tp, tp + fp),
        recall_success: ratio(tp, pos),
        precision_failure: ratio(tn, tn + fneg),
        recall_failure: ratio(tn, n - pos),
        n,
    }
}

#[derive(Debug, Clone)]
pub struct SmOutput {
    pub model: SuccessModel,
    pub train_loss: Vec<f64>,
    pub test: Metrics,
    pub n_train: usize,
    pub n_test: usize,
}

fn gather(samples: &[OutcomeSample], idx: &[usize]) -> (Vec<f64>, Vec<u8>) {
    let mut x = Vec::with_capacity(idx.len() * INPUT_DIM);
    let mut y = Vec::with_capacity(idx.len());
    for &i in idx {
        x.extend_from_slice(&samples[i].input());
        y.push(samples[i].o);
    }
    (x, y)
}

/// Train the classifier on the training side of the split and report
/// held-out metrics.
pub fn train(samples: &[OutcomeSample], cfg: &SmConfig) -> Result<SmOutput, SmError> {
    cfg.validate()?;
    crate::learn::nn::flush_denormals();
    let successes = samples.iter().filter(|s| s.o == 1).count();
    if successes == 0 || successes == samples.len() {
        return Err(SmError::SingleClassDataset);
    }
    let (train_idx, test_idx) = split(samples, cfg.train_fraction, mix_seed(cfg.seed, 1));
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 2));
    let mut model = SuccessModel::new(&cfg.hidden, &mut rng);
    let (x_raw, y) = gather(samples, &train_idx);
    model.fit_scaler(&x_raw);
    let x = model.standardize(&x_raw);

    let mut adam = Adam::new(model.net.num_params(), cfg.lr);
    let mut grads = vec![0.0; model.net.num_params()];
    let mut order: Vec<usize> = (0..y.len()).collect();
    let mut bx = Vec::with_capacity(cfg.batch * INPUT_DIM);
    let mut by = Vec::with_capacity(cfg.batch);
    let mut train_loss = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        adam.lr = cfg.lr_at(epoch);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch) {
            bx.clear();
            by.clear();
            for &i in chunk {
                bx.extend_from_slice(&x[i * INPUT_DIM..(i + 1) * INPUT_DIM]);
                by.push(y[i]);
            }
            grads.iter_mut().for_each(|g| *g = 0.0);
            total += cross_entropy_grad(&model.net, &bx, &by, &mut grads) * chunk.len() as f64;
            adam.step(model.net.params_mut(), &grads);
        }
        train_loss.push(total / y.len() as f64);
    }

    let (xt, yt) = gather(samples, &test_idx);
    let test = metrics(&model.probabilities(&xt), &yt);
    Ok(SmOutput { model, train_loss, test, n_train: train_idx.len(), n_test: test_idx.len() })
}

/// The sweep actions `-1 + 0.04 k`, `k = 0..=50`.
pub fn action_grid() -> [f64; GRID_POINTS] {
    std::array::from_fn(|k| -1.0 + k as f64 / 25.0)
}

/// `(action, success probability)` across the action grid.
pub fn success_curve(model: &SuccessModel, s: &StateVector) -> Vec<(f64, f64)> {
    let grid = action_grid();
    let mut x = Vec::with_capacity(GRID_POINTS * INPUT_DIM);
    for a in grid {
        x.extend_from_slice(&s.0);
        x.push(a);
    }
    grid.into_iter().zip(model.probabilities(&x)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainStep {
    pub step: usize,
    /// Step index divided by the time-of-reach step.
    pub t_norm: f64,
    pub curve: Vec<(f64, f64)>,
    pub executed: f64,
    pub p_executed: f64,
    /// Whether the thresholded prediction at the executed action matches
    /// the episode outcome.
    pub flag: bool,
}

pub fn explain_episode(model: &SuccessModel, ep: &EpisodeRecord) -> Vec<ExplainStep> {
    let reach = ep.time_of_reach().max(1) as f64;
    let outcome = ep.outcome();
    ep.transitions
        .iter()
        .enumerate()
        .map(|(step, t)| {
            let p_executed = model.probability(&t.s, t.a);
            ExplainStep {
                step,
                t_norm: step as f64 / reach,
                curve: success_curve(model, &t.s),
                executed: t.a,
                p_executed,
                flag: (p_executed > 0.5) == outcome,
            }
        })
        .collect()
}

/// CSV with header `t_norm,action,probability,executed,flag`, one row per
/// grid action per step.
pub fn write_explanation_csv<W: Write>(w: W, steps: &[ExplainStep]) -> Result<(), SmError> {
    let mut w = csv::Writer::from_writer(w);
    let io = |e: csv::Error| SmError::Io(std::io::Error::other(e));
    w.write_record(["t_norm", "action", "probability", "executed", "flag"]).map_err(io)?;
    for st in steps {
        for (a, p) in &st.curve {
            w.write_record([st.t_norm.to_string(), a.to_string(), p.to_string(), st.executed.to_string(), st.flag.to_string()])
                .map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}

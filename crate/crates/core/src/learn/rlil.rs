//! SAC training loop with an optional demonstration buffer filled from
//! expert rollouts of stored search results.

use super::buffer::{sample_mixed_batch, BufferError, ReplayBuffer};
use super::policy::GaussianPolicy;
use super::sac::{SacAgent, SacConfig};
use crate::env::{rollout, Env, EnvError, EnvSettings, PhysicsConstants, STATE_DIM};
use crate::expert::{ExpertBounds, ExpertPolicy};
use crate::mcsearch::{mix_seed, sample_settings, GsRecord, SamplingConfig};
use crate::traj::TrajectorySet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("demonstrations requested but the search database is empty")]
    NoDemonstrations,
    #[error("empty dataset")]
    EmptyDataset,
    #[error(transparent)]
    Buffer(#[from] BufferError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

// stream tags so that episode settings, exploration and updates draw from
// unrelated generators
const STREAM_EPISODES: u64 = 0x01;
const STREAM_AGENT: u64 = 0x02;
const STREAM_DEMO: u64 = 0x03;
const STREAM_EVAL: u64 = 0x04;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlilConfig {
    pub sac: SacConfig,
    pub total_frames: usize,
    pub seed: u64,
    /// At most this many stored records are rolled out into the demo buffer.
    pub demo_episodes: usize,
    pub sampling: SamplingConfig,
    pub physics: PhysicsConstants,
    pub expert: ExpertBounds,
}

impl Default for RlilConfig {
    fn default() -> Self {
        Self {
            sac: SacConfig::default(),
            total_frames: 100_000,
            seed: 0,
            demo_episodes: 1000,
            sampling: SamplingConfig::default(),
            physics: PhysicsConstants::default(),
            expert: ExpertBounds::default(),
        }
    }
}

/// Training returns of the episodes that finished during one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epoch: usize,
    pub mean_return: f64,
    pub std_return: f64,
    pub n_episodes: usize,
}

impl CurvePoint {
    fn from_returns(epoch: usize, returns: &[f64]) -> Self {
        let (mean_return, std_return) = mean_std(returns);
        Self { epoch, mean_return, std_return, n_episodes: returns.len() }
    }
}

/// Mean and population standard deviation; NaN for an empty slice.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub agent: SacAgent,
    pub curve: Vec<CurvePoint>,
    pub demo_transitions: usize,
    /// Minibatch rows drawn from the demo buffer over the whole run.
    pub demo_rows_used: usize,
    pub updates: usize,
}

/// Roll out up to `max_episodes` records with their expert parameters and
/// store every transition in `buffer`. Returns the number stored.
pub fn fill_demo_buffer(
    env: &mut Env,
    records: &[GsRecord],
    physics: &PhysicsConstants,
    bounds: &ExpertBounds,
    max_episodes: usize,
    buffer: &mut ReplayBuffer,
) -> Result<usize, LearnError> {
    let mut n = 0;
    for rec in records.iter().take(max_episodes) {
        let ep = rollout(env, &rec.settings(physics), &mut ExpertPolicy(rec.params(bounds)))?;
        for t in &ep.transitions {
            buffer.push(t.s.as_slice(), t.a, t.r, t.s_next.as_slice(), t.done)?;
            n += 1;
        }
    }
    Ok(n)
}

/// Settings for `n` evaluation episodes, a pure function of `seed`.
pub fn eval_settings(
    seed: u64,
    n: usize,
    sampling: &SamplingConfig,
    trajectories: &TrajectorySet,
    physics: &PhysicsConstants,
) -> Vec<EnvSettings> {
    (0..n as u64)
        .map(|i| {
            let s = mix_seed(mix_seed(seed, STREAM_EVAL), i);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            sample_settings(&mut rng, sampling, trajectories, physics, s)
        })
        .collect()
}

/// Returns of the deterministic (squashed-mean) policy on each setting.
pub fn evaluate(
    policy: &GaussianPolicy,
    trajectories: Arc<TrajectorySet>,
    settings: &[EnvSettings],
) -> Result<Vec<u32>, EnvError> {
    let mut env = Env::new(trajectories);
    settings
        .iter()
        .map(|s| {
            let mut act = |_: &_, obs: &crate::env::StateVector| policy.deterministic_action(obs.as_slice());
            rollout(&mut env, s, &mut act).map(|ep| ep.total_return)
        })
        .collect()
}

/// Returns of a policy drawing actions uniformly from `[-1, 1]`.
pub fn evaluate_random(
    trajectories: Arc<TrajectorySet>,
    settings: &[EnvSettings],
    seed: u64,
) -> Result<Vec<u32>, EnvError> {
    let mut env = Env::new(trajectories);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    settings
        .iter()
        .map(|s| {
            let mut act = |_: &_, _: &_| rng.gen_range(-1.0..=1.0);
            rollout(&mut env, s, &mut act).map(|ep| ep.total_return)
        })
        .collect()
}

/// Train SAC, mixing demonstrations into every minibatch at ratio
/// `cfg.sac.dur`. With `dur = 0` the demo buffer is never built.
pub fn train_rlil(
    trajectories: Arc<TrajectorySet>,
    records: &[GsRecord],
    cfg: &RlilConfig,
) -> Result<TrainOutput, LearnError> {
    train_rlil_with_progress(trajectories, records, cfg, &mut std::io::sink())
}

/// As [`train_rlil`], writing one line per finished epoch to `progress`.
pub fn train_rlil_with_progress(
    trajectories: Arc<TrajectorySet>,
    records: &[GsRecord],
    cfg: &RlilConfig,
    progress: &mut dyn Write,
) -> Result<TrainOutput, LearnError> {
    cfg.sac.validate().map_err(LearnError::Config)?;
    super::nn::flush_denormals();
    cfg.physics.validate().map_err(|e| LearnError::Config(e.to_string()))?;
    let sac = &cfg.sac;
    let use_demos = sac.dur > 0.0;
    if use_demos && records.is_empty() {
        return Err(LearnError::NoDemonstrations);
    }

    let mut env = Env::new(Arc::clone(&trajectories));
    let mut demo = ReplayBuffer::new(STATE_DIM, sac.demo_capacity);
    let demo_transitions = if use_demos {
        fill_demo_buffer(&mut env, records, &cfg.physics, &cfg.expert, cfg.demo_episodes, &mut demo)?
    } else {
        0
    };

    let mut agent_rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, STREAM_AGENT));
    let mut agent = SacAgent::new(STATE_DIM, sac.clone(), &mut agent_rng);
    let mut buffer = ReplayBuffer::new(STATE_DIM, sac.agent_capacity);
    let episode_master = mix_seed(cfg.seed, STREAM_EPISODES);
    let mut demo_rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, STREAM_DEMO));

    let mut episode = 0u64;
    let mut new_episode = |env: &mut Env| {
        let s = mix_seed(episode_master, episode);
        episode += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let settings = sample_settings(&mut rng, &cfg.sampling, &trajectories, &cfg.physics, s);
        env.reset(&settings)
    };

    let mut obs = new_episode(&mut env)?;
    let mut ep_return = 0.0;
    let mut finished = Vec::new();
    let mut curve = Vec::with_capacity(cfg.total_frames / sac.epoch_frames);
    let mut demo_rows_used = 0;
    let mut updates = 0;
    for frame in 0..cfg.total_frames {
        let a = if frame < sac.warm_start {
            agent_rng.gen_range(-1.0..=1.0)
        } else {
            agent.nets.policy.act(obs.as_slice(), &mut agent_rng)
        };
        let out = env.step(a)?;
        buffer.push(obs.as_slice(), a, out.reward, out.obs.as_slice(), out.done)?;
        ep_return += out.reward;
        obs = out.obs;
        if out.done {
            finished.push(ep_return);
            ep_return = 0.0;
            obs = new_episode(&mut env)?;
        }

        if frame >= sac.warm_start {
            let batch = if use_demos {
                sample_mixed_batch(&mut demo_rng, &buffer, &demo, sac.batch, sac.dur)?
            } else {
                let mut b = super::buffer::Batch::new(STATE_DIM);
                buffer.sample_into(&mut demo_rng, sac.batch, &mut b, "agent")?;
                b
            };
            demo_rows_used += batch.n_demo;
            agent.update(&batch, &mut agent_rng);
            updates += 1;
        }

        if (frame + 1) % sac.epoch_frames == 0 {
            let point = CurvePoint::from_returns(curve.len(), &finished);
            writeln!(
                progress,
                "epoch {} mean_return {:.3} std_return {:.3} episodes {}",
                point.epoch, point.mean_return, point.std_return, point.n_episodes
            )?;
            curve.push(point);
            finished.clear();
        }
    }
    Ok(TrainOutput { agent, curve, demo_transitions, demo_rows_used, updates })
}

/// Learning curve as CSV with header `epoch,mean_return,std_return,n_episodes`.
pub fn write_curve_csv<W: Write>(writer: W, curve: &[CurvePoint]) -> Result<(), LearnError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["epoch", "mean_return", "std_return", "n_episodes"]).map_err(csv_err)?;
    for p in curve {
        w.write_record([
            p.epoch.to_string(),
            p.mean_return.to_string(),
            p.std_return.to_string(),
            p.n_episodes.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> LearnError {
    LearnError::Io(std::io::Error::other(e))
}

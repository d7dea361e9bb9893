//! Monte Carlo search for (environment settings, controller parameters)
//! pairs whose expert rollout earns a return above the acceptance threshold.
//!
//! Each sample index gets its own seed derived from the master seed, so the
//! accepted set does not depend on how samples are scheduled over workers.

use crate::env::{rollout, Env, EnvError, EnvSettings, EpisodeRecord, PhysicsConstants, REWARD_WINDOW};
use crate::expert::{ExpertBounds, ExpertParams, ExpertPolicy};
use crate::traj::TrajectorySet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{} sample(s) failed; first at index {}: {}", .0.len(), .0[0].0, .0[0].1)]
    Workers(Vec<(usize, EnvError)>),
    #[error("replay of record {index} returned {got}, stored {expected}")]
    ReplayMismatch { index: usize, expected: u32, got: u32 },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("io error on {path}: {msg}")]
    Io { path: String, msg: String },
}

/// Distribution of environment settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub dx: (f64, f64),
    pub dy: (f64, f64),
    pub tn_mean: f64,
    pub tn_std: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self { dx: (-0.06, 0.06), dy: (-0.06, 0.06), tn_mean: 0.5, tn_std: 0.8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_samples: usize,
    pub workers: usize,
    pub master_seed: u64,
    pub sampling: SamplingConfig,
    pub expert: ExpertBounds,
    pub physics: PhysicsConstants,
    /// Records are kept when the return is strictly greater than this.
    pub accept_threshold: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_samples: 100_000,
            workers: 1,
            master_seed: 0,
            sampling: SamplingConfig::default(),
            expert: ExpertBounds::default(),
            physics: PhysicsConstants::default(),
            accept_threshold: 1.0,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.n_samples == 0 {
            return Err(SearchError::Config("n_samples must be positive".into()));
        }
        if !(self.sampling.tn_std > 0.0) {
            return Err(SearchError::Config("tn_std must be positive".into()));
        }
        if self.sampling.dx.0 > self.sampling.dx.1 || self.sampling.dy.0 > self.sampling.dy.1 {
            return Err(SearchError::Config("offset range is inverted".into()));
        }
        self.physics.validate().map_err(SearchError::Config)
    }
}

/// SplitMix64 finalizer, used to derive independent per-sample seeds.
pub fn mix_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draw environment settings. Time noise that would give a non-positive
/// warped duration is redrawn.
pub fn sample_settings<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &SamplingConfig,
    trajectories: &TrajectorySet,
    physics: &PhysicsConstants,
    seed: u64,
) -> EnvSettings {
    let trajectory_id = rng.gen_range(0..trajectories.len());
    let dx = rng.gen_range(cfg.dx.0..=cfg.dx.1);
    let dy = rng.gen_range(cfg.dy.0..=cfg.dy.1);
    let base = trajectories.get(trajectory_id).expect("id in range").duration();
    let normal = Normal::new(cfg.tn_mean, cfg.tn_std).expect("tn_std validated positive");
    let tn = loop {
        let tn = normal.sample(rng);
        if base * physics.time_scale + tn > physics.dt {
            break tn;
        }
    };
    EnvSettings { trajectory_id, dx, dy, tn, physics: *physics, seed }
}

/// One stored search result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GsRecord {
    pub traj_id: usize,
    pub dx: f64,
    pub dy: f64,
    pub tn: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub dc: f64,
    pub seed: u64,
    #[serde(rename = "return")]
    pub achieved_return: u32,
}

impl GsRecord {
    pub fn new(settings: &EnvSettings, params: &ExpertParams, achieved_return: u32) -> Self {
        Self {
            traj_id: settings.trajectory_id,
            dx: settings.dx,
            dy: settings.dy,
            tn: settings.tn,
            k: params.k,
            dc: params.d_c,
            seed: settings.seed,
            achieved_return,
        }
    }

    pub fn settings(&self, physics: &PhysicsConstants) -> EnvSettings {
        EnvSettings {
            trajectory_id: self.traj_id,
            dx: self.dx,
            dy: self.dy,
            tn: self.tn,
            physics: *physics,
            seed: self.seed,
        }
    }

    pub fn params(&self, bounds: &ExpertBounds) -> ExpertParams {
        ExpertParams { k: self.k, d_c: self.dc, h_open: bounds.h_open, h_closed: bounds.h_closed }
    }

    /// Whether the stored rollout collected the whole reward window.
    pub fn is_full_return(&self) -> bool {
        self.achieved_return as usize == REWARD_WINDOW
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub n_samples: usize,
    pub n_accepted: usize,
    pub rate: f64,
    pub per_traj_counts: Vec<usize>,
    pub n_full_return: usize,
}

#[derive(Debug, Clone)]
pub struct SearchOutput {
    /// Accepted records in sample-index order.
    pub records: Vec<GsRecord>,
    pub stats: SearchStats,
}

/// Settings and controller parameters for sample `index`.
pub fn draw_sample(cfg: &McConfig, trajectories: &TrajectorySet, index: u64) -> (EnvSettings, ExpertParams) {
    let seed = mix_seed(cfg.master_seed, index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let settings = sample_settings(&mut rng, &cfg.sampling, trajectories, &cfg.physics, seed);
    let params = cfg.expert.sample(&mut rng);
    (settings, params)
}

/// Run the search over `cfg.n_samples` independent samples on
/// `cfg.workers` threads.
pub fn run_search(cfg: &McConfig, trajectories: Arc<TrajectorySet>) -> Result<SearchOutput, SearchError> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| SearchError::Config(e.to_string()))?;
    let results: Vec<Result<Option<GsRecord>, EnvError>> = pool.install(|| {
        (0..cfg.n_samples)
            .into_par_iter()
            .map_init(
                || Env::new(Arc::clone(&trajectories)),
                |env, i| {
                    let (settings, params) = draw_sample(cfg, &trajectories, i as u64);
                    let ep = rollout(env, &settings, &mut ExpertPolicy(params))?;
                    Ok((ep.total_return as f64 > cfg.accept_threshold)
                        .then(|| GsRecord::new(&settings, &params, ep.total_return)))
                },
            )
            .collect()
    });

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(Some(rec)) => records.push(rec),
            Ok(None) => {}
            Err(e) => failures.push((i, e)),
        }
    }
    if !failures.is_empty() {
        return Err(SearchError::Workers(failures));
    }
    let mut per_traj_counts = vec![0; trajectories.len()];
    for r in &records {
        per_traj_counts[r.traj_id] += 1;
    }
    let stats = SearchStats {
        n_samples: cfg.n_samples,
        n_accepted: records.len(),
        rate: records.len() as f64 / cfg.n_samples as f64,
        per_traj_counts,
        n_full_return: records.iter().filter(|r| r.is_full_return()).count(),
    };
    Ok(SearchOutput { records, stats })
}

/// Re-run the expert of `record` in its environment.
pub fn replay(
    env: &mut Env,
    record: &GsRecord,
    physics: &PhysicsConstants,
    bounds: &ExpertBounds,
) -> Result<EpisodeRecord, EnvError> {
    rollout(env, &record.settings(physics), &mut ExpertPolicy(record.params(bounds)))
}

/// Replay every record and fail on the first return that differs from the
/// stored one.
pub fn verify_replay(
    env: &mut Env,
    records: &[GsRecord],
    physics: &PhysicsConstants,
    bounds: &ExpertBounds,
) -> Result<(), SearchError> {
    for (index, r) in records.iter().enumerate() {
        let got = replay(env, r, physics, bounds)?.total_return;
        if got != r.achieved_return {
            return Err(SearchError::ReplayMismatch { index, expected: r.achieved_return, got });
        }
    }
    Ok(())
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct GsIndex {
    count: usize,
    offsets: Vec<u64>,
    full_return: Vec<usize>,
}

fn index_path(path: &Path) -> std::path::PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".index.json");
    p.into()
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> SearchError {
    SearchError::Io { path: path.display().to_string(), msg: e.to_string() }
}

/// Append records to a JSON-lines store and refresh its index
/// (`<path>.index.json`: byte offsets plus positions of full-return records).
pub fn append_records(path: &Path, records: &[GsRecord]) -> Result<(), SearchError> {
    let ipath = index_path(path);
    let mut index: GsIndex = match std::fs::read_to_string(&ipath) {
        Ok(text) => serde_json::from_str(&text).map_err(|e| io_err(&ipath, e))?,
        Err(_) => GsIndex::default(),
    };
    let mut file = std::fs::OpenOptions::new().create(true).append(true).open(path).map_err(|e| io_err(path, e))?;
    let mut offset = file.metadata().map_err(|e| io_err(path, e))?.len();
    let mut buf = Vec::new();
    for r in records {
        let line = serde_json::to_string(r).expect("record serializes");
        if r.is_full_return() {
            index.full_return.push(index.count);
        }
        index.offsets.push(offset);
        index.count += 1;
        offset += line.len() as u64 + 1;
        buf.extend_from_slice(line.as_bytes());
        buf.push(b'\n');
    }
    file.write_all(&buf).map_err(|e| io_err(path, e))?;
    std::fs::write(&ipath, serde_json::to_string(&index).expect("index serializes")).map_err(|e| io_err(&ipath, e))
}

pub fn read_records(path: &Path) -> Result<Vec<GsRecord>, SearchError> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| io_err(path, format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

use crate::error::CliError;
use crate::params::{defaults, physics_defaults, Params};
use dextron_core::env::{rollout, Env, EpisodeRecord, StateVector};
use dextron_core::expert::{ExpertBounds, ExpertPolicy};
use dextron_core::learn::bc::{bc_dataset, train_bc, BcConfig};
use dextron_core::learn::rlil::{eval_settings, mean_std, train_rlil_with_progress, write_curve_csv};
use dextron_core::learn::{checkpoint, PolicyCheckpoint, RlilConfig, SacConfig};
use dextron_core::mcsearch::{self, GsRecord, McConfig, SamplingConfig};
use dextron_core::successmodel::{self as sm, Dataset, DatasetConfig, SmConfig, SuccessModel};
use dextron_core::traj::{self, SyntheticConfig, TrajectorySet, TrajectorySource};
use serde_json::json;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const POLICY_KIND: &str = "policy";
pub const SUCCESS_MODEL_KIND: &str = "success-model";

/// Options shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Common {
    pub dir: PathBuf,
    pub config: Option<PathBuf>,
    pub sets: Vec<String>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

impl Common {
    /// Resolve `own` plus the seed and worker keys (and physics when
    /// `physics` is set), with command-line flags taking precedence.
    fn params(&self, own: &[(&str, &str)], physics: bool) -> Result<Params, CliError> {
        let mut d = defaults(own);
        d.push(("seed".into(), "0".into()));
        let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
        d.push(("workers".into(), workers.to_string()));
        if physics {
            d.extend(physics_defaults());
        }
        let mut p = Params::resolve(d, self.config.as_deref(), &self.sets)?;
        if let Some(s) = self.seed {
            p.set("seed", s.to_string());
        }
        if let Some(w) = self.workers {
            p.set("workers", w.to_string());
        }
        Ok(p)
    }

    fn ensure_dir(&self) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.dir).map_err(|e| CliError::io(&self.dir, e))
    }

    pub fn trajectories_dir(&self) -> PathBuf {
        self.dir.join("trajectories")
    }

    pub fn gs_path(&self) -> PathBuf {
        self.dir.join("gs.jsonl")
    }

    pub fn policy_path(&self, mode: &str) -> PathBuf {
        self.dir.join(format!("policy_{mode}.json"))
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.dir.join("sm_dataset.jsonl")
    }

    pub fn model_path(&self) -> PathBuf {
        self.dir.join("success_model.json")
    }
}

fn progress(msg: impl std::fmt::Display) {
    eprintln!("{msg}");
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("json value serializes");
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn missing_checkpoint(path: &Path) -> CliError {
    CliError::new("missing-checkpoint", format!("{} does not exist", path.display()))
}

/// Every `*.csv` in `dir`, sorted by file name.
pub fn load_trajectories(dir: &Path) -> Result<Arc<TrajectorySet>, CliError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    let trajs = files
        .iter()
        .map(|p| traj::import_csv(p).map_err(|e| CliError::new("trajectory", format!("{}: {e}", p.display()))))
        .collect::<Result<Vec<_>, _>>()?;
    if trajs.is_empty() {
        return Err(CliError::new("trajectory", format!("{}: no trajectory files", dir.display())));
    }
    Ok(Arc::new(TrajectorySet::new(trajs, TrajectorySource::Imported)?))
}

fn sampling(p: &Params) -> Result<SamplingConfig, CliError> {
    let dx: f64 = p.get("dx_range")?;
    let dy: f64 = p.get("dy_range")?;
    Ok(SamplingConfig { dx: (-dx, dx), dy: (-dy, dy), tn_mean: p.get("tn_mean")?, tn_std: p.get("tn_std")? })
}

fn expert_bounds(p: &Params) -> Result<ExpertBounds, CliError> {
    Ok(ExpertBounds {
        k: (p.get("k_min")?, p.get("k_max")?),
        d_c: (p.get("dc_min")?, p.get("dc_max")?),
        ..ExpertBounds::default()
    })
}

const SAMPLING_KEYS: [(&str, &str); 8] = [
    ("dx_range", "0.06"),
    ("dy_range", "0.06"),
    ("tn_mean", "0.5"),
    ("tn_std", "0.8"),
    ("k_min", "1.0"),
    ("k_max", "1.5"),
    ("dc_min", "0.01"),
    ("dc_max", "0.9"),
];

fn with_sampling(own: &[(&'static str, &'static str)]) -> Vec<(&'static str, &'static str)> {
    let mut v = own.to_vec();
    v.extend_from_slice(&SAMPLING_KEYS);
    v
}

pub fn gen(common: &Common, import: &[PathBuf]) -> Result<serde_json::Value, CliError> {
    let p = common.params(
        &[
            ("lift_height", "0.2"),
            ("duration", "1.2"),
            ("capture_dt", "0.01"),
            ("reach_fraction", "0.7"),
            ("dwell_fraction", "0.0"),
            ("standoff", "0.105"),
        ],
        false,
    )?;
    let out = common.trajectories_dir();
    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let trajs: Vec<traj::Trajectory> = if import.is_empty() {
        let cfg = SyntheticConfig {
            reach_fraction: p.get("reach_fraction")?,
            dwell_fraction: p.get("dwell_fraction")?,
            standoff: p.get("standoff")?,
            ..SyntheticConfig::default()
        };
        let set = traj::synthetic_set_with(&cfg, p.get("lift_height")?, p.get("duration")?, p.get("capture_dt")?);
        set.iter().cloned().collect()
    } else {
        import
            .iter()
            .map(|path| traj::import_csv(path).map_err(|e| CliError::new("trajectory", format!("{}: {e}", path.display()))))
            .collect::<Result<_, _>>()?
    };
    for (i, t) in trajs.iter().enumerate() {
        let path = out.join(format!("traj_{i:02}.csv"));
        traj::export_csv(t, &path).map_err(|e| CliError::new("trajectory", format!("{}: {e}", path.display())))?;
        let back = traj::import_csv(&path).map_err(|e| CliError::new("trajectory", format!("{}: {e}", path.display())))?;
        if back.len() != t.len() {
            return Err(CliError::new("trajectory", format!("{}: round-trip changed sample count", path.display())));
        }
    }
    p.write(&common.dir, "gen")?;
    Ok(json!({ "trajectories": trajs.len(), "dir": out, "source": if import.is_empty() { "synthetic" } else { "imported" } }))
}

pub fn mc(common: &Common) -> Result<serde_json::Value, CliError> {
    let p = common.params(&with_sampling(&[("n_samples", "100000"), ("accept_threshold", "1")]), true)?;
    common.ensure_dir()?;
    let trajs = load_trajectories(&common.trajectories_dir())?;
    let cfg = McConfig {
        n_samples: p.get("n_samples")?,
        workers: p.get("workers")?,
        master_seed: p.get("seed")?,
        sampling: sampling(&p)?,
        expert: expert_bounds(&p)?,
        physics: p.physics()?,
        accept_threshold: p.get("accept_threshold")?,
    };
    progress(format_args!("searching {} samples on {} workers", cfg.n_samples, cfg.workers));
    let out = mcsearch::run_search(&cfg, trajs)?;
    let gs = common.gs_path();
    for stale in [gs.clone(), PathBuf::from(format!("{}.index.json", gs.display()))] {
        if stale.exists() {
            std::fs::remove_file(&stale).map_err(|e| CliError::io(&stale, e))?;
        }
    }
    mcsearch::append_records(&gs, &out.records)?;
    let stats = serde_json::to_value(&out.stats).expect("stats serialize");
    write_json(&common.dir.join("mc_stats.json"), &stats)?;
    p.write(&common.dir, "mc")?;
    Ok(stats)
}

fn load_gs(common: &Common) -> Result<Vec<GsRecord>, CliError> {
    Ok(mcsearch::read_records(&common.gs_path())?)
}

pub fn train(common: &Common, mode: &str) -> Result<serde_json::Value, CliError> {
    let dur_default = if mode == "rlil" { "0.1" } else { "0" };
    let p = common.params(
        &with_sampling(&[
            ("dur", dur_default),
            ("total_frames", "100000"),
            ("warm_start", "10000"),
            ("epoch_frames", "1000"),
            ("lr", "0.0003"),
            ("batch", "32"),
            ("tau", "0.01"),
            ("gamma", "0.99"),
            ("alpha", "0.2"),
            ("auto_alpha", "false"),
            ("hidden", "256,256"),
            ("demo_episodes", "1000"),
            ("buffer_capacity", "1000000"),
            ("bc_lr", "0.001"),
            ("bc_batch", "512"),
            ("bc_epochs", "500"),
            ("bc_transitions", "100000"),
        ]),
        true,
    )?;
    common.ensure_dir()?;
    let trajs = load_trajectories(&common.trajectories_dir())?;
    let physics = p.physics()?;
    let bounds = expert_bounds(&p)?;
    let hidden = p.widths("hidden")?;
    let seed: u64 = p.get("seed")?;
    let ckpt_path = common.policy_path(mode);

    let summary = match mode {
        "bc" => {
            let gs = load_gs(common)?;
            let mut env = Env::new(Arc::clone(&trajs));
            let ds = bc_dataset(&mut env, &gs, &physics, &bounds, p.get("bc_transitions")?)?;
            let cfg = BcConfig { lr: p.get("bc_lr")?, batch: p.get("bc_batch")?, epochs: p.get("bc_epochs")?, hidden, seed, ..BcConfig::default() };
            progress(format_args!("behavior cloning on {} transitions", ds.len()));
            let out = train_bc(&ds, &cfg)?;
            let loss_path = common.dir.join("bc_loss.csv");
            let mut text = String::from("epoch,mse\n");
            for (i, l) in out.loss_curve.iter().enumerate() {
                text.push_str(&format!("{i},{l}\n"));
            }
            std::fs::write(&loss_path, text).map_err(|e| CliError::io(&loss_path, e))?;
            checkpoint::save(&ckpt_path, POLICY_KIND, &PolicyCheckpoint::Bc { policy: out.policy })?;
            json!({ "mode": mode, "transitions": ds.len(), "final_mse": out.loss_curve.last(), "checkpoint": ckpt_path })
        }
        "rlil" | "rl" => {
            let dur: f64 = p.get("dur")?;
            let gs = if dur > 0.0 { load_gs(common)? } else { Vec::new() };
            let capacity: usize = p.get("buffer_capacity")?;
            let cfg = RlilConfig {
                sac: SacConfig {
                    lr: p.get("lr")?,
                    batch: p.get("batch")?,
                    tau: p.get("tau")?,
                    gamma: p.get("gamma")?,
                    warm_start: p.get("warm_start")?,
                    epoch_frames: p.get("epoch_frames")?,
                    alpha: p.get("alpha")?,
                    auto_alpha: p.get("auto_alpha")?,
                    dur,
                    hidden,
                    agent_capacity: capacity,
                    demo_capacity: capacity,
                    ..SacConfig::default()
                },
                total_frames: p.get("total_frames")?,
                seed,
                demo_episodes: p.get("demo_episodes")?,
                sampling: sampling(&p)?,
                physics,
                expert: bounds,
            };
            progress(format_args!("training {mode} for {} frames (dur {dur})", cfg.total_frames));
            let out = train_rlil_with_progress(trajs, &gs, &cfg, &mut std::io::stderr())?;
            let curve_path = common.dir.join(format!("curve_{mode}.csv"));
            write_curve_csv(create(&curve_path)?, &out.curve)?;
            checkpoint::save(&ckpt_path, POLICY_KIND, &PolicyCheckpoint::Sac { agent: Box::new(out.agent) })?;
            json!({
                "mode": mode,
                "epochs": out.curve.len(),
                "updates": out.updates,
                "demo_transitions": out.demo_transitions,
                "curve": curve_path,
                "checkpoint": ckpt_path,
            })
        }
        other => return Err(CliError::config(format!("unknown training mode `{other}`"))),
    };
    p.write(&common.dir, &format!("train_{mode}"))?;
    Ok(summary)
}

fn load_policy(path: &Path) -> Result<PolicyCheckpoint, CliError> {
    if !path.exists() {
        return Err(missing_checkpoint(path));
    }
    Ok(checkpoint::load(path, POLICY_KIND)?)
}

pub fn eval(common: &Common, mode: &str, checkpoint_path: Option<&Path>) -> Result<serde_json::Value, CliError> {
    let p = common.params(&with_sampling(&[("episodes", "100")]), true)?;
    let episodes: usize = p.get("episodes")?;
    if episodes == 0 {
        return Err(CliError::config("episodes must be positive"));
    }
    common.ensure_dir()?;
    let trajs = load_trajectories(&common.trajectories_dir())?;
    let physics = p.physics()?;
    let seed: u64 = p.get("seed")?;
    let returns: Vec<u32> = if mode == "expert" {
        // stored controllers replayed in their own settings
        let gs = load_gs(common)?;
        let bounds = expert_bounds(&p)?;
        let mut env = Env::new(trajs);
        gs.iter()
            .take(episodes)
            .map(|r| mcsearch::replay(&mut env, r, &physics, &bounds).map(|ep| ep.total_return))
            .collect::<Result<_, _>>()?
    } else {
        let path = checkpoint_path.map(Path::to_path_buf).unwrap_or_else(|| common.policy_path(mode));
        let ckpt = load_policy(&path)?;
        let settings = eval_settings(seed, episodes, &sampling(&p)?, &trajs, &physics);
        dextron_core::learn::evaluate(ckpt.policy(), trajs, &settings)?
    };
    let as_f: Vec<f64> = returns.iter().map(|&r| r as f64).collect();
    let (mean, std) = mean_std(&as_f);
    let mut histogram = [0usize; 21];
    for &r in &returns {
        histogram[r as usize] += 1;
    }
    let report = json!({
        "mode": mode,
        "seed": seed,
        "episodes": returns.len(),
        "mean_return": mean,
        "std_return": std,
        "returns": returns,
        "histogram": histogram,
    });
    write_json(&common.dir.join(format!("eval_{mode}.json")), &report)?;
    p.write(&common.dir, &format!("eval_{mode}"))?;
    Ok(report)
}

fn dataset_config(p: &Params, n_episodes: usize, seed: u64) -> Result<DatasetConfig, CliError> {
    Ok(DatasetConfig {
        n_episodes,
        seed,
        workers: p.get("workers")?,
        sampling: sampling(p)?,
        physics: p.physics()?,
        expert: expert_bounds(p)?,
    })
}

pub fn sm_data(common: &Common, policy_path: Option<&Path>) -> Result<serde_json::Value, CliError> {
    let p = common.params(&with_sampling(&[("episodes", "1000"), ("rl_ratio", "1.0")]), true)?;
    common.ensure_dir()?;
    let trajs = load_trajectories(&common.trajectories_dir())?;
    let gs = load_gs(common)?;
    let seed: u64 = p.get("seed")?;
    let n_ex: usize = p.get("episodes")?;
    let ratio: f64 = p.get("rl_ratio")?;
    if !(ratio >= 0.0) {
        return Err(CliError::config("rl_ratio must be non-negative"));
    }
    progress(format_args!("rolling out {n_ex} expert episodes"));
    let ex = sm::build_dataset_ex(&trajs, &gs, &dataset_config(&p, n_ex, mcsearch::mix_seed(seed, 1))?)?;
    let n_rl = (n_ex as f64 * ratio).round() as usize;
    let rl = if n_rl > 0 {
        let path = policy_path.map(Path::to_path_buf).unwrap_or_else(|| common.policy_path("rlil"));
        let ckpt = load_policy(&path)?;
        progress(format_args!("rolling out {n_rl} learned-policy episodes"));
        sm::build_dataset_rl(ckpt.policy(), &trajs, &gs, &dataset_config(&p, n_rl, mcsearch::mix_seed(seed, 2))?)?
    } else {
        Vec::new()
    };
    let ds = Dataset::combine(ex, rl);
    let path = common.dataset_path();
    ds.write_jsonl(create(&path)?)?;
    p.write(&common.dir, "sm-data")?;
    Ok(json!({ "dataset": path, "samples": ds.samples.len(), "meta": ds.meta }))
}

pub fn sm_train(common: &Common) -> Result<serde_json::Value, CliError> {
    let p = common.params(
        &[
            ("hidden", "256,256"),
            ("lr", "0.001"),
            ("lr_decay", "0.5"),
            ("decay_every", "100"),
            ("batch", "1024"),
            ("epochs", "30"),
            ("train_fraction", "0.8"),
        ],
        false,
    )?;
    common.ensure_dir()?;
    let path = common.dataset_path();
    let file = File::open(&path).map_err(|e| CliError::io(&path, e))?;
    let ds = Dataset::read_jsonl(BufReader::new(file))?;
    let cfg = SmConfig {
        hidden: p.widths("hidden")?,
        lr: p.get("lr")?,
        lr_decay: p.get("lr_decay")?,
        decay_every: p.get("decay_every")?,
        batch: p.get("batch")?,
        epochs: p.get("epochs")?,
        train_fraction: p.get("train_fraction")?,
        seed: p.get("seed")?,
    };
    progress(format_args!("training success model on {} samples", ds.samples.len()));
    let out = sm::train(&ds.samples, &cfg)?;
    checkpoint::save(&common.model_path(), SUCCESS_MODEL_KIND, &out.model)?;
    let loss_path = common.dir.join("sm_loss.csv");
    let mut text = String::from("epoch,cross_entropy\n");
    for (i, l) in out.train_loss.iter().enumerate() {
        text.push_str(&format!("{i},{l}\n"));
    }
    std::fs::write(&loss_path, text).map_err(|e| CliError::io(&loss_path, e))?;
    let metrics = json!({ "test": out.test, "n_train": out.n_train, "n_test": out.n_test, "final_loss": out.train_loss.last() });
    write_json(&common.dir.join("sm_metrics.json"), &metrics)?;
    p.write(&common.dir, "sm-train")?;
    Ok(metrics)
}

pub fn explain(common: &Common, policy_path: Option<&Path>) -> Result<serde_json::Value, CliError> {
    let p = common.params(&with_sampling(&[("episodes", "5"), ("policy", "rlil")]), true)?;
    common.ensure_dir()?;
    let trajs = load_trajectories(&common.trajectories_dir())?;
    let gs = load_gs(common)?;
    if gs.is_empty() {
        return Err(CliError::new("search", "search database is empty"));
    }
    let model_path = common.model_path();
    if !model_path.exists() {
        return Err(missing_checkpoint(&model_path));
    }
    let model: SuccessModel = checkpoint::load(&model_path, SUCCESS_MODEL_KIND)?;
    let physics = p.physics()?;
    let bounds = expert_bounds(&p)?;
    let which: String = p.get("policy")?;
    let n: usize = p.get("episodes")?;
    let mut env = Env::new(Arc::clone(&trajs));
    let policy = if which == "expert" {
        None
    } else {
        let path = policy_path.map(Path::to_path_buf).unwrap_or_else(|| common.policy_path(&which));
        Some(load_policy(&path)?)
    };
    let out_dir = common.dir.join("explain");
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::io(&out_dir, e))?;
    let stride = (gs.len() / n.max(1)).max(1);
    let mut episodes = Vec::new();
    for (i, rec) in gs.iter().step_by(stride).take(n).enumerate() {
        let settings = rec.settings(&physics);
        let ep: EpisodeRecord = match &policy {
            None => rollout(&mut env, &settings, &mut ExpertPolicy(rec.params(&bounds)))?,
            Some(ck) => {
                let pol = ck.policy();
                let mut act = |_: &_, obs: &StateVector| pol.deterministic_action(obs.as_slice());
                rollout(&mut env, &settings, &mut act)?
            }
        };
        let steps = sm::explain_episode(&model, &ep);
        let path = out_dir.join(format!("episode_{i:02}.csv"));
        sm::write_explanation_csv(create(&path)?, &steps)?;
        let correct = steps.iter().filter(|s| s.flag).count();
        episodes.push(json!({
            "file": path,
            "return": ep.total_return,
            "outcome": ep.outcome(),
            "time_of_reach": ep.time_of_reach(),
            "steps": steps.len(),
            "correct_steps": correct,
        }));
    }
    let summary = json!({ "policy": which, "episodes": episodes });
    write_json(&out_dir.join("summary.json"), &summary)?;
    p.write(&common.dir, "explain")?;
    Ok(summary)
}

use dextron_core::env::{Env, PhysicsConstants};
use dextron_core::expert::ExpertBounds;
use dextron_core::learn::checkpoint::{self, PolicyCheckpoint};
use dextron_core::learn::{train_rlil, RlilConfig, SacConfig};
use dextron_core::mcsearch::{append_records, read_records, run_search, verify_replay, GsRecord, McConfig};
use dextron_core::successmodel::{
    build_dataset_ex, build_dataset_rl, explain_episode, general_episodes, train, write_explanation_csv, Dataset,
    DatasetConfig, SmConfig,
};
use dextron_core::traj::{default_synthetic_set, export_csv, import_csv, TrajectorySet, TrajectorySource};
use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dextron-core-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn trajectories() -> Arc<TrajectorySet> {
    static SET: OnceLock<Arc<TrajectorySet>> = OnceLock::new();
    Arc::clone(SET.get_or_init(|| Arc::new(default_synthetic_set())))
}

fn small_database() -> &'static [GsRecord] {
    static GS: OnceLock<Vec<GsRecord>> = OnceLock::new();
    GS.get_or_init(|| {
        let cfg = McConfig { n_samples: 3000, workers: 2, ..McConfig::default() };
        run_search(&cfg, trajectories()).unwrap().records
    })
}

#[test]
fn exported_trajectories_reimport_unchanged_set() {
    let dir = scratch("traj");
    let set = trajectories();
    let mut back = Vec::new();
    for (i, t) in set.iter().enumerate() {
        let path = dir.join(format!("traj_{i:02}.csv"));
        export_csv(t, &path).unwrap();
        back.push(import_csv(&path).unwrap());
    }
    let reloaded = TrajectorySet::new(back, TrajectorySource::Imported).unwrap();
    assert_eq!(reloaded.len(), set.len());
    for (a, b) in set.iter().zip(reloaded.iter()) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.samples().iter().zip(b.samples()) {
            assert!((x.t - y.t).abs() < 1e-12);
            assert!(x.pose.orientation.distance(y.pose.orientation) < 1e-9);
        }
    }
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn stored_records_survive_disk_and_replay() {
    let gs = small_database();
    assert!(!gs.is_empty());
    let dir = scratch("gs");
    let path = dir.join("gs.jsonl");
    append_records(&path, &gs[..gs.len() / 2]).unwrap();
    append_records(&path, &gs[gs.len() / 2..]).unwrap();
    let back = read_records(&path).unwrap();
    assert_eq!(back, gs);
    let mut env = Env::new(trajectories());
    verify_replay(&mut env, &back, &PhysicsConstants::default(), &ExpertBounds::default()).unwrap();
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn short_training_run_checkpoints_and_feeds_the_success_model() {
    let trajs = trajectories();
    let gs = small_database();
    let cfg = RlilConfig {
        total_frames: 1500,
        demo_episodes: 20,
        sac: SacConfig { hidden: vec![16, 16], warm_start: 500, epoch_frames: 500, ..SacConfig::default() },
        ..RlilConfig::default()
    };
    let out = train_rlil(Arc::clone(&trajs), gs, &cfg).unwrap();
    assert_eq!(out.updates, 1000);
    assert!(out.demo_transitions > 0);
    assert!(!out.curve.is_empty());

    let dir = scratch("ckpt");
    let path = dir.join("policy.json");
    let ckpt = PolicyCheckpoint::Sac { agent: Box::new(out.agent) };
    checkpoint::save(&path, "policy", &ckpt).unwrap();
    let back: PolicyCheckpoint = checkpoint::load(&path, "policy").unwrap();
    assert!(checkpoint::load::<PolicyCheckpoint>(&path, "success-model").is_err());
    let probe = [0.1; 21];
    assert_eq!(ckpt.policy().deterministic_action(&probe), back.policy().deterministic_action(&probe));

    let ds_cfg = DatasetConfig { n_episodes: 30, ..DatasetConfig::default() };
    let ex = build_dataset_ex(&trajs, gs, &ds_cfg).unwrap();
    let rl = build_dataset_rl(back.policy(), &trajs, gs, &ds_cfg).unwrap();
    let dataset = Dataset::combine(ex, rl);
    assert_eq!(dataset.meta.episodes_ex, 30);
    assert_eq!(dataset.meta.episodes_rl, 30);
    let mut buf = Vec::new();
    dataset.write_jsonl(&mut buf).unwrap();
    let reread = Dataset::read_jsonl(buf.as_slice()).unwrap();
    assert_eq!(reread, dataset);

    let sm = train(&dataset.samples, &SmConfig { hidden: vec![16], epochs: 3, ..SmConfig::default() }).unwrap();
    assert_eq!(sm.train_loss.len(), 3);
    let ep = &general_episodes(&trajs, &DatasetConfig { n_episodes: 1, ..ds_cfg }).unwrap()[0];
    let steps = explain_episode(&sm.model, ep);
    assert_eq!(steps.len(), ep.len());
    let mut csv = Vec::new();
    write_explanation_csv(&mut csv, &steps).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("t_norm,action,probability,executed,flag"));
    assert_eq!(text.lines().count(), 1 + 51 * steps.len());
    std::fs::remove_dir_all(&dir).unwrap();
}

use dextron_core::expert::{expert_action, ExpertParams};
use dextron_core::learn::buffer::{demo_count, sample_mixed_batch, ReplayBuffer};
use dextron_core::traj::{apply_offset, default_synthetic_set, resample, slerp, squad, time_warp, Quat};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn quat() -> impl Strategy<Value = Quat> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -3.0..3.0f64)
        .prop_filter("non-degenerate axis", |(x, y, z, _)| x * x + y * y + z * z > 1e-3)
        .prop_map(|(x, y, z, a)| Quat::from_axis_angle([x, y, z], a))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn expert_action_is_bounded(h in 0.0..1.0f64, d in 0.0..1.5f64, k in 1.0..1.5f64, dc in 0.01..0.9f64) {
        let a = expert_action(h, d, &ExpertParams::new(k, dc));
        prop_assert!((-1.0..=1.0).contains(&a));
    }

    #[test]
    fn slerp_and_squad_stay_unit(a in quat(), b in quat(), c in quat(), d in quat(), u in 0.0..1.0f64) {
        prop_assert!((slerp(a, b, u).norm() - 1.0).abs() < 1e-9);
        prop_assert!((squad(a, b, c, d, u).norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn augmented_paths_are_uniform(id in 0usize..16, tn in -1.0..2.0f64, dx in -0.06..0.06f64, dy in -0.06..0.06f64) {
        let set = default_synthetic_set();
        let base = set.get(id).unwrap();
        let warped = time_warp(base, 2.5, tn).unwrap();
        let out = resample(&apply_offset(&warped, dx, dy), 0.02).unwrap();
        let first = out.samples()[0].pose.position;
        let orig = base.samples()[0].pose.position;
        prop_assert!((first[0] - orig[0] - dx).abs() < 1e-9);
        prop_assert!((first[1] - orig[1] - dy).abs() < 1e-9);
        for w in out.samples().windows(2) {
            prop_assert!((w[1].t - w[0].t - 0.02).abs() < 1e-9);
        }
    }

    #[test]
    fn mixed_batches_hold_exact_demo_share(batch in 1usize..128, dur in 0.0..1.0f64, seed in any::<u64>()) {
        let mut agent = ReplayBuffer::new(1, 64);
        let mut demo = ReplayBuffer::new(1, 64);
        for i in 0..10 {
            agent.push(&[0.0], 0.0, i as f64, &[0.0], false).unwrap();
            demo.push(&[1.0], 0.0, i as f64, &[1.0], false).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = sample_mixed_batch(&mut rng, &agent, &demo, batch, dur).unwrap();
        let want = demo_count(batch, dur);
        prop_assert_eq!(b.len(), batch);
        prop_assert_eq!((0..b.len()).filter(|&i| b.state(i)[0] == 1.0).count(), want);
    }
}

//! End-to-end replay properties: start offsets are transported rigidly and
//! object-relative trajectories are invariant to object placement.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tabletop::demo::{record_demo, replay, scripted_demo, DemoScript};
use tabletop::geometry::{lift_planar, PlanarPose, RigidTransform};
use tabletop::scene::{place_object_with_offset, Mode, SceneConfig};

const RATE: f64 = 30.0;

fn demo_over_training_object(cfg: &SceneConfig) -> tabletop::demo::Demonstration {
    // demonstration starts above the training placement, tilted so the
    // reorientation rotation is exercised
    let initial = lift_planar(
        &PlanarPose::new(0.01, -0.015, 0.35),
        cfg.table_height + cfg.bottleneck_height,
    )
    .compose(&RigidTransform::from_rotation_x(0.12))
    .compose(&RigidTransform::from_rotation_y(-0.07));
    let twists = scripted_demo(
        &DemoScript::TwistInsert {
            depth: 0.04,
            speed: 0.06,
            twist_angle: std::f64::consts::FRAC_PI_2,
            yaw_rate: 1.2,
        },
        RATE,
    )
    .unwrap();
    record_demo(&initial, twists, RATE, cfg.table_height).unwrap()
}

#[test]
fn object_relative_replay_is_placement_invariant() {
    let cfg = SceneConfig::default();
    let demo = demo_over_training_object(&cfg);

    let train_object = lift_planar(&PlanarPose::identity(), cfg.table_height);
    let offset = train_object.inverse().compose(demo.bottleneck_vertical());

    // training-time trajectory, relative to the training object
    let train_traj = replay(&demo, demo.initial_pose());
    let train_relative: Vec<RigidTransform> = train_traj
        .iter()
        .map(|p| train_object.inverse().compose(p))
        .collect();

    for seed in 0..50 {
        let world = place_object_with_offset(&cfg, seed, Mode::Test, &offset);
        let start = world.bottleneck_true().compose(demo.reorient());
        let traj = replay(&demo, &start);
        let object_tf = world.object_transform();
        for (pose, expected) in traj.iter().zip(train_relative.iter()) {
            let relative = object_tf.inverse().compose(pose);
            assert!(
                relative.max_abs_diff(expected) < 1e-6,
                "object-relative replay diverged at seed {seed}"
            );
        }
    }
}

#[test]
fn start_error_is_transported_not_amplified() {
    let cfg = SceneConfig::default();
    let demo = demo_over_training_object(&cfg);
    let base = replay(&demo, demo.initial_pose());
    let mut rng = ChaCha8Rng::seed_from_u64(17);

    for _ in 0..30 {
        let delta = lift_planar(
            &PlanarPose::new(
                rng.random_range(-0.01..0.01),
                rng.random_range(-0.01..0.01),
                rng.random_range(-0.15..0.15),
            ),
            rng.random_range(-0.005..0.005),
        );
        let start = demo.initial_pose().compose(&delta);
        let shifted = replay(&demo, &start);
        for (p, q) in base.iter().zip(shifted.iter()) {
            let expected = shifted[0].compose(&base[0].inverse().compose(p));
            assert!(q.max_abs_diff(&expected) < 1e-6);
        }
        // the transported offset keeps its rotation angle (conjugation invariant)
        let terminal_offset = base
            .last()
            .unwrap()
            .inverse()
            .compose(shifted.last().unwrap());
        assert!((terminal_offset.rotation_angle() - delta.rotation_angle()).abs() < 1e-6);
    }
}

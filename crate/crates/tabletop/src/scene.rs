//! The simulated tabletop world: object placement in the task space, a
//! virtual bottleneck rigidly attached to the object, a perfect-kinematics
//! end-effector, and the constant-speed linear approach controller.
//!
//! The controller is modeled as exact; all benchmark error is attributed to
//! sensing. The object never moves within an episode.

use crate::geometry::{lift_planar, wrap_angle, PlanarPose, RigidTransform};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Yaw span (full range, centered on the training yaw) for training-phase
/// approach starts.
pub const TRAIN_START_YAW_RANGE: f64 = std::f64::consts::FRAC_PI_2;

/// Height slack used when deciding whether the end-effector is still above
/// the bottleneck.
pub const HEIGHT_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("invalid scene configuration: {0}")]
    InvalidConfig(String),
}

/// Episode phase: training keeps the object at its canonical placement,
/// testing randomizes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy)]
pub struct SceneConfig {
    /// Side length of the square task space the object can occupy (m).
    pub task_space_side: f64,
    /// Approach start height above the table (m).
    pub approach_height: f64,
    /// World z of the table surface (m).
    pub table_height: f64,
    /// Default bottleneck height above the table (m); overridden by a
    /// demonstration when one defines the bottleneck.
    pub bottleneck_height: f64,
    /// Full yaw span (rad) for test-phase object placement, centered on the
    /// training yaw of zero.
    pub object_yaw_range: f64,
    /// Constant approach speed (m/s).
    pub controller_speed: f64,
    /// Control period (s).
    pub dt: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            task_space_side: 0.40,
            approach_height: 0.50,
            table_height: 0.0,
            bottleneck_height: 0.10,
            object_yaw_range: std::f64::consts::FRAC_PI_2,
            controller_speed: 0.10,
            dt: 1.0 / 30.0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), SceneError> {
        let positive = [
            ("task_space_side", self.task_space_side),
            ("approach_height", self.approach_height),
            ("bottleneck_height", self.bottleneck_height),
            ("controller_speed", self.controller_speed),
            ("dt", self.dt),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(SceneError::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !self.table_height.is_finite() {
            return Err(SceneError::InvalidConfig("table_height must be finite".into()));
        }
        if !(self.object_yaw_range.is_finite()
            && self.object_yaw_range >= 0.0
            && self.object_yaw_range <= 2.0 * std::f64::consts::PI)
        {
            return Err(SceneError::InvalidConfig(
                "object_yaw_range must span at most 2π".into(),
            ));
        }
        if self.approach_height <= self.bottleneck_height {
            return Err(SceneError::InvalidConfig(
                "approach_height must exceed bottleneck_height".into(),
            ));
        }
        Ok(())
    }

    /// World z of the bottleneck when it is defined by this config rather
    /// than by a demonstration.
    pub fn default_bottleneck_z(&self) -> f64 {
        self.table_height + self.bottleneck_height
    }
}

/// One episode's world. The bottleneck is cached but always re-derivable
/// from the object pose and the stored object→bottleneck offset.
#[derive(Debug, Clone)]
pub struct WorldState {
    object_pose: PlanarPose,
    object_to_bottleneck: RigidTransform,
    bottleneck_true: RigidTransform,
    table_height: f64,
    pub ee_pose: RigidTransform,
}

impl WorldState {
    pub fn new(
        cfg: &SceneConfig,
        object_pose: PlanarPose,
        object_to_bottleneck: RigidTransform,
    ) -> Self {
        let object_tf = lift_planar(&object_pose, cfg.table_height);
        let bottleneck_true = object_tf.compose(&object_to_bottleneck);
        let ee_pose = lift_planar(
            &PlanarPose::identity(),
            cfg.table_height + cfg.approach_height,
        );
        Self {
            object_pose,
            object_to_bottleneck,
            bottleneck_true,
            table_height: cfg.table_height,
            ee_pose,
        }
    }

    pub fn object_pose(&self) -> &PlanarPose {
        &self.object_pose
    }

    /// The object frame lifted onto the table surface.
    pub fn object_transform(&self) -> RigidTransform {
        lift_planar(&self.object_pose, self.table_height)
    }

    pub fn object_to_bottleneck(&self) -> &RigidTransform {
        &self.object_to_bottleneck
    }

    /// Ground-truth bottleneck pose in the base frame.
    pub fn bottleneck_true(&self) -> &RigidTransform {
        &self.bottleneck_true
    }

    /// World z of the bottleneck.
    pub fn bottleneck_z(&self) -> f64 {
        self.bottleneck_true.translation()[2]
    }

    /// Ground-truth bottleneck pose relative to the end-effector
    /// (`T_EB = T_ER · T_RB`), the quantity the sensor corrupts.
    pub fn true_relative_bottleneck(&self) -> RigidTransform {
        self.ee_pose.inverse().compose(&self.bottleneck_true)
    }

    /// True whether the end-effector is still above the bottleneck height.
    pub fn ee_above_bottleneck(&self) -> bool {
        self.ee_pose.translation()[2] > self.bottleneck_z() + HEIGHT_EPS
    }
}

/// Place the object with the config's default bottleneck offset (straight
/// above the object origin at the configured bottleneck height).
pub fn place_object(cfg: &SceneConfig, rng_seed: u64, mode: Mode) -> WorldState {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    place_object_with_rng(cfg, &mut rng, mode)
}

pub fn place_object_with_rng(cfg: &SceneConfig, rng: &mut impl Rng, mode: Mode) -> WorldState {
    let offset = RigidTransform::from_translation(0.0, 0.0, cfg.bottleneck_height);
    place_object_with_offset_rng(cfg, rng, mode, &offset)
}

/// Place the object with an explicit object→bottleneck offset (used when a
/// demonstration defines the bottleneck).
pub fn place_object_with_offset(
    cfg: &SceneConfig,
    rng_seed: u64,
    mode: Mode,
    object_to_bottleneck: &RigidTransform,
) -> WorldState {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    place_object_with_offset_rng(cfg, &mut rng, mode, object_to_bottleneck)
}

pub fn place_object_with_offset_rng(
    cfg: &SceneConfig,
    rng: &mut impl Rng,
    mode: Mode,
    object_to_bottleneck: &RigidTransform,
) -> WorldState {
    let pose = match mode {
        Mode::Train => PlanarPose::identity(),
        Mode::Test => {
            let half = cfg.task_space_side / 2.0;
            let half_yaw = cfg.object_yaw_range / 2.0;
            PlanarPose::new(
                rng.random_range(-half..=half),
                rng.random_range(-half..=half),
                if half_yaw > 0.0 {
                    rng.random_range(-half_yaw..=half_yaw)
                } else {
                    0.0
                },
            )
        }
    };
    WorldState::new(cfg, pose, *object_to_bottleneck)
}

/// Sample an approach start pose. Training starts are spread over the task
/// space with randomized yaw; test starts are fixed above the task-space
/// center.
pub fn sample_approach_start(cfg: &SceneConfig, rng_seed: u64, mode: Mode) -> RigidTransform {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    sample_approach_start_with_rng(cfg, &mut rng, mode)
}

pub fn sample_approach_start_with_rng(
    cfg: &SceneConfig,
    rng: &mut impl Rng,
    mode: Mode,
) -> RigidTransform {
    let z = cfg.table_height + cfg.approach_height;
    match mode {
        Mode::Train => {
            let half = cfg.task_space_side / 2.0;
            let half_yaw = TRAIN_START_YAW_RANGE / 2.0;
            lift_planar(
                &PlanarPose::new(
                    rng.random_range(-half..=half),
                    rng.random_range(-half..=half),
                    rng.random_range(-half_yaw..=half_yaw),
                ),
                z,
            )
        }
        Mode::Test => lift_planar(&PlanarPose::identity(), z),
    }
}

/// One control step of the approach controller: move `min(speed·dt,
/// remaining)` along the straight line to the target position, interpolating
/// yaw along the shortest arc in proportion to the distance covered. The
/// result is always a vertical pose.
pub fn linear_step(
    ee: &RigidTransform,
    target: &RigidTransform,
    speed: f64,
    dt: f64,
) -> RigidTransform {
    debug_assert!(speed > 0.0 && dt > 0.0);
    let delta = target.translation() - ee.translation();
    let remaining = delta.norm();
    let max_step = speed * dt;
    if remaining <= max_step {
        return *target;
    }
    let frac = max_step / remaining;
    let pos = ee.translation() + delta * frac;
    let yaw = wrap_angle(ee.yaw() + wrap_angle(target.yaw() - ee.yaw()) * frac);
    lift_planar(&PlanarPose::new(pos[0], pos[1], yaw), pos[2])
}

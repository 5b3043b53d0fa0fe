//! A kinematic tabletop simulator and state-estimation library for
//! approach-and-replay manipulation.
//!
//! A task is split into a coarse linear *approach* to a virtual *bottleneck*
//! pose attached to the object, followed by a fine *interaction* executed by
//! replaying recorded end-effector velocities open loop. The bottleneck pose
//! is estimated from a stream of noisy synthetic observations by one of
//! several sequential estimators, from keep-the-first-prediction up to
//! inverse-variance fusion.
//!
//! Modules:
//! * [`geometry`]: rigid transforms, planar poses, twist integration.
//! * [`scene`]: the simulated world and the linear approach controller.
//! * [`sensor`]: synthetic noisy pose observations, dataset collection, and
//!   the three uncertainty models.
//! * [`estimation`]: the sequential estimators under comparison.
//! * [`demo`]: demonstration capture, scripted twist programs, replay.

pub mod demo;
pub mod estimation;
pub mod geometry;
pub mod scene;
pub mod sensor;

pub use geometry::{PlanarPose, RigidTransform, Twist};
pub use scene::{SceneConfig, WorldState};
pub use sensor::{NoiseModel, Observation};

//! Demonstration capture and open-loop replay.
//!
//! A demonstration defines the bottleneck: same position as the
//! demonstration's initial end-effector pose but with a vertical orientation.
//! The residual rotation `R` from the vertical bottleneck back to the
//! demonstrated orientation is stored and applied after the approach, and
//! the recorded local-frame velocities are then replayed with no sensing.
//!
//! Demonstrations here are scripted twist programs rather than human input,
//! which makes the replay-invariance properties machine-checkable.

use crate::geometry::{integrate_twist, GeometryError, RigidTransform, Twist};
use nalgebra::Vector3;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use thiserror::Error;

/// Speed limits applied to recorded and scripted twists.
pub const MAX_LINEAR_SPEED: f64 = 1.0; // m/s
pub const MAX_ANGULAR_SPEED: f64 = 2.0 * std::f64::consts::PI; // rad/s

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("demonstration starts at height {initial:.4} which is not above the floor {floor:.4}")]
    BelowTable { initial: f64, floor: f64 },
    #[error("invalid demonstration parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("malformed demonstration file: {0}")]
    MalformedFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One replay step: a local-frame twist held for `dt` seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedTwist {
    pub twist: Twist,
    pub dt: f64,
}

impl TimedTwist {
    pub fn new(twist: Twist, dt: f64) -> Self {
        Self { twist, dt }
    }
}

/// A recorded demonstration: verticalized bottleneck, reorientation rotation,
/// interaction height, and the timed twist sequence.
#[derive(Debug, Clone)]
pub struct Demonstration {
    initial_pose: RigidTransform,
    bottleneck_vertical: RigidTransform,
    reorient: RigidTransform,
    height: f64,
    twists: Vec<TimedTwist>,
    rate: f64,
}

impl Demonstration {
    /// End-effector pose at the start of the demonstration.
    pub fn initial_pose(&self) -> &RigidTransform {
        &self.initial_pose
    }

    /// The bottleneck: initial position, vertical orientation.
    pub fn bottleneck_vertical(&self) -> &RigidTransform {
        &self.bottleneck_vertical
    }

    /// Rotation from the vertical bottleneck to the demonstrated initial
    /// orientation; applied once at the end of the approach.
    pub fn reorient(&self) -> &RigidTransform {
        &self.reorient
    }

    /// World z of the bottleneck.
    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn twists(&self) -> &[TimedTwist] {
        &self.twists
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn save(&self, path: &Path) -> Result<(), DemoError> {
        let file = DemoFile::from_demo(self);
        let w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(w, &file).map_err(|e| DemoError::MalformedFile(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, DemoError> {
        let r = BufReader::new(File::open(path)?);
        let file: DemoFile =
            serde_json::from_reader(r).map_err(|e| DemoError::MalformedFile(e.to_string()))?;
        file.into_demo()
    }
}

/// On-disk schema: 4×4 transforms flattened row-major, twists as 6-vectors
/// `[vx, vy, vz, wx, wy, wz]` with a per-step dt.
#[derive(serde::Serialize, serde::Deserialize)]
struct DemoFile {
    initial_pose: Vec<f64>,
    bottleneck_vertical: Vec<f64>,
    reorient: Vec<f64>,
    height: f64,
    rate: f64,
    twists: Vec<TwistLine>,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct TwistLine {
    twist: [f64; 6],
    dt: f64,
}

impl DemoFile {
    fn from_demo(demo: &Demonstration) -> Self {
        Self {
            initial_pose: demo.initial_pose.to_row_major().to_vec(),
            bottleneck_vertical: demo.bottleneck_vertical.to_row_major().to_vec(),
            reorient: demo.reorient.to_row_major().to_vec(),
            height: demo.height,
            rate: demo.rate,
            twists: demo
                .twists
                .iter()
                .map(|t| TwistLine {
                    twist: [
                        t.twist.linear[0],
                        t.twist.linear[1],
                        t.twist.linear[2],
                        t.twist.angular[0],
                        t.twist.angular[1],
                        t.twist.angular[2],
                    ],
                    dt: t.dt,
                })
                .collect(),
        }
    }

    fn into_demo(self) -> Result<Demonstration, DemoError> {
        let parse = |v: &[f64], name: &str| -> Result<RigidTransform, DemoError> {
            let arr: [f64; 16] = v
                .try_into()
                .map_err(|_| DemoError::MalformedFile(format!("{name} must have 16 entries")))?;
            Ok(RigidTransform::from_row_major(&arr)?)
        };
        let initial_pose = parse(&self.initial_pose, "initial_pose")?;
        let bottleneck_vertical = parse(&self.bottleneck_vertical, "bottleneck_vertical")?;
        let reorient = parse(&self.reorient, "reorient")?;
        let mut twists = Vec::with_capacity(self.twists.len());
        for line in &self.twists {
            let twist = Twist::new(
                Vector3::new(line.twist[0], line.twist[1], line.twist[2]),
                Vector3::new(line.twist[3], line.twist[4], line.twist[5]),
            );
            validate_twist(&twist)?;
            if !(line.dt.is_finite() && line.dt > 0.0) {
                return Err(DemoError::MalformedFile("twist dt must be positive".into()));
            }
            twists.push(TimedTwist::new(twist, line.dt));
        }
        let demo = Demonstration {
            initial_pose,
            bottleneck_vertical,
            reorient,
            height: self.height,
            twists,
            rate: self.rate,
        };
        validate_demo_invariants(&demo)?;
        Ok(demo)
    }
}

fn validate_twist(t: &Twist) -> Result<(), DemoError> {
    if !t.is_finite() {
        return Err(DemoError::InvalidParams("twist has non-finite components".into()));
    }
    if t.linear.norm() > MAX_LINEAR_SPEED {
        return Err(DemoError::InvalidParams(format!(
            "linear speed {:.3} exceeds limit {MAX_LINEAR_SPEED}",
            t.linear.norm()
        )));
    }
    if t.angular.norm() > MAX_ANGULAR_SPEED {
        return Err(DemoError::InvalidParams(format!(
            "angular speed {:.3} exceeds limit {MAX_ANGULAR_SPEED:.3}",
            t.angular.norm()
        )));
    }
    Ok(())
}

fn validate_demo_invariants(demo: &Demonstration) -> Result<(), DemoError> {
    let b = &demo.bottleneck_vertical;
    if (b.translation() - demo.initial_pose.translation()).amax() != 0.0 {
        return Err(DemoError::MalformedFile(
            "bottleneck position must equal the initial position".into(),
        ));
    }
    if b.verticality_deviation() > 1e-9 {
        return Err(DemoError::MalformedFile(
            "bottleneck orientation must be a pure yaw".into(),
        ));
    }
    let recomposed = b.compose(demo.reorient());
    if (recomposed.rotation() - demo.initial_pose.rotation()).abs().max() > 1e-9 {
        return Err(DemoError::MalformedFile(
            "bottleneck rotation composed with reorient must equal the initial rotation".into(),
        ));
    }
    if demo.height != b.translation()[2] {
        return Err(DemoError::MalformedFile(
            "height must equal the bottleneck z".into(),
        ));
    }
    if !(demo.rate.is_finite() && demo.rate > 0.0) {
        return Err(DemoError::MalformedFile("rate must be positive".into()));
    }
    Ok(())
}

/// Record a demonstration from its initial pose and twist sequence.
///
/// The bottleneck is placed at the initial position with the initial yaw and
/// vertical orientation; the residual rotation back to the demonstrated
/// orientation becomes `reorient`.
pub fn record_demo(
    initial: &RigidTransform,
    twists: Vec<TimedTwist>,
    rate: f64,
    floor_height: f64,
) -> Result<Demonstration, DemoError> {
    let height = initial.translation()[2];
    if height <= floor_height {
        return Err(DemoError::BelowTable {
            initial: height,
            floor: floor_height,
        });
    }
    if !(rate.is_finite() && rate > 0.0) {
        return Err(DemoError::InvalidParams("rate must be positive".into()));
    }
    for t in &twists {
        validate_twist(&t.twist)?;
        if !(t.dt.is_finite() && t.dt > 0.0) {
            return Err(DemoError::InvalidParams("twist dt must be positive".into()));
        }
    }
    let yaw_only = RigidTransform::from_rotation_z(initial.yaw());
    let bottleneck_vertical = RigidTransform::new(*yaw_only.rotation(), *initial.translation())?;
    let reorient = RigidTransform::new(
        yaw_only.rotation().transpose() * initial.rotation(),
        Vector3::zeros(),
    )?;
    Ok(Demonstration {
        initial_pose: *initial,
        bottleneck_vertical,
        reorient,
        height,
        twists,
        rate,
    })
}

/// Replay the demonstration's twists open loop from `start`; returns the full
/// pose trajectory including the start pose. No sensing is consulted, so any
/// start offset is transported rigidly through the whole interaction.
pub fn replay(demo: &Demonstration, start: &RigidTransform) -> Vec<RigidTransform> {
    let mut trajectory = Vec::with_capacity(demo.twists.len() + 1);
    trajectory.push(*start);
    let mut pose = *start;
    for t in &demo.twists {
        pose = integrate_twist(&pose, &t.twist, t.dt);
        trajectory.push(pose);
    }
    trajectory
}

/// Parameterized interaction scripts standing in for human demonstrations.
#[derive(Debug, Clone, Copy)]
pub enum DemoScript {
    /// Straight vertical descent.
    Insert { depth: f64, speed: f64 },
    /// Descent followed by a yaw twist about the tool axis.
    TwistInsert {
        depth: f64,
        speed: f64,
        twist_angle: f64,
        yaw_rate: f64,
    },
    /// Descent, horizontal sweep along local x, then lift.
    Scoop {
        depth: f64,
        sweep: f64,
        lift: f64,
        speed: f64,
    },
    /// Repeated vertical strokes; each stroke retracts less than it
    /// descends, so the net motion is downward.
    Hammer {
        strokes: usize,
        stroke_depth: f64,
        retract: f64,
        speed: f64,
    },
}

/// Expand a script into a timed twist sequence at the given control rate.
///
/// Segment velocities are quantized so each segment covers its intended
/// displacement exactly with an integer number of steps.
pub fn scripted_demo(script: &DemoScript, rate: f64) -> Result<Vec<TimedTwist>, DemoError> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(DemoError::InvalidParams("rate must be positive".into()));
    }
    let mut twists = Vec::new();
    match *script {
        DemoScript::Insert { depth, speed } => {
            check_positive(&[("depth", depth), ("speed", speed)])?;
            segment(&mut twists, Vector3::new(0.0, 0.0, -depth), Vector3::zeros(), speed, rate)?;
        }
        DemoScript::TwistInsert {
            depth,
            speed,
            twist_angle,
            yaw_rate,
        } => {
            check_positive(&[
                ("depth", depth),
                ("speed", speed),
                ("twist_angle", twist_angle),
                ("yaw_rate", yaw_rate),
            ])?;
            segment(&mut twists, Vector3::new(0.0, 0.0, -depth), Vector3::zeros(), speed, rate)?;
            segment_angular(&mut twists, twist_angle, yaw_rate, rate)?;
        }
        DemoScript::Scoop {
            depth,
            sweep,
            lift,
            speed,
        } => {
            check_positive(&[
                ("depth", depth),
                ("sweep", sweep),
                ("lift", lift),
                ("speed", speed),
            ])?;
            segment(&mut twists, Vector3::new(0.0, 0.0, -depth), Vector3::zeros(), speed, rate)?;
            segment(&mut twists, Vector3::new(sweep, 0.0, 0.0), Vector3::zeros(), speed, rate)?;
            segment(&mut twists, Vector3::new(0.0, 0.0, lift), Vector3::zeros(), speed, rate)?;
        }
        DemoScript::Hammer {
            strokes,
            stroke_depth,
            retract,
            speed,
        } => {
            if strokes == 0 {
                return Err(DemoError::InvalidParams("strokes must be >= 1".into()));
            }
            check_positive(&[
                ("stroke_depth", stroke_depth),
                ("retract", retract),
                ("speed", speed),
            ])?;
            if retract >= stroke_depth {
                return Err(DemoError::InvalidParams(
                    "retract must be smaller than stroke_depth".into(),
                ));
            }
            for _ in 0..strokes {
                segment(
                    &mut twists,
                    Vector3::new(0.0, 0.0, -stroke_depth),
                    Vector3::zeros(),
                    speed,
                    rate,
                )?;
                segment(
                    &mut twists,
                    Vector3::new(0.0, 0.0, retract),
                    Vector3::zeros(),
                    speed,
                    rate,
                )?;
            }
        }
    }
    Ok(twists)
}

fn check_positive(params: &[(&str, f64)]) -> Result<(), DemoError> {
    for (name, v) in params {
        if !(v.is_finite() && *v > 0.0) {
            return Err(DemoError::InvalidParams(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    Ok(())
}

/// Constant-velocity linear segment covering `displacement` at ~`speed`.
fn segment(
    out: &mut Vec<TimedTwist>,
    displacement: Vector3<f64>,
    angular: Vector3<f64>,
    speed: f64,
    rate: f64,
) -> Result<(), DemoError> {
    let dist = displacement.norm();
    let dt = 1.0 / rate;
    let steps = ((dist / (speed * dt)).round() as usize).max(1);
    let velocity = displacement * (rate / steps as f64);
    let twist = Twist::new(velocity, angular);
    validate_twist(&twist)?;
    out.extend(std::iter::repeat_n(TimedTwist::new(twist, dt), steps));
    Ok(())
}

/// Pure yaw segment covering `angle` radians at ~`yaw_rate`.
fn segment_angular(
    out: &mut Vec<TimedTwist>,
    angle: f64,
    yaw_rate: f64,
    rate: f64,
) -> Result<(), DemoError> {
    let dt = 1.0 / rate;
    let steps = ((angle / (yaw_rate * dt)).round() as usize).max(1);
    let omega = angle * rate / steps as f64;
    let twist = Twist::new(Vector3::zeros(), Vector3::new(0.0, 0.0, omega));
    validate_twist(&twist)?;
    out.extend(std::iter::repeat_n(TimedTwist::new(twist, dt), steps));
    Ok(())
}

//! Rigid-transform and planar-pose algebra for the three frames of the
//! simulator: robot base `R`, end-effector `E`, and bottleneck `B`, plus
//! local-frame twist integration for velocity replay.
//!
//! # Frame convention
//!
//! Fixed once here and used everywhere: the base frame `R` is right-handed
//! with +z pointing up and the table surface at constant z. A pose is
//! *vertical* when its rotation is a pure yaw about world +z. The
//! end-effector's tool/camera axis points down at the table and is taken to
//! be the frame's -z axis, so a downward-pointing end-effector carries no
//! extra flip in its rotation matrix. Results are invariant to this choice.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

/// Orthonormality tolerance enforced at construction (on RᵀR−I and det−1).
pub const ROTATION_TOL: f64 = 1e-9;

/// Verticality and height tolerance for the planar reduction.
pub const VERTICAL_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("rotation is not orthonormal with determinant +1 (deviation {deviation:.3e})")]
    InvalidRotation { deviation: f64 },
    #[error("orientation deviates from a pure yaw about vertical by {deviation:.3e}")]
    NotVertical { deviation: f64 },
    #[error("pose height {actual:.6} does not match expected {expected:.6}")]
    HeightMismatch { actual: f64, expected: f64 },
}

/// Normalize an angle to the half-open interval (−π, π].
///
/// Exact ±π maps to +π, which is also how shortest-arc ties are broken.
pub fn wrap_angle(angle: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut a = angle % two_pi;
    if a <= -std::f64::consts::PI {
        a += two_pi;
    } else if a > std::f64::consts::PI {
        a -= two_pi;
    }
    a
}

/// A 3-DOF tabletop pose: horizontal position plus rotation about vertical.
///
/// `yaw` is kept in (−π, π] by every constructor and operation here.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PlanarPose {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl PlanarPose {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self {
            x,
            y,
            yaw: wrap_angle(yaw),
        }
    }

    pub fn identity() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    /// Planar rigid-motion composition: `self` then `other` in self's frame.
    pub fn compose(&self, other: &PlanarPose) -> PlanarPose {
        let (s, c) = self.yaw.sin_cos();
        PlanarPose::new(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.yaw + other.yaw,
        )
    }

    /// The pose of `other` expressed in `self`'s frame (self⁻¹ ∘ other).
    pub fn between(&self, other: &PlanarPose) -> PlanarPose {
        let (s, c) = self.yaw.sin_cos();
        let dx = other.x - self.x;
        let dy = other.y - self.y;
        PlanarPose::new(c * dx + s * dy, -s * dx + c * dy, other.yaw - self.yaw)
    }

    /// Euclidean distance between the two positions, ignoring yaw.
    pub fn position_distance(&self, other: &PlanarPose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A local-frame velocity: linear in m/s, angular in rad/s, both expressed in
/// the moving frame they act on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Twist {
    pub linear: Vector3<f64>,
    pub angular: Vector3<f64>,
}

impl Twist {
    pub fn new(linear: Vector3<f64>, angular: Vector3<f64>) -> Self {
        debug_assert!(linear.iter().all(|v| v.is_finite()));
        debug_assert!(angular.iter().all(|v| v.is_finite()));
        Self { linear, angular }
    }

    pub fn zero() -> Self {
        Self {
            linear: Vector3::zeros(),
            angular: Vector3::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.linear.iter().all(|v| v.is_finite()) && self.angular.iter().all(|v| v.is_finite())
    }
}

/// A rigid transform: orthonormal rotation (det +1) and translation in meters.
///
/// The rotation invariant is checked at every public construction site, so
/// composition and inversion stay closed over valid transforms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Build from parts, validating the rotation invariant.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        let deviation = rotation_deviation(&rotation);
        if deviation > ROTATION_TOL || !translation.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::InvalidRotation { deviation });
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::new(x, y, z),
        }
    }

    pub fn from_rotation_x(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            rotation: Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_rotation_y(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            rotation: Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_rotation_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            rotation: Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
            translation: Vector3::zeros(),
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Homogeneous-matrix product `self · other`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// The inverse transform: (Rᵀ, −Rᵀt).
    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// The yaw component of the rotation (rotation of the x-axis about +z).
    pub fn yaw(&self) -> f64 {
        wrap_angle(self.rotation[(1, 0)].atan2(self.rotation[(0, 0)]))
    }

    /// Max entry-wise deviation of the rotation from the pure yaw `Rz(yaw)`.
    pub fn verticality_deviation(&self) -> f64 {
        let pure = RigidTransform::from_rotation_z(self.yaw()).rotation;
        (self.rotation - pure).abs().max()
    }

    /// Max entry-wise difference over rotation and translation entries.
    pub fn max_abs_diff(&self, other: &RigidTransform) -> f64 {
        let dr = (self.rotation - other.rotation).abs().max();
        let dt = (self.translation - other.translation).abs().max();
        dr.max(dt)
    }

    /// Rotation angle of `self`'s orientation, in radians.
    pub fn rotation_angle(&self) -> f64 {
        let c = ((self.rotation.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        c.acos()
    }

    /// Row-major flattening of the 4×4 homogeneous matrix.
    pub fn to_row_major(&self) -> [f64; 16] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            t[0],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            t[1],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t[2],
            0.0,
            0.0,
            0.0,
            1.0,
        ]
    }

    /// Inverse of [`to_row_major`]; validates the rotation invariant and the
    /// fixed bottom row.
    pub fn from_row_major(m: &[f64; 16]) -> Result<Self, GeometryError> {
        let bottom_ok = m[12] == 0.0 && m[13] == 0.0 && m[14] == 0.0 && m[15] == 1.0;
        let rotation = Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
        let translation = Vector3::new(m[3], m[7], m[11]);
        if !bottom_ok {
            return Err(GeometryError::InvalidRotation {
                deviation: f64::INFINITY,
            });
        }
        RigidTransform::new(rotation, translation)
    }
}

fn rotation_deviation(r: &Matrix3<f64>) -> f64 {
    if !r.iter().all(|v| v.is_finite()) {
        return f64::INFINITY;
    }
    let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
    let det = (r.determinant() - 1.0).abs();
    ortho.max(det)
}

/// Project a near-orthonormal matrix back onto SO(3), right-handed.
fn reorthonormalize(m: &Matrix3<f64>) -> Matrix3<f64> {
    let c0 = m.column(0).normalize();
    let c1raw = m.column(1) - c0 * m.column(1).dot(&c0);
    let c1 = c1raw.normalize();
    let c2 = c0.cross(&c1);
    Matrix3::from_columns(&[c0, c1, c2])
}

/// Bottleneck pose in the base frame from the end-effector pose and the
/// relative bottleneck pose: `T_RB = T_RE · T_EB`.
pub fn bottleneck_in_base(t_re: &RigidTransform, t_eb: &RigidTransform) -> RigidTransform {
    t_re.compose(t_eb)
}

/// Reduce a vertical transform at known height to its planar components.
///
/// `expected_z` is the transform's z-translation: the absolute height for a
/// base-frame pose, or the height difference for a relative pose between two
/// vertical frames. Fails if the orientation is not a pure yaw or the height
/// is off by more than [`VERTICAL_TOL`].
pub fn to_planar(t: &RigidTransform, expected_z: f64) -> Result<PlanarPose, GeometryError> {
    let p = planar_components(t)?;
    let dz = (t.translation[2] - expected_z).abs();
    if dz > VERTICAL_TOL {
        return Err(GeometryError::HeightMismatch {
            actual: t.translation[2],
            expected: expected_z,
        });
    }
    Ok(p)
}

/// Planar components of a vertical transform, without the height check.
pub fn planar_components(t: &RigidTransform) -> Result<PlanarPose, GeometryError> {
    let deviation = t.verticality_deviation();
    if deviation > VERTICAL_TOL {
        return Err(GeometryError::NotVertical { deviation });
    }
    Ok(PlanarPose::new(t.translation[0], t.translation[1], t.yaw()))
}

/// Lift a planar pose to a vertical rigid transform at height `z`.
pub fn lift_planar(p: &PlanarPose, z: f64) -> RigidTransform {
    let (s, c) = p.yaw.sin_cos();
    RigidTransform {
        rotation: Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
        translation: Vector3::new(p.x, p.y, z),
    }
}

/// Advance `pose` by a constant local-frame twist over `dt` seconds:
/// `pose · exp(ξ·dt)`, with the rotation re-orthonormalized to cap drift
/// across long integration chains.
pub fn integrate_twist(pose: &RigidTransform, twist: &Twist, dt: f64) -> RigidTransform {
    debug_assert!(dt > 0.0 || (twist.linear.norm() == 0.0 && twist.angular.norm() == 0.0));
    let w = twist.angular * dt;
    let u = twist.linear * dt;
    let step = exp_se3(&w, &u);
    let composed = pose.compose(&step);
    RigidTransform {
        rotation: reorthonormalize(&composed.rotation),
        translation: composed.translation,
    }
}

/// Closed-form SE(3) exponential of the displacement (rotation vector `w`,
/// translation part `u`), with Taylor fallbacks near zero rotation.
fn exp_se3(w: &Vector3<f64>, u: &Vector3<f64>) -> RigidTransform {
    let theta2 = w.norm_squared();
    let wx = skew(w);
    let wx2 = wx * wx;
    let (a, b, c) = if theta2 < 1e-8 {
        // sin θ/θ, (1−cos θ)/θ², (θ−sin θ)/θ³ expanded to O(θ⁴)
        (
            1.0 - theta2 / 6.0,
            0.5 - theta2 / 24.0,
            1.0 / 6.0 - theta2 / 120.0,
        )
    } else {
        let theta = theta2.sqrt();
        (
            theta.sin() / theta,
            (1.0 - theta.cos()) / theta2,
            (theta - theta.sin()) / (theta2 * theta),
        )
    };
    let rotation = Matrix3::identity() + wx * a + wx2 * b;
    let v = Matrix3::identity() + wx * b + wx2 * c;
    RigidTransform {
        rotation: reorthonormalize(&rotation),
        translation: v * u,
    }
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v[2], v[1], v[2], 0.0, -v[0], -v[1], v[0], 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    /// Independent 4×4 homogeneous matrix multiplication oracle.
    fn matmul4(a: &[f64; 16], b: &[f64; 16]) -> [f64; 16] {
        let mut out = [0.0; 16];
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = 0.0;
                for k in 0..4 {
                    acc += a[i * 4 + k] * b[k * 4 + j];
                }
                out[i * 4 + j] = acc;
            }
        }
        out
    }

    fn random_transform(rng: &mut impl Rng) -> RigidTransform {
        let axis = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let axis = if axis.norm() < 1e-6 {
            Vector3::x()
        } else {
            axis.normalize()
        };
        let angle: f64 = rng.random_range(-PI..PI);
        let r = exp_se3(&(axis * angle), &Vector3::zeros()).rotation;
        let t = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        RigidTransform::new(r, t).unwrap()
    }

    #[test]
    fn compose_identity_left() {
        let t = RigidTransform::from_rotation_z(0.3).compose(&RigidTransform::from_translation(
            0.1, -0.2, 0.5,
        ));
        assert!(RigidTransform::identity().compose(&t).max_abs_diff(&t) < 1e-15);
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let t = RigidTransform::from_rotation_z(FRAC_PI_4)
            .compose(&RigidTransform::from_translation(0.5, 0.0, 0.2));
        let i = t.compose(&t.inverse());
        assert!(i.max_abs_diff(&RigidTransform::identity()) < 1e-9);
    }

    #[test]
    fn compose_matches_homogeneous_matrix_oracle() {
        let a = RigidTransform::from_translation(0.1, 0.0, 0.5);
        let b = RigidTransform::from_rotation_z(FRAC_PI_2)
            .compose(&RigidTransform::from_translation(0.2, 0.1, 0.0));
        let expected = matmul4(&a.to_row_major(), &b.to_row_major());
        let got = a.compose(&b).to_row_major();
        for (g, e) in got.iter().zip(expected.iter()) {
            assert_abs_diff_eq!(g, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn compose_matches_oracle_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let a = random_transform(&mut rng);
            let b = random_transform(&mut rng);
            let expected = matmul4(&a.to_row_major(), &b.to_row_major());
            let got = a.compose(&b).to_row_major();
            for (g, e) in got.iter().zip(expected.iter()) {
                assert_abs_diff_eq!(g, e, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn inverse_of_identity_and_translation() {
        assert!(
            RigidTransform::identity()
                .inverse()
                .max_abs_diff(&RigidTransform::identity())
                < 1e-15
        );
        let t = RigidTransform::from_translation(1.0, 2.0, 3.0).inverse();
        assert!(t.max_abs_diff(&RigidTransform::from_translation(-1.0, -2.0, -3.0)) < 1e-15);
    }

    #[test]
    fn inverse_via_compose_oracle() {
        let t = RigidTransform::from_rotation_z(PI / 6.0)
            .compose(&RigidTransform::from_translation(0.5, 0.0, 0.0));
        assert!(t.compose(&t.inverse()).max_abs_diff(&RigidTransform::identity()) < 1e-9);
        assert!(t.inverse().compose(&t).max_abs_diff(&RigidTransform::identity()) < 1e-9);
    }

    #[test]
    fn bottleneck_round_trip_recovers_ground_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let t_re = random_transform(&mut rng);
            let t_rb = random_transform(&mut rng);
            let t_eb = t_re.inverse().compose(&t_rb);
            let recovered = bottleneck_in_base(&t_re, &t_eb);
            worst = worst.max(recovered.max_abs_diff(&t_rb));
        }
        assert!(worst < 1e-9, "max entry error {worst:.3e}");
    }

    #[test]
    fn to_planar_identity_and_offset() {
        let t = RigidTransform::from_translation(0.0, 0.0, 0.1);
        let p = to_planar(&t, 0.1).unwrap();
        assert_eq!((p.x, p.y, p.yaw), (0.0, 0.0, 0.0));

        let t = RigidTransform::from_translation(0.2, -0.1, 0.1)
            .compose(&RigidTransform::from_rotation_z(FRAC_PI_4));
        let p = to_planar(&t, 0.1).unwrap();
        assert_abs_diff_eq!(p.x, 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, -0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(p.yaw, FRAC_PI_4, epsilon = 1e-12);
    }

    #[test]
    fn to_planar_rejects_tilt_and_wrong_height() {
        let tilted = RigidTransform::from_rotation_x(5.0_f64.to_radians());
        assert!(matches!(
            to_planar(&tilted, 0.0),
            Err(GeometryError::NotVertical { .. })
        ));
        let t = RigidTransform::from_translation(0.0, 0.0, 0.2);
        assert!(matches!(
            to_planar(&t, 0.1),
            Err(GeometryError::HeightMismatch { .. })
        ));
    }

    #[test]
    fn lift_planar_matches_rotation_oracle() {
        let p = PlanarPose::new(0.1, 0.2, FRAC_PI_2);
        let t = lift_planar(&p, 0.1);
        let oracle = RigidTransform::from_rotation_z(FRAC_PI_2);
        assert!((t.rotation() - oracle.rotation()).abs().max() < 1e-15);
        assert_eq!(t.translation()[2], 0.1);
    }

    #[test]
    fn planar_round_trip_fuzz() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let p = PlanarPose::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-PI..PI),
            );
            let h = rng.random_range(-0.5..0.5);
            let q = to_planar(&lift_planar(&p, h), h).unwrap();
            assert_abs_diff_eq!(p.x, q.x, epsilon = 1e-12);
            assert_abs_diff_eq!(p.y, q.y, epsilon = 1e-12);
            assert_abs_diff_eq!(p.yaw, q.yaw, epsilon = 1e-12);
        }
    }

    #[test]
    fn integrate_zero_twist_is_noop() {
        let pose = RigidTransform::from_rotation_z(0.4)
            .compose(&RigidTransform::from_translation(0.1, 0.2, 0.3));
        let out = integrate_twist(&pose, &Twist::zero(), 1.0 / 30.0);
        assert!(out.max_abs_diff(&pose) < 1e-12);
    }

    #[test]
    fn integrate_pure_linear_twist() {
        // 0.05 m/s along local x for 2 s at 30 Hz: local displacement 0.1 m.
        let start = RigidTransform::from_rotation_z(0.7)
            .compose(&RigidTransform::from_translation(0.0, 0.0, 0.5));
        let twist = Twist::new(Vector3::new(0.05, 0.0, 0.0), Vector3::zeros());
        let mut pose = start;
        for _ in 0..60 {
            pose = integrate_twist(&pose, &twist, 1.0 / 30.0);
        }
        let local = start.inverse().compose(&pose);
        assert_abs_diff_eq!(local.translation()[0], 0.1, epsilon = 1e-6);
        assert_abs_diff_eq!(local.translation()[1], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(local.translation()[2], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn integrate_pure_yaw_twist() {
        let start = RigidTransform::from_translation(0.3, -0.2, 0.1);
        let omega = 0.5;
        let seconds = 2.0;
        let steps = 60;
        let twist = Twist::new(Vector3::zeros(), Vector3::new(0.0, 0.0, omega));
        let mut pose = start;
        for _ in 0..steps {
            pose = integrate_twist(&pose, &twist, seconds / steps as f64);
        }
        assert_abs_diff_eq!(pose.yaw(), omega * seconds, epsilon = 1e-9);
        assert!((pose.translation() - start.translation()).norm() < 1e-9);
    }

    #[test]
    fn wrap_angle_interval_and_ties() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(-1.5 * PI), FRAC_PI_2, epsilon = 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let a = wrap_angle(rng.random_range(-50.0..50.0));
            assert!(a > -PI && a <= PI);
        }
    }

    #[test]
    fn planar_compose_between_round_trip() {
        let a = PlanarPose::new(0.1, -0.3, 2.9);
        let b = PlanarPose::new(-0.2, 0.4, -2.8);
        let rel = a.between(&b);
        let back = a.compose(&rel);
        assert_abs_diff_eq!(back.x, b.x, epsilon = 1e-12);
        assert_abs_diff_eq!(back.y, b.y, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(back.yaw - b.yaw), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn invalid_rotation_is_rejected() {
        let m = Matrix3::new(1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0);
        assert!(matches!(
            RigidTransform::new(m, Vector3::zeros()),
            Err(GeometryError::InvalidRotation { .. })
        ));
    }
}

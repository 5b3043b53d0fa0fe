//! Synthetic stand-in for the image-based bottleneck-pose regressors.
//!
//! Instead of rendering and regressing images, an [`Observation`] is the true
//! relative bottleneck pose corrupted by distance-dependent Gaussian noise:
//! `σ(d) = base + slope·d`, where `d` is the true 3D camera–bottleneck
//! distance. This keeps the one property the estimators rely on (predictions
//! taken closer to the object are better) while staying fully synthetic.
//!
//! The module also collects training datasets along linear approach
//! trajectories and fits the three per-observation uncertainty models:
//! a constant prior (validation RMSE), a distance-regressed predictor, and an
//! ensemble-spread estimate produced at observation time.

use crate::geometry::{lift_planar, planar_components, wrap_angle, PlanarPose};
use crate::scene::{
    linear_step, sample_approach_start_with_rng, Mode, SceneConfig, WorldState, HEIGHT_EPS,
};
use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::io::{BufRead, Write};
use thiserror::Error;

/// Lower bound applied to every standard deviation, so inverse-variance
/// weights stay finite for degenerate zero-noise models.
pub const SIGMA_FLOOR: f64 = 1e-9;

/// Full span (m / rad) of the box around the bottleneck from which approach
/// trajectory targets are drawn.
pub const APPROACH_TARGET_POS_RANGE: f64 = 0.05;
pub const APPROACH_TARGET_YAW_RANGE: f64 = 5.0 * std::f64::consts::PI / 180.0;

/// Full span (m / rad) of the box at bottleneck height in which last-inch
/// trajectories stay.
pub const LAST_INCH_POS_RANGE: f64 = 0.02;
pub const LAST_INCH_YAW_RANGE: f64 = 20.0 * std::f64::consts::PI / 180.0;

/// Height tolerance for "at bottleneck height" in the last-inch region.
pub const AT_HEIGHT_TOL: f64 = 1e-6;

/// Fraction of a dataset held out as the validation split for fitting.
const VALIDATION_FRACTION: f64 = 0.2;

/// Converts a mean absolute error to a Gaussian standard deviation.
const MAE_TO_SIGMA: f64 = 1.2533141373155003; // sqrt(pi/2)

#[derive(Debug, Error)]
pub enum SensorError {
    #[error("end-effector height {ee_z:.4} violates the {region:?} region (bottleneck at {bottleneck_z:.4})")]
    RegionViolation {
        region: Region,
        ee_z: f64,
        bottleneck_z: f64,
    },
    #[error("invalid noise model: {0}")]
    InvalidModel(String),
    #[error("dataset empty (or empty after the validation split)")]
    EmptyDataset,
    #[error("validation split needs at least two distinct distances")]
    InsufficientData,
    #[error("malformed dataset line: {0}")]
    MalformedData(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which regressor an observation stands in for: the wide approach-space
/// model or the specialized model trained only at bottleneck height.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Approach,
    LastInch,
}

/// Affine distance-dependent Gaussian noise, one scalar sigma shared by the
/// two position axes and one for yaw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Position sigma at zero distance (m).
    pub pos_sigma_base: f64,
    /// Position sigma growth per meter of distance (m/m).
    pub pos_sigma_slope: f64,
    /// Yaw sigma at zero distance (rad).
    pub yaw_sigma_base: f64,
    /// Yaw sigma growth per meter of distance (rad/m).
    pub yaw_sigma_slope: f64,
    /// Number of draws used by [`observe_ensemble`].
    pub ensemble_size: usize,
}

impl NoiseModel {
    /// Sigma actually used to draw noise; may be exactly zero for the
    /// degenerate noiseless model, unlike the floored reported sigma.
    fn pos_sigma_raw(&self, distance: f64) -> f64 {
        self.pos_sigma_base + self.pos_sigma_slope * distance
    }

    fn yaw_sigma_raw(&self, distance: f64) -> f64 {
        self.yaw_sigma_base + self.yaw_sigma_slope * distance
    }

    pub fn new(
        pos_sigma_base: f64,
        pos_sigma_slope: f64,
        yaw_sigma_base: f64,
        yaw_sigma_slope: f64,
        ensemble_size: usize,
    ) -> Result<Self, SensorError> {
        let values = [
            pos_sigma_base,
            pos_sigma_slope,
            yaw_sigma_base,
            yaw_sigma_slope,
        ];
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(SensorError::InvalidModel(
                "sigma bases and slopes must be finite and non-negative".into(),
            ));
        }
        if ensemble_size < 2 {
            return Err(SensorError::InvalidModel("ensemble_size must be >= 2".into()));
        }
        Ok(Self {
            pos_sigma_base,
            pos_sigma_slope,
            yaw_sigma_base,
            yaw_sigma_slope,
            ensemble_size,
        })
    }

    /// Degenerate noiseless model; observations carry the floor sigma.
    pub fn zero() -> Self {
        Self {
            pos_sigma_base: 0.0,
            pos_sigma_slope: 0.0,
            yaw_sigma_base: 0.0,
            yaw_sigma_slope: 0.0,
            ensemble_size: 2,
        }
    }

    pub fn pos_sigma(&self, distance: f64) -> f64 {
        (self.pos_sigma_base + self.pos_sigma_slope * distance).max(SIGMA_FLOOR)
    }

    pub fn yaw_sigma(&self, distance: f64) -> f64 {
        (self.yaw_sigma_base + self.yaw_sigma_slope * distance).max(SIGMA_FLOOR)
    }

    /// Scale position and yaw parameters by separate factors; used to give
    /// each synthetic object its own error characteristics.
    pub fn scaled(&self, pos_factor: f64, yaw_factor: f64) -> Self {
        Self {
            pos_sigma_base: self.pos_sigma_base * pos_factor,
            pos_sigma_slope: self.pos_sigma_slope * pos_factor,
            yaw_sigma_base: self.yaw_sigma_base * yaw_factor,
            yaw_sigma_slope: self.yaw_sigma_slope * yaw_factor,
            ensemble_size: self.ensemble_size,
        }
    }
}

/// One synthetic sensor reading: the predicted bottleneck pose relative to
/// the end-effector (planar-reduced) with a per-dimension sigma.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    /// Predicted planar pose of the bottleneck in the end-effector frame.
    pub predicted: PlanarPose,
    /// Per-dimension standard deviations (m, m, rad).
    pub sigma: Vector3<f64>,
    /// True camera–bottleneck distance at capture, for diagnostics (m).
    pub distance: f64,
    /// Control-step index at capture.
    pub timestamp: usize,
}

impl Observation {
    /// Re-express the prediction in the base frame given the planar pose of
    /// the end-effector at capture time. Valid because the position noise is
    /// isotropic in x/y, so the rotated covariance stays diagonal.
    pub fn in_base_frame(&self, ee_planar: &PlanarPose) -> Observation {
        Observation {
            predicted: ee_planar.compose(&self.predicted),
            ..*self
        }
    }

    pub fn with_sigma(&self, sigma: Vector3<f64>) -> Observation {
        Observation { sigma, ..*self }
    }
}

/// One dataset entry: the true relative planar pose at capture and the true
/// camera–bottleneck distance.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DatasetSample {
    pub true_relative: PlanarPose,
    pub distance: f64,
}

/// Poses collected along scripted data-collection trajectories, used to fit
/// the uncertainty models.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub samples: Vec<DatasetSample>,
    pub region: Region,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct DatasetLine {
    x: f64,
    y: f64,
    yaw: f64,
    distance: f64,
    region: Region,
}

impl Dataset {
    /// One sample per line: true planar pose, distance, region.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), SensorError> {
        for s in &self.samples {
            let line = DatasetLine {
                x: s.true_relative.x,
                y: s.true_relative.y,
                yaw: s.true_relative.yaw,
                distance: s.distance,
                region: self.region,
            };
            serde_json::to_writer(&mut w, &line)
                .map_err(|e| SensorError::MalformedData(e.to_string()))?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R, region: Region) -> Result<Self, SensorError> {
        let mut samples = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: DatasetLine = serde_json::from_str(&line)
                .map_err(|e| SensorError::MalformedData(e.to_string()))?;
            if parsed.region != region {
                return Err(SensorError::MalformedData(format!(
                    "sample region {:?} does not match dataset region {:?}",
                    parsed.region, region
                )));
            }
            samples.push(DatasetSample {
                true_relative: PlanarPose::new(parsed.x, parsed.y, parsed.yaw),
                distance: parsed.distance,
            });
        }
        Ok(Dataset { samples, region })
    }
}

fn check_region(w: &WorldState, region: Region) -> Result<(), SensorError> {
    let ee_z = w.ee_pose.translation()[2];
    let bottleneck_z = w.bottleneck_z();
    let ok = match region {
        Region::Approach => ee_z > bottleneck_z + HEIGHT_EPS,
        Region::LastInch => (ee_z - bottleneck_z).abs() <= AT_HEIGHT_TOL,
    };
    if ok {
        Ok(())
    } else {
        Err(SensorError::RegionViolation {
            region,
            ee_z,
            bottleneck_z,
        })
    }
}

fn true_relative_planar(w: &WorldState) -> (PlanarPose, f64) {
    let rel = w.true_relative_bottleneck();
    let planar = planar_components(&rel)
        .expect("end-effector and bottleneck are vertical frames by construction");
    (planar, rel.translation().norm())
}

/// Single noisy prediction of the relative bottleneck pose, with sigma set
/// from the noise model at the true capture distance.
pub fn observe(
    w: &WorldState,
    model: &NoiseModel,
    region: Region,
    timestamp: usize,
    rng: &mut impl Rng,
) -> Result<Observation, SensorError> {
    check_region(w, region)?;
    let (truth, distance) = true_relative_planar(w);
    let predicted = draw_prediction(
        &truth,
        model.pos_sigma_raw(distance),
        model.yaw_sigma_raw(distance),
        rng,
    );
    let sigma_pos = model.pos_sigma(distance);
    Ok(Observation {
        predicted,
        sigma: Vector3::new(sigma_pos, sigma_pos, model.yaw_sigma(distance)),
        distance,
        timestamp,
    })
}

/// Ensemble analogue of a Bayesian regressor: the prediction is the mean of
/// `ensemble_size` independent draws and sigma is their per-dimension sample
/// standard deviation.
pub fn observe_ensemble(
    w: &WorldState,
    model: &NoiseModel,
    region: Region,
    timestamp: usize,
    rng: &mut impl Rng,
) -> Result<Observation, SensorError> {
    check_region(w, region)?;
    let (truth, distance) = true_relative_planar(w);
    let sigma_pos = model.pos_sigma_raw(distance);
    let sigma_yaw = model.yaw_sigma_raw(distance);
    let k = model.ensemble_size;

    let mut xs = Vec::with_capacity(k);
    let mut ys = Vec::with_capacity(k);
    let mut yaw_residuals = Vec::with_capacity(k);
    let mut yaw_ref = 0.0;
    for i in 0..k {
        let draw = draw_prediction(&truth, sigma_pos, sigma_yaw, rng);
        if i == 0 {
            yaw_ref = draw.yaw;
        }
        xs.push(draw.x);
        ys.push(draw.y);
        yaw_residuals.push(wrap_angle(draw.yaw - yaw_ref));
    }
    let (mx, sx) = mean_std(&xs);
    let (my, sy) = mean_std(&ys);
    let (mr, sr) = mean_std(&yaw_residuals);
    Ok(Observation {
        predicted: PlanarPose::new(mx, my, yaw_ref + mr),
        sigma: Vector3::new(
            sx.max(SIGMA_FLOOR),
            sy.max(SIGMA_FLOOR),
            sr.max(SIGMA_FLOOR),
        ),
        distance,
        timestamp,
    })
}

fn draw_prediction(
    truth: &PlanarPose,
    sigma_pos: f64,
    sigma_yaw: f64,
    rng: &mut impl Rng,
) -> PlanarPose {
    if sigma_pos == 0.0 && sigma_yaw == 0.0 {
        return *truth;
    }
    let npos = Normal::new(0.0, sigma_pos).expect("non-negative sigma");
    let nyaw = Normal::new(0.0, sigma_yaw).expect("non-negative sigma");
    PlanarPose::new(
        truth.x + npos.sample(rng),
        truth.y + npos.sample(rng),
        truth.yaw + nyaw.sample(rng),
    )
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Run scripted data-collection trajectories against the training placement
/// and record the true relative pose at every control step.
///
/// Approach trajectories start from randomized poses at approach height and
/// descend toward a target drawn near the bottleneck, recording while the
/// end-effector is above bottleneck height. Last-inch trajectories stay at
/// bottleneck height inside the small correction box.
pub fn collect_dataset(
    cfg: &SceneConfig,
    w: &WorldState,
    n_trajectories: usize,
    region: Region,
    rng: &mut impl Rng,
) -> Dataset {
    let mut samples = Vec::new();
    let bottleneck = planar_components(w.bottleneck_true())
        .expect("bottleneck is a vertical frame by construction");
    let h = w.bottleneck_z();
    let mut world = w.clone();

    for _ in 0..n_trajectories {
        match region {
            Region::Approach => {
                world.ee_pose = sample_approach_start_with_rng(cfg, rng, Mode::Train);
                let target = lift_planar(
                    &sample_in_box(
                        &bottleneck,
                        APPROACH_TARGET_POS_RANGE,
                        APPROACH_TARGET_YAW_RANGE,
                        rng,
                    ),
                    h,
                );
                while world.ee_above_bottleneck() {
                    samples.push(sample_of(&world));
                    world.ee_pose =
                        linear_step(&world.ee_pose, &target, cfg.controller_speed, cfg.dt);
                }
            }
            Region::LastInch => {
                let start =
                    sample_in_box(&bottleneck, LAST_INCH_POS_RANGE, LAST_INCH_YAW_RANGE, rng);
                let target = lift_planar(
                    &sample_in_box(&bottleneck, LAST_INCH_POS_RANGE, LAST_INCH_YAW_RANGE, rng),
                    h,
                );
                world.ee_pose = lift_planar(&start, h);
                loop {
                    samples.push(sample_of(&world));
                    if world.ee_pose.max_abs_diff(&target) == 0.0 {
                        break;
                    }
                    world.ee_pose =
                        linear_step(&world.ee_pose, &target, cfg.controller_speed, cfg.dt);
                }
            }
        }
    }
    Dataset { samples, region }
}

fn sample_of(w: &WorldState) -> DatasetSample {
    let (true_relative, distance) = true_relative_planar(w);
    DatasetSample {
        true_relative,
        distance,
    }
}

fn sample_in_box(
    center: &PlanarPose,
    pos_range: f64,
    yaw_range: f64,
    rng: &mut impl Rng,
) -> PlanarPose {
    let hp = pos_range / 2.0;
    let hy = yaw_range / 2.0;
    PlanarPose::new(
        center.x + rng.random_range(-hp..=hp),
        center.y + rng.random_range(-hp..=hp),
        center.yaw + rng.random_range(-hy..=hy),
    )
}

fn validation_split(n: usize, rng: &mut impl Rng) -> Result<Vec<usize>, SensorError> {
    if n == 0 {
        return Err(SensorError::EmptyDataset);
    }
    let n_val = ((n as f64) * VALIDATION_FRACTION).floor() as usize;
    if n_val == 0 {
        return Err(SensorError::EmptyDataset);
    }
    let mut idx: Vec<usize> = (0..n).collect();
    // Fisher-Yates, deterministic under the caller's rng
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    idx.truncate(n_val);
    Ok(idx)
}

/// Simulated validation errors for the held-out split: one synthetic
/// observation per sample, error = prediction − truth.
fn validation_errors(
    d: &Dataset,
    model: &NoiseModel,
    rng: &mut impl Rng,
) -> Result<Vec<(f64, Vector3<f64>)>, SensorError> {
    let split = validation_split(d.samples.len(), rng)?;
    let mut out = Vec::with_capacity(split.len());
    for i in split {
        let s = &d.samples[i];
        let predicted = draw_prediction(
            &s.true_relative,
            model.pos_sigma_raw(s.distance),
            model.yaw_sigma_raw(s.distance),
            rng,
        );
        let err = Vector3::new(
            predicted.x - s.true_relative.x,
            predicted.y - s.true_relative.y,
            wrap_angle(predicted.yaw - s.true_relative.yaw),
        );
        out.push((s.distance, err));
    }
    Ok(out)
}

/// Constant prior uncertainty: per-dimension RMSE of synthetic predictions
/// over a 20% held-out validation split.
pub fn fit_prior_uncertainty(
    d: &Dataset,
    model: &NoiseModel,
    rng: &mut impl Rng,
) -> Result<Vector3<f64>, SensorError> {
    let errors = validation_errors(d, model, rng)?;
    let n = errors.len() as f64;
    let mut acc = Vector3::zeros();
    for (_, e) in &errors {
        acc += e.component_mul(e);
    }
    Ok(Vector3::new(
        (acc[0] / n).sqrt().max(SIGMA_FLOOR),
        (acc[1] / n).sqrt().max(SIGMA_FLOOR),
        (acc[2] / n).sqrt().max(SIGMA_FLOOR),
    ))
}

/// Distance-conditioned uncertainty: per-dimension affine fit of |error|
/// against capture distance over a validation split, scaled by √(π/2) to
/// convert mean absolute error to a Gaussian sigma.
#[derive(Debug, Clone, Copy)]
pub struct UncertaintyPredictor {
    /// (intercept, slope) per dimension, already in sigma units.
    coeffs: [(f64, f64); 3],
}

impl UncertaintyPredictor {
    /// Sigma for a prediction taken with the end-effector `height_above`
    /// meters above the bottleneck; the distance is implied by the predicted
    /// horizontal offset and the known height difference.
    pub fn sigma(&self, predicted: &PlanarPose, height_above: f64) -> Vector3<f64> {
        let d = (predicted.x.powi(2) + predicted.y.powi(2) + height_above.powi(2)).sqrt();
        Vector3::new(
            self.eval(0, d),
            self.eval(1, d),
            self.eval(2, d),
        )
    }

    fn eval(&self, dim: usize, d: f64) -> f64 {
        let (a, b) = self.coeffs[dim];
        (a + b * d).max(SIGMA_FLOOR)
    }

    pub fn coefficients(&self) -> &[(f64, f64); 3] {
        &self.coeffs
    }
}

pub fn fit_predicted_uncertainty(
    d: &Dataset,
    model: &NoiseModel,
    rng: &mut impl Rng,
) -> Result<UncertaintyPredictor, SensorError> {
    let errors = validation_errors(d, model, rng)?;
    let distances: Vec<f64> = errors.iter().map(|(d, _)| *d).collect();
    let spread = distances.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - distances.iter().cloned().fold(f64::INFINITY, f64::min);
    if errors.len() < 2 || !spread.is_finite() || spread <= 1e-12 {
        return Err(SensorError::InsufficientData);
    }
    let mut coeffs = [(0.0, 0.0); 3];
    for (dim, c) in coeffs.iter_mut().enumerate() {
        let abs_err: Vec<f64> = errors.iter().map(|(_, e)| e[dim].abs()).collect();
        let (a, b) = least_squares(&distances, &abs_err);
        *c = (a * MAE_TO_SIGMA, b * MAE_TO_SIGMA);
    }
    Ok(UncertaintyPredictor { coeffs })
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (xi, yi) in x.iter().zip(y.iter()) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
    }
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::place_object;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn world_at(z: f64) -> WorldState {
        let cfg = SceneConfig::default();
        let mut w = place_object(&cfg, 1, Mode::Test);
        let b = planar_components(w.bottleneck_true()).unwrap();
        w.ee_pose = lift_planar(&PlanarPose::new(b.x + 0.05, b.y - 0.02, 0.3), z);
        w
    }

    #[test]
    fn zero_noise_observation_is_exact() {
        let w = world_at(0.45);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let obs = observe(&w, &NoiseModel::zero(), Region::Approach, 0, &mut rng).unwrap();
        let (truth, d) = true_relative_planar(&w);
        assert_eq!(obs.predicted, truth);
        assert_eq!(obs.distance, d);
        assert_eq!(obs.sigma[0], SIGMA_FLOOR);
    }

    #[test]
    fn sigma_follows_affine_model() {
        // base 2 mm, slope 20 mm/m, d = 0.4 m -> 10 mm
        let model = NoiseModel::new(0.002, 0.02, 0.01, 0.0, 4).unwrap();
        assert_abs_diff_eq!(model.pos_sigma(0.4), 0.010, epsilon = 1e-15);
        assert!(model.pos_sigma(0.1) < model.pos_sigma(0.2));
    }

    #[test]
    fn observation_moments_match_model() {
        let w = world_at(0.45);
        let model = NoiseModel::new(0.003, 0.01, 0.02, 0.05, 4).unwrap();
        let (truth, d) = true_relative_planar(&w);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let mut sum = Vector3::zeros();
        let mut sumsq = Vector3::zeros();
        for i in 0..n {
            let obs = observe(&w, &model, Region::Approach, i, &mut rng).unwrap();
            let e = Vector3::new(
                obs.predicted.x - truth.x,
                obs.predicted.y - truth.y,
                wrap_angle(obs.predicted.yaw - truth.yaw),
            );
            sum += e;
            sumsq += e.component_mul(&e);
        }
        let nf = n as f64;
        let sigma_pos = model.pos_sigma(d);
        let sigma_yaw = model.yaw_sigma(d);
        for dim in 0..3 {
            let sigma = if dim == 2 { sigma_yaw } else { sigma_pos };
            let std = (sumsq[dim] / nf).sqrt();
            assert!((std - sigma).abs() / sigma < 0.02, "dim {dim}: {std} vs {sigma}");
            // unbiasedness: |mean| below 3 sigma / sqrt(N)
            assert!(sum[dim].abs() / nf < 3.0 * sigma / nf.sqrt());
        }
    }

    #[test]
    fn region_preconditions_enforced() {
        let w = world_at(0.45);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(observe(&w, &NoiseModel::zero(), Region::LastInch, 0, &mut rng).is_err());
        let at_h = world_at(0.10);
        assert!(observe(&at_h, &NoiseModel::zero(), Region::Approach, 0, &mut rng).is_err());
        assert!(observe(&at_h, &NoiseModel::zero(), Region::LastInch, 0, &mut rng).is_ok());
    }

    #[test]
    fn ensemble_zero_noise_and_minimum_k() {
        let w = world_at(0.45);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let obs = observe_ensemble(&w, &NoiseModel::zero(), Region::Approach, 0, &mut rng).unwrap();
        let (truth, _) = true_relative_planar(&w);
        assert_abs_diff_eq!(obs.predicted.x, truth.x, epsilon = 1e-12);
        assert_eq!(obs.sigma[0], SIGMA_FLOOR);
        assert!(obs.sigma.iter().all(|s| *s > 0.0));
    }

    #[test]
    fn ensemble_spread_estimates_sigma() {
        let w = world_at(0.45);
        let model = NoiseModel::new(0.004, 0.0, 0.03, 0.0, 10).unwrap();
        let (truth, d) = true_relative_planar(&w);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let trials = 10_000;
        let mut sigma_sum = 0.0;
        let mut mean_err_sq = 0.0;
        for i in 0..trials {
            let obs = observe_ensemble(&w, &model, Region::Approach, i, &mut rng).unwrap();
            sigma_sum += obs.sigma[0];
            mean_err_sq += (obs.predicted.x - truth.x).powi(2);
        }
        let avg_sigma = sigma_sum / trials as f64;
        let sigma = model.pos_sigma(d);
        assert!((avg_sigma - sigma).abs() / sigma < 0.10, "{avg_sigma} vs {sigma}");
        // variance of the ensemble mean is sigma^2 / K
        let var = mean_err_sq / trials as f64;
        let expected = sigma * sigma / 10.0;
        assert!((var - expected).abs() / expected < 0.10, "{var} vs {expected}");
    }

    #[test]
    fn collect_approach_dataset_sample_count() {
        // near-vertical descent from 0.50 to h=0.10 at 0.1 m/s, 30 Hz:
        // one sample per control step while above h, (0.40 m / 0.1 m/s) x 30 Hz
        // = 120 (one or two more when the target offset stretches the line)
        let cfg = SceneConfig {
            task_space_side: 1e-9, // starts pinned above the bottleneck
            ..Default::default()
        };
        let w = place_object(&cfg, 0, Mode::Train);
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = collect_dataset(&cfg, &w, 1, Region::Approach, &mut rng);
            assert!(
                (120..=121).contains(&d.samples.len()),
                "seed {seed}: got {}",
                d.samples.len()
            );
            assert!(d.samples.iter().all(|s| s.distance > 0.0));
        }
    }

    #[test]
    fn collect_empty_and_fifty_trajectories() {
        let cfg = SceneConfig::default();
        let w = place_object(&cfg, 0, Mode::Train);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let empty = collect_dataset(&cfg, &w, 0, Region::Approach, &mut rng);
        assert!(empty.samples.is_empty());

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = collect_dataset(&cfg, &w, 50, Region::Approach, &mut rng);
        // 50 trajectories at roughly 120+ samples each
        assert!(d.samples.len() >= 50 * 110, "got {}", d.samples.len());
    }

    #[test]
    fn last_inch_dataset_stays_in_correction_box() {
        let cfg = SceneConfig::default();
        let w = place_object(&cfg, 3, Mode::Train);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = collect_dataset(&cfg, &w, 20, Region::LastInch, &mut rng);
        assert!(!d.samples.is_empty());
        let max_offset = LAST_INCH_POS_RANGE / 2.0 * 2f64.sqrt() + 1e-9;
        for s in &d.samples {
            let planar = (s.true_relative.x.powi(2) + s.true_relative.y.powi(2)).sqrt();
            assert!(planar <= max_offset, "offset {planar}");
            assert!(s.true_relative.yaw.abs() <= LAST_INCH_YAW_RANGE / 2.0 + 1e-9);
            // at bottleneck height the 3D distance is the planar distance
            assert_abs_diff_eq!(s.distance, planar, epsilon = 1e-9);
        }
    }

    #[test]
    fn approach_dataset_terminates_in_target_box() {
        let cfg = SceneConfig::default();
        let w = place_object(&cfg, 5, Mode::Train);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = collect_dataset(&cfg, &w, 10, Region::Approach, &mut rng);
        // all recorded samples are above the bottleneck
        for s in &d.samples {
            assert!(s.distance >= s.true_relative.x.hypot(s.true_relative.y) - 1e-12);
        }
        // the last sample of each trajectory is close to the bottleneck
        let max_xy = APPROACH_TARGET_POS_RANGE / 2.0 * 2f64.sqrt() + 0.01;
        let last = d.samples.last().unwrap();
        assert!(last.true_relative.x.hypot(last.true_relative.y) <= max_xy);
    }

    #[test]
    fn prior_fit_recovers_constant_sigma() {
        let cfg = SceneConfig::default();
        let w = place_object(&cfg, 0, Mode::Train);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let d = collect_dataset(&cfg, &w, 50, Region::Approach, &mut rng);
        let model = NoiseModel::new(0.005, 0.0, 0.04, 0.0, 4).unwrap();
        let sigma = fit_prior_uncertainty(&d, &model, &mut rng).unwrap();
        assert!((sigma[0] - 0.005).abs() / 0.005 < 0.05, "{}", sigma[0]);
        assert!((sigma[1] - 0.005).abs() / 0.005 < 0.05, "{}", sigma[1]);
        assert!((sigma[2] - 0.04).abs() / 0.04 < 0.05, "{}", sigma[2]);
    }

    #[test]
    fn prior_fit_zero_noise_clamps_to_floor() {
        let cfg = SceneConfig::default();
        let w = place_object(&cfg, 0, Mode::Train);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = collect_dataset(&cfg, &w, 2, Region::Approach, &mut rng);
        let sigma = fit_prior_uncertainty(&d, &NoiseModel::zero(), &mut rng).unwrap();
        assert_eq!(sigma, Vector3::new(SIGMA_FLOOR, SIGMA_FLOOR, SIGMA_FLOOR));
    }

    #[test]
    fn degenerate_split_is_rejected() {
        let d = Dataset {
            samples: vec![DatasetSample {
                true_relative: PlanarPose::identity(),
                distance: 0.3,
            }],
            region: Region::Approach,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            fit_prior_uncertainty(&d, &NoiseModel::zero(), &mut rng),
            Err(SensorError::EmptyDataset)
        ));
    }

    #[test]
    fn predicted_fit_finds_slope_sign() {
        let cfg = SceneConfig::default();
        let w = place_object(&cfg, 0, Mode::Train);
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let d = collect_dataset(&cfg, &w, 50, Region::Approach, &mut rng);

        let sloped = NoiseModel::new(0.002, 0.02, 0.01, 0.1, 4).unwrap();
        let p = fit_predicted_uncertainty(&d, &sloped, &mut rng).unwrap();
        let near = p.sigma(&PlanarPose::identity(), 0.05);
        let far = p.sigma(&PlanarPose::identity(), 0.45);
        assert!(near[0] < far[0], "sigma must grow with distance");
        assert!(near[2] < far[2]);

        let flat = NoiseModel::new(0.005, 0.0, 0.03, 0.0, 4).unwrap();
        let p = fit_predicted_uncertainty(&d, &flat, &mut rng).unwrap();
        let d_max = d.samples.iter().map(|s| s.distance).fold(0.0, f64::max);
        for dim in 0..3 {
            let base = if dim == 2 { 0.03 } else { 0.005 };
            let (_, slope) = p.coefficients()[dim];
            assert!(
                slope.abs() * d_max < 0.10 * base,
                "dim {dim}: slope {slope} too large"
            );
        }
    }

    #[test]
    fn predicted_fit_requires_distance_spread() {
        let d = Dataset {
            samples: (0..100)
                .map(|_| DatasetSample {
                    true_relative: PlanarPose::identity(),
                    distance: 0.3,
                })
                .collect(),
            region: Region::Approach,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let model = NoiseModel::new(0.005, 0.0, 0.03, 0.0, 4).unwrap();
        assert!(matches!(
            fit_predicted_uncertainty(&d, &model, &mut rng),
            Err(SensorError::InsufficientData)
        ));
    }

    #[test]
    fn dataset_jsonl_round_trip() {
        let cfg = SceneConfig::default();
        let w = place_object(&cfg, 0, Mode::Train);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = collect_dataset(&cfg, &w, 2, Region::Approach, &mut rng);
        let mut buf = Vec::new();
        d.write_jsonl(&mut buf).unwrap();
        let back = Dataset::read_jsonl(buf.as_slice(), Region::Approach).unwrap();
        assert_eq!(d.samples.len(), back.samples.len());
        for (a, b) in d.samples.iter().zip(back.samples.iter()) {
            assert_eq!(a, b);
        }
        assert!(Dataset::read_jsonl(buf.as_slice(), Region::LastInch).is_err());
    }

    #[test]
    fn fits_are_deterministic_under_seed() {
        let cfg = SceneConfig::default();
        let w = place_object(&cfg, 0, Mode::Train);
        let model = NoiseModel::new(0.004, 0.02, 0.03, 0.1, 4).unwrap();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            let d = collect_dataset(&cfg, &w, 10, Region::Approach, &mut rng);
            let prior = fit_prior_uncertainty(&d, &model, &mut rng).unwrap();
            let pred = *fit_predicted_uncertainty(&d, &model, &mut rng)
                .unwrap()
                .coefficients();
            (d.samples.len(), prior, pred)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn observation_base_frame_conversion() {
        let ee = PlanarPose::new(0.1, -0.2, std::f64::consts::FRAC_PI_2);
        let obs = Observation {
            predicted: PlanarPose::new(0.05, 0.02, 0.1),
            sigma: Vector3::new(0.01, 0.01, 0.02),
            distance: 0.3,
            timestamp: 4,
        };
        let base = obs.in_base_frame(&ee);
        // x rotates onto +y under a 90 degree ee yaw
        assert_abs_diff_eq!(base.predicted.x, 0.1 - 0.02, epsilon = 1e-12);
        assert_abs_diff_eq!(base.predicted.y, -0.2 + 0.05, epsilon = 1e-12);
        assert_abs_diff_eq!(
            base.predicted.yaw,
            std::f64::consts::FRAC_PI_2 + 0.1,
            epsilon = 1e-12
        );
        assert_eq!(base.sigma, obs.sigma);
    }
}

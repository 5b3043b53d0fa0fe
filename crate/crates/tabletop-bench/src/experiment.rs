//! Experiment orchestration: the seeded target-reaching comparison and the
//! replay task benchmark.
//!
//! A "synthetic object" is a draw of noise-model scale factors around the
//! configured means: object diversity shows up to the estimators purely as
//! different error characteristics. Every trial owns an RNG stream derived
//! from the master seed and the trial's identity, so results are independent
//! of execution order and safe to compute in parallel.

use crate::config::{ConfigError, ExperimentConfig, Method};
use crate::seeding::{derive_rng, derive_seed, tag};
use nalgebra::Vector3;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use tabletop::demo::{replay, DemoError, Demonstration};
use tabletop::estimation::{EstimationError, Estimator, UncertaintySource};
use tabletop::geometry::{
    lift_planar, planar_components, wrap_angle, GeometryError, PlanarPose, RigidTransform,
};
use tabletop::scene::{
    linear_step, place_object_with_offset_rng, sample_approach_start_with_rng, Mode, WorldState,
};
use tabletop::sensor::{
    collect_dataset, fit_predicted_uncertainty, fit_prior_uncertainty, observe, observe_ensemble,
    NoiseModel, Observation, Region, SensorError, UncertaintyPredictor,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Demo(#[from] DemoError),
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("empty results; nothing to report")]
    EmptyResults,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Runtime(String),
}

/// One benchmark episode's outcome.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TrialRecord {
    pub method: String,
    pub correction: bool,
    pub object_id: usize,
    pub pose_id: usize,
    pub seed: u64,
    pub final_pos_error_mm: f64,
    pub final_yaw_error_deg: f64,
    /// Task benchmark only; absent for target reaching.
    pub success: Option<bool>,
    /// Per-step estimate trace, kept only when tracing is requested.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trace: Option<Vec<TraceStep>>,
}

/// One approach step of an estimate trace.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub sigma_yaw: f64,
}

/// One aggregated report row: per-object statistics averaged over objects.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub pos_mean_mm: f64,
    pub pos_min_mm: f64,
    pub pos_max_mm: f64,
    pub ori_mean_deg: f64,
    pub ori_min_deg: f64,
    pub ori_max_deg: f64,
}

#[derive(Debug, Clone)]
pub struct ReportTable {
    pub rows: Vec<ReportRow>,
}

/// Target-reaching results: the aggregated table plus the raw records.
#[derive(Debug, Clone)]
pub struct ReachOutcome {
    pub table: ReportTable,
    pub records: Vec<TrialRecord>,
}

/// Per-object noise models and the uncertainty models fitted against them.
#[derive(Debug, Clone)]
pub struct ObjectModels {
    pub approach: NoiseModel,
    pub last_inch: NoiseModel,
    pub prior: Vector3<f64>,
    pub predictor: UncertaintyPredictor,
}

/// Draw one object's noise models: shared scale factors keep the last-inch
/// model strictly tighter than the approach model.
fn object_noise(cfg: &ExperimentConfig, object_id: usize) -> (NoiseModel, NoiseModel) {
    use rand::Rng;
    let mut rng = derive_rng(cfg.master_seed, &[tag::OBJECT_NOISE, object_id as u64]);
    let s = cfg.object_spread;
    let (pos_factor, yaw_factor) = if s > 0.0 {
        (
            rng.random_range(1.0 - s..=1.0 + s),
            rng.random_range(1.0 - s..=1.0 + s),
        )
    } else {
        (1.0, 1.0)
    };
    (
        cfg.noise_approach.scaled(pos_factor, yaw_factor),
        cfg.noise_last_inch.scaled(pos_factor, yaw_factor),
    )
}

/// Collect the approach dataset for one object against the training
/// placement and fit the prior and predicted uncertainty models.
pub fn fit_object_models(
    cfg: &ExperimentConfig,
    object_id: usize,
    object_to_bottleneck: &RigidTransform,
) -> Result<ObjectModels, HarnessError> {
    let (approach, last_inch) = object_noise(cfg, object_id);
    let ctx = &[tag::DATASET, object_id as u64];
    let mut rng = derive_rng(cfg.master_seed, ctx);
    let train_world =
        place_object_with_offset_rng(&cfg.scene, &mut rng, Mode::Train, object_to_bottleneck);
    let dataset = collect_dataset(
        &cfg.scene,
        &train_world,
        cfg.n_train_trajectories,
        Region::Approach,
        &mut rng,
    );
    let prior = fit_prior_uncertainty(
        &dataset,
        &approach,
        &mut derive_rng(cfg.master_seed, &[tag::FIT_PRIOR, object_id as u64]),
    )?;
    let predictor = fit_predicted_uncertainty(
        &dataset,
        &approach,
        &mut derive_rng(cfg.master_seed, &[tag::FIT_PREDICTED, object_id as u64]),
    )?;
    Ok(ObjectModels {
        approach,
        last_inch,
        prior,
        predictor,
    })
}

/// Episode cap: generous multiple of the nominal descent step count, so a
/// noisy estimator cannot stall an episode indefinitely.
fn step_cap(descent: f64, speed: f64, dt: f64) -> usize {
    ((descent / (speed * dt)).ceil() as usize) * 4 + 240
}

struct ApproachOutcome {
    final_planar: PlanarPose,
    steps: usize,
    trace: Option<Vec<TraceStep>>,
}

/// Run the approach loop: observe, update the estimator, step toward the
/// current estimate while above bottleneck height, then complete the motion
/// to the final estimate at bottleneck height.
fn run_approach(
    cfg: &ExperimentConfig,
    models: &ObjectModels,
    world: &mut WorldState,
    method: Method,
    rng: &mut ChaCha8Rng,
    want_trace: bool,
) -> Result<ApproachOutcome, HarnessError> {
    let h = world.bottleneck_z();
    let start_z = world.ee_pose.translation()[2];
    if start_z <= h {
        return Err(HarnessError::Runtime(format!(
            "approach start {start_z:.3} is not above the bottleneck at {h:.3}"
        )));
    }
    let cap = step_cap(start_z - h, cfg.scene.controller_speed, cfg.scene.dt);
    let oracle_planar = planar_components(world.bottleneck_true())?;

    let mut estimator = match method {
        Method::Oracle => None,
        Method::Estimator(kind) => Some(Estimator::with_best_image_score(
            kind,
            models.prior,
            cfg.best_image_score,
        )?),
    };
    let mut trace = want_trace.then(Vec::new);
    let mut step = 0;
    while world.ee_above_bottleneck() && step < cap {
        let target = match &mut estimator {
            None => oracle_planar,
            Some(estimator) => {
                let obs = next_observation(models, world, method, step, rng)?;
                let ee_planar = planar_components(&world.ee_pose)?;
                let estimate = estimator.update(&obs.in_base_frame(&ee_planar));
                if let Some(trace) = &mut trace {
                    trace.push(TraceStep {
                        step,
                        x: estimate.value.x,
                        y: estimate.value.y,
                        yaw: estimate.value.yaw,
                        sigma_x: estimate.sigma[0],
                        sigma_y: estimate.sigma[1],
                        sigma_yaw: estimate.sigma[2],
                    });
                }
                estimate.value
            }
        };
        world.ee_pose = linear_step(
            &world.ee_pose,
            &lift_planar(&target, h),
            cfg.scene.controller_speed,
            cfg.scene.dt,
        );
        step += 1;
    }
    // complete the motion to the last estimate at bottleneck height
    let final_planar = match &estimator {
        None => oracle_planar,
        Some(estimator) => {
            estimator
                .current()
                .ok_or_else(|| HarnessError::Runtime("approach ran zero steps".into()))?
                .value
        }
    };
    world.ee_pose = lift_planar(&final_planar, h);
    Ok(ApproachOutcome {
        final_planar,
        steps: step,
        trace,
    })
}

/// Produce the next observation for the method's uncertainty source.
fn next_observation(
    models: &ObjectModels,
    world: &WorldState,
    method: Method,
    step: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Observation, HarnessError> {
    let kind = match method {
        Method::Estimator(kind) => kind,
        Method::Oracle => return Err(HarnessError::Runtime("oracle does not observe".into())),
    };
    let obs = match kind.uncertainty_source() {
        Some(UncertaintySource::Dropout) => {
            observe_ensemble(world, &models.approach, Region::Approach, step, rng)?
        }
        Some(UncertaintySource::Predicted) => {
            let obs = observe(world, &models.approach, Region::Approach, step, rng)?;
            let height_above = world.ee_pose.translation()[2] - world.bottleneck_z();
            obs.with_sigma(models.predictor.sigma(&obs.predicted, height_above))
        }
        Some(UncertaintySource::Prior) => {
            let obs = observe(world, &models.approach, Region::Approach, step, rng)?;
            obs.with_sigma(models.prior)
        }
        None => observe(world, &models.approach, Region::Approach, step, rng)?,
    };
    Ok(obs)
}

/// One last-inch refinement: a single observation from the tighter sensor at
/// bottleneck height replaces the approach estimate.
fn apply_correction(
    models: &ObjectModels,
    world: &mut WorldState,
    step: usize,
    rng: &mut ChaCha8Rng,
) -> Result<PlanarPose, HarnessError> {
    let obs = observe(world, &models.last_inch, Region::LastInch, step, rng)?;
    let ee_planar = planar_components(&world.ee_pose)?;
    let corrected = obs.in_base_frame(&ee_planar).predicted;
    world.ee_pose = lift_planar(&corrected, world.bottleneck_z());
    Ok(corrected)
}

fn reach_trial(
    cfg: &ExperimentConfig,
    models: &ObjectModels,
    object_id: usize,
    pose_id: usize,
    method: Method,
    want_trace: bool,
) -> Result<TrialRecord, HarnessError> {
    let placement_seed = derive_seed(
        cfg.master_seed,
        &[tag::PLACEMENT, object_id as u64, pose_id as u64],
    );
    let trial_seed = derive_seed(
        cfg.master_seed,
        &[
            tag::TRIAL,
            object_id as u64,
            pose_id as u64,
            method.order_index() as u64,
        ],
    );
    let mut placement_rng = derive_rng(placement_seed, &[tag::PLACEMENT]);
    let offset = RigidTransform::from_translation(0.0, 0.0, cfg.scene.bottleneck_height);
    let mut world =
        place_object_with_offset_rng(&cfg.scene, &mut placement_rng, Mode::Test, &offset);
    let mut trial_rng = derive_rng(trial_seed, &[tag::TRIAL]);
    world.ee_pose = sample_approach_start_with_rng(&cfg.scene, &mut trial_rng, Mode::Test);

    let outcome = run_approach(cfg, models, &mut world, method, &mut trial_rng, want_trace)?;
    let truth = planar_components(world.bottleneck_true())?;
    let reached = outcome.final_planar;
    Ok(TrialRecord {
        method: method.name(),
        correction: false,
        object_id,
        pose_id,
        seed: trial_seed,
        final_pos_error_mm: reached.position_distance(&truth) * 1000.0,
        final_yaw_error_deg: wrap_angle(reached.yaw - truth.yaw).abs().to_degrees(),
        success: None,
        trace: outcome.trace,
    })
}

/// The target-reaching comparison: every object × pose × method, errors
/// measured against the ground-truth bottleneck at bottleneck height.
pub fn run_target_reaching(
    cfg: &ExperimentConfig,
    want_trace: bool,
) -> Result<ReachOutcome, HarnessError> {
    cfg.validate()?;
    let default_offset = RigidTransform::from_translation(0.0, 0.0, cfg.scene.bottleneck_height);
    let objects = (0..cfg.n_objects)
        .into_par_iter()
        .map(|object_id| fit_object_models(cfg, object_id, &default_offset))
        .collect::<Result<Vec<_>, _>>()?;

    let mut specs = Vec::new();
    for object_id in 0..cfg.n_objects {
        for pose_id in 0..cfg.n_poses_per_object {
            for &method in &cfg.methods {
                specs.push((object_id, pose_id, method));
            }
        }
    }
    let mut records = specs
        .into_par_iter()
        .map(|(object_id, pose_id, method)| {
            reach_trial(cfg, &objects[object_id], object_id, pose_id, method, want_trace)
        })
        .collect::<Result<Vec<_>, _>>()?;
    sort_records(cfg, &mut records);
    let table = aggregate(cfg, &records)?;
    Ok(ReachOutcome { table, records })
}

/// The full-pipeline task benchmark: approach with each method, optional
/// last-inch correction, reorientation, open-loop replay, and a terminal
/// object-relative success judgement.
pub fn run_task_benchmark(
    cfg: &ExperimentConfig,
    demo: &Demonstration,
    want_trace: bool,
) -> Result<Vec<TrialRecord>, HarnessError> {
    cfg.validate()?;
    if demo.height() >= cfg.scene.table_height + cfg.scene.approach_height {
        return Err(HarnessError::Runtime(
            "demonstration bottleneck is above the approach start height".into(),
        ));
    }
    let train_object = lift_planar(&PlanarPose::identity(), cfg.scene.table_height);
    let offset = train_object.inverse().compose(demo.bottleneck_vertical());
    let train_terminal = train_object
        .inverse()
        .compose(replay(demo, demo.initial_pose()).last().expect("non-empty"));

    let objects = (0..cfg.n_objects)
        .into_par_iter()
        .map(|object_id| fit_object_models(cfg, object_id, &offset))
        .collect::<Result<Vec<_>, _>>()?;

    let mut specs = Vec::new();
    for object_id in 0..cfg.n_objects {
        for pose_id in 0..cfg.n_poses_per_object {
            for &method in &cfg.methods {
                let corrections: &[bool] = match method {
                    Method::Oracle => &[false],
                    Method::Estimator(_) => &[false, true],
                };
                for &correction in corrections {
                    specs.push((object_id, pose_id, method, correction));
                }
            }
        }
    }
    let mut records = specs
        .into_par_iter()
        .map(|(object_id, pose_id, method, correction)| {
            task_trial(
                cfg,
                demo,
                &objects[object_id],
                &offset,
                &train_terminal,
                object_id,
                pose_id,
                method,
                correction,
                want_trace,
            )
            .map(|(record, _)| record)
        })
        .collect::<Result<Vec<_>, _>>()?;
    sort_records(cfg, &mut records);
    Ok(records)
}

/// Run one task episode and also return the replayed pose trajectory; used
/// by the `replay` CLI subcommand for trace dumps.
pub fn run_single_task_episode(
    cfg: &ExperimentConfig,
    demo: &Demonstration,
    method: Method,
    correction: bool,
) -> Result<(TrialRecord, Vec<RigidTransform>), HarnessError> {
    cfg.validate()?;
    let train_object = lift_planar(&PlanarPose::identity(), cfg.scene.table_height);
    let offset = train_object.inverse().compose(demo.bottleneck_vertical());
    let train_terminal = train_object
        .inverse()
        .compose(replay(demo, demo.initial_pose()).last().expect("non-empty"));
    let models = fit_object_models(cfg, 0, &offset)?;
    task_trial(
        cfg,
        demo,
        &models,
        &offset,
        &train_terminal,
        0,
        0,
        method,
        correction,
        true,
    )
}

#[allow(clippy::too_many_arguments)]
fn task_trial(
    cfg: &ExperimentConfig,
    demo: &Demonstration,
    models: &ObjectModels,
    offset: &RigidTransform,
    train_terminal: &RigidTransform,
    object_id: usize,
    pose_id: usize,
    method: Method,
    correction: bool,
    want_trace: bool,
) -> Result<(TrialRecord, Vec<RigidTransform>), HarnessError> {
    let placement_seed = derive_seed(
        cfg.master_seed,
        &[tag::PLACEMENT, object_id as u64, pose_id as u64],
    );
    let trial_seed = derive_seed(
        cfg.master_seed,
        &[
            tag::TRIAL,
            object_id as u64,
            pose_id as u64,
            method.order_index() as u64,
            correction as u64,
        ],
    );
    let mut placement_rng = derive_rng(placement_seed, &[tag::PLACEMENT]);
    let mut world = place_object_with_offset_rng(&cfg.scene, &mut placement_rng, Mode::Test, offset);
    let mut trial_rng = derive_rng(trial_seed, &[tag::TRIAL]);
    world.ee_pose = sample_approach_start_with_rng(&cfg.scene, &mut trial_rng, Mode::Test);

    let outcome = run_approach(cfg, models, &mut world, method, &mut trial_rng, want_trace)?;
    if correction {
        apply_correction(models, &mut world, outcome.steps, &mut trial_rng)?;
    }
    // reorient to the demonstrated orientation, then replay open loop
    world.ee_pose = world.ee_pose.compose(demo.reorient());
    let trajectory = replay(demo, &world.ee_pose);
    let terminal = trajectory.last().expect("replay includes the start pose");

    let object_relative = world.object_transform().inverse().compose(terminal);
    let diff = train_terminal.inverse().compose(&object_relative);
    let pos_error = diff.translation().norm();
    let ori_error = diff.rotation_angle();
    let success = within_tolerance(
        pos_error,
        ori_error,
        cfg.success_tolerance_pos,
        cfg.success_tolerance_yaw,
    );
    let record = TrialRecord {
        method: method.name(),
        correction,
        object_id,
        pose_id,
        seed: trial_seed,
        final_pos_error_mm: pos_error * 1000.0,
        final_yaw_error_deg: ori_error.to_degrees(),
        success: Some(success),
        trace: outcome.trace,
    };
    Ok((record, trajectory))
}

/// Task success: terminal object-relative errors within both tolerances.
/// A zero tolerance is unsatisfiable under any nonzero error.
pub fn within_tolerance(pos_error: f64, ori_error: f64, tol_pos: f64, tol_ori: f64) -> bool {
    pos_error <= tol_pos && ori_error <= tol_ori
}

fn sort_records(cfg: &ExperimentConfig, records: &mut [TrialRecord]) {
    let order = |r: &TrialRecord| {
        let method_order = cfg
            .methods
            .iter()
            .position(|m| m.name() == r.method)
            .unwrap_or(usize::MAX);
        (r.object_id, r.pose_id, method_order, r.correction as usize)
    };
    records.sort_by_key(order);
}

/// Aggregate records into the report table: per-object mean/min/max, then
/// averaged across objects, one row per method (+correction variant).
pub fn aggregate(cfg: &ExperimentConfig, records: &[TrialRecord]) -> Result<ReportTable, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::EmptyResults);
    }
    let mut labels: Vec<(usize, bool, String)> = Vec::new();
    for r in records {
        let method_order = cfg
            .methods
            .iter()
            .position(|m| m.name() == r.method)
            .unwrap_or(usize::MAX);
        let key = (method_order, r.correction, label_of(r));
        if !labels.contains(&key) {
            labels.push(key);
        }
    }
    labels.sort();

    let mut rows = Vec::with_capacity(labels.len());
    for (_, correction, label) in labels {
        let group: Vec<&TrialRecord> = records
            .iter()
            .filter(|r| label_of(r) == label && r.correction == correction)
            .collect();
        let mut object_ids: Vec<usize> = group.iter().map(|r| r.object_id).collect();
        object_ids.sort_unstable();
        object_ids.dedup();

        let mut pos = StatAverager::default();
        let mut ori = StatAverager::default();
        for object_id in object_ids {
            let pos_errors: Vec<f64> = group
                .iter()
                .filter(|r| r.object_id == object_id)
                .map(|r| r.final_pos_error_mm)
                .collect();
            let ori_errors: Vec<f64> = group
                .iter()
                .filter(|r| r.object_id == object_id)
                .map(|r| r.final_yaw_error_deg)
                .collect();
            pos.add(&pos_errors);
            ori.add(&ori_errors);
        }
        let (pos_mean, pos_min, pos_max) = pos.finish();
        let (ori_mean, ori_min, ori_max) = ori.finish();
        debug_assert!(pos_min <= pos_mean && pos_mean <= pos_max);
        rows.push(ReportRow {
            label,
            pos_mean_mm: pos_mean,
            pos_min_mm: pos_min,
            pos_max_mm: pos_max,
            ori_mean_deg: ori_mean,
            ori_min_deg: ori_min,
            ori_max_deg: ori_max,
        });
    }
    Ok(ReportTable { rows })
}

fn label_of(r: &TrialRecord) -> String {
    if r.correction {
        format!("{}_corrected", r.method)
    } else {
        r.method.clone()
    }
}

/// Accumulates per-object (mean, min, max) triples and averages them.
#[derive(Default)]
struct StatAverager {
    mean: f64,
    min: f64,
    max: f64,
    n: usize,
}

impl StatAverager {
    fn add(&mut self, values: &[f64]) {
        if values.is_empty() {
            return;
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        self.mean += mean;
        self.min += min;
        self.max += max;
        self.n += 1;
    }

    fn finish(&self) -> (f64, f64, f64) {
        let n = self.n.max(1) as f64;
        (self.mean / n, self.min / n, self.max / n)
    }
}

/// Success-rate summary per (method, correction) for the task benchmark.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TaskSummaryRow {
    pub label: String,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub pos_mean_mm: f64,
    pub ori_mean_deg: f64,
}

pub fn summarize_task(
    cfg: &ExperimentConfig,
    records: &[TrialRecord],
) -> Result<Vec<TaskSummaryRow>, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::EmptyResults);
    }
    let mut labels: Vec<(usize, bool, String)> = Vec::new();
    for r in records {
        let method_order = cfg
            .methods
            .iter()
            .position(|m| m.name() == r.method)
            .unwrap_or(usize::MAX);
        let key = (method_order, r.correction, label_of(r));
        if !labels.contains(&key) {
            labels.push(key);
        }
    }
    labels.sort();
    let mut rows = Vec::new();
    for (_, correction, label) in labels {
        let group: Vec<&TrialRecord> = records
            .iter()
            .filter(|r| label_of(r) == label && r.correction == correction)
            .collect();
        let trials = group.len();
        let successes = group
            .iter()
            .filter(|r| r.success == Some(true))
            .count();
        rows.push(TaskSummaryRow {
            label,
            trials,
            successes,
            success_rate: successes as f64 / trials as f64,
            pos_mean_mm: group.iter().map(|r| r.final_pos_error_mm).sum::<f64>() / trials as f64,
            ori_mean_deg: group.iter().map(|r| r.final_yaw_error_deg).sum::<f64>() / trials as f64,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_tolerance_is_unsatisfiable_under_nonzero_error() {
        assert!(!within_tolerance(1e-12, 0.0, 0.0, 0.0));
        assert!(!within_tolerance(0.0, 1e-12, 0.0, 0.0));
        assert!(within_tolerance(0.0, 0.0, 0.0, 0.0));
        assert!(within_tolerance(0.009, 0.1, 0.010, 0.2));
        assert!(!within_tolerance(0.011, 0.1, 0.010, 0.2));
    }

    #[test]
    fn aggregation_rejects_empty_and_orders_cells() {
        let cfg = ExperimentConfig::default();
        assert!(matches!(
            aggregate(&cfg, &[]),
            Err(HarnessError::EmptyResults)
        ));
        let records: Vec<TrialRecord> = (0..3)
            .flat_map(|object_id| {
                (0..4).map(move |pose_id| TrialRecord {
                    method: "visual_servoing".into(),
                    correction: false,
                    object_id,
                    pose_id,
                    seed: 0,
                    final_pos_error_mm: (object_id * 4 + pose_id) as f64,
                    final_yaw_error_deg: 1.0,
                    success: None,
                    trace: None,
                })
            })
            .collect();
        let table = aggregate(&cfg, &records).unwrap();
        assert_eq!(table.rows.len(), 1);
        let row = &table.rows[0];
        assert!(row.pos_min_mm <= row.pos_mean_mm && row.pos_mean_mm <= row.pos_max_mm);
        // per-object means {1.5, 5.5, 9.5} average to 5.5
        assert!((row.pos_mean_mm - 5.5).abs() < 1e-12);
        // per-object minima {0, 4, 8} average to 4
        assert!((row.pos_min_mm - 4.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_config_is_rejected_before_running() {
        let cfg = ExperimentConfig {
            n_objects: 0,
            ..Default::default()
        };
        assert!(matches!(
            run_target_reaching(&cfg, false),
            Err(HarnessError::Config(_))
        ));
    }
}

//! Experiment configuration and its flat key-value file format.
//!
//! The config file is line-oriented `section.key = value` text. `#` starts a
//! comment, blank lines are skipped, unknown or duplicate keys are hard
//! errors. Every key has a default; an absent file means "all defaults".
//! Keys and units:
//!
//! ```text
//! scene.task_space_side            m     side of the square task space (0.40)
//! scene.approach_height            m     approach start height above the table (0.50)
//! scene.table_height               m     world z of the table surface (0.0)
//! scene.bottleneck_height          m     default bottleneck height above the table (0.10)
//! scene.object_yaw_range           rad   full yaw span for test placements (pi/2)
//! scene.controller_speed           m/s   approach speed (0.10)
//! scene.dt                         s     control period (1/30)
//! noise.approach.pos_sigma_base    m     position sigma at zero distance (0.004)
//! noise.approach.pos_sigma_slope   m/m   position sigma growth per meter (0.02)
//! noise.approach.yaw_sigma_base    rad   yaw sigma at zero distance (0.07)
//! noise.approach.yaw_sigma_slope   rad/m yaw sigma growth per meter (0.15)
//! noise.approach.ensemble_size     -     draws per ensemble observation (10)
//! noise.last_inch.*                      same five keys for the correction sensor
//!                                        (0.001, 0.01, 0.01, 0.05, 10)
//! noise.object_spread              -     relative spread of per-object noise draws (0.2)
//! experiment.methods               -     comma-separated method list (all eleven)
//! experiment.best_image_score      -     position | trace | yaw (position)
//! experiment.n_objects             -     synthetic objects per run (7)
//! experiment.n_poses_per_object    -     test placements per object (5)
//! experiment.n_train_trajectories  -     approach data-collection trajectories (50)
//! experiment.n_last_inch_trajectories -  correction data-collection trajectories (50)
//! experiment.success_tolerance_pos m     task-success position tolerance (0.010)
//! experiment.success_tolerance_yaw rad   task-success yaw tolerance (10 degrees)
//! experiment.master_seed           -     root of every RNG stream (7)
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use tabletop::estimation::{BestImageScore, EstimatorKind};
use tabletop::scene::SceneConfig;
use tabletop::sensor::NoiseModel;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("duplicate config key `{0}`")]
    DuplicateKey(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A benchmark method: the ground-truth oracle or one of the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Oracle,
    Estimator(EstimatorKind),
}

impl Method {
    /// All eleven methods in canonical report order: the oracle first, then
    /// the estimator comparison set.
    pub fn all() -> Vec<Method> {
        let mut out = vec![Method::Oracle];
        out.extend(EstimatorKind::comparison_set().map(Method::Estimator));
        out
    }

    pub fn name(&self) -> String {
        match self {
            Method::Oracle => "oracle".into(),
            Method::Estimator(kind) => kind.name(),
        }
    }

    pub fn parse(s: &str) -> Result<Method, ConfigError> {
        if s == "oracle" {
            return Ok(Method::Oracle);
        }
        EstimatorKind::parse(s)
            .map(Method::Estimator)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Position in the canonical report order.
    pub fn order_index(&self) -> usize {
        Method::all().iter().position(|m| m == self).expect("canonical set")
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub scene: SceneConfig,
    pub noise_approach: NoiseModel,
    pub noise_last_inch: NoiseModel,
    /// Relative spread of the per-object scale factors applied to the noise
    /// parameters; object factors are uniform in [1-spread, 1+spread].
    pub object_spread: f64,
    pub methods: Vec<Method>,
    /// Scalar ranking used by the BestImage methods.
    pub best_image_score: BestImageScore,
    pub n_objects: usize,
    pub n_poses_per_object: usize,
    pub n_train_trajectories: usize,
    pub n_last_inch_trajectories: usize,
    /// Task-success tolerance: position (m) and orientation (rad).
    pub success_tolerance_pos: f64,
    pub success_tolerance_yaw: f64,
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scene: SceneConfig::default(),
            noise_approach: NoiseModel::new(0.004, 0.02, 0.07, 0.15, 10).unwrap(),
            noise_last_inch: NoiseModel::new(0.001, 0.01, 0.01, 0.05, 10).unwrap(),
            object_spread: 0.2,
            methods: Method::all(),
            best_image_score: BestImageScore::default(),
            n_objects: 7,
            n_poses_per_object: 5,
            n_train_trajectories: 50,
            n_last_inch_trajectories: 50,
            success_tolerance_pos: 0.010,
            success_tolerance_yaw: 10.0_f64.to_radians(),
            master_seed: 7,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        let mut seen = BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Parse {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::DuplicateKey(key.to_string()));
            }
            cfg.apply(key, value).map_err(|message| ConfigError::Parse { line, message })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn number(value: &str) -> Result<f64, String> {
            value
                .parse::<f64>()
                .map_err(|_| format!("`{value}` is not a number"))
        }
        fn count(value: &str) -> Result<usize, String> {
            value
                .parse::<usize>()
                .map_err(|_| format!("`{value}` is not a non-negative integer"))
        }
        match key {
            "scene.task_space_side" => self.scene.task_space_side = number(value)?,
            "scene.approach_height" => self.scene.approach_height = number(value)?,
            "scene.table_height" => self.scene.table_height = number(value)?,
            "scene.bottleneck_height" => self.scene.bottleneck_height = number(value)?,
            "scene.object_yaw_range" => self.scene.object_yaw_range = number(value)?,
            "scene.controller_speed" => self.scene.controller_speed = number(value)?,
            "scene.dt" => self.scene.dt = number(value)?,
            "noise.approach.pos_sigma_base" => self.noise_approach.pos_sigma_base = number(value)?,
            "noise.approach.pos_sigma_slope" => {
                self.noise_approach.pos_sigma_slope = number(value)?
            }
            "noise.approach.yaw_sigma_base" => self.noise_approach.yaw_sigma_base = number(value)?,
            "noise.approach.yaw_sigma_slope" => {
                self.noise_approach.yaw_sigma_slope = number(value)?
            }
            "noise.approach.ensemble_size" => self.noise_approach.ensemble_size = count(value)?,
            "noise.last_inch.pos_sigma_base" => {
                self.noise_last_inch.pos_sigma_base = number(value)?
            }
            "noise.last_inch.pos_sigma_slope" => {
                self.noise_last_inch.pos_sigma_slope = number(value)?
            }
            "noise.last_inch.yaw_sigma_base" => {
                self.noise_last_inch.yaw_sigma_base = number(value)?
            }
            "noise.last_inch.yaw_sigma_slope" => {
                self.noise_last_inch.yaw_sigma_slope = number(value)?
            }
            "noise.last_inch.ensemble_size" => self.noise_last_inch.ensemble_size = count(value)?,
            "noise.object_spread" => self.object_spread = number(value)?,
            "experiment.methods" => {
                let mut methods = Vec::new();
                for name in value.split(',') {
                    let name = name.trim();
                    if name.is_empty() {
                        continue;
                    }
                    methods.push(Method::parse(name).map_err(|e| e.to_string())?);
                }
                self.methods = methods;
            }
            "experiment.best_image_score" => {
                self.best_image_score = BestImageScore::parse(value).map_err(|e| e.to_string())?
            }
            "experiment.n_objects" => self.n_objects = count(value)?,
            "experiment.n_poses_per_object" => self.n_poses_per_object = count(value)?,
            "experiment.n_train_trajectories" => self.n_train_trajectories = count(value)?,
            "experiment.n_last_inch_trajectories" => {
                self.n_last_inch_trajectories = count(value)?
            }
            "experiment.success_tolerance_pos" => self.success_tolerance_pos = number(value)?,
            "experiment.success_tolerance_yaw" => self.success_tolerance_yaw = number(value)?,
            "experiment.master_seed" => {
                self.master_seed = value
                    .parse::<u64>()
                    .map_err(|_| format!("`{value}` is not a valid seed"))?
            }
            other => return Err(ConfigError::UnknownKey(other.to_string()).to_string()),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.scene
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        for (name, model) in [
            ("approach", &self.noise_approach),
            ("last_inch", &self.noise_last_inch),
        ] {
            NoiseModel::new(
                model.pos_sigma_base,
                model.pos_sigma_slope,
                model.yaw_sigma_base,
                model.yaw_sigma_slope,
                model.ensemble_size,
            )
            .map_err(|e| ConfigError::Invalid(format!("noise.{name}: {e}")))?;
        }
        // The correction sensor must be strictly tighter than the approach
        // sensor at zero distance; the correction-benefit property relies
        // on it and the loader enforces it.
        if self.noise_last_inch.pos_sigma_base >= self.noise_approach.pos_sigma_base
            || self.noise_last_inch.yaw_sigma_base >= self.noise_approach.yaw_sigma_base
        {
            return Err(ConfigError::Invalid(
                "noise.last_inch sigma bases must be strictly smaller than noise.approach".into(),
            ));
        }
        if !(self.object_spread.is_finite() && (0.0..1.0).contains(&self.object_spread)) {
            return Err(ConfigError::Invalid(
                "noise.object_spread must lie in [0, 1)".into(),
            ));
        }
        if self.methods.is_empty() {
            return Err(ConfigError::Invalid("experiment.methods is empty".into()));
        }
        let counts = [
            ("experiment.n_objects", self.n_objects),
            ("experiment.n_poses_per_object", self.n_poses_per_object),
            ("experiment.n_train_trajectories", self.n_train_trajectories),
            (
                "experiment.n_last_inch_trajectories",
                self.n_last_inch_trajectories,
            ),
        ];
        for (name, v) in counts {
            if v < 1 {
                return Err(ConfigError::Invalid(format!("{name} must be >= 1")));
            }
        }
        if !(self.success_tolerance_pos > 0.0 && self.success_tolerance_yaw > 0.0) {
            return Err(ConfigError::Invalid(
                "success tolerances must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn parse_overrides_and_comments() {
        let text = "\
# comment line
scene.task_space_side = 0.30   # trailing comment
experiment.master_seed = 99
experiment.methods = oracle, visual_servoing, filtering_prior
";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.scene.task_space_side, 0.30);
        assert_eq!(cfg.master_seed, 99);
        assert_eq!(cfg.methods.len(), 3);
        assert_eq!(cfg.methods[0], Method::Oracle);
    }

    #[test]
    fn best_image_score_key_parses() {
        let cfg = ExperimentConfig::parse("experiment.best_image_score = trace").unwrap();
        assert_eq!(cfg.best_image_score, BestImageScore::Trace);
        assert!(ExperimentConfig::parse("experiment.best_image_score = nope").is_err());
    }

    #[test]
    fn unknown_key_is_a_hard_error() {
        let err = ExperimentConfig::parse("scene.task_space_sids = 0.3").unwrap_err();
        assert!(err.to_string().contains("unknown config key"));
    }

    #[test]
    fn duplicate_key_is_a_hard_error() {
        let text = "scene.dt = 0.01\nscene.dt = 0.02\n";
        assert!(matches!(
            ExperimentConfig::parse(text),
            Err(ConfigError::DuplicateKey(_))
        ));
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(ExperimentConfig::parse("scene.dt 0.01").is_err());
        assert!(ExperimentConfig::parse("scene.dt = fast").is_err());
        assert!(ExperimentConfig::parse("experiment.n_objects = -3").is_err());
    }

    #[test]
    fn looser_correction_sensor_is_rejected() {
        let text = "noise.last_inch.pos_sigma_base = 0.004\n";
        assert!(matches!(
            ExperimentConfig::parse(text),
            Err(ConfigError::Invalid(_))
        ));
    }

    #[test]
    fn best_image_prior_is_rejected_in_method_list() {
        assert!(ExperimentConfig::parse("experiment.methods = best_image_prior").is_err());
    }

    #[test]
    fn method_order_is_canonical() {
        let all = Method::all();
        assert_eq!(all.len(), 11);
        assert_eq!(all[0], Method::Oracle);
        for (i, m) in all.iter().enumerate() {
            assert_eq!(m.order_index(), i);
        }
    }
}

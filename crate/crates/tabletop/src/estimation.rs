//! Sequential bottleneck-pose estimators.
//!
//! Every method consumes a stream of base-frame [`Observation`]s of the same
//! stationary pose and exposes a current 3-DOF estimate:
//!
//! * **FirstImage**: locks onto the first observation forever.
//! * **BestImage**: keeps the observation with the smallest position sigma
//!   seen so far (ties go to the earliest).
//! * **VisualServoing**: returns only the latest observation.
//! * **Batch**: inverse-variance weighted mean over all observations so
//!   far, the optimal linear fusion under independent Gaussian noise. Kept
//!   as running sums of `x̂/σ̂²` and `1/σ̂²`.
//! * **Filtering**: a Kalman filter with zero process noise; the previous
//!   estimate is fused with the current observation and both the mean and
//!   the variance are re-normalized each step. Initialized with the first
//!   observation's value and the prior sigma.
//!
//! Batch and Filtering are deliberately implemented as two different
//! computational routes; their per-step equivalence (with the prior standing
//! in for the first observation's sigma) is an algebraic identity that the
//! tests and the acceptance suite verify numerically.
//!
//! Fusion is per-dimension with a diagonal covariance. Yaw is fused on
//! residuals relative to the first observation's yaw and re-wrapped on
//! output, which is exact while all observations stay within a half-turn of
//! the reference, which the bounded object yaw range guarantees.

use crate::geometry::{wrap_angle, PlanarPose};
use crate::sensor::Observation;
use nalgebra::Vector3;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error("cannot run an estimator over an empty observation stream")]
    EmptyStream,
    #[error("unsupported estimator: {0}")]
    UnsupportedKind(String),
}

/// Where a per-observation sigma comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UncertaintySource {
    /// Spread of an ensemble of predictions at observation time.
    Dropout,
    /// Distance-regressed sigma from a fitted predictor.
    Predicted,
    /// Constant validation-RMSE sigma.
    Prior,
}

impl UncertaintySource {
    pub fn name(&self) -> &'static str {
        match self {
            UncertaintySource::Dropout => "dropout",
            UncertaintySource::Predicted => "predicted",
            UncertaintySource::Prior => "prior",
        }
    }
}

/// One of the ten estimation methods under comparison.
///
/// `BestImage(Prior)` is rejected: with a constant sigma every observation
/// scores the same and "best" is ill-defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    FirstImage,
    BestImage(UncertaintySource),
    VisualServoing,
    Batch(UncertaintySource),
    Filtering(UncertaintySource),
}

impl EstimatorKind {
    pub fn validate(&self) -> Result<(), EstimationError> {
        match self {
            EstimatorKind::BestImage(UncertaintySource::Prior) => Err(
                EstimationError::UnsupportedKind("best_image_prior".into()),
            ),
            _ => Ok(()),
        }
    }

    pub fn uncertainty_source(&self) -> Option<UncertaintySource> {
        match self {
            EstimatorKind::FirstImage | EstimatorKind::VisualServoing => None,
            EstimatorKind::BestImage(s)
            | EstimatorKind::Batch(s)
            | EstimatorKind::Filtering(s) => Some(*s),
        }
    }

    /// The ten comparable methods, in canonical report order.
    pub fn comparison_set() -> [EstimatorKind; 10] {
        use EstimatorKind::*;
        use UncertaintySource::*;
        [
            FirstImage,
            BestImage(Dropout),
            BestImage(Predicted),
            VisualServoing,
            Batch(Prior),
            Batch(Dropout),
            Batch(Predicted),
            Filtering(Prior),
            Filtering(Dropout),
            Filtering(Predicted),
        ]
    }

    pub fn name(&self) -> String {
        match self {
            EstimatorKind::FirstImage => "first_image".into(),
            EstimatorKind::VisualServoing => "visual_servoing".into(),
            EstimatorKind::BestImage(s) => format!("best_image_{}", s.name()),
            EstimatorKind::Batch(s) => format!("batch_{}", s.name()),
            EstimatorKind::Filtering(s) => format!("filtering_{}", s.name()),
        }
    }

    pub fn parse(s: &str) -> Result<Self, EstimationError> {
        use EstimatorKind::*;
        use UncertaintySource::*;
        let kind = match s {
            "first_image" => FirstImage,
            "visual_servoing" => VisualServoing,
            "best_image_dropout" => BestImage(Dropout),
            "best_image_predicted" => BestImage(Predicted),
            "batch_prior" => Batch(Prior),
            "batch_dropout" => Batch(Dropout),
            "batch_predicted" => Batch(Predicted),
            "filtering_prior" => Filtering(Prior),
            "filtering_dropout" => Filtering(Dropout),
            "filtering_predicted" => Filtering(Predicted),
            other => return Err(EstimationError::UnsupportedKind(other.into())),
        };
        kind.validate()?;
        Ok(kind)
    }
}

/// Scalar ranking BestImage applies to a 3-vector sigma. Position sigma is
/// the default since position dominates task success; the alternatives rank
/// by total variance or by yaw alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum BestImageScore {
    #[default]
    PositionSigma,
    Trace,
    YawSigma,
}

impl BestImageScore {
    fn score(&self, sigma: &Vector3<f64>) -> f64 {
        match self {
            BestImageScore::PositionSigma => sigma[0],
            BestImageScore::Trace => sigma.component_mul(sigma).sum(),
            BestImageScore::YawSigma => sigma[2],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BestImageScore::PositionSigma => "position",
            BestImageScore::Trace => "trace",
            BestImageScore::YawSigma => "yaw",
        }
    }

    pub fn parse(s: &str) -> Result<Self, EstimationError> {
        match s {
            "position" => Ok(BestImageScore::PositionSigma),
            "trace" => Ok(BestImageScore::Trace),
            "yaw" => Ok(BestImageScore::YawSigma),
            other => Err(EstimationError::UnsupportedKind(format!(
                "best-image score `{other}`"
            ))),
        }
    }
}

/// A fused estimate with its per-dimension sigma.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: PlanarPose,
    pub sigma: Vector3<f64>,
    pub n_observations: usize,
}

#[derive(Debug, Clone)]
enum State {
    /// FirstImage / BestImage / VisualServoing keep a single observation.
    Single { est: Estimate },
    /// Running inverse-variance sums over residuals.
    Batch {
        yaw_ref: f64,
        info: Vector3<f64>,
        weighted: Vector3<f64>,
        n: usize,
    },
    /// Normalized mean/variance recursion over residuals.
    Filter {
        yaw_ref: f64,
        mean: Vector3<f64>,
        var: Vector3<f64>,
        n: usize,
    },
}

/// Explicit estimator state; `update` is the only transition.
#[derive(Debug, Clone)]
pub struct Estimator {
    kind: EstimatorKind,
    prior: Vector3<f64>,
    best_score: BestImageScore,
    state: Option<State>,
}

impl Estimator {
    /// `prior` is the constant validation sigma; it seeds the Filtering
    /// variance and is ignored by the other kinds.
    pub fn new(kind: EstimatorKind, prior: Vector3<f64>) -> Result<Self, EstimationError> {
        Self::with_best_image_score(kind, prior, BestImageScore::default())
    }

    pub fn with_best_image_score(
        kind: EstimatorKind,
        prior: Vector3<f64>,
        best_score: BestImageScore,
    ) -> Result<Self, EstimationError> {
        kind.validate()?;
        Ok(Self {
            kind,
            prior,
            best_score,
            state: None,
        })
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    /// Fold in one observation and return the updated estimate.
    pub fn update(&mut self, obs: &Observation) -> Estimate {
        debug_assert!(obs.sigma.iter().all(|s| *s > 0.0));
        let state = match self.state.take() {
            None => self.init_state(obs),
            Some(state) => self.advance(state, obs),
        };
        let est = estimate_of(&state);
        self.state = Some(state);
        est
    }

    /// The estimate after the observations folded in so far, if any.
    pub fn current(&self) -> Option<Estimate> {
        self.state.as_ref().map(estimate_of)
    }

    fn init_state(&self, obs: &Observation) -> State {
        let est = Estimate {
            value: obs.predicted,
            sigma: obs.sigma,
            n_observations: 1,
        };
        match self.kind {
            EstimatorKind::FirstImage
            | EstimatorKind::BestImage(_)
            | EstimatorKind::VisualServoing => State::Single { est },
            EstimatorKind::Batch(_) => {
                let mut info = Vector3::zeros();
                let mut weighted = Vector3::zeros();
                accumulate(&mut info, &mut weighted, obs, obs.predicted.yaw);
                State::Batch {
                    yaw_ref: obs.predicted.yaw,
                    info,
                    weighted,
                    n: 1,
                }
            }
            EstimatorKind::Filtering(_) => State::Filter {
                yaw_ref: obs.predicted.yaw,
                mean: Vector3::new(obs.predicted.x, obs.predicted.y, 0.0),
                var: self.prior.component_mul(&self.prior),
                n: 1,
            },
        }
    }

    fn advance(&self, state: State, obs: &Observation) -> State {
        match (self.kind, state) {
            (EstimatorKind::FirstImage, State::Single { mut est }) => {
                est.n_observations += 1;
                State::Single { est }
            }
            (EstimatorKind::VisualServoing, State::Single { est }) => State::Single {
                est: Estimate {
                    value: obs.predicted,
                    sigma: obs.sigma,
                    n_observations: est.n_observations + 1,
                },
            },
            (EstimatorKind::BestImage(_), State::Single { mut est }) => {
                // strict < keeps the earliest observation on score ties
                if self.best_score.score(&obs.sigma) < self.best_score.score(&est.sigma) {
                    est.value = obs.predicted;
                    est.sigma = obs.sigma;
                }
                est.n_observations += 1;
                State::Single { est }
            }
            (
                EstimatorKind::Batch(_),
                State::Batch {
                    yaw_ref,
                    mut info,
                    mut weighted,
                    n,
                },
            ) => {
                accumulate(&mut info, &mut weighted, obs, yaw_ref);
                State::Batch {
                    yaw_ref,
                    info,
                    weighted,
                    n: n + 1,
                }
            }
            (
                EstimatorKind::Filtering(_),
                State::Filter {
                    yaw_ref,
                    mut mean,
                    mut var,
                    n,
                },
            ) => {
                let residual = Vector3::new(
                    obs.predicted.x,
                    obs.predicted.y,
                    wrap_angle(obs.predicted.yaw - yaw_ref),
                );
                for dim in 0..3 {
                    let info_prev = 1.0 / var[dim];
                    let info_obs = 1.0 / (obs.sigma[dim] * obs.sigma[dim]);
                    mean[dim] =
                        (mean[dim] * info_prev + residual[dim] * info_obs) / (info_prev + info_obs);
                    var[dim] = 1.0 / (info_prev + info_obs);
                }
                State::Filter {
                    yaw_ref,
                    mean,
                    var,
                    n: n + 1,
                }
            }
            _ => unreachable!("state variant always matches the estimator kind"),
        }
    }
}

fn accumulate(
    info: &mut Vector3<f64>,
    weighted: &mut Vector3<f64>,
    obs: &Observation,
    yaw_ref: f64,
) {
    let residual = Vector3::new(
        obs.predicted.x,
        obs.predicted.y,
        wrap_angle(obs.predicted.yaw - yaw_ref),
    );
    for dim in 0..3 {
        let w = 1.0 / (obs.sigma[dim] * obs.sigma[dim]);
        info[dim] += w;
        weighted[dim] += residual[dim] * w;
    }
}

fn estimate_of(state: &State) -> Estimate {
    match state {
        State::Single { est } => *est,
        State::Batch {
            yaw_ref,
            info,
            weighted,
            n,
        } => Estimate {
            value: PlanarPose::new(
                weighted[0] / info[0],
                weighted[1] / info[1],
                yaw_ref + weighted[2] / info[2],
            ),
            sigma: Vector3::new(
                (1.0 / info[0]).sqrt(),
                (1.0 / info[1]).sqrt(),
                (1.0 / info[2]).sqrt(),
            ),
            n_observations: *n,
        },
        State::Filter {
            yaw_ref,
            mean,
            var,
            n,
        } => Estimate {
            value: PlanarPose::new(mean[0], mean[1], yaw_ref + mean[2]),
            sigma: Vector3::new(var[0].sqrt(), var[1].sqrt(), var[2].sqrt()),
            n_observations: *n,
        },
    }
}

/// Per-dimension fused variance of independent Gaussian estimates:
/// `1 / Σ(1/σ²)`.
pub fn fused_variance(sigmas: &[Vector3<f64>]) -> Vector3<f64> {
    let mut info = Vector3::<f64>::zeros();
    for s in sigmas {
        for dim in 0..3 {
            debug_assert!(s[dim] > 0.0);
            info[dim] += 1.0 / (s[dim] * s[dim]);
        }
    }
    Vector3::new(1.0 / info[0], 1.0 / info[1], 1.0 / info[2])
}

/// Run one estimator over a full stream and return the per-step estimates;
/// each output depends only on the observations up to its index.
pub fn run_estimator(
    obs_stream: &[Observation],
    kind: EstimatorKind,
    prior: Vector3<f64>,
) -> Result<Vec<Estimate>, EstimationError> {
    if obs_stream.is_empty() {
        return Err(EstimationError::EmptyStream);
    }
    let mut estimator = Estimator::new(kind, prior)?;
    Ok(obs_stream.iter().map(|o| estimator.update(o)).collect())
}

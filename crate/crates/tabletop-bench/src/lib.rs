//! Seeded Monte-Carlo benchmark harness for the tabletop estimation
//! pipeline: a target-reaching comparison of the sequential estimators and a
//! replay task benchmark with tolerance-based success judgement, both fully
//! deterministic given a config and master seed.

pub mod config;
pub mod experiment;
pub mod report;
pub mod seeding;

pub use config::{ConfigError, ExperimentConfig, Method};
pub use experiment::{
    run_target_reaching, run_task_benchmark, HarnessError, ReachOutcome, ReportTable, TrialRecord,
};

//! Evaluation suite for the pose/force estimator: per-window position and
//! angle errors, per-finger force statistics, leave-one-user-out
//! cross-validation, input-ablation comparisons, and report emission.
//!
//! Metrics operate on the fused predictions only — the auxiliary branch heads
//! exist to shape training, not to be reported. Forces are compared in
//! normalized units throughout; poses are wrist-origin centimeters, so
//! [`mpjpe`] is directly the mean landmark error in cm.

use thiserror::Error;

mod metrics;
mod report;
mod runs;

pub use metrics::{angle_diff, force_metrics, mpjpe, FingerStats, ForceMetrics, FINGERS};
pub use model::AblationVariant;
pub use report::{emit_report, evaluate, MetricsReport, METRICS_HEADER};
pub use runs::{run_ablation, run_ablation_suite, run_louo, LouoOutcome};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Train(#[from] train::TrainError),
    #[error(transparent)]
    Pipeline(#[from] pipeline::PipelineError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, EvalError>;

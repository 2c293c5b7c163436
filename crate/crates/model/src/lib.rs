//! The fusion network that turns a 30-frame IMU/EMG window into a hand pose
//! (21 landmarks, wrist-origin cm) and five normalized fingertip forces.
//!
//! Two sequence encoders — a conv-stemmed transformer for the IMU stream and
//! an LSTM-stemmed transformer for the EMG stream — feed stacked bidirectional
//! cross-attention layers. The fused sequence is pooled and decoded by
//! per-finger linear heads; each branch additionally carries an auxiliary
//! pose/force head on its own pooled latent, which is what the modality loss
//! terms train against. Everything runs on [`tensorgrad`] graphs, so the
//! composite loss in [`loss`] is differentiable end to end.

use thiserror::Error;

mod angles;
mod config;
mod loss;
mod net;

pub use angles::{angle_triples, joint_angles_from_pose, INTERIOR_ANGLES};
pub use config::{AblationVariant, Component, ModelConfig, Pooling};
pub use loss::{
    batch_total_loss, loss_nodes, total_loss, LossBreakdown, LossNodes, LossOptions, LossWeights,
};
pub use net::{build, CrossFused, ModelOutput, PoseForceNet, SampleNodes};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: String,
        got: String,
    },
    #[error("degenerate pose: {0}")]
    DegeneratePose(String),
    #[error(transparent)]
    Tensor(#[from] tensorgrad::TensorError),
}

pub type Result<T> = std::result::Result<T, ModelError>;

//! Optimization for the pose+force network: Adam with gradient clipping,
//! staged training with patience-based learning-rate decay and early
//! stopping, and versioned binary checkpoints.

mod checkpoint;
mod optim;
mod stage;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use optim::{adam_step, clip_global_norm, AdamState, GradMap, GRAD_CLIP_NORM};
pub use stage::{
    carve_validation, train_recipe, train_stage, validation_loss, EpochRecord, TrainConfig,
    TrainReport, MICROBATCH,
};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("training split is empty")]
    EmptySplit,
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Tensor(#[from] tensorgrad::TensorError),
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("incompatible checkpoint: {0}")]
    Incompatible(String),
}

pub type Result<T> = std::result::Result<T, TrainError>;

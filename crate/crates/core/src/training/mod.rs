//! Optimizers, training loops and checkpoints.

mod checkpoint;
mod optimizer;
mod trainer;

pub use checkpoint::{Checkpoint, TensorEntry, CHECKPOINT_VERSION};
pub use optimizer::{Optimizer, OptimizerKind};
pub use trainer::{
    fit_e2e, fit_kd, record_mse_loss, train_e2e, train_kd, validate, worker_pool, EpochRecord,
    Role, TrainConfig, TrainHistory, EVAL_STREAM,
};

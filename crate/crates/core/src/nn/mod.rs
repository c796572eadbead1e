//! Minimal deterministic neural-network engine.

mod checkpoint;
mod gradcheck;
mod layer;
mod loss;
mod network;
mod optim;
mod real;
pub mod rng;
mod spec;
mod tensor;
mod train;

use thiserror::Error;

pub use checkpoint::{decode, encode, load_checkpoint, save_checkpoint, Checkpoint, TrainingMeta};
pub use gradcheck::{
    analytic_gradients, gradient_check, relative_error, GradCheckOptions, GradCheckReport, RELATIVE_FLOOR,
};
pub use loss::{cross_entropy, mse, mse_flat, Loss, CE_EPSILON};
pub use network::{Mode, Network};
pub use optim::{Optimizer, OptimizerKind};
pub use real::Real;
pub use spec::{Activation, LayerSpec, NetworkSpec};
pub use tensor::Tensor;
pub use train::{train, EarlyStop, TrainConfig, TrainReport};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training diverged at epoch {epoch}, batch {batch} (loss {loss})")]
    Diverged { epoch: usize, batch: usize, loss: f64 },
    #[error("bad magic: not a network checkpoint")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u16),
    #[error("corrupt checkpoint header: {0}")]
    CorruptHeader(String),
    #[error("truncated weights: expected {expected} bytes, found {found}")]
    TruncatedWeights { expected: usize, found: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

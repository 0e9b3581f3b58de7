//! Two-layer MLP probing classifier.
//!
//! `logits = W2 · relu(W1 · x + b1) + b2`, trained with softmax
//! cross-entropy on frozen features. Everything runs in f64 so analytic
//! gradients can be checked against finite differences.

mod mlp;
mod optim;
mod train;

pub use mlp::{
    backward, forward, forward_batch, init_params, loss, softmax, Gradients, ProbeParams,
};
pub use optim::{
    optimizer_step, AdamState, OptimizerKind, OptimizerState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON,
};
pub use train::{evaluate, predict, train, Dataset, SplitData, TrainReport};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("cannot evaluate on an empty set")]
    EmptySet,
    #[error("label {label} outside 0..{classes}")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("invalid probe config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, ProbeError>;

/// Probe shape and training schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub class_count: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without dev improvement before stopping.
    pub patience: usize,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    /// Standardize each input dimension with train-set statistics.
    #[serde(default)]
    pub standardize: bool,
}

impl ProbeConfig {
    /// Defaults: 256 hidden units, Adam at 1e-3, batches of 64, at most 50
    /// epochs with patience 5.
    pub fn new(input_dim: usize, class_count: usize) -> Self {
        ProbeConfig {
            input_dim,
            hidden_dim: 256,
            class_count,
            seed: 0,
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 50,
            patience: 5,
            optimizer: OptimizerKind::Adam,
            standardize: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("input_dim", self.input_dim),
            ("hidden_dim", self.hidden_dim),
            ("class_count", self.class_count),
            ("batch_size", self.batch_size),
            ("max_epochs", self.max_epochs),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(ProbeError::InvalidConfig(format!(
                "{name} must be positive"
            )));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(ProbeError::InvalidConfig(
                "learning_rate must be positive".into(),
            ));
        }
        Ok(())
    }
}

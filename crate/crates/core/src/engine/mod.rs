//! Exact GCN forward/backward over (reduced) subgraphs and the minibatch
//! trainer.
//!
//! A layer computes `ReLU([X·W_self | (D⁻¹A X)·W_neigh])`; the classifier is a
//! single ReLU layer followed by softmax cross-entropy.

mod aggregate;
mod data;
mod loss;
mod matrix;
mod model;
mod optim;
mod prefetch;
mod train;

pub use aggregate::{aggregate_reduced, Direction};
pub use data::{
    load_model, read_batch_stats, read_features, read_labels, read_matrix, read_model, read_split,
    save_model, write_batch_stats, write_log, write_matrix, write_model, write_split, BatchStats,
    LogRow, Split, MATRIX_MAGIC,
};
pub use loss::{softmax_cross_entropy, LabeledRows, LossReport};
pub use matrix::{DType, Matrix, Scalar};
pub use model::{
    backward, forward, forward_layer, ActivationTape, GcnModel, Gradients, LayerWeights, ReluMask,
};
pub use optim::{OptimizerConfig, OptimizerKind, OptimizerState};
pub use prefetch::run_pipelined;
pub use train::{accuracy, evaluate, train, Dataset, ModelConfig, StepEvent, TrainConfig, TrainReport};

use thiserror::Error;

use crate::graph::GraphError;
use crate::redundancy::ReduceError;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("loss requested but no labeled rows were given")]
    MissingLabels,
    #[error("training diverged at epoch {epoch}, minibatch {minibatch}: loss = {loss}")]
    Diverged { epoch: usize, minibatch: usize, loss: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("bad data: {0}")]
    Data(String),
    #[error(transparent)]
    Reduce(#[from] ReduceError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

//! Recurrent-history networks with hand-written reverse mode.
//!
//! Only one topology exists: an LSTM over the 5-row move history whose final
//! hidden state joins a flat feature vector in front of a ReLU perceptron.
//! The action-value, relation and danger networks differ only in their
//! [`NetSpec`]. Everything is generic over [`Real`] so gradient checks can
//! run in `f64` on the same code that trains in `f32`.

mod net;
mod real;
mod store;

use std::path::PathBuf;

use thiserror::Error;

pub use net::{backward, forward, predict, predict_shared, Activation, Cache, Layout, NetSpec, TensorInfo};
pub use real::{gemm, Real, View};
pub use store::{manifest_config, manifest_path, Direction, ParamStore, RmsProp, CHECKPOINT_FORMAT};

use crate::features::{ACTION_WIDTH, HISTORY_ROWS, HISTORY_ROW_WIDTH, IDENTIFY_FLAT_WIDTH, Q_FLAT_WIDTH};

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch for {what}: expected {expected}, got {got}")]
    ShapeMismatch { what: &'static str, expected: usize, got: usize },
    #[error("invalid network spec: {0}")]
    BadSpec(String),
    #[error("checkpoint not found: {0}")]
    MissingCheckpoint(PathBuf),
    #[error("corrupt checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Number of perceptron layers in every network.
pub const MLP_DEPTH: usize = 6;
pub const DEFAULT_HIDDEN: usize = 128;
pub const DEFAULT_WIDTH: usize = 512;

fn spec(hidden: usize, width: usize, flat_width: usize, out: usize, output: Activation) -> NetSpec {
    let mut layers = vec![width; MLP_DEPTH - 1];
    layers.push(out);
    NetSpec { history_steps: HISTORY_ROWS, history_width: HISTORY_ROW_WIDTH, hidden, flat_width, layers, output }
}

/// Action-value network: input is the action encoding followed by the flat state.
pub fn q_spec(hidden: usize, width: usize) -> NetSpec {
    spec(hidden, width, ACTION_WIDTH + Q_FLAT_WIDTH, 1, Activation::Identity)
}

/// Relation network: one confidence per relative seat (up, front, down).
pub fn relation_spec(hidden: usize, width: usize) -> NetSpec {
    spec(hidden, width, IDENTIFY_FLAT_WIDTH, 3, Activation::Sigmoid)
}

pub fn danger_spec(hidden: usize, width: usize) -> NetSpec {
    spec(hidden, width, IDENTIFY_FLAT_WIDTH, 1, Activation::Sigmoid)
}

//! Neural RUL regressors on the autodiff tape: MLP, CNN, LSTM and the
//! CNN-LSTM hybrid, with mini-batch training and engine-grouped
//! cross-validation.

mod cv;
mod lstm;
mod model;
mod train;

use thiserror::Error;

use crate::autodiff::AutodiffError;

pub use cv::{assign_folds, cross_validate, CvCandidate, CvResult};
pub use lstm::{lstm_cell, lstm_cell_on_tape, LstmParams, LstmVars, GATES};
pub use model::{Architecture, ModelConfig, ParamSet};
pub use train::{forward, train, Optimizer, TrainConfig, TrainedModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no windows to train on")]
    EmptyWindows,
    #[error("loss became non-finite in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("{engines} engines cannot fill {folds} folds")]
    TooFewEngines { engines: usize, folds: usize },
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

pub type Result<T> = std::result::Result<T, NnError>;

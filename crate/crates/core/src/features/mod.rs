//! Feature engineering: PCA, Pearson correlation, univariate F-score ranking
//! and top-K selection.

mod pca;
mod ranking;

use thiserror::Error;

pub use pca::{append_pc1, covariance_matrix, pca_fit, pca_reconstruct, pca_transform, PcaModel};
pub use ranking::{correlation_matrix, f_scores, pearson, select_k_best, FeatureRanking, F_SCORE_SENTINEL};

use crate::frame::FrameError;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("requested {requested} components from {features} features")]
    NComponentsTooLarge { requested: usize, features: usize },
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("column mismatch: expected {expected:?}, found {found:?}")]
    ColumnMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("k = {k} outside 1..={n}")]
    KOutOfRange { k: usize, n: usize },
    #[error("target has {target} rows but frame has {rows}")]
    TargetLength { target: usize, rows: usize },
    #[error(transparent)]
    Frame(#[from] FrameError),
}

pub type Result<T> = std::result::Result<T, FeatureError>;

//! Non-neural comparison models: ordinary least squares, CART regression
//! trees with cost-complexity pruning, random forests and least-squares
//! gradient boosting.

mod boost;
mod forest;
mod linreg;
mod tree;

use thiserror::Error;

pub use boost::{boost_fit, BoostConfig, BoostModel};
pub use forest::{forest_fit, Forest, ForestConfig};
pub use linreg::{linreg_fit, LinearModel};
pub use tree::{best_split, pruning_path, tree_fit, SplitCandidate, TreeNode, TreeParams};

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("design matrix is all zeros")]
    DegenerateDesign,
    #[error("target has {target} values but design has {rows} rows")]
    TargetLength { target: usize, rows: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("model expects {expected} features, got {got}")]
    FeatureCount { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, BaselineError>;

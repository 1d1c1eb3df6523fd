use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, TreeNode, TreeParams};
use super::{BaselineError, Result};
use crate::frame::FeatureFrame;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestConfig {
    pub n_estimators: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub ccp_alpha: f64,
    /// Fraction of features drawn at each split.
    pub feature_subsample: f64,
    pub seed: u64,
    /// Draw a bootstrap sample per tree. Turning it off (with
    /// `feature_subsample = 1`) makes every tree identical.
    #[serde(default = "default_true")]
    pub bootstrap: bool,
}

fn default_true() -> bool {
    true
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_estimators: 300,
            max_depth: Some(6),
            min_samples_leaf: 4,
            ccp_alpha: 0.0,
            feature_subsample: 1.0 / 3.0,
            seed: 0,
            bootstrap: true,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(BaselineError::InvalidConfig(
                "n_estimators must be at least 1".into(),
            ));
        }
        if !(self.feature_subsample > 0.0 && self.feature_subsample <= 1.0) {
            return Err(BaselineError::InvalidConfig(
                "feature_subsample must be in (0, 1]".into(),
            ));
        }
        self.tree_params(1).validate()
    }

    fn tree_params(&self, n_features: usize) -> TreeParams {
        let m = ((self.feature_subsample * n_features as f64).round() as usize).clamp(1, n_features.max(1));
        TreeParams {
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            ccp_alpha: self.ccp_alpha,
            max_features: Some(m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<TreeNode>,
    pub n_features: usize,
}

impl Forest {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn predict(&self, x: &FeatureFrame) -> Result<Vec<f64>> {
        if x.n_cols() != self.n_features {
            return Err(BaselineError::FeatureCount {
                expected: self.n_features,
                got: x.n_cols(),
            });
        }
        Ok(x.rows().map(|r| self.predict_row(r)).collect())
    }
}

/// Bagged CART trees. Tree `i` draws from its own ChaCha stream of `seed`,
/// so the result does not depend on the thread count.
pub fn forest_fit(x: &FeatureFrame, y: &[f64], config: &ForestConfig) -> Result<Forest> {
    config.validate()?;
    let n = x.n_rows();
    if y.len() != n {
        return Err(BaselineError::TargetLength { target: y.len(), rows: n });
    }
    let needed = 2 * config.min_samples_leaf;
    if n < needed {
        return Err(BaselineError::TooFewRows { needed, got: n });
    }
    let params = config.tree_params(x.n_cols());
    let trees = (0..config.n_estimators)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(i as u64);
            let rows: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow_tree(x.data(), x.n_cols(), y, &rows, params, Some(&mut rng))
        })
        .collect();
    Ok(Forest {
        trees,
        n_features: x.n_cols(),
    })
}

use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, TreeNode, TreeParams};
use super::{BaselineError, Result};
use crate::frame::FeatureFrame;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoostConfig {
    pub learning_rate: f64,
    pub n_estimators: usize,
    pub max_depth: usize,
    /// Minimum number of samples in a leaf. Under squared loss every sample
    /// has unit hessian, so this is the child weight.
    pub min_child_weight: f64,
    pub seed: u64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            n_estimators: 70,
            max_depth: 3,
            min_child_weight: 200.0,
            seed: 0,
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(BaselineError::InvalidConfig(
                "learning_rate must be in (0, 1]".into(),
            ));
        }
        if !(self.min_child_weight >= 0.0) || !self.min_child_weight.is_finite() {
            return Err(BaselineError::InvalidConfig(
                "min_child_weight must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    fn min_leaf(&self) -> usize {
        (self.min_child_weight.ceil() as usize).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    pub base: f64,
    pub learning_rate: f64,
    pub trees: Vec<TreeNode>,
    pub n_features: usize,
    /// Training MSE before any tree and after each stage.
    pub train_mse: Vec<f64>,
}

impl BoostModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.base
            + self.learning_rate * self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
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

fn mse(y: &[f64], f: &[f64]) -> f64 {
    y.iter().zip(f).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64
}

/// Least-squares gradient boosting: start from the target mean and fit each
/// tree to the current residuals.
pub fn boost_fit(x: &FeatureFrame, y: &[f64], config: &BoostConfig) -> Result<BoostModel> {
    config.validate()?;
    let n = x.n_rows();
    if y.len() != n {
        return Err(BaselineError::TargetLength { target: y.len(), rows: n });
    }
    if n == 0 {
        return Err(BaselineError::TooFewRows { needed: 1, got: 0 });
    }
    let params = TreeParams {
        max_depth: Some(config.max_depth),
        min_samples_leaf: config.min_leaf(),
        ccp_alpha: 0.0,
        max_features: None,
    };
    let base = y.iter().sum::<f64>() / n as f64;
    let mut f = vec![base; n];
    let rows: Vec<usize> = (0..n).collect();
    let mut trees = Vec::with_capacity(config.n_estimators);
    let mut train_mse = vec![mse(y, &f)];
    let mut resid = vec![0.0; n];
    for _ in 0..config.n_estimators {
        for i in 0..n {
            resid[i] = y[i] - f[i];
        }
        let tree = grow_tree(x.data(), x.n_cols(), &resid, &rows, params, None);
        for (fi, row) in f.iter_mut().zip(x.rows()) {
            *fi += config.learning_rate * tree.predict_row(row);
        }
        trees.push(tree);
        train_mse.push(mse(y, &f));
    }
    Ok(BoostModel {
        base,
        learning_rate: config.learning_rate,
        trees,
        n_features: x.n_cols(),
        train_mse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(x: Vec<f64>) -> FeatureFrame {
        FeatureFrame::from_columns(vec!["x".into()], &[x]).unwrap()
    }

    #[test]
    fn one_stump_stage_by_hand() {
        // base = 2.5; residuals [-1.5,-1.5,1.5,1.5]; stump leaves ±1.5;
        // with lr 0.5 the predictions move to [1.75,1.75,3.25,3.25].
        let x = frame(vec![0.0, 1.0, 2.0, 3.0]);
        let y = [1.0, 1.0, 4.0, 4.0];
        let m = boost_fit(
            &x,
            &y,
            &BoostConfig {
                learning_rate: 0.5,
                n_estimators: 1,
                max_depth: 1,
                min_child_weight: 1.0,
                seed: 0,
            },
        )
        .unwrap();
        assert_eq!(m.base, 2.5);
        assert_eq!(m.predict(&x).unwrap(), vec![1.75, 1.75, 3.25, 3.25]);
        assert_eq!(m.train_mse, vec![2.25, 0.5625]);
    }

    #[test]
    fn zero_stages_predicts_mean() {
        let x = frame(vec![0.0, 1.0, 2.0]);
        let m = boost_fit(&x, &[1.0, 2.0, 6.0], &BoostConfig { n_estimators: 0, ..Default::default() }).unwrap();
        assert_eq!(m.predict(&x).unwrap(), vec![3.0; 3]);
    }

    #[test]
    fn unit_rate_drives_residual_to_zero() {
        let x = frame((0..8).map(f64::from).collect());
        let y = [3.0, -1.0, 4.0, 1.0, -5.0, 9.0, 2.0, 6.0];
        let m = boost_fit(
            &x,
            &y,
            &BoostConfig {
                learning_rate: 1.0,
                n_estimators: 50,
                max_depth: 2,
                min_child_weight: 1.0,
                seed: 0,
            },
        )
        .unwrap();
        for w in m.train_mse.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(*m.train_mse.last().unwrap() < 1e-20);
    }

    #[test]
    fn heavy_child_weight_keeps_base() {
        let x = frame((0..10).map(f64::from).collect());
        let y: Vec<f64> = (0..10).map(f64::from).collect();
        let m = boost_fit(&x, &y, &BoostConfig::default()).unwrap();
        for p in m.predict(&x).unwrap() {
            assert!((p - 4.5).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn training_error_never_increases(
            ys in prop::collection::vec(-10.0f64..10.0, 8..40),
            lr in 0.05f64..1.0,
        ) {
            let n = ys.len();
            let x = frame((0..n).map(|i| ((i * 13) % n) as f64).collect());
            let m = boost_fit(&x, &ys, &BoostConfig {
                learning_rate: lr, n_estimators: 15, max_depth: 2, min_child_weight: 1.0, seed: 0,
            }).unwrap();
            for w in m.train_mse.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12);
            }
        }
    }
}

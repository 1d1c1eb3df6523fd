//! Smoothing, standardization, RUL labeling, constant-column pruning and
//! fixed-length windowing.

mod labels;
mod normalize;
mod smoothing;
mod windows;

use thiserror::Error;

pub use labels::{label_piecewise_rul, label_test_rul, RulTargetConfig};
pub use normalize::{normalize_apply, normalize_fit, normalize_inverse, NormMethod, NormalizationStats};
pub use smoothing::{smooth, smooth_ema, smooth_sma, SmoothingConfig, SmoothingMethod};
pub use windows::{
    make_test_windows, make_test_windows_all, make_train_windows, EngineFeatures, WindowSet,
};

use crate::frame::{FeatureFrame, FrameError};

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("series is empty")]
    EmptySeries,
    #[error("EMA alpha must lie in (0, 1], got {0}")]
    AlphaOutOfRange(f64),
    #[error("SMA window must be at least 1, got {0}")]
    WindowOutOfRange(usize),
    #[error("need at least 2 rows to fit normalization, got {0}")]
    TooFewRows(usize),
    #[error("column mismatch: expected {expected:?}, found {found:?}")]
    ColumnMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("every column is constant within tolerance {0}")]
    AllColumnsDropped(f64),
    #[error("variance tolerance must be non-negative, got {0}")]
    NegativeTolerance(f64),
    #[error("window length and stride must be at least 1")]
    BadWindowGeometry,
    #[error("RUL cap must be at least 1")]
    BadCap,
    #[error(transparent)]
    Frame(#[from] FrameError),
}

pub type Result<T> = std::result::Result<T, PreprocessError>;

/// Population (1/N) mean and variance.
pub(crate) fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, ss / n as f64)
}

/// Names of columns whose population variance is at most `tol`.
pub fn constant_columns(frame: &FeatureFrame, tol: f64) -> Result<Vec<String>> {
    if tol < 0.0 || tol.is_nan() {
        return Err(PreprocessError::NegativeTolerance(tol));
    }
    let n = frame.n_cols();
    let mut out = Vec::new();
    for c in 0..n {
        let (_, var) = mean_var(&frame.column(c));
        if var <= tol {
            out.push(frame.names()[c].clone());
        }
    }
    Ok(out)
}

/// Removes near-constant columns, returning the pruned frame and the
/// dropped names. Apply the same list to test data with [`drop_columns`].
pub fn drop_constant_features(
    frame: &FeatureFrame,
    tol: f64,
) -> Result<(FeatureFrame, Vec<String>)> {
    let dropped = constant_columns(frame, tol)?;
    if dropped.len() == frame.n_cols() {
        return Err(PreprocessError::AllColumnsDropped(tol));
    }
    let pruned = drop_columns(frame, &dropped)?;
    Ok((pruned, dropped))
}

pub fn drop_columns(frame: &FeatureFrame, dropped: &[String]) -> Result<FeatureFrame> {
    let keep: Vec<String> = frame
        .names()
        .iter()
        .filter(|n| !dropped.contains(n))
        .cloned()
        .collect();
    Ok(frame
        .select(&keep)?
        .with_provenance(format!("drop_constant[{}]", dropped.join(","))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_column_is_dropped() {
        let f = FeatureFrame::from_columns(
            vec!["flat".into(), "moving".into()],
            &[vec![3.0, 3.0, 3.0], vec![1.0, 2.0, 4.0]],
        )
        .unwrap();
        let (pruned, dropped) = drop_constant_features(&f, 1e-12).unwrap();
        assert_eq!(dropped, vec!["flat".to_string()]);
        assert_eq!(pruned.names(), &["moving".to_string()]);
        assert_eq!(pruned.column(0), vec![1.0, 2.0, 4.0]);
    }

    #[test]
    fn zero_tolerance_keeps_varying_columns() {
        let f = FeatureFrame::from_columns(
            vec!["a".into(), "b".into()],
            &[vec![1.0, 2.0], vec![0.0, -1.0]],
        )
        .unwrap();
        let (pruned, dropped) = drop_constant_features(&f, 0.0).unwrap();
        assert!(dropped.is_empty());
        assert_eq!(pruned.data(), f.data());
    }

    #[test]
    fn all_constant_is_an_error() {
        let f = FeatureFrame::from_columns(vec!["a".into()], &[vec![1.0, 1.0]]).unwrap();
        assert_eq!(
            drop_constant_features(&f, 0.0).unwrap_err(),
            PreprocessError::AllColumnsDropped(0.0)
        );
    }
}

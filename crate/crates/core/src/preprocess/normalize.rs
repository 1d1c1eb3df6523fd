use serde::{Deserialize, Serialize};

use super::{mean_var, PreprocessError, Result};
use crate::frame::FeatureFrame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormMethod {
    Zscore,
    Minmax,
}

/// Per-column statistics fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub method: NormMethod,
    pub columns: Vec<String>,
    pub mean: Vec<f64>,
    /// Population standard deviation.
    pub std: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

pub fn normalize_fit(train: &FeatureFrame, method: NormMethod) -> Result<NormalizationStats> {
    let n = train.n_rows();
    if n < 2 {
        return Err(PreprocessError::TooFewRows(n));
    }
    let cols = train.n_cols();
    let mut stats = NormalizationStats {
        method,
        columns: train.names().to_vec(),
        mean: Vec::with_capacity(cols),
        std: Vec::with_capacity(cols),
        min: Vec::with_capacity(cols),
        max: Vec::with_capacity(cols),
    };
    for c in 0..cols {
        let values = train.column(c);
        let (mean, var) = mean_var(&values);
        let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        stats.mean.push(mean);
        stats.std.push(var.sqrt());
        stats.min.push(lo);
        stats.max.push(hi);
    }
    Ok(stats)
}

fn check_columns(frame: &FeatureFrame, stats: &NormalizationStats) -> Result<()> {
    if frame.names() != stats.columns.as_slice() {
        return Err(PreprocessError::ColumnMismatch {
            expected: stats.columns.clone(),
            found: frame.names().to_vec(),
        });
    }
    Ok(())
}

/// Scales a frame with previously fitted statistics. Zero-spread columns
/// map to 0.
pub fn normalize_apply(frame: &FeatureFrame, stats: &NormalizationStats) -> Result<FeatureFrame> {
    check_columns(frame, stats)?;
    let cols = frame.n_cols();
    let mut data = Vec::with_capacity(frame.data().len());
    for row in frame.rows() {
        for c in 0..cols {
            let x = row[c];
            data.push(match stats.method {
                NormMethod::Zscore if stats.std[c] > 0.0 => (x - stats.mean[c]) / stats.std[c],
                NormMethod::Minmax if stats.max[c] > stats.min[c] => {
                    (x - stats.min[c]) / (stats.max[c] - stats.min[c])
                }
                _ => 0.0,
            });
        }
    }
    let mut out = FeatureFrame::new(frame.names().to_vec(), data)?;
    out.set_provenance(frame.provenance().to_vec());
    Ok(out.with_provenance(match stats.method {
        NormMethod::Zscore => "zscore",
        NormMethod::Minmax => "minmax",
    }))
}

/// Undoes [`normalize_apply`]. Zero-spread columns come back as their
/// training mean (z-score) or minimum (min-max).
pub fn normalize_inverse(frame: &FeatureFrame, stats: &NormalizationStats) -> Result<FeatureFrame> {
    check_columns(frame, stats)?;
    let cols = frame.n_cols();
    let mut data = Vec::with_capacity(frame.data().len());
    for row in frame.rows() {
        for c in 0..cols {
            let z = row[c];
            data.push(match stats.method {
                NormMethod::Zscore => z * stats.std[c] + stats.mean[c],
                NormMethod::Minmax => z * (stats.max[c] - stats.min[c]) + stats.min[c],
            });
        }
    }
    Ok(FeatureFrame::new(frame.names().to_vec(), data)?)
}

use serde::{Deserialize, Serialize};

use super::{PreprocessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmoothingMethod {
    Ema,
    Sma,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmoothingConfig {
    pub method: SmoothingMethod,
    /// EMA weight of the newest observation.
    pub alpha: f64,
    /// SMA width in cycles.
    pub window: usize,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            method: SmoothingMethod::Ema,
            alpha: 0.1,
            window: 5,
        }
    }
}

impl SmoothingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(PreprocessError::AlphaOutOfRange(self.alpha));
        }
        if self.window < 1 {
            return Err(PreprocessError::WindowOutOfRange(self.window));
        }
        Ok(())
    }
}

/// Exponential moving average seeded with the first observation.
pub fn smooth_ema(series: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if series.is_empty() {
        return Err(PreprocessError::EmptySeries);
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(PreprocessError::AlphaOutOfRange(alpha));
    }
    let mut out = Vec::with_capacity(series.len());
    let mut prev = series[0];
    out.push(prev);
    for &x in &series[1..] {
        prev = alpha * x + (1.0 - alpha) * prev;
        out.push(prev);
    }
    Ok(out)
}

/// Trailing simple moving average; the first `window - 1` outputs average
/// whatever history exists.
pub fn smooth_sma(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if series.is_empty() {
        return Err(PreprocessError::EmptySeries);
    }
    if window < 1 {
        return Err(PreprocessError::WindowOutOfRange(window));
    }
    let mut out = Vec::with_capacity(series.len());
    for t in 0..series.len() {
        let start = (t + 1).saturating_sub(window);
        let slice = &series[start..=t];
        out.push(slice.iter().sum::<f64>() / slice.len() as f64);
    }
    Ok(out)
}

pub fn smooth(series: &[f64], cfg: &SmoothingConfig) -> Result<Vec<f64>> {
    match cfg.method {
        SmoothingMethod::Ema => smooth_ema(series, cfg.alpha),
        SmoothingMethod::Sma => smooth_sma(series, cfg.window),
        SmoothingMethod::None => {
            if series.is_empty() {
                Err(PreprocessError::EmptySeries)
            } else {
                Ok(series.to_vec())
            }
        }
    }
}

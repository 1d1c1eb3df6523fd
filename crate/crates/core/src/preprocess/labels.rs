use serde::{Deserialize, Serialize};

use super::{PreprocessError, Result};
use crate::cmapss_io::EngineSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RulTargetConfig {
    /// Maximum RUL in cycles; early-life labels are clamped to it.
    pub cap: u32,
}

impl Default for RulTargetConfig {
    fn default() -> Self {
        Self { cap: 130 }
    }
}

/// Piecewise-linear target `min(cap, max_cycle - t)` for a run-to-failure engine.
pub fn label_piecewise_rul(series: &EngineSeries, cfg: RulTargetConfig) -> Result<Vec<f64>> {
    if cfg.cap < 1 {
        return Err(PreprocessError::BadCap);
    }
    if series.is_empty() {
        return Err(PreprocessError::EmptySeries);
    }
    let max_cycle = series.max_cycle();
    Ok(series
        .records
        .iter()
        .map(|r| (max_cycle - r.cycle).min(cfg.cap) as f64)
        .collect())
}

/// Labels for a truncated test engine whose remaining life after its last
/// observed cycle is `true_rul`.
pub fn label_test_rul(series: &EngineSeries, true_rul: u32, cfg: RulTargetConfig) -> Result<Vec<f64>> {
    if cfg.cap < 1 {
        return Err(PreprocessError::BadCap);
    }
    if series.is_empty() {
        return Err(PreprocessError::EmptySeries);
    }
    let last = series.max_cycle() as u64;
    Ok(series
        .records
        .iter()
        .map(|r| (true_rul as u64 + last - r.cycle as u64).min(cfg.cap as u64) as f64)
        .collect())
}

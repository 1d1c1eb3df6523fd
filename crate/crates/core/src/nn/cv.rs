use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::ModelConfig;
use super::train::{forward, train, TrainConfig};
use super::{NnError, Result};
use crate::preprocess::WindowSet;

/// One grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCandidate {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    /// Index into the grid of the lowest mean validation RMSE.
    pub best: usize,
    /// Mean validation RMSE per grid point; `inf` for runs that failed.
    pub mean_rmse: Vec<f64>,
}

/// Maps every unit id to a fold. Ids are shuffled with `seed` and dealt out
/// round-robin, so fold sizes differ by at most one engine.
pub fn assign_folds(windows: &WindowSet, folds: usize, seed: u64) -> Result<BTreeMap<u32, usize>> {
    if folds < 2 {
        return Err(NnError::InvalidConfig("folds must be at least 2".into()));
    }
    let mut units: Vec<u32> = windows.source_ids.iter().map(|s| s.0).collect();
    units.sort_unstable();
    units.dedup();
    if units.len() < folds {
        return Err(NnError::TooFewEngines {
            engines: units.len(),
            folds,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    units.shuffle(&mut rng);
    Ok(units.into_iter().enumerate().map(|(i, u)| (u, i % folds)).collect())
}

fn fold_rmse(c: &CvCandidate, windows: &WindowSet, fold_of: &BTreeMap<u32, usize>, k: usize, cap: f64) -> Result<f64> {
    let (mut tr, mut va) = (Vec::new(), Vec::new());
    for (i, s) in windows.source_ids.iter().enumerate() {
        if fold_of[&s.0] == k {
            va.push(i);
        } else {
            tr.push(i);
        }
    }
    let train_set = windows.subset(&tr);
    let val_set = windows.subset(&va);
    let model = train(&c.model, &c.train, &train_set, cap, "")?;
    let pred = forward(&model, &val_set)?;
    let mse = pred
        .iter()
        .zip(&val_set.labels)
        .map(|(p, y)| (p - y) * (p - y))
        .sum::<f64>()
        / val_set.len() as f64;
    Ok(mse.sqrt())
}

/// Exhaustive grid search with engine-grouped k-fold validation. Each
/// (candidate, fold) pair trains on its own tape, possibly in parallel;
/// failed or diverged runs score `inf`. Ties go to the earlier candidate.
pub fn cross_validate(
    grid: &[CvCandidate],
    windows: &WindowSet,
    folds: usize,
    seed: u64,
    rul_cap: f64,
) -> Result<CvResult> {
    if grid.is_empty() {
        return Err(NnError::InvalidConfig("empty grid".into()));
    }
    if windows.is_empty() {
        return Err(NnError::EmptyWindows);
    }
    let fold_of = assign_folds(windows, folds, seed)?;
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..folds).map(move |k| (g, k)))
        .collect();
    let scores: Vec<f64> = jobs
        .par_iter()
        .map(|&(g, k)| match fold_rmse(&grid[g], windows, &fold_of, k, rul_cap) {
            Ok(r) if r.is_finite() => r,
            Ok(_) => f64::INFINITY,
            Err(e) => {
                log::warn!("grid point {g}, fold {k}: {e}");
                f64::INFINITY
            }
        })
        .collect();
    let mean_rmse: Vec<f64> = scores
        .chunks(folds)
        .map(|c| c.iter().sum::<f64>() / folds as f64)
        .collect();
    let mut best = 0;
    for (i, &m) in mean_rmse.iter().enumerate() {
        if m < mean_rmse[best] {
            best = i;
        }
    }
    Ok(CvResult { best, mean_rmse })
}

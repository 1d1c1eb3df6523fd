use serde::{Deserialize, Serialize};

use super::{FeatureError, Result};
use crate::frame::FeatureFrame;

/// Stand-in F statistic for a column perfectly correlated with the target.
pub const F_SCORE_SENTINEL: f64 = 1e300;

/// Columns ranked by univariate regression F statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    pub names: Vec<String>,
    pub f_scores: Vec<f64>,
    /// Column indices by descending score; ties keep column order.
    pub order: Vec<usize>,
}

impl FeatureRanking {
    pub fn ranked(&self) -> impl Iterator<Item = (&str, f64)> {
        self.order
            .iter()
            .map(|&i| (self.names[i].as_str(), self.f_scores[i]))
    }
}

/// Pearson correlation; 0 when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

/// F = r^2 (n - 2) / (1 - r^2) per column against the target.
pub fn f_scores(frame: &FeatureFrame, y: &[f64]) -> Result<FeatureRanking> {
    let n = frame.n_rows();
    if n < 3 {
        return Err(FeatureError::TooFewRows { needed: 3, got: n });
    }
    if y.len() != n {
        return Err(FeatureError::TargetLength {
            target: y.len(),
            rows: n,
        });
    }
    let scores: Vec<f64> = (0..frame.n_cols())
        .map(|c| {
            let r = pearson(&frame.column(c), y);
            let r2 = r * r;
            if r2 >= 1.0 {
                F_SCORE_SENTINEL
            } else {
                r2 * (n as f64 - 2.0) / (1.0 - r2)
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    Ok(FeatureRanking {
        names: frame.names().to_vec(),
        f_scores: scores,
        order,
    })
}

/// Names of the `k` highest-ranked features, best first.
pub fn select_k_best(ranking: &FeatureRanking, k: usize) -> Result<Vec<String>> {
    let n = ranking.names.len();
    if k < 1 || k > n {
        return Err(FeatureError::KOutOfRange { k, n });
    }
    Ok(ranking
        .order
        .iter()
        .take(k)
        .map(|&i| ranking.names[i].clone())
        .collect())
}

/// Row-major Pearson correlation matrix with unit diagonal.
pub fn correlation_matrix(frame: &FeatureFrame) -> Result<Vec<f64>> {
    let n = frame.n_rows();
    if n < 2 {
        return Err(FeatureError::TooFewRows { needed: 2, got: n });
    }
    let p = frame.n_cols();
    let cols: Vec<Vec<f64>> = (0..p).map(|c| frame.column(c)).collect();
    let mut out = vec![0.0; p * p];
    for i in 0..p {
        out[i * p + i] = 1.0;
        for j in i + 1..p {
            let r = pearson(&cols[i], &cols[j]);
            out[i * p + j] = r;
            out[j * p + i] = r;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn frame(cols: &[Vec<f64>]) -> FeatureFrame {
        let names = (0..cols.len()).map(|i| format!("x{}", i + 1)).collect();
        FeatureFrame::from_columns(names, cols).unwrap()
    }

    #[test]
    fn correlated_column_dominates_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 500;
        let x1: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let noise: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = x1.iter().map(|x| x + 0.1 * rng.random_range(-1.0..1.0)).collect();
        let r = f_scores(&frame(&[noise, x1]), &y).unwrap();
        assert_eq!(r.order, vec![1, 0]);
        assert!(r.f_scores[1] > 1000.0 * r.f_scores[0].max(1.0));
    }

    #[test]
    fn perfect_and_constant_columns() {
        let y = vec![1.0, 2.0, 4.0, 8.0];
        let r = f_scores(&frame(&[y.clone(), vec![3.0; 4]]), &y).unwrap();
        assert_eq!(r.f_scores[0], F_SCORE_SENTINEL);
        assert_eq!(r.f_scores[1], 0.0);
    }

    #[test]
    fn too_few_rows_for_f() {
        assert!(matches!(
            f_scores(&frame(&[vec![1.0, 2.0]]), &[1.0, 2.0]),
            Err(FeatureError::TooFewRows { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn select_k_bounds() {
        let y = vec![1.0, 2.0, 3.0, 5.0];
        let r = f_scores(&frame(&[vec![0.0, 1.0, 0.0, 1.0], y.clone()]), &y).unwrap();
        assert_eq!(select_k_best(&r, 1).unwrap(), vec!["x2".to_string()]);
        assert_eq!(select_k_best(&r, 2).unwrap().len(), 2);
        assert_eq!(select_k_best(&r, 0), Err(FeatureError::KOutOfRange { k: 0, n: 2 }));
        assert_eq!(select_k_best(&r, 3), Err(FeatureError::KOutOfRange { k: 3, n: 2 }));
    }

    #[test]
    fn correlation_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..10_000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let noise: Vec<f64> = (0..10_000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = correlation_matrix(&frame(&[x, neg, noise, vec![1.0; 10_000]])).unwrap();
        assert_eq!(m[0], 1.0);
        assert!((m[1] + 1.0).abs() < 1e-12);
        assert!(m[2].abs() < 0.1);
        assert_eq!(m[3], 0.0);
        assert_eq!(m[15], 1.0);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m[i * 4 + j], m[j * 4 + i]);
            }
        }
    }

    proptest! {
        #[test]
        fn ranking_invariant_under_positive_affine_rescale(
            seed in 0u64..1000,
            scale in 0.01f64..100.0,
            shift in -100f64..100.0,
            col in 0usize..4,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 50;
            let cols: Vec<Vec<f64>> = (0..4).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let y: Vec<f64> = (0..n).map(|i| cols[0][i] + 0.5 * cols[1][i] + 0.3 * rng.random_range(-1.0..1.0)).collect();
            let base = f_scores(&frame(&cols), &y).unwrap();
            let mut scaled = cols.clone();
            for v in &mut scaled[col] { *v = *v * scale + shift; }
            let other = f_scores(&frame(&scaled), &y).unwrap();
            prop_assert_eq!(base.order, other.order);
        }

        #[test]
        fn select_k_is_nested(seed in 0u64..1000, k in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cols: Vec<Vec<f64>> = (0..5).map(|_| (0..20).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let y: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
            let r = f_scores(&frame(&cols), &y).unwrap();
            let small = select_k_best(&r, k).unwrap();
            let big = select_k_best(&r, k + 1).unwrap();
            prop_assert!(small.iter().all(|n| big.contains(n)));
        }
    }
}

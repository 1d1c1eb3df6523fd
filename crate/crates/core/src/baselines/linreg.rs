use serde::{Deserialize, Serialize};

use super::{BaselineError, Result};
use crate::frame::FeatureFrame;

const RIDGE_FALLBACK: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(row)
                .map(|(c, x)| c * x)
                .sum::<f64>()
    }

    pub fn predict(&self, x: &FeatureFrame) -> Result<Vec<f64>> {
        if x.n_cols() != self.coefficients.len() {
            return Err(BaselineError::FeatureCount {
                expected: self.coefficients.len(),
                got: x.n_cols(),
            });
        }
        Ok(x.rows().map(|r| self.predict_row(r)).collect())
    }
}

/// In-place Cholesky factor of a symmetric matrix; `None` when a pivot is
/// not safely positive.
fn cholesky(a: &[f64], p: usize) -> Option<Vec<f64>> {
    let scale = (0..p).map(|i| a[i * p + i].abs()).fold(0.0, f64::max);
    let mut l = vec![0.0; p * p];
    for j in 0..p {
        let mut d = a[j * p + j];
        for k in 0..j {
            d -= l[j * p + k] * l[j * p + k];
        }
        if d <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return None;
        }
        let d = d.sqrt();
        l[j * p + j] = d;
        for i in j + 1..p {
            let mut s = a[i * p + j];
            for k in 0..j {
                s -= l[i * p + k] * l[j * p + k];
            }
            l[i * p + j] = s / d;
        }
    }
    Some(l)
}

fn cholesky_solve(l: &[f64], b: &[f64], p: usize) -> Vec<f64> {
    let mut z = vec![0.0; p];
    for i in 0..p {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * p + k] * z[k];
        }
        z[i] = s / l[i * p + i];
    }
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let mut s = z[i];
        for k in i + 1..p {
            s -= l[k * p + i] * x[k];
        }
        x[i] = s / l[i * p + i];
    }
    x
}

/// Least squares with intercept via the normal equations on centred data.
/// A singular system is retried with a small ridge term.
pub fn linreg_fit(x: &FeatureFrame, y: &[f64]) -> Result<LinearModel> {
    let n = x.n_rows();
    let p = x.n_cols();
    if y.len() != n {
        return Err(BaselineError::TargetLength {
            target: y.len(),
            rows: n,
        });
    }
    if n < p + 1 {
        return Err(BaselineError::TooFewRows { needed: p + 1, got: n });
    }
    if x.data().iter().all(|&v| v == 0.0) {
        return Err(BaselineError::DegenerateDesign);
    }
    let mut mx = vec![0.0; p];
    for row in x.rows() {
        for (m, v) in mx.iter_mut().zip(row) {
            *m += v;
        }
    }
    mx.iter_mut().for_each(|m| *m /= n as f64);
    let my = y.iter().sum::<f64>() / n as f64;

    let mut ata = vec![0.0; p * p];
    let mut aty = vec![0.0; p];
    let mut c = vec![0.0; p];
    for (row, &yv) in x.rows().zip(y) {
        for j in 0..p {
            c[j] = row[j] - mx[j];
        }
        let yc = yv - my;
        for i in 0..p {
            aty[i] += c[i] * yc;
            for j in i..p {
                ata[i * p + j] += c[i] * c[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            ata[i * p + j] = ata[j * p + i];
        }
    }

    let l = match cholesky(&ata, p) {
        Some(l) => l,
        None => {
            let mut ridged = ata.clone();
            for i in 0..p {
                ridged[i * p + i] += RIDGE_FALLBACK;
            }
            match cholesky(&ridged, p) {
                Some(l) => l,
                // Every centred column is zero: nothing to regress on.
                None => {
                    return Ok(LinearModel {
                        coefficients: vec![0.0; p],
                        intercept: my,
                    })
                }
            }
        }
    };
    let beta = cholesky_solve(&l, &aty, p);
    let intercept = my - beta.iter().zip(&mx).map(|(b, m)| b * m).sum::<f64>();
    Ok(LinearModel {
        coefficients: beta,
        intercept,
    })
}

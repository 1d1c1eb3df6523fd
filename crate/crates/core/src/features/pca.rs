use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{FeatureError, Result};
use crate::frame::FeatureFrame;

/// Principal axes of a training frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub columns: Vec<String>,
    pub mean: Vec<f64>,
    /// Row-major `[n_features x n_components]`; column j is component j.
    pub components: Vec<f64>,
    pub n_components: usize,
    pub eigenvalues: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    /// Trace of the covariance matrix.
    pub total_variance: f64,
}

impl PcaModel {
    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn component(&self, j: usize) -> Vec<f64> {
        (0..self.n_features())
            .map(|i| self.components[i * self.n_components + j])
            .collect()
    }

    fn check(&self, frame: &FeatureFrame) -> Result<()> {
        if frame.names() != self.columns.as_slice() {
            return Err(FeatureError::ColumnMismatch {
                expected: self.columns.clone(),
                found: frame.names().to_vec(),
            });
        }
        Ok(())
    }
}

/// Population (1/N) covariance of the frame's columns, row-major.
pub fn covariance_matrix(frame: &FeatureFrame) -> (Vec<f64>, Vec<f64>) {
    let n = frame.n_rows();
    let p = frame.n_cols();
    let mut mean = vec![0.0; p];
    for row in frame.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = vec![0.0; p * p];
    let mut centred = vec![0.0; p];
    for row in frame.rows() {
        for c in 0..p {
            centred[c] = row[c] - mean[c];
        }
        for i in 0..p {
            let ci = centred[i];
            for j in i..p {
                cov[i * p + j] += ci * centred[j];
            }
        }
    }
    for i in 0..p {
        for j in i..p {
            let v = cov[i * p + j] / n as f64;
            cov[i * p + j] = v;
            cov[j * p + i] = v;
        }
    }
    (mean, cov)
}

/// Fits PCA by eigendecomposition of the covariance matrix.
///
/// Components are ordered by descending eigenvalue and oriented so that the
/// largest-magnitude entry of each is positive.
pub fn pca_fit(frame: &FeatureFrame, n_components: usize) -> Result<PcaModel> {
    let p = frame.n_cols();
    if n_components > p {
        return Err(FeatureError::NComponentsTooLarge {
            requested: n_components,
            features: p,
        });
    }
    if frame.n_rows() < 1 {
        return Err(FeatureError::TooFewRows { needed: 1, got: 0 });
    }
    let (mean, cov) = covariance_matrix(frame);
    let trace: f64 = (0..p).map(|i| cov[i * p + i]).sum();
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(p, p, &cov));

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut components = vec![0.0; p * n_components];
    let mut eigenvalues = Vec::with_capacity(n_components);
    for (j, &k) in order.iter().take(n_components).enumerate() {
        let v = eig.eigenvectors.column(k);
        let mut pivot = 0;
        for i in 1..p {
            if v[i].abs() > v[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..p {
            components[i * n_components + j] = sign * v[i];
        }
        eigenvalues.push(eig.eigenvalues[k].max(0.0));
    }
    let explained_variance_ratio = eigenvalues
        .iter()
        .map(|&l| if trace > 0.0 { l / trace } else { 0.0 })
        .collect();
    Ok(PcaModel {
        columns: frame.names().to_vec(),
        mean,
        components,
        n_components,
        eigenvalues,
        explained_variance_ratio,
        total_variance: trace,
    })
}

/// Projects rows onto the components: `(x - mean) . components`.
pub fn pca_transform(model: &PcaModel, frame: &FeatureFrame) -> Result<FeatureFrame> {
    model.check(frame)?;
    let p = model.n_features();
    let k = model.n_components;
    let mut data = Vec::with_capacity(frame.n_rows() * k);
    for row in frame.rows() {
        for j in 0..k {
            let mut acc = 0.0;
            for i in 0..p {
                acc += (row[i] - model.mean[i]) * model.components[i * k + j];
            }
            data.push(acc);
        }
    }
    let names = (1..=k).map(|j| format!("pc_{j}")).collect();
    Ok(FeatureFrame::new(names, data)?.with_provenance(format!("pca[{k}]")))
}

/// Maps projections back to feature space.
pub fn pca_reconstruct(model: &PcaModel, projected: &FeatureFrame) -> Result<FeatureFrame> {
    let p = model.n_features();
    let k = model.n_components;
    if projected.n_cols() != k {
        return Err(FeatureError::ColumnMismatch {
            expected: (1..=k).map(|j| format!("pc_{j}")).collect(),
            found: projected.names().to_vec(),
        });
    }
    let mut data = Vec::with_capacity(projected.n_rows() * p);
    for row in projected.rows() {
        for i in 0..p {
            let mut acc = model.mean[i];
            for j in 0..k {
                acc += row[j] * model.components[i * k + j];
            }
            data.push(acc);
        }
    }
    Ok(FeatureFrame::new(model.columns.clone(), data)?)
}

/// Adds the first principal coordinate as a `pc_1` column.
pub fn append_pc1(frame: &FeatureFrame, model: &PcaModel) -> Result<FeatureFrame> {
    if model.n_components == 0 {
        return Err(FeatureError::NComponentsTooLarge {
            requested: 1,
            features: 0,
        });
    }
    let projected = pca_transform(model, frame)?;
    let pc1 = projected.column(0);
    Ok(frame.push_column("pc_1", &pc1)?.with_provenance("append_pc1"))
}

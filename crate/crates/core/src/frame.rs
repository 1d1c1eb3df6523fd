//! Two-dimensional feature matrix with named columns.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FrameError {
    #[error("data length {len} is not a multiple of {cols} columns")]
    Ragged { len: usize, cols: usize },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("row count mismatch: {0} vs {1}")]
    RowMismatch(usize, usize),
}

/// Row-major feature matrix.
///
/// `provenance` records the transforms applied so far, oldest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureFrame {
    names: Vec<String>,
    data: Vec<f64>,
    provenance: Vec<String>,
}

impl FeatureFrame {
    pub fn new(names: Vec<String>, data: Vec<f64>) -> Result<Self, FrameError> {
        let cols = names.len();
        if (cols == 0 && !data.is_empty()) || (cols > 0 && !data.len().is_multiple_of(cols)) {
            return Err(FrameError::Ragged {
                len: data.len(),
                cols,
            });
        }
        Ok(Self {
            names,
            data,
            provenance: Vec::new(),
        })
    }

    pub fn from_columns(names: Vec<String>, columns: &[Vec<f64>]) -> Result<Self, FrameError> {
        let n_rows = columns.first().map_or(0, Vec::len);
        if let Some(c) = columns.iter().find(|c| c.len() != n_rows) {
            return Err(FrameError::RowMismatch(n_rows, c.len()));
        }
        let mut data = Vec::with_capacity(n_rows * columns.len());
        for r in 0..n_rows {
            data.extend(columns.iter().map(|c| c[r]));
        }
        Self::new(names, data)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn n_rows(&self) -> usize {
        if self.names.is_empty() {
            0
        } else {
            self.data.len() / self.names.len()
        }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.n_cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_cols().max(1))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.n_cols() + c]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        self.rows().map(|row| row[c]).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn provenance(&self) -> &[String] {
        &self.provenance
    }

    pub fn with_provenance(mut self, step: impl Into<String>) -> Self {
        self.provenance.push(step.into());
        self
    }

    pub(crate) fn set_provenance(&mut self, provenance: Vec<String>) {
        self.provenance = provenance;
    }

    /// Keeps the named columns in the given order.
    pub fn select(&self, keep: &[String]) -> Result<Self, FrameError> {
        let idx = keep
            .iter()
            .map(|k| {
                self.column_index(k)
                    .ok_or_else(|| FrameError::UnknownColumn(k.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut data = Vec::with_capacity(self.n_rows() * idx.len());
        for row in self.rows() {
            data.extend(idx.iter().map(|&i| row[i]));
        }
        let mut out = Self::new(keep.to_vec(), data)?;
        out.provenance = self.provenance.clone();
        Ok(out)
    }

    /// Appends one column on the right.
    pub fn push_column(&self, name: &str, values: &[f64]) -> Result<Self, FrameError> {
        if values.len() != self.n_rows() {
            return Err(FrameError::RowMismatch(self.n_rows(), values.len()));
        }
        let mut names = self.names.clone();
        names.push(name.to_string());
        let mut data = Vec::with_capacity(self.data.len() + values.len());
        for (row, &v) in self.rows().zip(values) {
            data.extend_from_slice(row);
            data.push(v);
        }
        let mut out = Self::new(names, data)?;
        out.provenance = self.provenance.clone();
        Ok(out)
    }

    /// Stacks frames with identical columns vertically.
    pub fn vstack(frames: &[&FeatureFrame]) -> Result<Self, FrameError> {
        let Some(first) = frames.first() else {
            return Self::new(Vec::new(), Vec::new());
        };
        let mut data = Vec::new();
        for f in frames {
            if f.names != first.names {
                let missing = first
                    .names
                    .iter()
                    .find(|n| !f.names.contains(n))
                    .cloned()
                    .unwrap_or_default();
                return Err(FrameError::UnknownColumn(missing));
            }
            data.extend_from_slice(&f.data);
        }
        let mut out = Self::new(first.names.clone(), data)?;
        out.provenance = first.provenance.clone();
        Ok(out)
    }

    /// Rows `start..end` as a new frame.
    pub fn slice_rows(&self, start: usize, end: usize) -> Self {
        let c = self.n_cols();
        Self {
            names: self.names.clone(),
            data: self.data[start * c..end * c].to_vec(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: &[&str]) -> Vec<String> {
        n.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn ragged_data_rejected() {
        assert!(FeatureFrame::new(names(&["a", "b"]), vec![1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn select_reorders_and_push_appends() {
        let f = FeatureFrame::new(names(&["a", "b"]), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let s = f.select(&names(&["b", "a"])).unwrap();
        assert_eq!(s.data(), &[2.0, 1.0, 4.0, 3.0]);
        let p = f.push_column("c", &[9.0, 8.0]).unwrap();
        assert_eq!(p.row(1), &[3.0, 4.0, 8.0]);
        assert!(f.select(&names(&["zz"])).is_err());
    }

    #[test]
    fn from_columns_transposes() {
        let f = FeatureFrame::from_columns(names(&["a", "b"]), &[vec![1.0, 2.0], vec![3.0, 4.0]])
            .unwrap();
        assert_eq!(f.data(), &[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(f.column(1), vec![3.0, 4.0]);
    }
}

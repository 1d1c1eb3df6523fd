use serde::{Deserialize, Serialize};

use super::{PreprocessError, Result};

/// Per-engine feature matrix (cycles x features) with one label per cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineFeatures {
    pub unit_id: u32,
    /// Cycle index of each row.
    pub cycles: Vec<u32>,
    pub n_features: usize,
    /// Row-major `cycles.len() * n_features`.
    pub data: Vec<f64>,
    pub rul: Vec<f64>,
}

impl EngineFeatures {
    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.n_features..(t + 1) * self.n_features]
    }
}

/// Stack of fixed-length windows, `[n_windows x window_len x n_features]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSet {
    pub data: Vec<f64>,
    pub labels: Vec<f64>,
    pub window_len: usize,
    pub n_features: usize,
    /// `(unit_id, last_cycle)` of each window.
    pub source_ids: Vec<(u32, u32)>,
}

impl WindowSet {
    pub fn empty(window_len: usize, n_features: usize) -> Self {
        Self {
            data: Vec::new(),
            labels: Vec::new(),
            window_len,
            n_features,
            source_ids: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn window_size(&self) -> usize {
        self.window_len * self.n_features
    }

    pub fn window(&self, i: usize) -> &[f64] {
        let w = self.window_size();
        &self.data[i * w..(i + 1) * w]
    }

    /// Final row of each window, `[n_windows x n_features]`.
    pub fn last_rows(&self) -> Vec<f64> {
        let f = self.n_features;
        (0..self.len())
            .flat_map(|i| {
                let w = self.window(i);
                w[w.len() - f..].iter().copied()
            })
            .collect()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        let mut out = Self::empty(self.window_len, self.n_features);
        for &i in idx {
            out.data.extend_from_slice(self.window(i));
            out.labels.push(self.labels[i]);
            out.source_ids.push(self.source_ids[i]);
        }
        out
    }

    pub fn check_shape(&self) -> bool {
        self.data.len() == self.len() * self.window_size() && self.source_ids.len() == self.len()
    }

    fn push_window(&mut self, engine: &EngineFeatures, end: usize, label: f64) {
        // `end` is the exclusive end row; rows before 0 repeat row 0.
        let start = end as isize - self.window_len as isize;
        for t in start..end as isize {
            let src = t.max(0) as usize;
            self.data.extend_from_slice(engine.row(src));
        }
        self.labels.push(label);
        self.source_ids.push((engine.unit_id, engine.cycles[end - 1]));
    }
}

fn check(window_len: usize, stride: usize) -> Result<()> {
    if window_len < 1 || stride < 1 {
        return Err(PreprocessError::BadWindowGeometry);
    }
    Ok(())
}

fn n_features(engines: &[EngineFeatures]) -> usize {
    engines.first().map_or(0, |e| e.n_features)
}

/// Every contiguous window of each engine at the given stride, labelled with
/// the RUL of its last cycle. Engines shorter than the window yield one
/// left-padded window.
pub fn make_train_windows(
    engines: &[EngineFeatures],
    window_len: usize,
    stride: usize,
) -> Result<WindowSet> {
    check(window_len, stride)?;
    let mut set = WindowSet::empty(window_len, n_features(engines));
    for e in engines.iter().filter(|e| !e.is_empty()) {
        if e.len() < window_len {
            set.push_window(e, e.len(), e.rul[e.len() - 1]);
            continue;
        }
        let mut end = window_len;
        while end <= e.len() {
            set.push_window(e, end, e.rul[end - 1]);
            end += stride;
        }
    }
    Ok(set)
}

/// One window per test engine covering its final cycles, labelled with the
/// engine's (already capped) RUL at the last observed cycle.
pub fn make_test_windows(engines: &[EngineFeatures], window_len: usize) -> Result<WindowSet> {
    check(window_len, 1)?;
    let mut set = WindowSet::empty(window_len, n_features(engines));
    for e in engines.iter().filter(|e| !e.is_empty()) {
        set.push_window(e, e.len(), e.rul[e.len() - 1]);
    }
    Ok(set)
}

/// Every stride-1 window of the test engines, for per-window evaluation.
pub fn make_test_windows_all(engines: &[EngineFeatures], window_len: usize) -> Result<WindowSet> {
    make_train_windows(engines, window_len, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn engine(unit_id: u32, len: usize, f: usize) -> EngineFeatures {
        EngineFeatures {
            unit_id,
            cycles: (1..=len as u32).collect(),
            n_features: f,
            data: (0..len * f).map(|i| i as f64).collect(),
            rul: (0..len).rev().map(|r| r as f64).collect(),
        }
    }

    #[test]
    fn counts_and_labels() {
        let e = engine(1, 3, 2);
        let w = make_train_windows(&[e], 2, 1).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w.labels, vec![1.0, 0.0]);
        assert_eq!(w.source_ids, vec![(1, 2), (1, 3)]);
        assert_eq!(w.window(0), &[0.0, 1.0, 2.0, 3.0]);
        let exact = make_train_windows(&[engine(1, 4, 1)], 4, 1).unwrap();
        assert_eq!(exact.len(), 1);
    }

    #[test]
    fn short_engine_repeats_first_row() {
        let e = engine(7, 2, 2);
        let w = make_train_windows(&[e], 3, 1).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w.window(0), &[0.0, 1.0, 0.0, 1.0, 2.0, 3.0]);
        assert_eq!(w.labels, vec![0.0]);
    }

    #[test]
    fn test_windows_take_the_tail() {
        let e = engine(3, 31, 1);
        let w = make_test_windows(&[e], 30).unwrap();
        assert_eq!(w.len(), 1);
        let expected: Vec<f64> = (1..31).map(|v| v as f64).collect();
        assert_eq!(w.window(0), expected.as_slice());
        assert_eq!(w.source_ids, vec![(3, 31)]);
    }

    #[test]
    fn bad_geometry() {
        assert_eq!(
            make_train_windows(&[], 0, 1),
            Err(PreprocessError::BadWindowGeometry)
        );
        assert_eq!(
            make_train_windows(&[], 2, 0),
            Err(PreprocessError::BadWindowGeometry)
        );
    }

    proptest! {
        #[test]
        fn windows_match_padded_slices(
            lens in proptest::collection::vec(1usize..12, 1..4),
            window_len in 1usize..8,
            stride in 1usize..4,
            f in 1usize..3,
        ) {
            let engines: Vec<_> = lens.iter().enumerate().map(|(i, &l)| engine(i as u32 + 1, l, f)).collect();
            let set = make_train_windows(&engines, window_len, stride).unwrap();
            prop_assert!(set.check_shape());
            let mut k = 0;
            for e in &engines {
                let pad = window_len.saturating_sub(e.len());
                let mut padded: Vec<f64> = Vec::new();
                for _ in 0..pad { padded.extend_from_slice(e.row(0)); }
                padded.extend_from_slice(&e.data);
                let rows = e.len() + pad;
                let mut end = window_len;
                while end <= rows {
                    prop_assert_eq!(set.window(k), &padded[(end - window_len) * f..end * f]);
                    prop_assert_eq!(set.labels[k], e.rul[end - pad - 1]);
                    k += 1;
                    end += stride;
                }
            }
            prop_assert_eq!(k, set.len());
        }
    }
}

//! RMSE, R² and the asymmetric NASA scoring function for RUL estimates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("no samples to evaluate")]
    EmptyInput,
    #[error("predicted has {predicted} values, actual has {actual}")]
    LengthMismatch { predicted: usize, actual: usize },
    #[error("actual values have zero variance; R² is undefined")]
    ZeroVarianceTarget,
}

pub type Result<T> = std::result::Result<T, MetricError>;

/// Paired estimated and true RUL values, in cycles.
#[derive(Debug, Clone, Copy)]
pub struct EvalInput<'a> {
    predicted: &'a [f64],
    actual: &'a [f64],
}

impl<'a> EvalInput<'a> {
    pub fn new(predicted: &'a [f64], actual: &'a [f64]) -> Result<Self> {
        if predicted.len() != actual.len() {
            return Err(MetricError::LengthMismatch {
                predicted: predicted.len(),
                actual: actual.len(),
            });
        }
        if predicted.is_empty() {
            return Err(MetricError::EmptyInput);
        }
        Ok(Self { predicted, actual })
    }

    pub fn len(&self) -> usize {
        self.actual.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actual.is_empty()
    }

    fn errors(&self) -> impl Iterator<Item = f64> + 'a {
        self.predicted.iter().zip(self.actual).map(|(p, a)| p - a)
    }
}

pub fn rmse(e: &EvalInput) -> f64 {
    let ss: f64 = e.errors().map(|d| d * d).sum();
    (ss / e.len() as f64).sqrt()
}

/// `1 - SS_res / SS_tot`, with SS_tot taken about the mean of `actual`.
pub fn r2(e: &EvalInput) -> Result<f64> {
    let mean = e.actual.iter().sum::<f64>() / e.len() as f64;
    let ss_tot: f64 = e.actual.iter().map(|a| (a - mean) * (a - mean)).sum();
    if ss_tot == 0.0 {
        return Err(MetricError::ZeroVarianceTarget);
    }
    let ss_res: f64 = e.errors().map(|d| d * d).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Penalty for one error `h = predicted - actual`. Late predictions
/// (`h >= 0`) grow faster than early ones.
pub fn nasa_penalty(h: f64) -> f64 {
    if h < 0.0 {
        (-h / 13.0).exp() - 1.0
    } else {
        (h / 10.0).exp() - 1.0
    }
}

pub fn nasa_score(e: &EvalInput) -> f64 {
    e.errors().map(nasa_penalty).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// Every window of every test engine.
    PerWindow,
    /// One prediction per test engine at its final observed cycle.
    LastCycle,
}

impl EvalMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalMode::PerWindow => "per_window",
            EvalMode::LastCycle => "last_cycle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub rmse: f64,
    pub r2: f64,
    pub nasa_score: f64,
    pub n: usize,
    pub mode: EvalMode,
    pub model: String,
    pub config_fingerprint: String,
}

impl EvalReport {
    pub fn compute(
        predicted: &[f64],
        actual: &[f64],
        mode: EvalMode,
        model: &str,
        config_fingerprint: &str,
    ) -> Result<Self> {
        let e = EvalInput::new(predicted, actual)?;
        Ok(Self {
            rmse: rmse(&e),
            r2: r2(&e)?,
            nasa_score: nasa_score(&e),
            n: e.len(),
            mode,
            model: model.to_string(),
            config_fingerprint: config_fingerprint.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn input<'a>(p: &'a [f64], a: &'a [f64]) -> EvalInput<'a> {
        EvalInput::new(p, a).unwrap()
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&input(&[1.0, 5.0], &[1.0, 5.0])), 0.0);
        assert!((rmse(&input(&[2.0, 2.0], &[0.0, 2.0])) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn r2_examples() {
        assert_eq!(r2(&input(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0])).unwrap(), 1.0);
        assert_eq!(r2(&input(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0])).unwrap(), 0.0);
        assert_eq!(r2(&input(&[0.0, 0.0], &[-1.0, 1.0])).unwrap(), 0.0);
        assert_eq!(
            r2(&input(&[1.0, 2.0], &[3.0, 3.0])),
            Err(MetricError::ZeroVarianceTarget)
        );
    }

    #[test]
    fn nasa_examples() {
        assert_eq!(nasa_score(&input(&[5.0, 7.0], &[5.0, 7.0])), 0.0);
        let e1 = std::f64::consts::E - 1.0;
        assert!((nasa_score(&input(&[0.0], &[13.0])) - e1).abs() < 1e-12);
        assert!((nasa_score(&input(&[10.0], &[0.0])) - e1).abs() < 1e-12);
    }

    #[test]
    fn empty_and_mismatched_inputs() {
        assert_eq!(EvalInput::new(&[], &[]).unwrap_err(), MetricError::EmptyInput);
        assert!(matches!(
            EvalInput::new(&[1.0], &[1.0, 2.0]),
            Err(MetricError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn report_serializes_fixed_keys() {
        let r = EvalReport::compute(&[1.0, 2.0], &[1.5, 2.5], EvalMode::LastCycle, "m", "abc").unwrap();
        let v = serde_json::to_value(&r).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["config_fingerprint", "mode", "model", "n", "nasa_score", "r2", "rmse"]);
        assert_eq!(v["mode"], "last_cycle");
    }

    proptest! {
        #[test]
        fn rmse_symmetric_and_translation_invariant(
            pairs in proptest::collection::vec((-500f64..500.0, -500f64..500.0), 1..50),
            c in -100f64..100.0,
        ) {
            let p: Vec<f64> = pairs.iter().map(|x| x.0).collect();
            let a: Vec<f64> = pairs.iter().map(|x| x.1).collect();
            let r = rmse(&input(&p, &a));
            prop_assert!(r >= 0.0);
            prop_assert!((r - rmse(&input(&a, &p))).abs() <= 1e-12 * (1.0 + r));
            let ps: Vec<f64> = p.iter().map(|v| v + c).collect();
            let as_: Vec<f64> = a.iter().map(|v| v + c).collect();
            prop_assert!((r - rmse(&input(&ps, &as_))).abs() <= 1e-9 * (1.0 + r));
        }

        #[test]
        fn nasa_additive_over_concatenation(
            a in proptest::collection::vec((-50f64..50.0, -50f64..50.0), 1..20),
            b in proptest::collection::vec((-50f64..50.0, -50f64..50.0), 1..20),
        ) {
            let split = |v: &[(f64, f64)]| -> (Vec<f64>, Vec<f64>) { v.iter().cloned().unzip() };
            let (pa, aa) = split(&a);
            let (pb, ab) = split(&b);
            let joined: Vec<_> = a.iter().chain(&b).cloned().collect();
            let (pj, aj) = split(&joined);
            let total = nasa_score(&input(&pj, &aj));
            let parts = nasa_score(&input(&pa, &aa)) + nasa_score(&input(&pb, &ab));
            prop_assert!((total - parts).abs() <= 1e-9 * (1.0 + total.abs()));
        }

        #[test]
        fn r2_at_most_one(pairs in proptest::collection::vec((-500f64..500.0, -500f64..500.0), 2..50)) {
            let p: Vec<f64> = pairs.iter().map(|x| x.0).collect();
            let a: Vec<f64> = pairs.iter().map(|x| x.1).collect();
            if let Ok(v) = r2(&input(&p, &a)) {
                prop_assert!(v <= 1.0);
            }
        }
    }
}

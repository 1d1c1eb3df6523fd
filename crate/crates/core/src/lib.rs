//! Remaining-useful-life estimation for the CMAPSS turbofan datasets.
//!
//! The crate covers the full pipeline: parsing the run-to-failure text
//! files ([`cmapss_io`]), smoothing, standardization and windowing
//! ([`preprocess`]), PCA and F-score feature engineering ([`features`]),
//! a small reverse-mode autodiff engine ([`autodiff`]) with the neural
//! regressors built on it ([`nn`]), tree and linear baselines
//! ([`baselines`]), evaluation metrics ([`metrics`]) and the `rulforge`
//! command line ([`cli`]).

pub mod artifact;
pub mod autodiff;
pub mod cli;
pub mod baselines;
pub mod cmapss_io;
pub mod container;
pub mod features;
pub mod frame;
pub mod metrics;
pub mod nn;
pub mod preprocess;

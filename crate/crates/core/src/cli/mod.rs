//! The `rulforge` command line: prepare, analyze, train, evaluate and
//! compare, all driven by one JSON run config.

mod commands;
mod config;
mod manifest;
mod pipeline;

use std::path::PathBuf;

use thiserror::Error;

use crate::artifact::ArtifactError;
use crate::baselines::BaselineError;
use crate::cmapss_io::IoError;
use crate::container::ContainerError;
use crate::features::FeatureError;
use crate::nn::NnError;
use crate::preprocess::PreprocessError;

pub use commands::{
    cmd_analyze, cmd_compare, cmd_evaluate, cmd_prepare, cmd_train, fit_model, load_prepared, load_windows, CompareRow,
    Comparison, Context, Scores, MODEL_FILE, PIPELINE_FILE, ROSTER, TEST_ALL_WINDOWS, TEST_LAST_WINDOWS, TRAIN_WINDOWS,
};
pub use config::{
    canonical_json, sha256_hex, BaselineBlock, DataPaths, EvaluationMode, FeatureBlock, ModelBlock,
    ModelChoice, PreprocessBlock, RunConfig, PRESETS,
};
pub use manifest::{ArtifactEntry, RunManifest};
pub use pipeline::{preprocessing_fingerprint, raw_frame, run_pipeline, InputHashes, PipelineOutput, PipelineRecord};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("model was trained behind preprocessing {model} but the artifacts in {dir} come from {artifacts}; rerun prepare or retrain")]
    FingerprintMismatch {
        model: String,
        artifacts: String,
        dir: PathBuf,
    },
}

impl CliError {
    /// 2 for configuration problems, 3 for data problems, 4 for numerical
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::FingerprintMismatch { .. } => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<PreprocessError> for CliError {
    fn from(e: PreprocessError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        match e {
            FeatureError::KOutOfRange { .. } | FeatureError::NComponentsTooLarge { .. } => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::NonFiniteLoss { .. } => CliError::Numerical(e.to_string()),
            NnError::InvalidConfig(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<BaselineError> for CliError {
    fn from(e: BaselineError) -> Self {
        match e {
            BaselineError::DegenerateDesign => CliError::Numerical(e.to_string()),
            BaselineError::InvalidConfig(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ContainerError> for CliError {
    fn from(e: ContainerError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ArtifactError> for CliError {
    fn from(e: ArtifactError) -> Self {
        match e {
            ArtifactError::Container(c) => c.into(),
            ArtifactError::Nn(n) => n.into(),
            ArtifactError::Baseline(b) => b.into(),
            ArtifactError::Invalid(m) => CliError::Data(m),
        }
    }
}

impl From<crate::frame::FrameError> for CliError {
    fn from(e: crate::frame::FrameError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<crate::metrics::MetricError> for CliError {
    fn from(e: crate::metrics::MetricError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

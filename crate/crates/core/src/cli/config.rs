//! Run configuration: a strict JSON document resolved against its own
//! directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::CliError;
use crate::artifact::TabularInput;
use crate::baselines::{BoostConfig, ForestConfig};
use crate::nn::{ModelConfig, TrainConfig};
use crate::preprocess::{NormMethod, SmoothingConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub train: PathBuf,
    pub test: PathBuf,
    pub rul: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessBlock {
    pub smoothing: SmoothingConfig,
    pub normalization: NormMethod,
    pub rul_cap: u32,
    pub window_len: usize,
    pub stride: usize,
    /// Columns with raw training variance at or below this are dropped.
    pub variance_tol: f64,
}

impl Default for PreprocessBlock {
    fn default() -> Self {
        Self {
            smoothing: SmoothingConfig::default(),
            normalization: NormMethod::Zscore,
            rul_cap: 130,
            window_len: 30,
            stride: 1,
            variance_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureBlock {
    pub pca_components: usize,
    pub append_pc1: bool,
    /// Features kept by F-score; `None` keeps all but the lowest two.
    pub select_k: Option<usize>,
}

impl Default for FeatureBlock {
    fn default() -> Self {
        Self {
            pca_components: 2,
            append_pc1: true,
            select_k: None,
        }
    }
}

/// Either a named preset or an explicit network configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<ModelConfig>,
}

impl Default for ModelBlock {
    fn default() -> Self {
        Self {
            preset: Some("cnn_lstm_default".into()),
            config: None,
        }
    }
}

/// What a model block resolves to.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelChoice {
    Neural { name: String, config: ModelConfig },
    Linear,
    Forest,
    Boost,
}

impl ModelChoice {
    pub fn name(&self) -> &str {
        match self {
            ModelChoice::Neural { name, .. } => name,
            ModelChoice::Linear => "linreg",
            ModelChoice::Forest => "random_forest",
            ModelChoice::Boost => "gradient_boost",
        }
    }
}

pub const PRESETS: [&str; 7] = [
    "cnn_lstm_default",
    "lstm_default",
    "cnn_default",
    "mlp_default",
    "linreg",
    "random_forest",
    "gradient_boost",
];

impl ModelBlock {
    pub fn resolve(&self) -> Result<ModelChoice, CliError> {
        match (&self.preset, &self.config) {
            (Some(p), None) => match p.as_str() {
                "linreg" => Ok(ModelChoice::Linear),
                "random_forest" => Ok(ModelChoice::Forest),
                "gradient_boost" => Ok(ModelChoice::Boost),
                other => {
                    let config = ModelConfig::preset(other).ok_or_else(|| {
                        CliError::Config(format!(
                            "unknown model preset `{other}`; expected one of {}",
                            PRESETS.join(", ")
                        ))
                    })?;
                    let name = other.trim_end_matches("_default");
                    Ok(ModelChoice::Neural {
                        name: name.to_string(),
                        config,
                    })
                }
            },
            (None, Some(c)) => {
                c.validate().map_err(|e| CliError::Config(format!("model.config: {e}")))?;
                let name = match c.architecture {
                    crate::nn::Architecture::Mlp => "mlp",
                    crate::nn::Architecture::Cnn => "cnn",
                    crate::nn::Architecture::Lstm => "lstm",
                    crate::nn::Architecture::CnnLstm => "cnn_lstm",
                };
                Ok(ModelChoice::Neural {
                    name: name.into(),
                    config: c.clone(),
                })
            }
            _ => Err(CliError::Config(
                "model block needs exactly one of `preset` or `config`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineBlock {
    pub random_forest: ForestConfig,
    pub gradient_boost: BoostConfig,
    pub input: TabularInput,
}

impl Default for BaselineBlock {
    fn default() -> Self {
        Self {
            random_forest: ForestConfig::default(),
            gradient_boost: BoostConfig::default(),
            input: TabularInput::LastRow,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluationMode {
    #[default]
    Both,
    PerWindow,
    LastCycle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataPaths,
    #[serde(default)]
    pub preprocess: PreprocessBlock,
    #[serde(default)]
    pub features: FeatureBlock,
    #[serde(default)]
    pub model: ModelBlock,
    /// Network training settings; omitted fields take the defaults of the
    /// chosen architecture.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<Value>,
    #[serde(default)]
    pub baselines: BaselineBlock,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub evaluation_mode: EvaluationMode,
    #[serde(default)]
    pub seed: u64,
}

fn default_output() -> PathBuf {
    PathBuf::from("rulforge_out")
}

fn merge(base: &mut Value, over: &Value) {
    if let (Value::Object(b), Value::Object(o)) = (&mut *base, over) {
        for (k, v) in o {
            b.insert(k.clone(), v.clone());
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let mut cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        for p in [&mut cfg.data.train, &mut cfg.data.test, &mut cfg.data.rul, &mut cfg.output_dir] {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        Self::from_json(&text, dir).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        for (what, p) in [("train", &self.data.train), ("test", &self.data.test), ("rul", &self.data.rul)] {
            if !p.is_file() {
                return Err(CliError::Config(format!("data.{what}: file not found: {}", p.display())));
            }
        }
        let pp = &self.preprocess;
        pp.smoothing
            .validate()
            .map_err(|e| CliError::Config(format!("preprocess.smoothing: {e}")))?;
        if pp.rul_cap < 1 || pp.window_len < 1 || pp.stride < 1 {
            return Err(CliError::Config(
                "preprocess: rul_cap, window_len and stride must be at least 1".into(),
            ));
        }
        if !(pp.variance_tol >= 0.0) {
            return Err(CliError::Config("preprocess.variance_tol must be non-negative".into()));
        }
        if self.features.select_k == Some(0) {
            return Err(CliError::Config("features.select_k must be at least 1".into()));
        }
        if self.features.append_pc1 && self.features.pca_components == 0 {
            return Err(CliError::Config("features.append_pc1 needs pca_components >= 1".into()));
        }
        let choice = self.model.resolve()?;
        if let ModelChoice::Neural { name, .. } = &choice {
            self.train_config(name)?;
        }
        self.baselines
            .random_forest
            .validate()
            .map_err(|e| CliError::Config(format!("baselines.random_forest: {e}")))?;
        self.baselines
            .gradient_boost
            .validate()
            .map_err(|e| CliError::Config(format!("baselines.gradient_boost: {e}")))?;
        Ok(())
    }

    /// Training settings for a network, layering the `train` block over
    /// the architecture's defaults. The run seed applies unless the block
    /// sets its own.
    pub fn train_config(&self, model_name: &str) -> Result<TrainConfig, CliError> {
        let base = if model_name == "mlp" {
            TrainConfig::mlp_sgd()
        } else {
            TrainConfig::default()
        };
        let mut v = serde_json::to_value(TrainConfig { seed: self.seed, ..base }).expect("serializable");
        if let Some(over) = &self.train {
            if !over.is_object() {
                return Err(CliError::Config("train must be an object".into()));
            }
            merge(&mut v, over);
        }
        let t: TrainConfig =
            serde_json::from_value(v).map_err(|e| CliError::Config(format!("train: {e}")))?;
        t.validate().map_err(|e| CliError::Config(format!("train: {e}")))?;
        Ok(t)
    }

    pub fn forest_config(&self) -> ForestConfig {
        ForestConfig {
            seed: self.baselines.random_forest.seed ^ self.seed,
            ..self.baselines.random_forest.clone()
        }
    }

    pub fn boost_config(&self) -> BoostConfig {
        BoostConfig {
            seed: self.baselines.gradient_boost.seed ^ self.seed,
            ..self.baselines.gradient_boost.clone()
        }
    }

    /// Hash of every field except `output_dir`, over the canonical
    /// (key-sorted) JSON form of the resolved config.
    pub fn fingerprint(&self) -> String {
        let mut v = serde_json::to_value(self).expect("serializable");
        if let Value::Object(m) = &mut v {
            m.remove("output_dir");
            // Resolve the train block so spelling defaults out does not
            // change the hash.
            let resolved = match self.model.resolve() {
                Ok(ModelChoice::Neural { name, .. }) => self
                    .train_config(&name)
                    .map(|t| serde_json::to_value(t).expect("serializable"))
                    .unwrap_or(Value::Null),
                _ => Value::Null,
            };
            m.insert("train".into(), resolved);
        }
        sha256_hex(canonical_json(&v).as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Compact JSON with object keys in sorted order.
pub fn canonical_json(v: &Value) -> String {
    // serde_json's default map is ordered by key, so re-serializing a
    // Value built from any input sorts it.
    serde_json::to_string(v).expect("Value serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dir_with_data() -> tempfile::TempDir {
        let d = tempfile::tempdir().unwrap();
        for f in ["tr.txt", "te.txt", "rul.txt"] {
            std::fs::write(d.path().join(f), "").unwrap();
        }
        d
    }

    const BASE: &str = r#"{"data": {"train": "tr.txt", "test": "te.txt", "rul": "rul.txt"}}"#;

    #[test]
    fn defaults_and_relative_paths() {
        let d = dir_with_data();
        let c = RunConfig::from_json(BASE, d.path()).unwrap();
        assert_eq!(c.data.train, d.path().join("tr.txt"));
        assert_eq!(c.preprocess.window_len, 30);
        assert_eq!(c.preprocess.rul_cap, 130);
        assert_eq!(c.model.resolve().unwrap().name(), "cnn_lstm");
        assert_eq!(c.train_config("cnn_lstm").unwrap(), TrainConfig::default());
        assert_eq!(c.train_config("mlp").unwrap().optimizer, crate::nn::Optimizer::Sgd);
    }

    #[test]
    fn unknown_keys_and_missing_files_rejected() {
        let d = dir_with_data();
        let extra = r#"{"data": {"train": "tr.txt", "test": "te.txt", "rul": "rul.txt"}, "bogus": 1}"#;
        assert!(matches!(RunConfig::from_json(extra, d.path()), Err(CliError::Config(_))));
        let nested = r#"{"data": {"train": "tr.txt", "test": "te.txt", "rul": "rul.txt"},
            "preprocess": {"window": 3}}"#;
        assert!(RunConfig::from_json(nested, d.path()).is_err());
        let missing = r#"{"data": {"train": "tr.txt", "test": "te.txt", "rul": "nope.txt"}}"#;
        let err = RunConfig::from_json(missing, d.path()).unwrap_err().to_string();
        assert!(err.contains("nope.txt"), "{err}");
        let bad_train = r#"{"data": {"train": "tr.txt", "test": "te.txt", "rul": "rul.txt"},
            "train": {"epochs": 0}}"#;
        assert!(RunConfig::from_json(bad_train, d.path()).is_err());
    }

    #[test]
    fn fingerprint_semantics() {
        let d = dir_with_data();
        let fp = |s: &str| RunConfig::from_json(s, d.path()).unwrap().fingerprint();
        let base = fp(BASE);
        let reordered = r#"{"output_dir": "other", "preprocess": {"stride": 1, "rul_cap": 130},
            "data": {"rul": "rul.txt", "test": "te.txt", "train": "tr.txt"},
            "train": {"epochs": 30}}"#;
        assert_eq!(fp(reordered), base);
        let changed = r#"{"data": {"train": "tr.txt", "test": "te.txt", "rul": "rul.txt"},
            "preprocess": {"smoothing": {"alpha": 0.2}}}"#;
        assert_ne!(fp(changed), base);
        let seeded = r#"{"data": {"train": "tr.txt", "test": "te.txt", "rul": "rul.txt"}, "seed": 3}"#;
        assert_ne!(fp(seeded), base);
    }

    #[test]
    fn model_block_choices() {
        let b = ModelBlock { preset: Some("gradient_boost".into()), config: None };
        assert_eq!(b.resolve().unwrap(), ModelChoice::Boost);
        let b = ModelBlock { preset: Some("mlp_default".into()), config: None };
        assert_eq!(b.resolve().unwrap().name(), "mlp");
        let b = ModelBlock { preset: None, config: None };
        assert!(b.resolve().is_err());
        let b = ModelBlock { preset: Some("nope".into()), config: None };
        assert!(b.resolve().is_err());
    }
}

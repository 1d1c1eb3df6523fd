//! Trained models of every family in one persisted form.

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::autodiff::Tensor;
use crate::baselines::{BaselineError, BoostModel, Forest, LinearModel, TreeNode};
use crate::container::{Container, ContainerError};
use crate::frame::FeatureFrame;
use crate::nn::{forward, ModelConfig, NnError, ParamSet, TrainConfig, TrainedModel};
use crate::preprocess::WindowSet;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, ArtifactError>;

/// How tabular baselines see a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TabularInput {
    /// Only the window's final cycle.
    #[default]
    LastRow,
    /// All cycles concatenated.
    Flatten,
}

impl TabularInput {
    /// Design matrix for `windows`, one row per window.
    pub fn design(self, windows: &WindowSet) -> FeatureFrame {
        let (data, width) = match self {
            TabularInput::LastRow => (windows.last_rows(), windows.n_features),
            TabularInput::Flatten => (windows.data.clone(), windows.window_size()),
        };
        let names = (0..width).map(|i| format!("x{i}")).collect();
        FeatureFrame::new(names, data).expect("window data is rectangular")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelBody {
    Neural(TrainedModel),
    Linear(LinearModel),
    Forest(Forest),
    Boost(BoostModel),
}

impl ModelBody {
    fn kind(&self) -> &'static str {
        match self {
            ModelBody::Neural(_) => "neural",
            ModelBody::Linear(_) => "linear",
            ModelBody::Forest(_) => "forest",
            ModelBody::Boost(_) => "boost",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifact {
    /// Roster name such as `cnn_lstm` or `random_forest`.
    pub name: String,
    pub fingerprint: String,
    pub rul_cap: f64,
    pub window_len: usize,
    pub n_features: usize,
    pub input: TabularInput,
    pub body: ModelBody,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Meta {
    name: String,
    fingerprint: String,
    rul_cap: f64,
    window_len: usize,
    n_features: usize,
    input: TabularInput,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    model_config: Option<ModelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    train_config: Option<TrainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    param_names: Option<Vec<String>>,
}

fn trees_to(c: &mut Container, trees: &[TreeNode]) {
    for (i, t) in trees.iter().enumerate() {
        let nodes = t.to_preorder();
        let flat = nodes.iter().flatten().copied().collect();
        c.push(format!("tree.{i}"), Tensor::new(vec![nodes.len(), 3], flat).expect("n x 3"));
    }
}

fn trees_from(c: &Container, origin: &str, n_features: usize) -> Result<Vec<TreeNode>> {
    let mut out = Vec::new();
    while let Some(t) = c.get(&format!("tree.{}", out.len())) {
        let nodes: Vec<[f64; 3]> = t.data().chunks_exact(3).map(|r| [r[0], r[1], r[2]]).collect();
        let tree = TreeNode::from_preorder(&nodes)
            .filter(|t| t.fits_width(n_features))
            .ok_or_else(|| ArtifactError::Invalid(format!("{origin}: malformed tree {}", out.len())))?;
        out.push(tree);
    }
    Ok(out)
}

fn scalar(c: &Container, name: &str, origin: &str) -> Result<f64> {
    c.require(name, origin)?
        .item()
        .ok_or_else(|| ArtifactError::Invalid(format!("{origin}: `{name}` is not a scalar")))
}

impl ModelArtifact {
    pub fn neural(name: &str, model: TrainedModel) -> Self {
        Self {
            name: name.to_string(),
            fingerprint: model.fingerprint.clone(),
            rul_cap: model.rul_cap,
            window_len: model.window_len,
            n_features: model.n_features,
            input: TabularInput::LastRow,
            body: ModelBody::Neural(model),
        }
    }

    /// RUL estimates in cycles, clipped to `[0, rul_cap]`.
    pub fn predict(&self, windows: &WindowSet) -> Result<Vec<f64>> {
        if windows.n_features != self.n_features || windows.window_len != self.window_len {
            return Err(NnError::ShapeMismatch {
                expected: format!("{} x {} windows", self.window_len, self.n_features),
                got: format!("{} x {}", windows.window_len, windows.n_features),
            }
            .into());
        }
        let raw = match &self.body {
            ModelBody::Neural(m) => return Ok(forward(m, windows)?),
            ModelBody::Linear(m) => m.predict(&self.input.design(windows))?,
            ModelBody::Forest(m) => m.predict(&self.input.design(windows))?,
            ModelBody::Boost(m) => m.predict(&self.input.design(windows))?,
        };
        Ok(raw.into_iter().map(|v| v.clamp(0.0, self.rul_cap)).collect())
    }

    pub fn to_container(&self) -> Container {
        let mut meta = Meta {
            name: self.name.clone(),
            fingerprint: self.fingerprint.clone(),
            rul_cap: self.rul_cap,
            window_len: self.window_len,
            n_features: self.n_features,
            input: self.input,
            model_config: None,
            train_config: None,
            param_names: None,
        };
        let mut tensors: Vec<(String, Tensor)> = Vec::new();
        let mut trees: &[TreeNode] = &[];
        match &self.body {
            ModelBody::Neural(m) => {
                meta.model_config = Some(m.config.clone());
                meta.train_config = Some(m.train_config.clone());
                meta.param_names = Some(m.params.names.clone());
                for (n, t) in m.params.names.iter().zip(&m.params.tensors) {
                    tensors.push((format!("param.{n}"), t.clone()));
                }
                tensors.push(("loss_curve".into(), Tensor::vector(m.loss_curve.clone())));
            }
            ModelBody::Linear(m) => {
                tensors.push(("coefficients".into(), Tensor::vector(m.coefficients.clone())));
                tensors.push(("intercept".into(), Tensor::scalar(m.intercept)));
            }
            ModelBody::Forest(m) => trees = &m.trees,
            ModelBody::Boost(m) => {
                tensors.push(("base".into(), Tensor::scalar(m.base)));
                tensors.push(("learning_rate".into(), Tensor::scalar(m.learning_rate)));
                tensors.push(("train_mse".into(), Tensor::vector(m.train_mse.clone())));
                trees = &m.trees;
            }
        }
        let mut c = Container::new(self.body.kind(), serde_json::to_value(&meta).expect("meta serializes"));
        c.tensors = tensors;
        trees_to(&mut c, trees);
        c
    }

    pub fn from_container(c: &Container, origin: &str) -> Result<Self> {
        c.expect_kind(&["neural", "linear", "forest", "boost"], origin)?;
        let meta: Meta = serde_json::from_value(c.meta.clone())
            .map_err(|e| ArtifactError::Invalid(format!("{origin}: bad model metadata: {e}")))?;
        let missing = |what: &str| ArtifactError::Invalid(format!("{origin}: missing {what}"));
        let body = match c.kind.as_str() {
            "neural" => {
                let config = meta.model_config.clone().ok_or_else(|| missing("model_config"))?;
                let train_config = meta.train_config.clone().ok_or_else(|| missing("train_config"))?;
                let names = meta.param_names.clone().ok_or_else(|| missing("param_names"))?;
                let tensors = names
                    .iter()
                    .map(|n| Ok(c.require(&format!("param.{n}"), origin)?.clone()))
                    .collect::<Result<Vec<_>>>()?;
                let params = ParamSet { names, tensors };
                let layout = config.param_layout(meta.window_len, meta.n_features)?;
                if !params.matches(&layout) {
                    return Err(ArtifactError::Invalid(format!(
                        "{origin}: parameters do not match the stored model config"
                    )));
                }
                ModelBody::Neural(TrainedModel {
                    config,
                    train_config,
                    window_len: meta.window_len,
                    n_features: meta.n_features,
                    rul_cap: meta.rul_cap,
                    params,
                    fingerprint: meta.fingerprint.clone(),
                    loss_curve: c.require("loss_curve", origin)?.data().to_vec(),
                })
            }
            "linear" => ModelBody::Linear(LinearModel {
                coefficients: c.require("coefficients", origin)?.data().to_vec(),
                intercept: scalar(c, "intercept", origin)?,
            }),
            "forest" => {
                let width = width(meta.input, meta.window_len, meta.n_features);
                let trees = trees_from(c, origin, width)?;
                if trees.is_empty() {
                    return Err(missing("trees"));
                }
                ModelBody::Forest(Forest { trees, n_features: width })
            }
            _ => {
                let width = width(meta.input, meta.window_len, meta.n_features);
                ModelBody::Boost(BoostModel {
                    base: scalar(c, "base", origin)?,
                    learning_rate: scalar(c, "learning_rate", origin)?,
                    trees: trees_from(c, origin, width)?,
                    n_features: width,
                    train_mse: c.require("train_mse", origin)?.data().to_vec(),
                })
            }
        };
        Ok(Self {
            name: meta.name,
            fingerprint: meta.fingerprint,
            rul_cap: meta.rul_cap,
            window_len: meta.window_len,
            n_features: meta.n_features,
            input: meta.input,
            body,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        Ok(self.to_container().write(path)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let c = Container::read(path)?;
        Self::from_container(&c, &path.display().to_string())
    }
}

fn width(input: TabularInput, window_len: usize, n_features: usize) -> usize {
    match input {
        TabularInput::LastRow => n_features,
        TabularInput::Flatten => window_len * n_features,
    }
}

/// Window sets persist as containers of kind `windows`.
pub fn windows_to_container(w: &WindowSet) -> Container {
    let mut c = Container::new(
        "windows",
        json!({"window_len": w.window_len, "n_features": w.n_features}),
    );
    c.push(
        "data",
        Tensor::new(vec![w.len(), w.window_len, w.n_features], w.data.clone()).expect("window shape"),
    );
    c.push("labels", Tensor::vector(w.labels.clone()));
    let ids = w.source_ids.iter().flat_map(|&(u, t)| [f64::from(u), f64::from(t)]).collect();
    c.push("source_ids", Tensor::new(vec![w.len(), 2], ids).expect("id shape"));
    c
}

pub fn windows_from_container(c: &Container, origin: &str) -> Result<WindowSet> {
    c.expect_kind(&["windows"], origin)?;
    let data = c.require("data", origin)?;
    let s = data.shape();
    if s.len() != 3 {
        return Err(ArtifactError::Invalid(format!("{origin}: window data must be 3-D")));
    }
    let labels = c.require("labels", origin)?.data().to_vec();
    let ids: Vec<(u32, u32)> = c
        .require("source_ids", origin)?
        .data()
        .chunks_exact(2)
        .map(|p| (p[0] as u32, p[1] as u32))
        .collect();
    let w = WindowSet {
        data: data.data().to_vec(),
        labels,
        window_len: s[1],
        n_features: s[2],
        source_ids: ids,
    };
    if !w.check_shape() || w.len() != s[0] {
        return Err(ArtifactError::Invalid(format!("{origin}: inconsistent window file")));
    }
    Ok(w)
}

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{ModelConfig, ParamSet};
use super::{NnError, Result};
use crate::autodiff::{Tape, Tensor};
use crate::preprocess::WindowSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 30,
            batch_size: 64,
            seed: 0,
            optimizer: Optimizer::Adam,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    /// Plain SGD at rate 0.1, the pairing used for the MLP preset.
    pub fn mlp_sgd() -> Self {
        Self {
            learning_rate: 0.1,
            optimizer: Optimizer::Sgd,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(NnError::InvalidConfig("learning_rate must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(NnError::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(NnError::InvalidConfig("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Network weights plus everything needed to apply them.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub config: ModelConfig,
    pub train_config: TrainConfig,
    pub window_len: usize,
    pub n_features: usize,
    /// Labels were divided by this during training; predictions are
    /// rescaled by it and clipped to `[0, rul_cap]`.
    pub rul_cap: f64,
    pub params: ParamSet,
    /// Fingerprint of the preprocessing the model was trained behind.
    pub fingerprint: String,
    /// Epoch-average training loss on the normalized labels.
    pub loss_curve: Vec<f64>,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

enum OptState {
    Sgd,
    Adam { m: Vec<Vec<f64>>, v: Vec<Vec<f64>>, t: i32 },
}

impl OptState {
    fn new(kind: Optimizer, params: &ParamSet) -> Self {
        match kind {
            Optimizer::Sgd => OptState::Sgd,
            Optimizer::Adam => {
                let zeros: Vec<Vec<f64>> = params.tensors.iter().map(|t| vec![0.0; t.len()]).collect();
                OptState::Adam {
                    m: zeros.clone(),
                    v: zeros,
                    t: 0,
                }
            }
        }
    }

    fn step(&mut self, params: &mut ParamSet, grads: &[Option<Vec<f64>>], lr: f64) {
        match self {
            OptState::Sgd => {
                for (p, g) in params.tensors.iter_mut().zip(grads) {
                    if let Some(g) = g {
                        for (w, d) in p.data_mut().iter_mut().zip(g) {
                            *w -= lr * d;
                        }
                    }
                }
            }
            OptState::Adam { m, v, t } => {
                *t += 1;
                let c1 = 1.0 - BETA1.powi(*t);
                let c2 = 1.0 - BETA2.powi(*t);
                for (k, (p, g)) in params.tensors.iter_mut().zip(grads).enumerate() {
                    let Some(g) = g else { continue };
                    for (i, (w, d)) in p.data_mut().iter_mut().zip(g).enumerate() {
                        m[k][i] = BETA1 * m[k][i] + (1.0 - BETA1) * d;
                        v[k][i] = BETA2 * v[k][i] + (1.0 - BETA2) * d * d;
                        let mh = m[k][i] / c1;
                        let vh = v[k][i] / c2;
                        *w -= lr * mh / (vh.sqrt() + EPS);
                    }
                }
            }
        }
    }
}

fn batch_tensor(windows: &WindowSet, idx: &[usize]) -> Result<Tensor> {
    let mut data = Vec::with_capacity(idx.len() * windows.window_size());
    for &i in idx {
        data.extend_from_slice(windows.window(i));
    }
    Ok(Tensor::new(
        vec![idx.len(), windows.window_len, windows.n_features],
        data,
    )?)
}

/// Mini-batch minimization of the squared error on `label / rul_cap`.
/// Initialization and shuffling draw from separate ChaCha streams of
/// `tcfg.seed`, so equal inputs give bit-identical parameters.
pub fn train(
    config: &ModelConfig,
    tcfg: &TrainConfig,
    windows: &WindowSet,
    rul_cap: f64,
    fingerprint: &str,
) -> Result<TrainedModel> {
    tcfg.validate()?;
    if windows.is_empty() {
        return Err(NnError::EmptyWindows);
    }
    if !windows.check_shape() {
        return Err(NnError::ShapeMismatch {
            expected: "consistent window set".into(),
            got: format!("{} values for {} windows", windows.data.len(), windows.len()),
        });
    }
    if !(rul_cap > 0.0) {
        return Err(NnError::InvalidConfig("rul_cap must be positive".into()));
    }
    let mut init_rng = ChaCha8Rng::seed_from_u64(tcfg.seed);
    let mut params = config.init_params(windows.window_len, windows.n_features, &mut init_rng)?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(tcfg.seed);
    shuffle_rng.set_stream(1);

    let targets: Vec<f64> = windows.labels.iter().map(|y| y / rul_cap).collect();
    let mut opt = OptState::new(tcfg.optimizer, &params);
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut loss_curve = Vec::with_capacity(tcfg.epochs);

    for epoch in 1..=tcfg.epochs {
        if tcfg.shuffle {
            order.shuffle(&mut shuffle_rng);
        }
        let mut total = 0.0;
        for idx in order.chunks(tcfg.batch_size) {
            let mut tape = Tape::new();
            let pv = params.record(&mut tape);
            let x = tape.leaf(batch_tensor(windows, idx)?);
            let y = tape.leaf(Tensor::new(
                vec![idx.len(), 1],
                idx.iter().map(|&i| targets[i]).collect(),
            )?);
            let out = config.build(&mut tape, &pv, x)?;
            let loss = tape.mse_loss(out, y)?;
            let lv = tape.value(loss).data()[0];
            if !lv.is_finite() {
                return Err(NnError::NonFiniteLoss { epoch });
            }
            total += lv * idx.len() as f64;
            let grads = tape.backward(loss)?;
            let g: Vec<Option<Vec<f64>>> = pv.iter().map(|&v| grads.get(v).map(<[f64]>::to_vec)).collect();
            if g.iter().flatten().flatten().any(|d| !d.is_finite()) {
                return Err(NnError::NonFiniteLoss { epoch });
            }
            opt.step(&mut params, &g, tcfg.learning_rate);
        }
        let avg = total / windows.len() as f64;
        log::debug!("epoch {epoch}: loss {avg:.6}");
        loss_curve.push(avg);
    }

    Ok(TrainedModel {
        config: config.clone(),
        train_config: tcfg.clone(),
        window_len: windows.window_len,
        n_features: windows.n_features,
        rul_cap,
        params,
        fingerprint: fingerprint.to_string(),
        loss_curve,
    })
}

const PREDICT_BATCH: usize = 256;

/// RUL estimates in cycles, one per window, clipped to `[0, rul_cap]`.
pub fn forward(model: &TrainedModel, windows: &WindowSet) -> Result<Vec<f64>> {
    if windows.n_features != model.n_features || windows.window_len != model.window_len {
        return Err(NnError::ShapeMismatch {
            expected: format!("{} x {} windows", model.window_len, model.n_features),
            got: format!("{} x {}", windows.window_len, windows.n_features),
        });
    }
    let layout = model.config.param_layout(model.window_len, model.n_features)?;
    if !model.params.matches(&layout) {
        return Err(NnError::ShapeMismatch {
            expected: "parameters matching the model config".into(),
            got: "a different parameter layout".into(),
        });
    }
    let all: Vec<usize> = (0..windows.len()).collect();
    let mut out = Vec::with_capacity(windows.len());
    for idx in all.chunks(PREDICT_BATCH) {
        let mut tape = Tape::new();
        let pv = model.params.record(&mut tape);
        let x = tape.leaf(batch_tensor(windows, idx)?);
        let y = model.config.build(&mut tape, &pv, x)?;
        out.extend(
            tape.value(y)
                .data()
                .iter()
                .map(|v| (v * model.rul_cap).clamp(0.0, model.rul_cap)),
        );
    }
    Ok(out)
}

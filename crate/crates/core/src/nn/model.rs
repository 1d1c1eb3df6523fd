use rand::Rng;
use serde::{Deserialize, Serialize};

use super::lstm::{lstm_cell_on_tape, uniform_fill, LstmParams, LstmVars, GATES};
use super::{NnError, Result};
use crate::autodiff::{Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Architecture {
    Mlp,
    Cnn,
    Lstm,
    CnnLstm,
}

impl Architecture {
    fn has_conv(self) -> bool {
        matches!(self, Architecture::Cnn | Architecture::CnnLstm)
    }

    fn has_lstm(self) -> bool {
        matches!(self, Architecture::Lstm | Architecture::CnnLstm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub conv_filters: usize,
    pub conv_kernel: usize,
    pub pool: usize,
    pub lstm_layers: Vec<usize>,
    /// Fully connected head; the last size is the scalar output.
    pub dense_layers: Vec<usize>,
    /// Hidden layers in front of the head for the MLP architecture.
    pub mlp_layers: Vec<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::cnn_lstm()
    }
}

impl ModelConfig {
    pub fn cnn_lstm() -> Self {
        Self {
            architecture: Architecture::CnnLstm,
            conv_filters: 64,
            conv_kernel: 3,
            pool: 2,
            lstm_layers: vec![64, 32],
            dense_layers: vec![32, 1],
            mlp_layers: Vec::new(),
        }
    }

    pub fn lstm() -> Self {
        Self {
            architecture: Architecture::Lstm,
            ..Self::cnn_lstm()
        }
    }

    pub fn cnn() -> Self {
        Self {
            architecture: Architecture::Cnn,
            lstm_layers: Vec::new(),
            ..Self::cnn_lstm()
        }
    }

    /// Hidden sizes 32-64-64-32-16 feeding a scalar output.
    pub fn mlp() -> Self {
        Self {
            architecture: Architecture::Mlp,
            lstm_layers: Vec::new(),
            dense_layers: vec![1],
            mlp_layers: vec![32, 64, 64, 32, 16],
            ..Self::cnn_lstm()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "cnn_lstm_default" => Some(Self::cnn_lstm()),
            "lstm_default" => Some(Self::lstm()),
            "cnn_default" => Some(Self::cnn()),
            "mlp_default" => Some(Self::mlp()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(NnError::InvalidConfig(m.to_string()));
        if self.dense_layers.last() != Some(&1) {
            return bad("dense_layers must end in a single output unit");
        }
        let sizes = self
            .dense_layers
            .iter()
            .chain(&self.mlp_layers)
            .chain(&self.lstm_layers);
        if sizes.clone().any(|&s| s == 0) {
            return bad("layer sizes must be at least 1");
        }
        if self.architecture.has_lstm() && self.lstm_layers.is_empty() {
            return bad("LSTM architectures need at least one LSTM layer");
        }
        if self.architecture.has_conv() && (self.conv_filters == 0 || self.conv_kernel == 0 || self.pool == 0) {
            return bad("conv_filters, conv_kernel and pool must be at least 1");
        }
        Ok(())
    }

    /// Sequence length after the convolution and pooling stages.
    fn conv_out_len(&self, window_len: usize) -> Result<usize> {
        if window_len < self.conv_kernel {
            return Err(NnError::InvalidConfig(format!(
                "window of {window_len} cycles is shorter than the conv kernel {}",
                self.conv_kernel
            )));
        }
        let len = window_len - self.conv_kernel + 1;
        if len < self.pool {
            return Err(NnError::InvalidConfig(format!(
                "convolved length {len} is shorter than the pool size {}",
                self.pool
            )));
        }
        Ok(len / self.pool)
    }

    /// Names and shapes of every parameter, in storage order.
    pub fn param_layout(&self, window_len: usize, n_features: usize) -> Result<Vec<(String, Vec<usize>)>> {
        self.validate()?;
        if window_len == 0 || n_features == 0 {
            return Err(NnError::InvalidConfig("windows must be non-empty".into()));
        }
        let mut out = Vec::new();
        let mut channels = n_features;
        let mut steps = window_len;
        if self.architecture.has_conv() {
            out.push(("conv.kernels".into(), vec![self.conv_kernel, n_features, self.conv_filters]));
            out.push(("conv.bias".into(), vec![self.conv_filters]));
            channels = self.conv_filters;
            steps = self.conv_out_len(window_len)?;
        }
        let mut width = match self.architecture {
            Architecture::Mlp | Architecture::Cnn => steps * channels,
            Architecture::Lstm | Architecture::CnnLstm => channels,
        };
        if self.architecture.has_lstm() {
            for (l, &h) in self.lstm_layers.iter().enumerate() {
                for g in GATES {
                    out.push((format!("lstm{l}.W_{g}"), vec![width, h]));
                    out.push((format!("lstm{l}.U_{g}"), vec![h, h]));
                    out.push((format!("lstm{l}.b_{g}"), vec![h]));
                }
                width = h;
            }
        }
        let hidden: &[usize] = if self.architecture == Architecture::Mlp {
            &self.mlp_layers
        } else {
            &[]
        };
        for (l, &n) in hidden.iter().chain(&self.dense_layers).enumerate() {
            out.push((format!("dense{l}.W"), vec![width, n]));
            out.push((format!("dense{l}.b"), vec![n]));
            width = n;
        }
        Ok(out)
    }

    /// Seeded initialization: uniform on `±1/sqrt(fan_in)` for weights,
    /// zero biases, forget-gate biases at 1.
    pub fn init_params(&self, window_len: usize, n_features: usize, rng: &mut impl Rng) -> Result<ParamSet> {
        let layout = self.param_layout(window_len, n_features)?;
        let mut names = Vec::with_capacity(layout.len());
        let mut tensors = Vec::with_capacity(layout.len());
        for (name, shape) in layout {
            let mut t = Tensor::zeros(&shape);
            if name.ends_with(".b_f") {
                t = Tensor::filled(&shape, 1.0);
            } else if shape.len() >= 2 {
                let fan_in = shape[..shape.len() - 1].iter().product();
                uniform_fill(&mut t, fan_in, rng);
            }
            names.push(name);
            tensors.push(t);
        }
        Ok(ParamSet { names, tensors })
    }

    /// Records the network on `tape`. `params` follow [`Self::param_layout`];
    /// `x` is `[batch x window_len x n_features]`. Returns `[batch x 1]`.
    pub fn build(&self, tape: &mut Tape, params: &[Var], x: Var) -> Result<Var> {
        let shape = tape.value(x).shape().to_vec();
        if shape.len() != 3 {
            return Err(NnError::ShapeMismatch {
                expected: "[batch x window x features]".into(),
                got: format!("{shape:?}"),
            });
        }
        let batch = shape[0];
        let mut p = params.iter().copied();
        let mut next = || {
            p.next().ok_or_else(|| NnError::InvalidConfig("parameter list too short".into()))
        };
        let mut seq = x;
        if self.architecture.has_conv() {
            let (k, b) = (next()?, next()?);
            let conv = tape.conv1d(seq, k, b)?;
            let act = tape.relu(conv);
            seq = tape.maxpool1d(act, self.pool)?;
        }
        let mut h = if self.architecture.has_lstm() {
            for (l, &hidden) in self.lstm_layers.iter().enumerate() {
                let vars: Vec<Var> = (0..12).map(|_| next()).collect::<Result<_>>()?;
                let vars = LstmVars::from_slice(&vars);
                let steps = tape.value(seq).shape()[1];
                let zero = tape.leaf(Tensor::zeros(&[batch, hidden]));
                let (mut hs, mut cs) = (zero, zero);
                let mut outputs = Vec::with_capacity(steps);
                for t in 0..steps {
                    let xt = tape.time_step(seq, t)?;
                    (hs, cs) = lstm_cell_on_tape(tape, xt, hs, cs, &vars)?;
                    outputs.push(hs);
                }
                if l + 1 < self.lstm_layers.len() {
                    seq = tape.stack_steps(&outputs)?;
                } else {
                    seq = hs;
                }
            }
            seq
        } else {
            let s = tape.value(seq).shape().to_vec();
            tape.reshape(seq, vec![batch, s[1] * s[2]])?
        };
        let hidden: &[usize] = if self.architecture == Architecture::Mlp {
            &self.mlp_layers
        } else {
            &[]
        };
        let n_dense = hidden.len() + self.dense_layers.len();
        for l in 0..n_dense {
            let (w, b) = (next()?, next()?);
            let z = tape.matmul(h, w)?;
            h = tape.add_bias(z, b)?;
            if l + 1 < n_dense {
                h = tape.relu(h);
            }
        }
        Ok(h)
    }
}

/// Named parameter arrays in layout order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub names: Vec<String>,
    pub tensors: Vec<Tensor>,
}

impl ParamSet {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &mut self.tensors[i])
    }

    pub fn n_values(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn record(&self, tape: &mut Tape) -> Vec<Var> {
        self.tensors.iter().map(|t| tape.leaf(t.clone())).collect()
    }

    /// True when names and shapes match `layout` exactly.
    pub fn matches(&self, layout: &[(String, Vec<usize>)]) -> bool {
        self.names.len() == layout.len()
            && self
                .names
                .iter()
                .zip(&self.tensors)
                .zip(layout)
                .all(|((n, t), (ln, ls))| n == ln && t.shape() == ls.as_slice())
    }

    pub fn lstm_layer(&self, l: usize) -> Option<LstmParams> {
        let get = |k: &str, g: &str| self.get(&format!("lstm{l}.{k}_{g}")).cloned();
        let mut w = Vec::new();
        let mut u = Vec::new();
        let mut b = Vec::new();
        for g in GATES {
            w.push(get("W", g)?);
            u.push(get("U", g)?);
            b.push(get("b", g)?);
        }
        Some(LstmParams {
            w: w.try_into().ok()?,
            u: u.try_into().ok()?,
            b: b.try_into().ok()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::grad_check_many;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        let mut t = Tensor::zeros(shape);
        for v in t.data_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        t
    }

    fn run(cfg: &ModelConfig, params: &ParamSet, x: &Tensor) -> Tensor {
        let mut tape = Tape::new();
        let p = params.record(&mut tape);
        let xv = tape.leaf(x.clone());
        let out = cfg.build(&mut tape, &p, xv).unwrap();
        tape.value(out).clone()
    }

    #[test]
    fn presets_validate_and_layouts_have_expected_shapes() {
        for name in ["cnn_lstm_default", "lstm_default", "cnn_default", "mlp_default"] {
            ModelConfig::preset(name).unwrap().validate().unwrap();
        }
        let l = ModelConfig::cnn_lstm().param_layout(30, 14).unwrap();
        assert_eq!(l[0], ("conv.kernels".to_string(), vec![3, 14, 64]));
        assert_eq!(l[2], ("lstm0.W_f".to_string(), vec![64, 64]));
        assert_eq!(l[14], ("lstm1.W_f".to_string(), vec![64, 32]));
        assert_eq!(l[26], ("dense0.W".to_string(), vec![32, 32]));
        assert_eq!(l.last().unwrap(), &("dense1.b".to_string(), vec![1]));
        let m = ModelConfig::mlp().param_layout(30, 14).unwrap();
        assert_eq!(m[0].1, vec![420, 32]);
        let c = ModelConfig::cnn().param_layout(30, 14).unwrap();
        assert_eq!(c[2].1, vec![14 * 64, 32]);
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = ModelConfig::cnn_lstm();
        c.dense_layers = vec![32, 2];
        assert!(c.validate().is_err());
        let mut c = ModelConfig::lstm();
        c.lstm_layers.clear();
        assert!(c.validate().is_err());
        assert!(ModelConfig::cnn_lstm().param_layout(2, 4).is_err());
    }

    #[test]
    fn forget_bias_starts_at_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = ModelConfig::lstm().init_params(10, 3, &mut rng).unwrap();
        assert!(p.get("lstm0.b_f").unwrap().data().iter().all(|&v| v == 1.0));
        assert!(p.get("lstm0.b_i").unwrap().data().iter().all(|&v| v == 0.0));
        let w = p.get("lstm0.W_i").unwrap();
        let bound = 1.0 / 3f64.sqrt();
        assert!(w.data().iter().all(|v| v.abs() <= bound));
        assert!(p.lstm_layer(1).is_some() && p.lstm_layer(2).is_none());
    }

    #[test]
    fn zero_output_layer_gives_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for cfg in [ModelConfig::cnn_lstm(), ModelConfig::mlp(), ModelConfig::cnn()] {
            let mut p = cfg.init_params(8, 4, &mut rng).unwrap();
            let last = p.names.len() - 2;
            p.tensors[last] = Tensor::zeros(p.tensors[last].shape());
            p.tensors[last + 1] = Tensor::filled(&[1], 0.25);
            let out = run(&cfg, &p, &random(&[3, 8, 4], &mut rng));
            assert_eq!(out.shape(), &[3, 1]);
            assert!(out.data().iter().all(|&v| v == 0.25));
        }
    }

    #[test]
    fn batch_order_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = ModelConfig {
            lstm_layers: vec![5, 4],
            conv_filters: 6,
            dense_layers: vec![3, 1],
            ..ModelConfig::cnn_lstm()
        };
        let p = cfg.init_params(8, 4, &mut rng).unwrap();
        let x = random(&[4, 8, 4], &mut rng);
        let out = run(&cfg, &p, &x);
        let perm = [2, 0, 3, 1];
        let mut xp = Vec::new();
        for &i in &perm {
            xp.extend_from_slice(&x.data()[i * 32..(i + 1) * 32]);
        }
        let outp = run(&cfg, &p, &Tensor::new(vec![4, 8, 4], xp).unwrap());
        for (j, &i) in perm.iter().enumerate() {
            assert_eq!(outp.data()[j], out.data()[i]);
        }
    }

    #[test]
    fn stacked_layers_match_single_sample_runs() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cfg = ModelConfig {
            lstm_layers: vec![3, 2],
            dense_layers: vec![1],
            ..ModelConfig::lstm()
        };
        let p = cfg.init_params(5, 2, &mut rng).unwrap();
        let x = random(&[3, 5, 2], &mut rng);
        let out = run(&cfg, &p, &x);
        for i in 0..3 {
            let xi = Tensor::new(vec![1, 5, 2], x.data()[i * 10..(i + 1) * 10].to_vec()).unwrap();
            assert!((run(&cfg, &p, &xi).data()[0] - out.data()[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn full_cnn_lstm_gradient_check() {
        let cfg = ModelConfig {
            conv_filters: 4,
            lstm_layers: vec![3, 3],
            dense_layers: vec![3, 1],
            ..ModelConfig::cnn_lstm()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let params = cfg.init_params(8, 4, &mut rng).unwrap();
        let x = random(&[2, 8, 4], &mut rng);
        let y = random(&[2, 1], &mut rng);
        let mut points = params.tensors.clone();
        points.push(x);
        let n = params.tensors.len();
        let err = grad_check_many(
            |tape, v| {
                let out = cfg.build(tape, &v[..n], v[n]).map_err(|e| match e {
                    NnError::Autodiff(a) => a,
                    other => panic!("{other}"),
                })?;
                let t = tape.leaf(y.clone());
                tape.mse_loss(out, t)
            },
            &points,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-4, "{err}");
    }
}

use rand::Rng;

use super::{NnError, Result};
use crate::autodiff::{Tape, Tensor, Var};

/// Gate order used for every per-gate array: forget, input, output, cell.
pub const GATES: [&str; 4] = ["f", "i", "o", "g"];

/// Weights of one LSTM layer, indexed by [`GATES`].
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// `[input_dim x hidden]` each.
    pub w: [Tensor; 4],
    /// `[hidden x hidden]` each.
    pub u: [Tensor; 4],
    /// `[hidden]` each.
    pub b: [Tensor; 4],
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self {
            w: std::array::from_fn(|_| Tensor::zeros(&[input_dim, hidden])),
            u: std::array::from_fn(|_| Tensor::zeros(&[hidden, hidden])),
            b: std::array::from_fn(|_| Tensor::zeros(&[hidden])),
        }
    }

    /// Uniform on `±1/sqrt(fan_in)` per matrix, zero biases except the
    /// forget gate, which starts at 1.
    pub fn init(input_dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(input_dim, hidden);
        for g in 0..4 {
            uniform_fill(&mut p.w[g], input_dim, rng);
            uniform_fill(&mut p.u[g], hidden, rng);
        }
        p.b[0] = Tensor::filled(&[hidden], 1.0);
        p
    }

    pub fn input_dim(&self) -> usize {
        self.w[0].shape()[0]
    }

    pub fn hidden(&self) -> usize {
        self.w[0].shape()[1]
    }

    pub fn check(&self) -> Result<()> {
        let (n, h) = (self.input_dim(), self.hidden());
        for g in 0..4 {
            let ok = self.w[g].shape() == [n, h]
                && self.u[g].shape() == [h, h]
                && self.b[g].shape() == [h];
            if !ok {
                return Err(NnError::ShapeMismatch {
                    expected: format!("W [{n}x{h}], U [{h}x{h}], b [{h}]"),
                    got: format!(
                        "W {:?}, U {:?}, b {:?} for gate {}",
                        self.w[g].shape(),
                        self.u[g].shape(),
                        self.b[g].shape(),
                        GATES[g]
                    ),
                });
            }
        }
        Ok(())
    }

    /// Arrays in `W_f, U_f, b_f, W_i, ...` order.
    pub fn tensors(&self) -> Vec<&Tensor> {
        (0..4)
            .flat_map(|g| [&self.w[g], &self.u[g], &self.b[g]])
            .collect()
    }

    pub fn record(&self, tape: &mut Tape) -> LstmVars {
        let vars: Vec<Var> = self.tensors().into_iter().map(|t| tape.leaf(t.clone())).collect();
        LstmVars::from_slice(&vars)
    }
}

pub(crate) fn uniform_fill(t: &mut Tensor, fan_in: usize, rng: &mut impl Rng) {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    for v in t.data_mut() {
        *v = rng.random_range(-bound..bound);
    }
}

/// Tape handles for one layer's weights.
#[derive(Debug, Clone, Copy)]
pub struct LstmVars {
    pub w: [Var; 4],
    pub u: [Var; 4],
    pub b: [Var; 4],
}

impl LstmVars {
    /// From twelve handles in `W_f, U_f, b_f, W_i, ...` order.
    pub fn from_slice(v: &[Var]) -> Self {
        Self {
            w: std::array::from_fn(|g| v[3 * g]),
            u: std::array::from_fn(|g| v[3 * g + 1]),
            b: std::array::from_fn(|g| v[3 * g + 2]),
        }
    }
}

/// One LSTM step on the tape; returns `(h', c')`.
pub fn lstm_cell_on_tape(tape: &mut Tape, x: Var, h: Var, c: Var, p: &LstmVars) -> Result<(Var, Var)> {
    let gate = |tape: &mut Tape, g: usize| -> Result<Var> {
        let xw = tape.matmul(x, p.w[g])?;
        let hu = tape.matmul(h, p.u[g])?;
        let z = tape.add(xw, hu)?;
        Ok(tape.add_bias(z, p.b[g])?)
    };
    let zf = gate(tape, 0)?;
    let zi = gate(tape, 1)?;
    let zo = gate(tape, 2)?;
    let zg = gate(tape, 3)?;
    let f = tape.sigmoid(zf);
    let i = tape.sigmoid(zi);
    let o = tape.sigmoid(zo);
    let g = tape.tanh(zg);
    let fc = tape.mul(f, c)?;
    let ig = tape.mul(i, g)?;
    let c2 = tape.add(fc, ig)?;
    let tc = tape.tanh(c2);
    let h2 = tape.mul(o, tc)?;
    Ok((h2, c2))
}

/// One LSTM step on plain tensors: `x [b x in]`, `h, c [b x hidden]`.
pub fn lstm_cell(x: &Tensor, h: &Tensor, c: &Tensor, p: &LstmParams) -> Result<(Tensor, Tensor)> {
    p.check()?;
    let mut tape = Tape::new();
    let xv = tape.leaf(x.clone());
    let hv = tape.leaf(h.clone());
    let cv = tape.leaf(c.clone());
    let vars = p.record(&mut tape);
    if h.shape() != c.shape() {
        return Err(NnError::ShapeMismatch {
            expected: format!("c {:?}", h.shape()),
            got: format!("c {:?}", c.shape()),
        });
    }
    let (h2, c2) = lstm_cell_on_tape(&mut tape, xv, hv, cv, &vars)?;
    Ok((tape.value(h2).clone(), tape.value(c2).clone()))
}

use super::{AutodiffError, Result, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// `[m x n] + [n]`, bias broadcast over rows.
    AddBias(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    MatMul(Var, Var),
    Conv1d {
        input: Var,
        kernels: Var,
        bias: Var,
    },
    MaxPool1d {
        input: Var,
        /// Flat input offset feeding each output element.
        argmax: Vec<usize>,
    },
    Mse(Var, Var),
    Sum(Var),
    /// `[b x t x c] -> [b x c]` at one time index.
    TimeStep { input: Var, t: usize },
    /// `t` inputs of `[b x c]` -> `[b x t x c]`.
    StackSteps(Vec<Var>),
    Reshape(Var),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Append-only record of a computation, differentiable in reverse.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to the leaves of a tape.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient buffer for leaf `v`, or `None` when `v` does not reach the
    /// loss. Intermediate buffers are released during the sweep.
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Gradient as a tensor, zeros when `v` does not reach the loss.
    pub fn tensor(&self, v: Var) -> Tensor {
        let shape = self.shapes[v.0].clone();
        match self.get(v) {
            Some(g) => Tensor::new(shape, g.to_vec()).expect("gradient shape"),
            None => Tensor::zeros(&shape),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `out[m x n] += a[m x k] . b[k x n]`
fn matmul_acc(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn mismatch(&self, op: &'static str, a: Var, b: Var) -> AutodiffError {
        AutodiffError::ShapeMismatch {
            op,
            left: self.shape(a).to_vec(),
            right: self.shape(b).to_vec(),
        }
    }

    /// Records an input or parameter.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(self.mismatch(name, a, b));
        }
        let av = self.value(a);
        let bv = self.value(b);
        let data = av.data().iter().zip(bv.data()).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor::new(av.shape().to_vec(), data)?;
        Ok(self.push(value, op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// Adds a length-n bias to every row of an `[m x n]` matrix.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(bias));
        if sa.len() != 2 || sb.len() != 1 || sa[1] != sb[0] {
            return Err(self.mismatch("add_bias", a, bias));
        }
        let n = sb[0];
        let b = self.value(bias).data().to_vec();
        let av = self.value(a);
        let data = av
            .data()
            .chunks_exact(n)
            .flat_map(|row| row.iter().zip(&b).map(|(x, y)| x + y))
            .collect();
        let value = Tensor::new(av.shape().to_vec(), data)?;
        Ok(self.push(value, Op::AddBias(a, bias)))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        self.push(value, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        self.push(value, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        self.push(value, Op::Tanh(a))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(self.mismatch("matmul", a, b));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        matmul_acc(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        let value = Tensor::new(vec![m, n], out)?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    /// Valid 1-D convolution along time.
    ///
    /// `input [b x len x c_in]`, `kernels [k x c_in x c_out]`, `bias [c_out]`
    /// gives `[b x (len - k + 1) x c_out]`.
    pub fn conv1d(&mut self, input: Var, kernels: Var, bias: Var) -> Result<Var> {
        let si = self.shape(input).to_vec();
        let sk = self.shape(kernels).to_vec();
        let sb = self.shape(bias).to_vec();
        if si.len() != 3 || sk.len() != 3 || sb.len() != 1 || si[2] != sk[1] || sk[2] != sb[0] {
            return Err(self.mismatch("conv1d", input, kernels));
        }
        let (batch, len, c_in) = (si[0], si[1], si[2]);
        let (k, c_out) = (sk[0], sk[2]);
        if k == 0 || k > len {
            return Err(AutodiffError::KernelTooLarge { kernel: k, len });
        }
        let out_len = len - k + 1;
        let x = self.value(input).data();
        let w = self.value(kernels).data();
        let b = self.value(bias).data();
        let mut out = vec![0.0; batch * out_len * c_out];
        for bi in 0..batch {
            for t in 0..out_len {
                let o = &mut out[(bi * out_len + t) * c_out..(bi * out_len + t + 1) * c_out];
                o.copy_from_slice(b);
                for j in 0..k {
                    let xrow = &x[(bi * len + t + j) * c_in..(bi * len + t + j + 1) * c_in];
                    for (c, &xv) in xrow.iter().enumerate() {
                        let wrow = &w[(j * c_in + c) * c_out..(j * c_in + c + 1) * c_out];
                        for (ov, &wv) in o.iter_mut().zip(wrow) {
                            *ov += xv * wv;
                        }
                    }
                }
            }
        }
        let value = Tensor::new(vec![batch, out_len, c_out], out)?;
        Ok(self.push(
            value,
            Op::Conv1d {
                input,
                kernels,
                bias,
            },
        ))
    }

    /// Non-overlapping max pooling along time; a trailing remainder shorter
    /// than `pool` is dropped. Ties route to the first maximum.
    pub fn maxpool1d(&mut self, input: Var, pool: usize) -> Result<Var> {
        let s = self.shape(input).to_vec();
        if s.len() != 3 {
            return Err(AutodiffError::BadShape {
                shape: s,
                len: self.value(input).len(),
            });
        }
        let (batch, len, c) = (s[0], s[1], s[2]);
        if pool < 1 || pool > len {
            return Err(AutodiffError::PoolOutOfRange { pool, len });
        }
        let out_len = len / pool;
        let x = self.value(input).data();
        let mut out = Vec::with_capacity(batch * out_len * c);
        let mut argmax = Vec::with_capacity(batch * out_len * c);
        for bi in 0..batch {
            for t in 0..out_len {
                for ch in 0..c {
                    let mut best = (bi * len + t * pool) * c + ch;
                    for j in 1..pool {
                        let idx = (bi * len + t * pool + j) * c + ch;
                        if x[idx] > x[best] {
                            best = idx;
                        }
                    }
                    out.push(x[best]);
                    argmax.push(best);
                }
            }
        }
        let value = Tensor::new(vec![batch, out_len, c], out)?;
        Ok(self.push(value, Op::MaxPool1d { input, argmax }))
    }

    /// Mean squared error between equal-shaped tensors.
    pub fn mse_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        if self.shape(pred) != self.shape(target) || self.value(pred).is_empty() {
            return Err(self.mismatch("mse_loss", pred, target));
        }
        let p = self.value(pred).data();
        let t = self.value(target).data();
        let n = p.len() as f64;
        let loss = p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n;
        Ok(self.push(Tensor::scalar(loss), Op::Mse(pred, target)))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let total = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(total), Op::Sum(a))
    }

    pub fn time_step(&mut self, input: Var, t: usize) -> Result<Var> {
        let s = self.shape(input).to_vec();
        if s.len() != 3 || t >= s[1] {
            return Err(AutodiffError::BadShape {
                shape: s,
                len: self.value(input).len(),
            });
        }
        let (batch, len, c) = (s[0], s[1], s[2]);
        let x = self.value(input).data();
        let mut out = Vec::with_capacity(batch * c);
        for bi in 0..batch {
            out.extend_from_slice(&x[(bi * len + t) * c..(bi * len + t + 1) * c]);
        }
        let value = Tensor::new(vec![batch, c], out)?;
        Ok(self.push(value, Op::TimeStep { input, t }))
    }

    /// Inverse of [`Tape::time_step`]: stacks equal-shaped `[b x c]` steps
    /// into `[b x t x c]`.
    pub fn stack_steps(&mut self, steps: &[Var]) -> Result<Var> {
        let Some(&first) = steps.first() else {
            return Err(AutodiffError::BadShape {
                shape: Vec::new(),
                len: 0,
            });
        };
        let s = self.shape(first).to_vec();
        if s.len() != 2 {
            return Err(AutodiffError::BadShape {
                shape: s,
                len: self.value(first).len(),
            });
        }
        if let Some(&bad) = steps.iter().find(|&&v| self.shape(v) != s.as_slice()) {
            return Err(self.mismatch("stack_steps", first, bad));
        }
        let (batch, c, t_len) = (s[0], s[1], steps.len());
        let mut out = vec![0.0; batch * t_len * c];
        for (t, &v) in steps.iter().enumerate() {
            let x = self.value(v).data();
            for bi in 0..batch {
                out[(bi * t_len + t) * c..(bi * t_len + t + 1) * c]
                    .copy_from_slice(&x[bi * c..(bi + 1) * c]);
            }
        }
        let value = Tensor::new(vec![batch, t_len, c], out)?;
        Ok(self.push(value, Op::StackSteps(steps.to_vec())))
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        let value = self.value(a).clone().reshaped(shape)?;
        Ok(self.push(value, Op::Reshape(a)))
    }

    /// Reverse sweep from a scalar node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(AutodiffError::NonScalarLoss {
                shape: lv.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    acc(&mut grads, self, *a, |buf| add_into(buf, &g));
                    acc(&mut grads, self, *b, |buf| add_into(buf, &g));
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, self, *a, |buf| add_into(buf, &g));
                    acc(&mut grads, self, *b, |buf| {
                        for (o, v) in buf.iter_mut().zip(&g) {
                            *o -= v;
                        }
                    });
                }
                Op::Mul(a, b) => {
                    let av = self.value(*a).data();
                    let bv = self.value(*b).data();
                    acc(&mut grads, self, *a, |buf| {
                        for ((o, gv), y) in buf.iter_mut().zip(&g).zip(bv) {
                            *o += gv * y;
                        }
                    });
                    acc(&mut grads, self, *b, |buf| {
                        for ((o, gv), x) in buf.iter_mut().zip(&g).zip(av) {
                            *o += gv * x;
                        }
                    });
                }
                Op::AddBias(a, bias) => {
                    acc(&mut grads, self, *a, |buf| add_into(buf, &g));
                    let n = self.shape(*bias)[0];
                    acc(&mut grads, self, *bias, |buf| {
                        for row in g.chunks_exact(n) {
                            add_into(buf, row);
                        }
                    });
                }
                Op::Relu(a) => {
                    let x = self.value(*a).data();
                    acc(&mut grads, self, *a, |buf| {
                        for ((o, gv), xv) in buf.iter_mut().zip(&g).zip(x) {
                            if *xv > 0.0 {
                                *o += gv;
                            }
                        }
                    });
                }
                Op::Sigmoid(a) => {
                    let y = node.value.data();
                    acc(&mut grads, self, *a, |buf| {
                        for ((o, gv), yv) in buf.iter_mut().zip(&g).zip(y) {
                            *o += gv * yv * (1.0 - yv);
                        }
                    });
                }
                Op::Tanh(a) => {
                    let y = node.value.data();
                    acc(&mut grads, self, *a, |buf| {
                        for ((o, gv), yv) in buf.iter_mut().zip(&g).zip(y) {
                            *o += gv * (1.0 - yv * yv);
                        }
                    });
                }
                Op::MatMul(a, b) => {
                    let (m, k) = (self.shape(*a)[0], self.shape(*a)[1]);
                    let n = self.shape(*b)[1];
                    let av = self.value(*a).data();
                    let bv = self.value(*b).data();
                    // dA = G . B^T
                    acc(&mut grads, self, *a, |buf| {
                        for i in 0..m {
                            let grow = &g[i * n..(i + 1) * n];
                            for p in 0..k {
                                let brow = &bv[p * n..(p + 1) * n];
                                let mut s = 0.0;
                                for (x, y) in grow.iter().zip(brow) {
                                    s += x * y;
                                }
                                buf[i * k + p] += s;
                            }
                        }
                    });
                    // dB = A^T . G
                    acc(&mut grads, self, *b, |buf| {
                        for i in 0..m {
                            let grow = &g[i * n..(i + 1) * n];
                            for p in 0..k {
                                let av_ip = av[i * k + p];
                                if av_ip == 0.0 {
                                    continue;
                                }
                                let brow = &mut buf[p * n..(p + 1) * n];
                                for (o, gv) in brow.iter_mut().zip(grow) {
                                    *o += av_ip * gv;
                                }
                            }
                        }
                    });
                }
                Op::Conv1d {
                    input,
                    kernels,
                    bias,
                } => {
                    let si = self.shape(*input);
                    let (batch, len, c_in) = (si[0], si[1], si[2]);
                    let sk = self.shape(*kernels);
                    let (k, c_out) = (sk[0], sk[2]);
                    let out_len = len - k + 1;
                    let x = self.value(*input).data();
                    let w = self.value(*kernels).data();
                    acc(&mut grads, self, *bias, |buf| {
                        for row in g.chunks_exact(c_out) {
                            add_into(buf, row);
                        }
                    });
                    acc(&mut grads, self, *kernels, |buf| {
                        for bi in 0..batch {
                            for t in 0..out_len {
                                let grow = &g[(bi * out_len + t) * c_out..(bi * out_len + t + 1) * c_out];
                                for j in 0..k {
                                    let xrow = &x[(bi * len + t + j) * c_in..(bi * len + t + j + 1) * c_in];
                                    for (c, &xv) in xrow.iter().enumerate() {
                                        let wrow = &mut buf[(j * c_in + c) * c_out..(j * c_in + c + 1) * c_out];
                                        for (o, gv) in wrow.iter_mut().zip(grow) {
                                            *o += xv * gv;
                                        }
                                    }
                                }
                            }
                        }
                    });
                    acc(&mut grads, self, *input, |buf| {
                        for bi in 0..batch {
                            for t in 0..out_len {
                                let grow = &g[(bi * out_len + t) * c_out..(bi * out_len + t + 1) * c_out];
                                for j in 0..k {
                                    let base = (bi * len + t + j) * c_in;
                                    for c in 0..c_in {
                                        let wrow = &w[(j * c_in + c) * c_out..(j * c_in + c + 1) * c_out];
                                        let mut s = 0.0;
                                        for (wv, gv) in wrow.iter().zip(grow) {
                                            s += wv * gv;
                                        }
                                        buf[base + c] += s;
                                    }
                                }
                            }
                        }
                    });
                }
                Op::MaxPool1d { input, argmax } => {
                    acc(&mut grads, self, *input, |buf| {
                        for (&src, gv) in argmax.iter().zip(&g) {
                            buf[src] += gv;
                        }
                    });
                }
                Op::Mse(pred, target) => {
                    let p = self.value(*pred).data();
                    let t = self.value(*target).data();
                    let scale = 2.0 * g[0] / p.len() as f64;
                    acc(&mut grads, self, *pred, |buf| {
                        for ((o, a), b) in buf.iter_mut().zip(p).zip(t) {
                            *o += scale * (a - b);
                        }
                    });
                    acc(&mut grads, self, *target, |buf| {
                        for ((o, a), b) in buf.iter_mut().zip(p).zip(t) {
                            *o -= scale * (a - b);
                        }
                    });
                }
                Op::Sum(a) => {
                    acc(&mut grads, self, *a, |buf| {
                        for o in buf.iter_mut() {
                            *o += g[0];
                        }
                    });
                }
                Op::TimeStep { input, t } => {
                    let s = self.shape(*input);
                    let (len, c) = (s[1], s[2]);
                    acc(&mut grads, self, *input, |buf| {
                        for (bi, grow) in g.chunks_exact(c).enumerate() {
                            add_into(&mut buf[(bi * len + t) * c..(bi * len + t + 1) * c], grow);
                        }
                    });
                }
                Op::StackSteps(steps) => {
                    let s = node.value.shape();
                    let (t_len, c) = (s[1], s[2]);
                    for (t, &v) in steps.iter().enumerate() {
                        acc(&mut grads, self, v, |buf| {
                            for (bi, row) in buf.chunks_exact_mut(c).enumerate() {
                                add_into(row, &g[(bi * t_len + t) * c..(bi * t_len + t + 1) * c]);
                            }
                        });
                    }
                }
                Op::Reshape(a) => {
                    acc(&mut grads, self, *a, |buf| add_into(buf, &g));
                }
            }
            if matches!(node.op, Op::Leaf) {
                grads[idx] = Some(g);
            }
        }
        grads.resize(self.nodes.len(), None);
        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients { grads, shapes })
    }
}

fn add_into(buf: &mut [f64], g: &[f64]) {
    for (o, v) in buf.iter_mut().zip(g) {
        *o += v;
    }
}

/// Accumulates into the gradient buffer of `v`, allocating it on first use.
fn acc(grads: &mut [Option<Vec<f64>>], tape: &Tape, v: Var, f: impl FnOnce(&mut [f64])) {
    let slot = &mut grads[v.0];
    let buf = slot.get_or_insert_with(|| vec![0.0; tape.nodes[v.0].value.len()]);
    f(buf);
}

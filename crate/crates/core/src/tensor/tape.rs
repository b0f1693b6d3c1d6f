use rand::Rng;

use super::kernels;
use super::Tensor;
use crate::activation::ActivationKind;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    /// `[rows × n] + [n]`, the bias broadcast.
    AddRow(Var, Var),
    /// Adds a constant; gradient passes through unchanged.
    AddConst(Var),
    Mul(Var, Var),
    Scale(Var, f64),
    MatMul(Var, Var),
    Transpose(Var),
    Reshape(Var),
    Activation(Var, ActivationKind),
    Softmax(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    SliceRows(Var, usize),
    SliceCols(Var, usize),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    Embed(Var, Vec<usize>),
    Sum(Var),
    CrossEntropy {
        logits: Var,
        /// `(p - q) / count` per element, precomputed in the forward pass.
        dlogits: Vec<f64>,
    },
    /// Inverted-dropout mask: 0 for dropped elements, `1/(1-delta)` otherwise.
    Dropout(Var, Vec<f64>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Wengert list of primitive applications.
///
/// Nodes are appended in evaluation order, so every node's inputs precede
/// it. A tape supports exactly one [`Tape::backward`] call; afterwards it is
/// spent and further backward calls are rejected.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    spent: bool,
}

/// Gradients of one scalar with respect to every node that required them.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, var: Var) -> Option<Tensor> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }
}

fn dim_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::Dimension {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
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

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        #[cfg(debug_assertions)]
        if !value.all_finite() && inputs.iter().all(|v| self.nodes[v.0].value.all_finite()) {
            panic!("{op:?} produced non-finite output from finite inputs");
        }
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records a trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    /// Records a leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(dim_err("add", x, y));
        }
        let data = x.data().iter().zip(y.data()).map(|(p, q)| p + q).collect();
        let out = Tensor::new(x.shape().to_vec(), data)?;
        Ok(self.push(out, Op::Add(a, b), &[a, b]))
    }

    /// Adds a length-`n` vector to every row of a `[rows × n]` matrix.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (x, b) = (self.value(a), self.value(bias));
        let n = *x.shape().last().unwrap_or(&0);
        if b.shape() != [n] {
            return Err(dim_err("add_row", x, b));
        }
        let mut data = x.data().to_vec();
        for row in data.chunks_exact_mut(n.max(1)) {
            for (o, &bv) in row.iter_mut().zip(b.data()) {
                *o += bv;
            }
        }
        let out = Tensor::new(x.shape().to_vec(), data)?;
        Ok(self.push(out, Op::AddRow(a, bias), &[a, bias]))
    }

    /// Adds a constant tensor (masks, sampled noise).
    pub fn add_const(&mut self, a: Var, c: &Tensor) -> Result<Var> {
        let x = self.value(a);
        if x.shape() != c.shape() {
            return Err(dim_err("add_const", x, c));
        }
        let data = x.data().iter().zip(c.data()).map(|(p, q)| p + q).collect();
        let out = Tensor::new(x.shape().to_vec(), data)?;
        Ok(self.push(out, Op::AddConst(a), &[a]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(dim_err("mul", x, y));
        }
        let data = x.data().iter().zip(y.data()).map(|(p, q)| p * q).collect();
        let out = Tensor::new(x.shape().to_vec(), data)?;
        Ok(self.push(out, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let x = self.value(a);
        let data = x.data().iter().map(|v| v * factor).collect();
        let out = Tensor::new(x.shape().to_vec(), data).expect("shape preserved");
        self.push(out, Op::Scale(a, factor), &[a])
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b), &[a, b]))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let (r, c) = x.dims2()?;
        let out = Tensor::new(vec![c, r], kernels::transpose(x.data(), r, c))?;
        Ok(self.push(out, Op::Transpose(a), &[a]))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(a).reshape(shape)?;
        Ok(self.push(out, Op::Reshape(a), &[a]))
    }

    /// Applies `kind` element by element.
    pub fn activation(&mut self, a: Var, kind: ActivationKind) -> Var {
        let x = self.value(a);
        let data = x.data().iter().map(|&v| kind.apply(v)).collect();
        let out = Tensor::new(x.shape().to_vec(), data).expect("shape preserved");
        self.push(out, Op::Activation(a, kind), &[a])
    }

    /// Softmax over the last axis, stabilised by subtracting the row max.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let n = *x
            .shape()
            .last()
            .ok_or_else(|| Error::Contract("softmax of a scalar".into()))?;
        let mut data = x.data().to_vec();
        if n > 0 {
            for row in data.chunks_exact_mut(n) {
                softmax_in_place(row);
            }
        }
        let out = Tensor::new(x.shape().to_vec(), data)?;
        Ok(self.push(out, Op::Softmax(a), &[a]))
    }

    /// Normalises each row over the last axis, then applies `gain` and `bias`.
    pub fn layer_norm(&mut self, a: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        if eps.is_nan() || eps <= 0.0 {
            return Err(Error::Config(format!("layer_norm eps must be > 0, got {eps}")));
        }
        let (x, g, b) = (self.value(a), self.value(gain), self.value(bias));
        let n = *x
            .shape()
            .last()
            .ok_or_else(|| Error::Contract("layer_norm of a scalar".into()))?;
        if g.shape() != [n] {
            return Err(dim_err("layer_norm", x, g));
        }
        if b.shape() != [n] {
            return Err(dim_err("layer_norm", x, b));
        }
        let rows = x.numel().checked_div(n).unwrap_or(0);
        let mut xhat = vec![0.0; x.numel()];
        let mut inv_std = vec![0.0; rows];
        let mut out = vec![0.0; x.numel()];
        for r in 0..rows {
            let row = &x.data()[r * n..(r + 1) * n];
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let inv = 1.0 / (var + eps).sqrt();
            inv_std[r] = inv;
            for j in 0..n {
                let h = (row[j] - mean) * inv;
                xhat[r * n + j] = h;
                out[r * n + j] = h * g.data()[j] + b.data()[j];
            }
        }
        let out = Tensor::new(x.shape().to_vec(), out)?;
        Ok(self.push(
            out,
            Op::LayerNorm {
                x: a,
                gain,
                bias,
                xhat,
                inv_std,
            },
            &[a, gain, bias],
        ))
    }

    /// Rows `start..start + len` of a matrix.
    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let x = self.value(a);
        let (r, c) = x.dims2()?;
        if start + len > r {
            return Err(Error::Index {
                index: start + len,
                limit: r,
            });
        }
        let out = Tensor::new(vec![len, c], x.data()[start * c..(start + len) * c].to_vec())?;
        Ok(self.push(out, Op::SliceRows(a, start), &[a]))
    }

    /// Columns `start..start + len` of a matrix.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let x = self.value(a);
        let (r, c) = x.dims2()?;
        if start + len > c {
            return Err(Error::Index {
                index: start + len,
                limit: c,
            });
        }
        let mut data = Vec::with_capacity(r * len);
        for i in 0..r {
            data.extend_from_slice(&x.data()[i * c + start..i * c + start + len]);
        }
        let out = Tensor::new(vec![r, len], data)?;
        Ok(self.push(out, Op::SliceCols(a, start), &[a]))
    }

    /// Stacks matrices with equal column counts on top of each other.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Contract("concat of zero tensors".into()))?;
        let (_, c) = self.value(*first).dims2()?;
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let x = self.value(p);
            let (r, pc) = x.dims2()?;
            if pc != c {
                return Err(dim_err("concat_rows", self.value(*first), x));
            }
            rows += r;
            data.extend_from_slice(x.data());
        }
        let out = Tensor::new(vec![rows, c], data)?;
        Ok(self.push(out, Op::ConcatRows(parts.to_vec()), parts))
    }

    /// Places matrices with equal row counts side by side.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Contract("concat of zero tensors".into()))?;
        let (r, _) = self.value(*first).dims2()?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let x = self.value(p);
            let (pr, pc) = x.dims2()?;
            if pr != r {
                return Err(dim_err("concat_cols", self.value(*first), x));
            }
            widths.push(pc);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(r * total);
        for i in 0..r {
            for (&p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(p).data()[i * w..(i + 1) * w]);
            }
        }
        let out = Tensor::new(vec![r, total], data)?;
        Ok(self.push(out, Op::ConcatCols(parts.to_vec()), parts))
    }

    /// Row lookup into a `[vocab × d]` table.
    pub fn embed(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        let t = self.value(table);
        let (v, d) = t.dims2()?;
        let mut data = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            if i >= v {
                return Err(Error::Index { index: i, limit: v });
            }
            data.extend_from_slice(t.row(i));
        }
        let out = Tensor::new(vec![indices.len(), d], data)?;
        Ok(self.push(out, Op::Embed(table, indices.to_vec()), &[table]))
    }

    /// Sum of all elements as a scalar.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a), &[a])
    }

    /// Label-smoothed cross-entropy averaged over the non-pad rows.
    ///
    /// Each row's target distribution is `(1 - epsilon) * onehot + epsilon / V`.
    /// Rows whose target equals `pad_id` contribute nothing; if every row is
    /// padding the loss is 0.
    pub fn cross_entropy_smoothed(
        &mut self,
        logits: Var,
        targets: &[usize],
        epsilon: f64,
        pad_id: usize,
    ) -> Result<Var> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::Config(format!(
                "label smoothing epsilon must lie in [0, 1), got {epsilon}"
            )));
        }
        let z = self.value(logits);
        let (rows, v) = z.dims2()?;
        if targets.len() != rows {
            return Err(Error::Dimension {
                op: "cross_entropy_smoothed",
                lhs: z.shape().to_vec(),
                rhs: vec![targets.len()],
            });
        }
        let count = targets.iter().filter(|&&t| t != pad_id).count();
        let mut dlogits = vec![0.0; rows * v];
        let mut total = 0.0;
        if count > 0 {
            let off = epsilon / v as f64;
            let on = 1.0 - epsilon + off;
            for (r, &t) in targets.iter().enumerate() {
                if t == pad_id {
                    continue;
                }
                if t >= v {
                    return Err(Error::Index { index: t, limit: v });
                }
                let row = z.row(r);
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let sum_exp: f64 = row.iter().map(|x| (x - max).exp()).sum();
                let lse = max + sum_exp.ln();
                // -sum q log p = lse - sum q z, since q sums to one
                let qz = off * row.iter().sum::<f64>() + (on - off) * row[t];
                total += lse - qz;
                let d = &mut dlogits[r * v..(r + 1) * v];
                for (j, dj) in d.iter_mut().enumerate() {
                    let p = (row[j] - lse).exp();
                    let q = if j == t { on } else { off };
                    *dj = (p - q) / count as f64;
                }
            }
            total /= count as f64;
        }
        Ok(self.push(Tensor::scalar(total), Op::CrossEntropy { logits, dlogits }, &[logits]))
    }

    /// `a + z` with `z ~ N(0, sigma^2)` drawn from `rng`. The noise is a
    /// constant for differentiation. `sigma == 0` returns `a` itself.
    pub fn gaussian_noise<R: Rng + ?Sized>(&mut self, a: Var, sigma: f64, rng: &mut R) -> Result<Var> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("noise sigma must be >= 0, got {sigma}")));
        }
        if sigma == 0.0 {
            return Ok(a);
        }
        let shape = self.value(a).shape().to_vec();
        let noise = Tensor::randn(&shape, sigma, rng);
        self.add_const(a, &noise)
    }

    /// Inverted dropout. Identity when `!training` or `delta == 0`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, a: Var, delta: f64, training: bool, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::Config(format!("dropout rate must lie in [0, 1), got {delta}")));
        }
        if !training || delta == 0.0 {
            return Ok(a);
        }
        let keep_scale = 1.0 / (1.0 - delta);
        let x = self.value(a);
        let mask: Vec<f64> = (0..x.numel())
            .map(|_| if rng.gen::<f64>() < delta { 0.0 } else { keep_scale })
            .collect();
        let data = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let out = Tensor::new(x.shape().to_vec(), data)?;
        Ok(self.push(out, Op::Dropout(a, mask), &[a]))
    }

    /// Reverse sweep from a scalar `loss`.
    ///
    /// Returns gradients for every node that requires one; trainable leaves
    /// unreachable from `loss` get zeros. The tape is spent afterwards.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.spent {
            return Err(Error::Contract("backward called twice on the same tape".into()));
        }
        let lv = self.value(loss);
        if lv.numel() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        self.spent = true;

        let n = self.nodes.len();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        if self.nodes[loss.0].requires_grad {
            grads[loss.0] = Some(vec![1.0]);
        }

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            self.propagate(&node.op, &node.value, &g, &mut grads);
            grads[idx] = Some(g);
        }

        let grads = self
            .nodes
            .iter()
            .zip(grads)
            .map(|(node, g)| {
                if !node.requires_grad {
                    return None;
                }
                let shape = node.value.shape().to_vec();
                Some(match g {
                    Some(g) => Tensor::new(shape, g).expect("gradient shape"),
                    None => Tensor::zeros(&shape),
                })
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], var: Var, f: impl FnOnce(&mut [f64])) {
        let node = &self.nodes[var.0];
        if !node.requires_grad {
            return;
        }
        let buf = grads[var.0].get_or_insert_with(|| vec![0.0; node.value.numel()]);
        f(buf);
    }

    fn propagate(&self, op: &Op, out: &Tensor, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let add_into = |buf: &mut [f64]| {
            for (b, gv) in buf.iter_mut().zip(g) {
                *b += gv;
            }
        };
        match op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(grads, *a, add_into);
                self.accumulate(grads, *b, add_into);
            }
            Op::AddConst(a) | Op::Reshape(a) => self.accumulate(grads, *a, add_into),
            Op::AddRow(a, bias) => {
                self.accumulate(grads, *a, add_into);
                let n = self.value(*bias).numel();
                self.accumulate(grads, *bias, |buf| {
                    for row in g.chunks_exact(n.max(1)) {
                        for (b, gv) in buf.iter_mut().zip(row) {
                            *b += gv;
                        }
                    }
                });
            }
            Op::Mul(a, b) => {
                let (x, y) = (self.value(*a).data(), self.value(*b).data());
                self.accumulate(grads, *a, |buf| {
                    for ((o, gv), yv) in buf.iter_mut().zip(g).zip(y) {
                        *o += gv * yv;
                    }
                });
                self.accumulate(grads, *b, |buf| {
                    for ((o, gv), xv) in buf.iter_mut().zip(g).zip(x) {
                        *o += gv * xv;
                    }
                });
            }
            Op::Scale(a, f) => self.accumulate(grads, *a, |buf| {
                for (o, gv) in buf.iter_mut().zip(g) {
                    *o += gv * f;
                }
            }),
            Op::MatMul(a, b) => {
                let (x, y) = (self.value(*a), self.value(*b));
                let (m, k) = (x.shape()[0], x.shape()[1]);
                let n = y.shape()[1];
                self.accumulate(grads, *a, |buf| kernels::matmul_nt_acc(buf, g, y.data(), m, k, n));
                self.accumulate(grads, *b, |buf| kernels::matmul_tn_acc(buf, x.data(), g, m, k, n));
            }
            Op::Transpose(a) => {
                let (r, c) = (out.shape()[0], out.shape()[1]);
                let gt = kernels::transpose(g, r, c);
                self.accumulate(grads, *a, |buf| {
                    for (o, gv) in buf.iter_mut().zip(&gt) {
                        *o += gv;
                    }
                });
            }
            Op::Activation(a, kind) => {
                let x = self.value(*a).data();
                self.accumulate(grads, *a, |buf| {
                    for ((o, gv), &xv) in buf.iter_mut().zip(g).zip(x) {
                        *o += gv * kind.derivative(xv);
                    }
                });
            }
            Op::Softmax(a) => {
                let n = *out.shape().last().unwrap();
                self.accumulate(grads, *a, |buf| {
                    if n == 0 {
                        return;
                    }
                    for ((o, y), gr) in buf
                        .chunks_exact_mut(n)
                        .zip(out.data().chunks_exact(n))
                        .zip(g.chunks_exact(n))
                    {
                        let dot: f64 = y.iter().zip(gr).map(|(p, q)| p * q).sum();
                        for j in 0..n {
                            o[j] += y[j] * (gr[j] - dot);
                        }
                    }
                });
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            } => {
                let gv = self.value(*gain).data();
                let n = gv.len();
                self.accumulate(grads, *x, |buf| {
                    if n == 0 {
                        return;
                    }
                    for (r, inv) in inv_std.iter().enumerate() {
                        let gr = &g[r * n..(r + 1) * n];
                        let h = &xhat[r * n..(r + 1) * n];
                        let mut sum_d = 0.0;
                        let mut sum_dh = 0.0;
                        for j in 0..n {
                            let d = gr[j] * gv[j];
                            sum_d += d;
                            sum_dh += d * h[j];
                        }
                        let o = &mut buf[r * n..(r + 1) * n];
                        for j in 0..n {
                            let d = gr[j] * gv[j];
                            o[j] += inv / n as f64 * (n as f64 * d - sum_d - h[j] * sum_dh);
                        }
                    }
                });
                self.accumulate(grads, *gain, |buf| {
                    for (gr, h) in g.chunks_exact(n.max(1)).zip(xhat.chunks_exact(n.max(1))) {
                        for j in 0..n {
                            buf[j] += gr[j] * h[j];
                        }
                    }
                });
                self.accumulate(grads, *bias, |buf| {
                    for gr in g.chunks_exact(n.max(1)) {
                        for j in 0..n {
                            buf[j] += gr[j];
                        }
                    }
                });
            }
            Op::SliceRows(a, start) => {
                let c = out.shape()[1];
                self.accumulate(grads, *a, |buf| {
                    for (o, gv) in buf[start * c..].iter_mut().zip(g) {
                        *o += gv;
                    }
                });
            }
            Op::SliceCols(a, start) => {
                let (r, len) = (out.shape()[0], out.shape()[1]);
                let c = self.value(*a).shape()[1];
                self.accumulate(grads, *a, |buf| {
                    for i in 0..r {
                        for j in 0..len {
                            buf[i * c + start + j] += g[i * len + j];
                        }
                    }
                });
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.value(p).numel();
                    self.accumulate(grads, p, |buf| {
                        for (o, gv) in buf.iter_mut().zip(&g[offset..offset + len]) {
                            *o += gv;
                        }
                    });
                    offset += len;
                }
            }
            Op::ConcatCols(parts) => {
                let (r, total) = (out.shape()[0], out.shape()[1]);
                let mut col = 0;
                for &p in parts {
                    let w = self.value(p).shape()[1];
                    self.accumulate(grads, p, |buf| {
                        for i in 0..r {
                            for j in 0..w {
                                buf[i * w + j] += g[i * total + col + j];
                            }
                        }
                    });
                    col += w;
                }
            }
            Op::Embed(table, indices) => {
                let d = self.value(*table).shape()[1];
                self.accumulate(grads, *table, |buf| {
                    for (row, &i) in indices.iter().enumerate() {
                        for j in 0..d {
                            buf[i * d + j] += g[row * d + j];
                        }
                    }
                });
            }
            Op::Sum(a) => {
                let s = g[0];
                self.accumulate(grads, *a, |buf| {
                    for o in buf.iter_mut() {
                        *o += s;
                    }
                });
            }
            Op::CrossEntropy { logits, dlogits } => {
                let s = g[0];
                self.accumulate(grads, *logits, |buf| {
                    for (o, d) in buf.iter_mut().zip(dlogits) {
                        *o += s * d;
                    }
                });
            }
            Op::Dropout(a, mask) => self.accumulate(grads, *a, |buf| {
                for ((o, gv), m) in buf.iter_mut().zip(g).zip(mask) {
                    *o += gv * m;
                }
            }),
        }
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

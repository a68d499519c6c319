//! Reverse-mode automatic differentiation over [`Mat`] values.
//!
//! A [`Tape`] records every operation of one forward pass. Parameters enter
//! as borrowed leaves, so building a tape never copies model weights.
//! [`Tape::backward`] walks the record in reverse and returns the gradient
//! of a scalar output with respect to every node that depends on a
//! parameter.

use std::borrow::Cow;

use super::tensor::{dot, Mat};

/// Logits are clamped to this magnitude inside the loss functions.
pub const LOGIT_CLAMP: f64 = 30.0;

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    MulConst(Var, Mat),
    Gelu(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Mat,
        inv_std: Vec<f64>,
    },
    SoftmaxRows(Var),
    SliceCols(Var, usize),
    ConcatCols(Vec<Var>),
    GatherRows(Var, Vec<usize>),
    MaxPoolRows {
        x: Var,
        argmax: Vec<Option<usize>>,
    },
    /// Scalar loss whose gradient with respect to `input` was computed
    /// during the forward pass.
    Loss {
        input: Var,
        local_grad: Mat,
    },
    SumScalars(Vec<Var>),
}

struct Node<'p> {
    value: Cow<'p, Mat>,
    op: Op,
    needs_grad: bool,
}

#[derive(Default)]
pub struct Tape<'p> {
    nodes: Vec<Node<'p>>,
}

fn gelu(x: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
    0.5 * x * (1.0 + (C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4;
    let t = (C * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * C * (1.0 + 3.0 * 0.044715 * x * x)
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Softmax of one row, computed with the max subtracted.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s: f64 = out.iter().sum();
    for p in &mut out {
        *p /= s;
    }
    out
}

fn clamp_logit(z: f64) -> (f64, bool) {
    if z > LOGIT_CLAMP {
        (LOGIT_CLAMP, false)
    } else if z < -LOGIT_CLAMP {
        (-LOGIT_CLAMP, false)
    } else {
        (z, true)
    }
}

impl<'p> Tape<'p> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Cow<'p, Mat>, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn owned(&mut self, value: Mat, op: Op, inputs: &[Var]) -> Var {
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        self.push(Cow::Owned(value), op, needs_grad)
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let m = self.value(v);
        debug_assert_eq!(m.len(), 1);
        m.data[0]
    }

    /// A differentiable leaf borrowing a parameter tensor.
    pub fn param(&mut self, value: &'p Mat) -> Var {
        self.push(Cow::Borrowed(value), Op::Leaf, true)
    }

    /// A constant leaf; no gradient flows into it.
    pub fn constant(&mut self, value: Mat) -> Var {
        self.push(Cow::Owned(value), Op::Leaf, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.owned(v, Op::MatMul(a, b), &[a, b])
    }

    /// `a · bᵀ`
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul_t(self.value(b));
        self.owned(v, Op::MatMulT(a, b), &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut v = self.value(a).clone();
        v.add_assign(self.value(b));
        self.owned(v, Op::Add(a, b), &[a, b])
    }

    /// Adds the `1 × n` row `bias` to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Var {
        let b = self.value(bias);
        assert_eq!(b.rows, 1);
        let mut v = self.value(a).clone();
        assert_eq!(v.cols, b.cols);
        for r in 0..v.rows {
            for (x, y) in v.row_mut(r).iter_mut().zip(&b.data) {
                *x += y;
            }
        }
        self.owned(v, Op::AddRow(a, bias), &[a, bias])
    }

    /// `a · bᵀ + bias` style affine map: `x · w + b`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Var {
        let xw = self.matmul(x, w);
        self.add_row(xw, b)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let mut v = self.value(a).clone();
        v.scale(s);
        self.owned(v, Op::Scale(a, s), &[a])
    }

    /// Elementwise product with a constant of the same shape.
    pub fn mul_const(&mut self, a: Var, c: Mat) -> Var {
        let mut v = self.value(a).clone();
        assert_eq!(v.shape(), c.shape());
        for (x, y) in v.data.iter_mut().zip(&c.data) {
            *x *= y;
        }
        self.owned(v, Op::MulConst(a, c), &[a])
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, a: Var) -> Var {
        let mut v = self.value(a).clone();
        for x in &mut v.data {
            *x = gelu(*x);
        }
        self.owned(v, Op::Gelu(a), &[a])
    }

    /// Row-wise layer normalization with gain and bias rows.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let xv = self.value(x);
        let (g, b) = (self.value(gamma), self.value(beta));
        let (rows, cols) = xv.shape();
        let mut xhat = Mat::zeros(rows, cols);
        let mut out = Mat::zeros(rows, cols);
        let mut inv_std = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = xv.row(r);
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|z| (z - mean) * (z - mean)).sum::<f64>() / cols as f64;
            let is = 1.0 / (var + LN_EPS).sqrt();
            inv_std.push(is);
            for (c, &x) in row.iter().enumerate() {
                let h = (x - mean) * is;
                xhat.data[r * cols + c] = h;
                out.data[r * cols + c] = h * g.data[c] + b.data[c];
            }
        }
        self.owned(
            out,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
            &[x, gamma, beta],
        )
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let mut v = Mat::zeros(av.rows, av.cols);
        for r in 0..av.rows {
            v.row_mut(r).copy_from_slice(&softmax(av.row(r)));
        }
        self.owned(v, Op::SoftmaxRows(a), &[a])
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let av = self.value(a);
        let mut v = Mat::zeros(av.rows, end - start);
        for r in 0..av.rows {
            v.row_mut(r).copy_from_slice(&av.row(r)[start..end]);
        }
        self.owned(v, Op::SliceCols(a, start), &[a])
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|p| self.value(*p).cols).sum();
        let mut v = Mat::zeros(rows, cols);
        let mut off = 0;
        for &p in parts {
            let pv = self.value(p);
            assert_eq!(pv.rows, rows, "concat_cols row mismatch");
            for r in 0..rows {
                v.data[r * cols + off..r * cols + off + pv.cols].copy_from_slice(pv.row(r));
            }
            off += pv.cols;
        }
        self.owned(v, Op::ConcatCols(parts.to_vec()), parts)
    }

    /// Rows `index[i]` of `table`, stacked.
    pub fn gather_rows(&mut self, table: Var, index: Vec<usize>) -> Var {
        let t = self.value(table);
        let mut v = Mat::zeros(index.len(), t.cols);
        for (i, &r) in index.iter().enumerate() {
            v.row_mut(i).copy_from_slice(t.row(r));
        }
        self.owned(v, Op::GatherRows(table, index), &[table])
    }

    /// Column-wise max over each row range; an empty range yields zeros.
    pub fn max_pool_rows(&mut self, x: Var, ranges: &[(usize, usize)]) -> Var {
        let xv = self.value(x);
        let cols = xv.cols;
        let mut v = Mat::zeros(ranges.len(), cols);
        let mut argmax = vec![None; ranges.len() * cols];
        for (i, &(s, e)) in ranges.iter().enumerate() {
            if s >= e {
                continue;
            }
            for c in 0..cols {
                let mut best = s;
                for r in s + 1..e {
                    if xv.data[r * cols + c] > xv.data[best * cols + c] {
                        best = r;
                    }
                }
                v.data[i * cols + c] = xv.data[best * cols + c];
                argmax[i * cols + c] = Some(best);
            }
        }
        self.owned(v, Op::MaxPoolRows { x, argmax }, &[x])
    }

    /// `Σ_i CE(softmax(clamp(logits_i)), targets_i)`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Var {
        let lv = self.value(logits);
        assert_eq!(lv.rows, targets.len());
        let mut loss = 0.0;
        let mut grad = Mat::zeros(lv.rows, lv.cols);
        for (r, &t) in targets.iter().enumerate() {
            let (clamped, live): (Vec<f64>, Vec<bool>) = lv.row(r).iter().map(|&z| clamp_logit(z)).unzip();
            let m = clamped.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum_exp: f64 = clamped.iter().map(|z| (z - m).exp()).sum();
            loss += m + sum_exp.ln() - clamped[t];
            let g = grad.row_mut(r);
            for c in 0..clamped.len() {
                let p = (clamped[c] - m).exp() / sum_exp;
                let d = p - if c == t { 1.0 } else { 0.0 };
                g[c] = if live[c] { d } else { 0.0 };
            }
        }
        self.owned(
            Mat::from_vec(1, 1, vec![loss]),
            Op::Loss {
                input: logits,
                local_grad: grad,
            },
            &[logits],
        )
    }

    /// `Σ_i BCE(sigmoid(clamp(z_i)), y_i)` for an `n × 1` logit column.
    pub fn bce_with_logits(&mut self, logits: Var, targets: &[f64]) -> Var {
        let lv = self.value(logits);
        assert_eq!(lv.cols, 1);
        assert_eq!(lv.rows, targets.len());
        let mut loss = 0.0;
        let mut grad = Mat::zeros(lv.rows, 1);
        for (i, &y) in targets.iter().enumerate() {
            let (z, live) = clamp_logit(lv.data[i]);
            loss += softplus(z) - y * z;
            grad.data[i] = if live { sigmoid(z) - y } else { 0.0 };
        }
        self.owned(
            Mat::from_vec(1, 1, vec![loss]),
            Op::Loss {
                input: logits,
                local_grad: grad,
            },
            &[logits],
        )
    }

    pub fn sum_scalars(&mut self, parts: &[Var]) -> Var {
        let s = parts.iter().map(|p| self.scalar(*p)).sum();
        self.owned(Mat::from_vec(1, 1, vec![s]), Op::SumScalars(parts.to_vec()), parts)
    }

    /// Gradients of the scalar `output` with respect to every node.
    pub fn backward(&self, output: Var) -> Gradients {
        let mut grads: Vec<Option<Mat>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Mat::filled(1, 1, 1.0));
        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            self.propagate(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        Gradients { grads }
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn propagate(&self, node: &Node<'p>, g: &Mat, grads: &mut [Option<Mat>]) {
        let acc = |grads: &mut [Option<Mat>], v: Var, d: Mat| match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&d),
            slot @ None => *slot = Some(d),
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.wants(*a) {
                    acc(grads, *a, g.matmul_t(self.value(*b)));
                }
                if self.wants(*b) {
                    acc(grads, *b, self.value(*a).t_matmul(g));
                }
            }
            Op::MatMulT(a, b) => {
                // C = A Bᵀ: dA = G B, dB = Gᵀ A
                if self.wants(*a) {
                    acc(grads, *a, g.matmul(self.value(*b)));
                }
                if self.wants(*b) {
                    acc(grads, *b, g.t_matmul(self.value(*a)));
                }
            }
            Op::Add(a, b) => {
                if self.wants(*a) {
                    acc(grads, *a, g.clone());
                }
                if self.wants(*b) {
                    acc(grads, *b, g.clone());
                }
            }
            Op::AddRow(a, bias) => {
                if self.wants(*a) {
                    acc(grads, *a, g.clone());
                }
                if self.wants(*bias) {
                    let mut db = Mat::zeros(1, g.cols);
                    for r in 0..g.rows {
                        for (d, x) in db.data.iter_mut().zip(g.row(r)) {
                            *d += x;
                        }
                    }
                    acc(grads, *bias, db);
                }
            }
            Op::Scale(a, s) => {
                let mut d = g.clone();
                d.scale(*s);
                acc(grads, *a, d);
            }
            Op::MulConst(a, c) => {
                let mut d = g.clone();
                for (x, y) in d.data.iter_mut().zip(&c.data) {
                    *x *= y;
                }
                acc(grads, *a, d);
            }
            Op::Gelu(a) => {
                let mut d = g.clone();
                for (x, z) in d.data.iter_mut().zip(&self.value(*a).data) {
                    *x *= gelu_grad(*z);
                }
                acc(grads, *a, d);
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            } => {
                let (rows, cols) = xhat.shape();
                let gv = self.value(*gamma);
                if self.wants(*gamma) {
                    let mut dg = Mat::zeros(1, cols);
                    for r in 0..rows {
                        for c in 0..cols {
                            dg.data[c] += g.data[r * cols + c] * xhat.data[r * cols + c];
                        }
                    }
                    acc(grads, *gamma, dg);
                }
                if self.wants(*beta) {
                    let mut db = Mat::zeros(1, cols);
                    for r in 0..rows {
                        for (d, x) in db.data.iter_mut().zip(g.row(r)) {
                            *d += x;
                        }
                    }
                    acc(grads, *beta, db);
                }
                if self.wants(*x) {
                    let mut dx = Mat::zeros(rows, cols);
                    for (r, is) in inv_std.iter().enumerate() {
                        let dxhat: Vec<f64> = (0..cols).map(|c| g.data[r * cols + c] * gv.data[c]).collect();
                        let h = xhat.row(r);
                        let m1 = dxhat.iter().sum::<f64>() / cols as f64;
                        let m2 = dot(&dxhat, h) / cols as f64;
                        for c in 0..cols {
                            dx.data[r * cols + c] = is * (dxhat[c] - m1 - h[c] * m2);
                        }
                    }
                    acc(grads, *x, dx);
                }
            }
            Op::SoftmaxRows(a) => {
                let y = &node.value;
                let mut d = Mat::zeros(y.rows, y.cols);
                for r in 0..y.rows {
                    let yr = y.row(r);
                    let gr = g.row(r);
                    let s = dot(yr, gr);
                    for c in 0..y.cols {
                        d.data[r * y.cols + c] = yr[c] * (gr[c] - s);
                    }
                }
                acc(grads, *a, d);
            }
            Op::SliceCols(a, start) => {
                let av = self.value(*a);
                let mut d = Mat::zeros(av.rows, av.cols);
                for r in 0..g.rows {
                    d.row_mut(r)[*start..*start + g.cols].copy_from_slice(g.row(r));
                }
                acc(grads, *a, d);
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for &p in parts {
                    let pc = self.value(p).cols;
                    if self.wants(p) {
                        let mut d = Mat::zeros(g.rows, pc);
                        for r in 0..g.rows {
                            d.row_mut(r).copy_from_slice(&g.row(r)[off..off + pc]);
                        }
                        acc(grads, p, d);
                    }
                    off += pc;
                }
            }
            Op::GatherRows(table, index) => {
                let t = self.value(*table);
                let mut d = Mat::zeros(t.rows, t.cols);
                for (i, &r) in index.iter().enumerate() {
                    for (x, y) in d.row_mut(r).iter_mut().zip(g.row(i)) {
                        *x += y;
                    }
                }
                acc(grads, *table, d);
            }
            Op::MaxPoolRows { x, argmax } => {
                let xv = self.value(*x);
                let cols = xv.cols;
                let mut d = Mat::zeros(xv.rows, cols);
                for (k, am) in argmax.iter().enumerate() {
                    if let Some(r) = am {
                        d.data[r * cols + k % cols] += g.data[k];
                    }
                }
                acc(grads, *x, d);
            }
            Op::Loss { input, local_grad } => {
                let mut d = local_grad.clone();
                d.scale(g.data[0]);
                acc(grads, *input, d);
            }
            Op::SumScalars(parts) => {
                for &p in parts {
                    if self.wants(p) {
                        acc(grads, p, g.clone());
                    }
                }
            }
        }
    }
}

pub struct Gradients {
    grads: Vec<Option<Mat>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Mat> {
        self.grads[v.0].as_ref()
    }

    pub fn take(&mut self, v: Var) -> Option<Mat> {
        self.grads[v.0].take()
    }
}

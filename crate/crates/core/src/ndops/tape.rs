//! Reverse-mode differentiation over a linear tape of tensor primitives.
//!
//! Every primitive evaluates eagerly, appends a node holding its output
//! and whatever context its backward rule needs, and returns a [`Var`]
//! handle. [`Tape::backward`] walks the nodes once in reverse order and
//! accumulates `dLoss/dNode` into every node that depends on a leaf
//! created with `requires_grad`.

use rand::Rng;

use super::linalg::gemm;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    BatchedLeftMatMul(Var, Var),
    Transpose(Var),
    Reshape(Var),
    Add(Var, Var),
    Mul(Var, Var),
    Tanh(Var),
    Dropout {
        x: Var,
        mask: Vec<f64>,
    },
    Conv1d {
        x: Var,
        kernel: Var,
        bias: Var,
    },
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    ConcatRows(Var, Var),
    ConcatLast(Var, Var),
    SliceLast {
        x: Var,
        start: usize,
    },
    NormalizeColumns {
        x: Var,
        norms: Vec<f64>,
    },
    SumAxis0(Var),
    AcosClamped {
        x: Var,
        bound: f64,
    },
    Sum(Var),
    Mean(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records primitive operations for one forward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
    backward_done: bool,
}

fn dim_err(op: &str, a: &[usize], b: &[usize]) -> Error {
    Error::Dimension(format!("{op}: incompatible shapes {a:?} and {b:?}"))
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

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient accumulated by the last backward pass, if `v` received one.
    pub fn grad(&self, v: Var) -> Option<Tensor> {
        let g = self.grads.get(v.0)?.as_ref()?;
        Tensor::new(self.nodes[v.0].value.shape().to_vec(), g.clone()).ok()
    }

    /// Clears accumulated gradients so that `backward` may run again.
    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = None);
        self.backward_done = false;
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    /// Matrix product of `a: m×k` and `b: k×n`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(dim_err("matmul", sa, sb));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        gemm(
            m,
            k,
            n,
            self.value(a).data(),
            false,
            self.value(b).data(),
            false,
            0.0,
            &mut out,
        );
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::MatMul(a, b), rg))
    }

    /// Applies one `m×k` matrix to every slice of `x: B×k×n`, giving `B×m×n`.
    pub fn batched_left_matmul(&mut self, a: Var, x: Var) -> Result<Var> {
        let (sa, sx) = (self.shape(a), self.shape(x));
        if sa.len() != 2 || sx.len() != 3 || sa[1] != sx[1] {
            return Err(dim_err("batched_left_matmul", sa, sx));
        }
        let (m, k, b, n) = (sa[0], sa[1], sx[0], sx[2]);
        let mut out = vec![0.0; b * m * n];
        let av = self.value(a).data();
        let xv = self.value(x).data();
        for bi in 0..b {
            gemm(
                m,
                k,
                n,
                av,
                false,
                &xv[bi * k * n..(bi + 1) * k * n],
                false,
                0.0,
                &mut out[bi * m * n..(bi + 1) * m * n],
            );
        }
        let rg = self.rg(&[a, x]);
        Ok(self.push(
            Tensor::new(vec![b, m, n], out)?,
            Op::BatchedLeftMatMul(a, x),
            rg,
        ))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a).transpose2()?;
        let rg = self.rg(&[a]);
        Ok(self.push(t, Op::Transpose(a), rg))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(x).clone().reshape(shape)?;
        let rg = self.rg(&[x]);
        Ok(self.push(t, Op::Reshape(x), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(dim_err("add", sa, sb));
        }
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x + y)
            .collect();
        let t = Tensor::new(sa.to_vec(), data)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(t, Op::Add(a, b), rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(dim_err("mul", sa, sb));
        }
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .collect();
        let t = Tensor::new(sa.to_vec(), data)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(t, Op::Mul(a, b), rg))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let t = Tensor::new(
            v.shape().to_vec(),
            v.data().iter().map(|a| a.tanh()).collect(),
        )
        .expect("same shape");
        let rg = self.rg(&[x]);
        self.push(t, Op::Tanh(x), rg)
    }

    /// Inverted dropout. In eval mode, or with `rate == 0`, returns `x` itself.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        x: Var,
        rate: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Parameter(format!(
                "dropout rate must lie in [0, 1), got {rate}"
            )));
        }
        if !training || rate == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - rate);
        let n = self.value(x).len();
        let mask: Vec<f64> = (0..n)
            .map(|_| {
                if rng.random::<f64>() < rate {
                    0.0
                } else {
                    keep
                }
            })
            .collect();
        let v = self.value(x);
        let data = v.data().iter().zip(&mask).map(|(a, m)| a * m).collect();
        let t = Tensor::new(v.shape().to_vec(), data)?;
        let rg = self.rg(&[x]);
        Ok(self.push(t, Op::Dropout { x, mask }, rg))
    }

    /// Width-3 convolution along time with one zero of padding on each side,
    /// so `x: C_in×T` maps to `C_out×T`.
    pub fn conv1d_same(&mut self, x: Var, kernel: Var, bias: Var) -> Result<Var> {
        let (sx, sk, sb) = (self.shape(x), self.shape(kernel), self.shape(bias));
        if sx.len() != 2 || sx[1] == 0 {
            return Err(Error::Dimension(format!(
                "conv1d_same expects C_in×T with T ≥ 1, got {sx:?}"
            )));
        }
        if sk.len() != 3 || sk[2] != 3 || sk[1] != sx[0] {
            return Err(dim_err("conv1d_same (input vs kernel)", sx, sk));
        }
        if sb.len() != 1 || sb[0] != sk[0] {
            return Err(dim_err("conv1d_same (kernel vs bias)", sk, sb));
        }
        let (cin, t, cout) = (sx[0], sx[1], sk[0]);
        let cols = im2col(self.value(x).data(), cin, t);
        let mut out = vec![0.0; cout * t];
        for (o, b) in self.value(bias).data().iter().enumerate() {
            out[o * t..(o + 1) * t].iter_mut().for_each(|v| *v = *b);
        }
        gemm(
            cout,
            cin * 3,
            t,
            self.value(kernel).data(),
            false,
            &cols,
            false,
            1.0,
            &mut out,
        );
        let rg = self.rg(&[x, kernel, bias]);
        Ok(self.push(
            Tensor::new(vec![cout, t], out)?,
            Op::Conv1d { x, kernel, bias },
            rg,
        ))
    }

    /// Normalizes every column of `x: C×…` over its first axis, then applies
    /// the per-row affine `gamma`, `beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        if sx.is_empty() {
            return Err(Error::Dimension("layer_norm on a scalar".into()));
        }
        let c = sx[0];
        if c < 2 {
            return Err(Error::Degenerate(format!(
                "layer_norm over an axis of size {c}: variance undefined"
            )));
        }
        if self.shape(gamma) != [c] || self.shape(beta) != [c] {
            return Err(dim_err("layer_norm (affine)", &sx, self.shape(gamma)));
        }
        let m = self.value(x).len() / c;
        let xv = self.value(x).data();
        let mut mean = vec![0.0; m];
        for r in 0..c {
            for (mu, v) in mean.iter_mut().zip(&xv[r * m..(r + 1) * m]) {
                *mu += v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= c as f64);
        let mut var = vec![0.0; m];
        for r in 0..c {
            for ((s, v), mu) in var.iter_mut().zip(&xv[r * m..(r + 1) * m]).zip(&mean) {
                *s += (v - mu) * (v - mu);
            }
        }
        let inv_std: Vec<f64> = var
            .iter()
            .map(|s| 1.0 / (s / c as f64 + eps).sqrt())
            .collect();
        let mut xhat = vec![0.0; c * m];
        let mut out = vec![0.0; c * m];
        let (g, b) = (self.value(gamma).data(), self.value(beta).data());
        for r in 0..c {
            for j in 0..m {
                let h = (xv[r * m + j] - mean[j]) * inv_std[j];
                xhat[r * m + j] = h;
                out[r * m + j] = g[r] * h + b[r];
            }
        }
        let rg = self.rg(&[x, gamma, beta]);
        Ok(self.push(
            Tensor::new(sx, out)?,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
            rg,
        ))
    }

    /// Stacks `a` on top of `b` along the first axis.
    pub fn concat_rows(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.is_empty() || sa.len() != sb.len() || sa[1..] != sb[1..] {
            return Err(dim_err("concat_rows", &sa, &sb));
        }
        let mut shape = sa.clone();
        shape[0] += sb[0];
        let mut data = self.value(a).data().to_vec();
        data.extend_from_slice(self.value(b).data());
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::new(shape, data)?, Op::ConcatRows(a, b), rg))
    }

    /// Joins `a` and `b` along the last axis.
    pub fn concat_last(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let r = sa.len();
        if r == 0 || r != sb.len() || sa[..r - 1] != sb[..r - 1] {
            return Err(dim_err("concat_last", &sa, &sb));
        }
        let (la, lb) = (sa[r - 1], sb[r - 1]);
        let rows: usize = sa[..r - 1].iter().product();
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        let mut data = Vec::with_capacity(rows * (la + lb));
        for i in 0..rows {
            data.extend_from_slice(&av[i * la..(i + 1) * la]);
            data.extend_from_slice(&bv[i * lb..(i + 1) * lb]);
        }
        let mut shape = sa;
        shape[r - 1] = la + lb;
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::new(shape, data)?, Op::ConcatLast(a, b), rg))
    }

    /// Keeps `len` entries of the last axis starting at `start`.
    pub fn slice_last(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        let r = sx.len();
        if r == 0 || start + len > sx[r - 1] {
            return Err(Error::Dimension(format!(
                "slice_last [{start}, {}) out of range for {sx:?}",
                start + len
            )));
        }
        let l = sx[r - 1];
        let rows: usize = sx[..r - 1].iter().product();
        let xv = self.value(x).data();
        let mut data = Vec::with_capacity(rows * len);
        for i in 0..rows {
            data.extend_from_slice(&xv[i * l + start..i * l + start + len]);
        }
        let mut shape = sx;
        shape[r - 1] = len;
        let rg = self.rg(&[x]);
        Ok(self.push(Tensor::new(shape, data)?, Op::SliceLast { x, start }, rg))
    }

    /// Scales every column of `x: R×T` to unit Euclidean norm. Columns whose
    /// norm is below `eps` are an error.
    pub fn normalize_columns(&mut self, x: Var, eps: f64) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        if sx.len() != 2 {
            return Err(Error::Dimension(format!(
                "normalize_columns expects a matrix, got {sx:?}"
            )));
        }
        let (r, t) = (sx[0], sx[1]);
        let xv = self.value(x).data();
        let mut norms = vec![0.0; t];
        for i in 0..r {
            for (n, v) in norms.iter_mut().zip(&xv[i * t..(i + 1) * t]) {
                *n += v * v;
            }
        }
        for (j, n) in norms.iter_mut().enumerate() {
            *n = n.sqrt();
            if n.is_nan() || *n < eps {
                return Err(Error::Degenerate(format!(
                    "column {j} has norm {n:e} below {eps:e}"
                )));
            }
        }
        let data = (0..r * t).map(|i| xv[i] / norms[i % t]).collect();
        let rg = self.rg(&[x]);
        Ok(self.push(
            Tensor::new(sx, data)?,
            Op::NormalizeColumns { x, norms },
            rg,
        ))
    }

    /// Sums `x: R×…` over its first axis.
    pub fn sum_axis0(&mut self, x: Var) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        if sx.is_empty() {
            return Err(Error::Dimension("sum_axis0 on a scalar".into()));
        }
        let m = self.value(x).len() / sx[0].max(1);
        let mut out = vec![0.0; m];
        for row in self.value(x).data().chunks(m.max(1)) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        let rg = self.rg(&[x]);
        Ok(self.push(Tensor::new(sx[1..].to_vec(), out)?, Op::SumAxis0(x), rg))
    }

    /// `acos` of `x` clamped to `[-1 + bound, 1 - bound]`; clamped entries
    /// carry zero gradient.
    pub fn acos_clamped(&mut self, x: Var, bound: f64) -> Var {
        let v = self.value(x);
        let (lo, hi) = (-1.0 + bound, 1.0 - bound);
        let t = Tensor::new(
            v.shape().to_vec(),
            v.data().iter().map(|a| a.clamp(lo, hi).acos()).collect(),
        )
        .expect("same shape");
        let rg = self.rg(&[x]);
        self.push(t, Op::AcosClamped { x, bound }, rg)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let rg = self.rg(&[x]);
        self.push(Tensor::scalar(s), Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let s = v.data().iter().sum::<f64>() / v.len() as f64;
        let rg = self.rg(&[x]);
        self.push(Tensor::scalar(s), Op::Mean(x), rg)
    }

    fn accumulate(&mut self, v: Var, f: impl FnOnce(&mut [f64], &Tensor)) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        let n = self.nodes[v.0].value.len();
        let slot = self.grads[v.0].get_or_insert_with(|| vec![0.0; n]);
        f(slot, &self.nodes[v.0].value);
    }

    /// Propagates `dLoss/d·` from the scalar `loss` back to every leaf.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Contract("backward on an empty tape".into()));
        }
        if self.backward_done {
            return Err(Error::Contract(
                "backward already ran on this tape; call zero_grad first".into(),
            ));
        }
        if self.value(loss).len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        self.backward_done = true;
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        self.grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = self.grads[i].take() else {
                continue;
            };
            let op = std::mem::replace(&mut self.nodes[i].op, Op::Leaf);
            self.backward_node(i, &op, &g);
            self.nodes[i].op = op;
            if matches!(self.nodes[i].op, Op::Leaf) {
                self.grads[i] = Some(g);
            }
        }
        Ok(())
    }

    fn backward_node(&mut self, i: usize, op: &Op, g: &[f64]) {
        match *op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = (self.shape(a)[0], self.shape(a)[1]);
                let n = self.shape(b)[1];
                if self.requires_grad(a) {
                    let bv = self.value(b).data().to_vec();
                    self.accumulate(a, |ga, _| gemm(m, n, k, g, false, &bv, true, 1.0, ga));
                }
                if self.requires_grad(b) {
                    let av = self.value(a).data().to_vec();
                    self.accumulate(b, |gb, _| gemm(k, m, n, &av, true, g, false, 1.0, gb));
                }
            }
            Op::BatchedLeftMatMul(a, x) => {
                let (m, k) = (self.shape(a)[0], self.shape(a)[1]);
                let (bn, n) = (self.shape(x)[0], self.shape(x)[2]);
                if self.requires_grad(a) {
                    let xv = self.value(x).data().to_vec();
                    self.accumulate(a, |ga, _| {
                        for bi in 0..bn {
                            gemm(
                                m,
                                n,
                                k,
                                &g[bi * m * n..(bi + 1) * m * n],
                                false,
                                &xv[bi * k * n..(bi + 1) * k * n],
                                true,
                                1.0,
                                ga,
                            );
                        }
                    });
                }
                if self.requires_grad(x) {
                    let av = self.value(a).data().to_vec();
                    self.accumulate(x, |gx, _| {
                        for bi in 0..bn {
                            gemm(
                                k,
                                m,
                                n,
                                &av,
                                true,
                                &g[bi * m * n..(bi + 1) * m * n],
                                false,
                                1.0,
                                &mut gx[bi * k * n..(bi + 1) * k * n],
                            );
                        }
                    });
                }
            }
            Op::Transpose(a) => {
                let (m, n) = (self.shape(a)[0], self.shape(a)[1]);
                self.accumulate(a, |ga, _| {
                    for r in 0..m {
                        for c in 0..n {
                            ga[r * n + c] += g[c * m + r];
                        }
                    }
                });
            }
            Op::Reshape(x) => self.accumulate(x, |gx, _| add_into(gx, g)),
            Op::Add(a, b) => {
                self.accumulate(a, |ga, _| add_into(ga, g));
                self.accumulate(b, |gb, _| add_into(gb, g));
            }
            Op::Mul(a, b) => {
                if self.requires_grad(a) {
                    let bv = self.value(b).data().to_vec();
                    self.accumulate(a, |ga, _| {
                        for ((d, gi), bi) in ga.iter_mut().zip(g).zip(&bv) {
                            *d += gi * bi;
                        }
                    });
                }
                if self.requires_grad(b) {
                    let av = self.value(a).data().to_vec();
                    self.accumulate(b, |gb, _| {
                        for ((d, gi), ai) in gb.iter_mut().zip(g).zip(&av) {
                            *d += gi * ai;
                        }
                    });
                }
            }
            Op::Tanh(x) => {
                let y = self.nodes[i].value.data().to_vec();
                self.accumulate(x, |gx, _| {
                    for ((d, gi), yi) in gx.iter_mut().zip(g).zip(&y) {
                        *d += gi * (1.0 - yi * yi);
                    }
                });
            }
            Op::Dropout { x, ref mask } => {
                self.accumulate(x, |gx, _| {
                    for ((d, gi), mi) in gx.iter_mut().zip(g).zip(mask) {
                        *d += gi * mi;
                    }
                });
            }
            Op::Conv1d { x, kernel, bias } => {
                let (cin, t) = (self.shape(x)[0], self.shape(x)[1]);
                let cout = self.shape(kernel)[0];
                if self.requires_grad(kernel) {
                    let cols = im2col(self.value(x).data(), cin, t);
                    self.accumulate(kernel, |gk, _| {
                        gemm(cout, t, cin * 3, g, false, &cols, true, 1.0, gk)
                    });
                }
                self.accumulate(bias, |gb, _| {
                    for (o, d) in gb.iter_mut().enumerate() {
                        *d += g[o * t..(o + 1) * t].iter().sum::<f64>();
                    }
                });
                if self.requires_grad(x) {
                    let kv = self.value(kernel).data().to_vec();
                    let mut dcols = vec![0.0; cin * 3 * t];
                    gemm(cin * 3, cout, t, &kv, true, g, false, 0.0, &mut dcols);
                    self.accumulate(x, |gx, _| col2im_add(&dcols, cin, t, gx));
                }
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                ref xhat,
                ref inv_std,
            } => {
                let c = self.shape(x)[0];
                let m = inv_std.len();
                self.accumulate(gamma, |gg, _| {
                    for r in 0..c {
                        gg[r] += (0..m).map(|j| g[r * m + j] * xhat[r * m + j]).sum::<f64>();
                    }
                });
                self.accumulate(beta, |gb, _| {
                    for r in 0..c {
                        gb[r] += g[r * m..(r + 1) * m].iter().sum::<f64>();
                    }
                });
                if self.requires_grad(x) {
                    let gam = self.value(gamma).data().to_vec();
                    let mut s1 = vec![0.0; m];
                    let mut s2 = vec![0.0; m];
                    for r in 0..c {
                        for j in 0..m {
                            let dh = g[r * m + j] * gam[r];
                            s1[j] += dh;
                            s2[j] += dh * xhat[r * m + j];
                        }
                    }
                    let cf = c as f64;
                    self.accumulate(x, |gx, _| {
                        for r in 0..c {
                            for j in 0..m {
                                let dh = g[r * m + j] * gam[r];
                                gx[r * m + j] +=
                                    inv_std[j] / cf * (cf * dh - s1[j] - xhat[r * m + j] * s2[j]);
                            }
                        }
                    });
                }
            }
            Op::ConcatRows(a, b) => {
                let na = self.value(a).len();
                self.accumulate(a, |ga, _| add_into(ga, &g[..na]));
                self.accumulate(b, |gb, _| add_into(gb, &g[na..]));
            }
            Op::ConcatLast(a, b) => {
                let la = *self.shape(a).last().unwrap();
                let lb = *self.shape(b).last().unwrap();
                let w = la + lb;
                self.accumulate(a, |ga, _| {
                    for (row, d) in ga.chunks_mut(la).enumerate() {
                        add_into(d, &g[row * w..row * w + la]);
                    }
                });
                self.accumulate(b, |gb, _| {
                    for (row, d) in gb.chunks_mut(lb).enumerate() {
                        add_into(d, &g[row * w + la..(row + 1) * w]);
                    }
                });
            }
            Op::SliceLast { x, start } => {
                let l = *self.shape(x).last().unwrap();
                let len = *self.nodes[i].value.shape().last().unwrap();
                self.accumulate(x, |gx, _| {
                    for (row, d) in gx.chunks_mut(l).enumerate() {
                        add_into(&mut d[start..start + len], &g[row * len..(row + 1) * len]);
                    }
                });
            }
            Op::NormalizeColumns { x, ref norms } => {
                let y = self.nodes[i].value.data().to_vec();
                let t = norms.len();
                let r = y.len() / t;
                let mut proj = vec![0.0; t];
                for row in 0..r {
                    for j in 0..t {
                        proj[j] += y[row * t + j] * g[row * t + j];
                    }
                }
                self.accumulate(x, |gx, _| {
                    for row in 0..r {
                        for j in 0..t {
                            let k = row * t + j;
                            gx[k] += (g[k] - y[k] * proj[j]) / norms[j];
                        }
                    }
                });
            }
            Op::SumAxis0(x) => {
                let m = g.len();
                self.accumulate(x, |gx, _| {
                    for row in gx.chunks_mut(m.max(1)) {
                        add_into(row, g);
                    }
                });
            }
            Op::AcosClamped { x, bound } => {
                let (lo, hi) = (-1.0 + bound, 1.0 - bound);
                self.accumulate(x, |gx, xv| {
                    for ((d, gi), v) in gx.iter_mut().zip(g).zip(xv.data()) {
                        if *v > lo && *v < hi {
                            *d -= gi / (1.0 - v * v).sqrt();
                        }
                    }
                });
            }
            Op::Sum(x) => self.accumulate(x, |gx, _| gx.iter_mut().for_each(|d| *d += g[0])),
            Op::Mean(x) => {
                self.accumulate(x, |gx, _| {
                    let s = g[0] / gx.len() as f64;
                    gx.iter_mut().for_each(|d| *d += s);
                });
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Rows are `(channel, tap)` pairs; `cols[(c*3+k), t] = x[c, t+k-1]`.
fn im2col(x: &[f64], cin: usize, t: usize) -> Vec<f64> {
    let mut cols = vec![0.0; cin * 3 * t];
    for c in 0..cin {
        let src = &x[c * t..(c + 1) * t];
        let base = c * 3 * t;
        cols[base + 1..base + t].copy_from_slice(&src[..t - 1]);
        cols[base + t..base + 2 * t].copy_from_slice(src);
        cols[base + 2 * t..base + 3 * t - 1].copy_from_slice(&src[1..]);
    }
    cols
}

fn col2im_add(dcols: &[f64], cin: usize, t: usize, gx: &mut [f64]) {
    for c in 0..cin {
        let dst = &mut gx[c * t..(c + 1) * t];
        let base = c * 3 * t;
        add_into(&mut dst[..t - 1], &dcols[base + 1..base + t]);
        add_into(dst, &dcols[base + t..base + 2 * t]);
        add_into(&mut dst[1..], &dcols[base + 2 * t..base + 3 * t - 1]);
    }
}

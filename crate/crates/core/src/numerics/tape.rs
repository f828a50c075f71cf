//! Reverse-mode differentiation over 2-D tensors.
//!
//! Nodes are appended in evaluation order, so walking the tape backwards is
//! a valid topological order for the backward pass.

use super::tensor::Tensor;
use super::NumericsError;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
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
    MatMul(Var, Var),
    Transpose(Var),
    AddRow(Var, Var),
    Tanh(Var),
    Exp(Var),
    Square(Var),
    Scale(Var, f64),
    ScaleBy(Var, Var),
    AddScalar(Var),
    ClampMax(Var, f64),
    Sum(Var),
    Mean(Var),
    Softmax(Var),
    LogSoftmax(Var),
    Concat(Vec<Var>),
    Embedding { table: Var, ids: Vec<usize> },
    CrossEntropy { logits: Var, targets: Vec<usize> },
    RowNormalize(Var),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of one backward pass, indexed by [`Var`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }

    /// Gradient of `v`, or zeros of `like`'s shape when nothing reached it.
    pub fn get_or_zeros(&self, v: Var, shape: &[usize]) -> Tensor {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(shape))
    }
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> NumericsError {
    NumericsError::ShapeMismatch {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

fn require_2d(op: &'static str, t: &Tensor) -> Result<(), NumericsError> {
    if t.shape().len() == 2 {
        Ok(())
    } else {
        Err(NumericsError::ShapeMismatch {
            op,
            left: t.shape().to_vec(),
            right: vec![],
        })
    }
}

fn softmax_rows(x: &Tensor) -> Tensor {
    let (n, m) = (x.rows(), x.cols());
    let mut out = Vec::with_capacity(n * m);
    for r in 0..n {
        let row = x.row_slice(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        out.extend(exps.iter().map(|e| e / z));
    }
    Tensor::new(vec![n, m], out).expect("shape preserved")
}

fn log_softmax_rows(x: &Tensor) -> Tensor {
    let (n, m) = (x.rows(), x.cols());
    let mut out = Vec::with_capacity(n * m);
    for r in 0..n {
        let row = x.row_slice(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        out.extend(row.iter().map(|v| v - lse));
    }
    Tensor::new(vec![n, m], out).expect("shape preserved")
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

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Input node (parameter or constant).
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(mismatch("add", x, y));
        }
        let mut out = x.clone();
        out.add_assign(y);
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(mismatch("sub", x, y));
        }
        let data = x.data().iter().zip(y.data()).map(|(p, q)| p - q).collect();
        let out = Tensor::new(x.shape().to_vec(), data)?;
        Ok(self.push(out, Op::Sub(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(mismatch("mul", x, y));
        }
        let data = x.data().iter().zip(y.data()).map(|(p, q)| p * q).collect();
        let out = Tensor::new(x.shape().to_vec(), data)?;
        Ok(self.push(out, Op::Mul(a, b)))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, NumericsError> {
        require_2d("transpose", self.value(a))?;
        let out = self.value(a).transpose();
        Ok(self.push(out, Op::Transpose(a)))
    }

    /// Adds a `[1, m]` row to every row of an `[n, m]` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, NumericsError> {
        let (x, r) = (self.value(a), self.value(row));
        if x.shape().len() != 2 || r.shape() != [1, x.cols()] {
            return Err(mismatch("add_row", x, r));
        }
        let m = x.cols();
        let data = x
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| v + r.data()[i % m])
            .collect();
        let out = Tensor::new(x.shape().to_vec(), data)?;
        Ok(self.push(out, Op::AddRow(a, row)))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::tanh);
        self.push(out, Op::Tanh(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::exp);
        self.push(out, Op::Exp(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|v| v * v);
        self.push(out, Op::Square(a))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|v| v * c);
        self.push(out, Op::Scale(a, c))
    }

    /// Multiplies every entry of `a` by the `[1, 1]` node `s`.
    pub fn scale_by(&mut self, a: Var, s: Var) -> Result<Var, NumericsError> {
        let sv = self.value(s);
        if sv.len() != 1 {
            return Err(mismatch("scale_by", self.value(a), sv));
        }
        let k = sv.item();
        let out = self.value(a).map(|v| v * k);
        Ok(self.push(out, Op::ScaleBy(a, s)))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|v| v + c);
        self.push(out, Op::AddScalar(a))
    }

    /// `min(a, c)` elementwise; the gradient is zero where the clamp is active.
    pub fn clamp_max(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|v| v.min(c));
        self.push(out, Op::ClampMax(a, c))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let s = x.data().iter().sum::<f64>() / x.len() as f64;
        self.push(Tensor::scalar(s), Op::Mean(a))
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: Var) -> Result<Var, NumericsError> {
        require_2d("softmax", self.value(a))?;
        let out = softmax_rows(self.value(a));
        Ok(self.push(out, Op::Softmax(a)))
    }

    /// Row-wise log-softmax.
    pub fn log_softmax(&mut self, a: Var) -> Result<Var, NumericsError> {
        require_2d("log_softmax", self.value(a))?;
        let out = log_softmax_rows(self.value(a));
        Ok(self.push(out, Op::LogSoftmax(a)))
    }

    /// Column-wise concatenation of matrices with equal row counts.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, NumericsError> {
        let first = self.value(parts[0]);
        let n = first.rows();
        for &p in parts {
            let t = self.value(p);
            if t.shape().len() != 2 || t.rows() != n {
                return Err(mismatch("concat", first, t));
            }
        }
        let widths: Vec<usize> = parts.iter().map(|&p| self.value(p).cols()).collect();
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(n * total);
        for r in 0..n {
            for &p in parts {
                data.extend_from_slice(self.value(p).row_slice(r));
            }
        }
        let out = Tensor::new(vec![n, total], data)?;
        Ok(self.push(out, Op::Concat(parts.to_vec())))
    }

    /// Gathers rows of `table` by id.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var, NumericsError> {
        let t = self.value(table);
        require_2d("embedding", t)?;
        if let Some(&bad) = ids.iter().find(|&&i| i >= t.rows()) {
            return Err(NumericsError::ShapeMismatch {
                op: "embedding",
                left: t.shape().to_vec(),
                right: vec![bad],
            });
        }
        let m = t.cols();
        let mut data = Vec::with_capacity(ids.len() * m);
        for &i in ids {
            data.extend_from_slice(t.row_slice(i));
        }
        let out = Tensor::new(vec![ids.len(), m], data)?;
        Ok(self.push(
            out,
            Op::Embedding {
                table,
                ids: ids.to_vec(),
            },
        ))
    }

    /// Mean over rows of `-log softmax(logits)[row, target]`.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var, NumericsError> {
        let x = self.value(logits);
        require_2d("cross_entropy", x)?;
        if x.rows() != targets.len() || targets.iter().any(|&t| t >= x.cols()) {
            return Err(NumericsError::ShapeMismatch {
                op: "cross_entropy",
                left: x.shape().to_vec(),
                right: vec![targets.len()],
            });
        }
        let ls = log_softmax_rows(x);
        let loss = -targets
            .iter()
            .enumerate()
            .map(|(r, &t)| ls.get(r, t))
            .sum::<f64>()
            / targets.len() as f64;
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
            },
        ))
    }

    /// Scales every row to unit Euclidean norm.
    pub fn row_normalize(&mut self, a: Var) -> Result<Var, NumericsError> {
        let x = self.value(a);
        require_2d("row_normalize", x)?;
        let mut out = x.clone();
        let m = x.cols();
        for r in 0..x.rows() {
            let norm = x.row_slice(r).iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 || !norm.is_finite() {
                return Err(NumericsError::ZeroNormRow(r));
            }
            for v in &mut out.data_mut()[r * m..(r + 1) * m] {
                *v /= norm;
            }
        }
        Ok(self.push(out, Op::RowNormalize(a)))
    }

    /// Backward pass from the scalar `loss`.
    pub fn backward(&self, loss: Var) -> Gradients {
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::filled(self.value(loss).shape(), 1.0));
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Gradients { grads }
    }

    fn propagate(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[idx];
        let y = &node.value;
        let mut acc = |v: Var, delta: Tensor| match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&delta),
            slot @ None => *slot = Some(delta),
        };
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.map(|v| -v));
            }
            Op::Mul(a, b) => {
                let (x, z) = (self.value(*a), self.value(*b));
                acc(*a, zip(g, z, |p, q| p * q));
                acc(*b, zip(g, x, |p, q| p * q));
            }
            Op::MatMul(a, b) => {
                let (x, z) = (self.value(*a), self.value(*b));
                acc(*a, g.matmul(&z.transpose()).expect("shapes checked"));
                acc(*b, x.transpose().matmul(g).expect("shapes checked"));
            }
            Op::Transpose(a) => acc(*a, g.transpose()),
            Op::AddRow(a, row) => {
                acc(*a, g.clone());
                let m = g.cols();
                let mut col = vec![0.0; m];
                for (i, v) in g.data().iter().enumerate() {
                    col[i % m] += v;
                }
                acc(*row, Tensor::row(&col));
            }
            Op::Tanh(a) => acc(*a, zip(g, y, |p, t| p * (1.0 - t * t))),
            Op::Exp(a) => acc(*a, zip(g, y, |p, e| p * e)),
            Op::Square(a) => acc(*a, zip(g, self.value(*a), |p, x| 2.0 * p * x)),
            Op::Scale(a, c) => acc(*a, g.map(|v| v * c)),
            Op::ScaleBy(a, s) => {
                let k = self.value(*s).item();
                let x = self.value(*a);
                let ds: f64 = g.data().iter().zip(x.data()).map(|(p, q)| p * q).sum();
                acc(*a, g.map(|v| v * k));
                acc(*s, Tensor::scalar(ds));
            }
            Op::AddScalar(a) => acc(*a, g.clone()),
            Op::ClampMax(a, c) => {
                let x = self.value(*a);
                acc(*a, zip(g, x, |p, v| if v < *c { p } else { 0.0 }));
            }
            Op::Sum(a) => {
                let x = self.value(*a);
                acc(*a, Tensor::filled(x.shape(), g.item()));
            }
            Op::Mean(a) => {
                let x = self.value(*a);
                acc(*a, Tensor::filled(x.shape(), g.item() / x.len() as f64));
            }
            Op::Softmax(a) => {
                let (n, m) = (y.rows(), y.cols());
                let mut out = Vec::with_capacity(n * m);
                for r in 0..n {
                    let (gy, yy) = (g.row_slice(r), y.row_slice(r));
                    let dot: f64 = gy.iter().zip(yy).map(|(p, q)| p * q).sum();
                    out.extend(gy.iter().zip(yy).map(|(p, q)| q * (p - dot)));
                }
                acc(*a, Tensor::new(vec![n, m], out).expect("shape"));
            }
            Op::LogSoftmax(a) => {
                let (n, m) = (y.rows(), y.cols());
                let mut out = Vec::with_capacity(n * m);
                for r in 0..n {
                    let (gy, yy) = (g.row_slice(r), y.row_slice(r));
                    let total: f64 = gy.iter().sum();
                    out.extend(gy.iter().zip(yy).map(|(p, ly)| p - ly.exp() * total));
                }
                acc(*a, Tensor::new(vec![n, m], out).expect("shape"));
            }
            Op::Concat(parts) => {
                let n = g.rows();
                let mut offset = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    let mut data = Vec::with_capacity(n * w);
                    for r in 0..n {
                        data.extend_from_slice(&g.row_slice(r)[offset..offset + w]);
                    }
                    acc(p, Tensor::new(vec![n, w], data).expect("shape"));
                    offset += w;
                }
            }
            Op::Embedding { table, ids } => {
                let t = self.value(*table);
                let m = t.cols();
                let mut delta = Tensor::zeros(t.shape());
                for (r, &id) in ids.iter().enumerate() {
                    let dst = &mut delta.data_mut()[id * m..(id + 1) * m];
                    for (d, v) in dst.iter_mut().zip(g.row_slice(r)) {
                        *d += v;
                    }
                }
                acc(*table, delta);
            }
            Op::CrossEntropy { logits, targets } => {
                let x = self.value(*logits);
                let mut p = softmax_rows(x);
                let m = x.cols();
                let scale = g.item() / targets.len() as f64;
                for (r, &t) in targets.iter().enumerate() {
                    p.data_mut()[r * m + t] -= 1.0;
                }
                acc(*logits, p.map(|v| v * scale));
            }
            Op::RowNormalize(a) => {
                let x = self.value(*a);
                let (n, m) = (x.rows(), x.cols());
                let mut out = Vec::with_capacity(n * m);
                for r in 0..n {
                    let norm = x.row_slice(r).iter().map(|v| v * v).sum::<f64>().sqrt();
                    let (gy, yy) = (g.row_slice(r), y.row_slice(r));
                    let dot: f64 = gy.iter().zip(yy).map(|(p, q)| p * q).sum();
                    out.extend(gy.iter().zip(yy).map(|(p, q)| (p - q * dot) / norm));
                }
                acc(*a, Tensor::new(vec![n, m], out).expect("shape"));
            }
        }
    }
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&p, &q)| f(p, q)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("same shape")
}

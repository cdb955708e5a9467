//! Reverse-mode differentiation over a flat operation tape.
//!
//! Values are computed eagerly as nodes are appended, so the tape doubles as
//! the forward cache. Node inputs always precede their consumers, which makes
//! one reverse sweep sufficient for exact gradients of a scalar loss with
//! respect to every trainable parameter.

use std::rc::Rc;

use crate::{Error, Result};

use super::Matrix;

/// Log argument clamp. Keeps cross-entropy finite on saturated softmax rows.
const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

/// Sparse matrix held as a constant inside the tape, in triplet form.
/// Covers normalized-adjacency propagation in GCN forward passes.
#[derive(Debug)]
pub struct SparseConst {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    SparseMatMul(Rc<SparseConst>, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    AddRowBroadcast(NodeId, NodeId),
    MulElem(NodeId, NodeId),
    Scale(NodeId, f64),
    Relu(NodeId),
    SoftmaxCrossEntropy(NodeId, Rc<Vec<usize>>),
    MseRows(NodeId, NodeId),
    SqNorm(NodeId),
    MeanRows(NodeId),
}

struct Node {
    op: Op,
    value: Matrix,
    /// Cached softmax probabilities for the cross-entropy backward pass.
    aux: Option<Matrix>,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<NodeId>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id.0].value.get(0, 0)
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn push(&mut self, op: Op, value: Matrix) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            op,
            value,
            aux: None,
        });
        id
    }

    pub fn constant(&mut self, value: Matrix) -> NodeId {
        self.push(Op::Leaf, value)
    }

    /// A leaf marked trainable; gradients are reported in insertion order.
    pub fn parameter(&mut self, value: Matrix) -> NodeId {
        let id = self.push(Op::Leaf, value);
        self.params.push(id);
        id
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(Op::MatMul(a, b), v))
    }

    pub fn sparse_matmul(&mut self, s: Rc<SparseConst>, x: NodeId) -> Result<NodeId> {
        let xm = self.value(x);
        if s.cols != xm.rows() {
            return Err(Error::shape(format!(
                "sparse matmul {}x{} by {}x{}",
                s.rows,
                s.cols,
                xm.rows(),
                xm.cols()
            )));
        }
        let mut out = Matrix::zeros(s.rows, xm.cols());
        for &(i, j, w) in &s.entries {
            let src: Vec<f64> = xm.row(j).to_vec();
            for (o, v) in out.row_mut(i).iter_mut().zip(&src) {
                *o += w * v;
            }
        }
        Ok(self.push(Op::SparseMatMul(s, x), out))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).add(self.value(b))?;
        Ok(self.push(Op::Add(a, b), v))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).sub(self.value(b))?;
        Ok(self.push(Op::Sub(a, b), v))
    }

    /// Add a 1×c bias row to every row of an n×c matrix.
    pub fn add_row_broadcast(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId> {
        let am = self.value(a);
        let bm = self.value(bias);
        if bm.rows() != 1 || bm.cols() != am.cols() {
            return Err(Error::shape(format!(
                "row broadcast: {}x{} + {}x{}",
                am.rows(),
                am.cols(),
                bm.rows(),
                bm.cols()
            )));
        }
        let mut v = am.clone();
        for i in 0..v.rows() {
            for (o, b) in v.row_mut(i).iter_mut().zip(bm.row(0)) {
                *o += b;
            }
        }
        Ok(self.push(Op::AddRowBroadcast(a, bias), v))
    }

    pub fn mul_elem(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).mul_elem(self.value(b))?;
        Ok(self.push(Op::MulElem(a, b), v))
    }

    pub fn scale(&mut self, a: NodeId, s: f64) -> NodeId {
        let v = self.value(a).scale(s);
        self.push(Op::Scale(a, s), v)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let mut v = self.value(a).clone();
        for x in v.values_mut() {
            if *x < 0.0 {
                *x = 0.0;
            }
        }
        self.push(Op::Relu(a), v)
    }

    /// Mean over rows of `-log softmax(logits)[label]`, max-stabilized.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, labels: &[usize]) -> Result<NodeId> {
        let lm = self.value(logits);
        let (probs, loss) = softmax_xent_forward(lm, labels)?;
        let id = self.push(
            Op::SoftmaxCrossEntropy(logits, Rc::new(labels.to_vec())),
            Matrix::from_vec(1, 1, vec![loss])?,
        );
        self.nodes[id.0].aux = Some(probs);
        Ok(id)
    }

    /// `(1/n) Σ_i ‖a_i − b_i‖²` — mean over rows of squared row residuals.
    pub fn mse_rows(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let am = self.value(a);
        let bm = self.value(b);
        if am.shape() != bm.shape() {
            return Err(Error::shape("mse operands"));
        }
        let n = am.rows() as f64;
        let s: f64 = am
            .values()
            .iter()
            .zip(bm.values())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        Ok(self.push(Op::MseRows(a, b), Matrix::from_vec(1, 1, vec![s / n])?))
    }

    /// Squared L2 norm over all entries.
    pub fn sq_norm(&mut self, a: NodeId) -> NodeId {
        let s: f64 = self.value(a).values().iter().map(|x| x * x).sum();
        self.push(Op::SqNorm(a), Matrix::from_vec(1, 1, vec![s]).unwrap())
    }

    /// Mean over rows, producing a 1×c row.
    pub fn mean_rows(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).column_means();
        self.push(Op::MeanRows(a), v)
    }

    fn backward(&self, loss: NodeId) -> Result<Vec<Matrix>> {
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::from_vec(1, 1, vec![1.0])?);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            match &self.nodes[idx].op {
                Op::Leaf => {
                    grads[idx] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let da = g.matmul(&self.value(*b).transpose())?;
                    let db = self.value(*a).transpose().matmul(&g)?;
                    accumulate(&mut grads, *a, da)?;
                    accumulate(&mut grads, *b, db)?;
                }
                Op::SparseMatMul(s, x) => {
                    let mut dx = Matrix::zeros(s.cols, g.cols());
                    for &(i, j, w) in &s.entries {
                        let grow: Vec<f64> = g.row(i).to_vec();
                        for (o, v) in dx.row_mut(j).iter_mut().zip(&grow) {
                            *o += w * v;
                        }
                    }
                    accumulate(&mut grads, *x, dx)?;
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone())?;
                    accumulate(&mut grads, *b, g)?;
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, g.clone())?;
                    accumulate(&mut grads, *b, g.scale(-1.0))?;
                }
                Op::AddRowBroadcast(a, bias) => {
                    let mut db = Matrix::zeros(1, g.cols());
                    for i in 0..g.rows() {
                        for (o, v) in db.row_mut(0).iter_mut().zip(g.row(i)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads, *a, g)?;
                    accumulate(&mut grads, *bias, db)?;
                }
                Op::MulElem(a, b) => {
                    let da = g.mul_elem(self.value(*b))?;
                    let db = g.mul_elem(self.value(*a))?;
                    accumulate(&mut grads, *a, da)?;
                    accumulate(&mut grads, *b, db)?;
                }
                Op::Scale(a, s) => {
                    accumulate(&mut grads, *a, g.scale(*s))?;
                }
                Op::Relu(a) => {
                    let mut da = g;
                    for (d, v) in da.values_mut().iter_mut().zip(self.value(*a).values()) {
                        if *v <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    accumulate(&mut grads, *a, da)?;
                }
                Op::SoftmaxCrossEntropy(logits, labels) => {
                    let up = g.get(0, 0);
                    let probs = self.nodes[idx].aux.as_ref().expect("softmax cache");
                    let n = probs.rows() as f64;
                    let mut dl = probs.clone();
                    for (i, &y) in labels.iter().enumerate() {
                        let row = dl.row_mut(i);
                        row[y] -= 1.0;
                        for v in row {
                            *v *= up / n;
                        }
                    }
                    accumulate(&mut grads, *logits, dl)?;
                }
                Op::MseRows(a, b) => {
                    let up = g.get(0, 0);
                    let n = self.value(*a).rows() as f64;
                    let diff = self.value(*a).sub(self.value(*b))?;
                    let da = diff.scale(2.0 * up / n);
                    accumulate(&mut grads, *b, da.scale(-1.0))?;
                    accumulate(&mut grads, *a, da)?;
                }
                Op::SqNorm(a) => {
                    let up = g.get(0, 0);
                    accumulate(&mut grads, *a, self.value(*a).scale(2.0 * up))?;
                }
                Op::MeanRows(a) => {
                    let n = self.value(*a).rows();
                    let mut da = Matrix::zeros(n, g.cols());
                    for i in 0..n {
                        for (o, v) in da.row_mut(i).iter_mut().zip(g.row(0)) {
                            *o += v / n as f64;
                        }
                    }
                    accumulate(&mut grads, *a, da)?;
                }
            }
        }

        self.params
            .iter()
            .map(|p| {
                Ok(grads[p.0]
                    .take()
                    .unwrap_or_else(|| Matrix::zeros(self.value(*p).rows(), self.value(*p).cols())))
            })
            .collect()
    }
}

fn accumulate(grads: &mut [Option<Matrix>], id: NodeId, g: Matrix) -> Result<()> {
    match &mut grads[id.0] {
        Some(existing) => {
            *existing = existing.add(&g)?;
        }
        slot => *slot = Some(g),
    }
    Ok(())
}

/// Reverse-mode gradients of a scalar loss node with respect to every
/// trainable parameter, in parameter insertion order.
pub fn evaluate_with_gradients(tape: &Tape, loss: NodeId) -> Result<(f64, Vec<Matrix>)> {
    let lv = tape.value(loss);
    if lv.shape() != (1, 1) {
        return Err(Error::shape(format!(
            "loss node must be scalar, got {}x{}",
            lv.rows(),
            lv.cols()
        )));
    }
    for (i, node) in tape.nodes.iter().enumerate().take(loss.0 + 1) {
        if !node.value.is_finite() {
            return Err(Error::NonFinite { node: i });
        }
    }
    let grads = tape.backward(loss)?;
    Ok((tape.scalar(loss), grads))
}

fn softmax_xent_forward(logits: &Matrix, labels: &[usize]) -> Result<(Matrix, f64)> {
    if labels.len() != logits.rows() {
        return Err(Error::shape(format!(
            "{} labels for {} logit rows",
            labels.len(),
            logits.rows()
        )));
    }
    let k = logits.cols();
    for (i, &y) in labels.iter().enumerate() {
        if y >= k {
            return Err(Error::invalid(format!("label {y} out of range at row {i}")));
        }
    }
    let probs = softmax_rows(logits);
    let mut loss = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        loss -= probs.get(i, y).max(LOG_CLAMP).ln();
    }
    Ok((probs, loss / logits.rows() as f64))
}

/// Row-wise softmax with max-subtraction stabilization.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row {
            *v /= sum;
        }
    }
    out
}

/// Mean softmax cross-entropy as a plain function of (logits, labels).
pub fn softmax_cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<f64> {
    softmax_xent_forward(logits, labels).map(|(_, l)| l)
}

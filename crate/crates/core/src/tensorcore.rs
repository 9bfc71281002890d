//! Minimal dense-tensor math with tape-based reverse-mode automatic
//! differentiation.
//!
//! This is deliberately the smallest closure of operations the neural
//! tagger needs: 1-D/2-D tensors, matrix–vector products, elementwise
//! arithmetic, tanh/sigmoid/softmax, dropout, concatenation, indexing, and
//! an overflow-safe log-sum-exp. A [`Tape`] records each forward
//! operation; [`Tape::backward`] replays the records once in reverse and
//! accumulates adjoints for every node, leaves included.
//!
//! Tapes are single-threaded and cheap to create; the tagger builds one
//! per sentence.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::errors::{DeidError, Result};

/// Tensor shape: vector or row-major matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Vec(usize),
    Mat(usize, usize),
}

impl Shape {
    pub fn count(self) -> usize {
        match self {
            Shape::Vec(n) => n,
            Shape::Mat(r, c) => r * c,
        }
    }
}

/// A dense tensor of `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Shape,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn vector(data: Vec<f64>) -> Self {
        Tensor {
            shape: Shape::Vec(data.len()),
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix data length");
        Tensor {
            shape: Shape::Mat(rows, cols),
            data,
        }
    }

    pub fn zeros_vec(n: usize) -> Self {
        Tensor::vector(vec![0.0; n])
    }

    pub fn scalar(v: f64) -> Self {
        Tensor::vector(vec![v])
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

enum Op {
    Leaf,
    MatVec(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    OneMinus(NodeId),
    Concat(Vec<NodeId>),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Softmax(NodeId),
    Dropout {
        x: NodeId,
        mask: Vec<bool>,
        scale: f64,
    },
    Pick(NodeId, usize),
    Row(NodeId, usize),
    Col(NodeId, usize),
    Sum(NodeId),
    LogSumExp(NodeId),
}

struct Node {
    op: Op,
    value: Tensor,
}

/// Records a computation graph in topological (creation) order.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints for every node of a tape after a backward pass.
pub struct Gradients {
    grads: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> &[f64] {
        &self.grads[id.0]
    }
}

fn shape_err(op: &'static str, detail: String) -> DeidError {
    DeidError::ShapeMismatch { op, detail }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    fn vec_len(&self, id: NodeId, op: &'static str) -> Result<usize> {
        match self.value(id).shape {
            Shape::Vec(n) => Ok(n),
            Shape::Mat(r, c) => Err(shape_err(op, format!("expected vector, got {r}×{c}"))),
        }
    }

    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, value)
    }

    /// `y = M x` for a matrix leaf and vector input.
    pub fn matvec(&mut self, m: NodeId, x: NodeId) -> Result<NodeId> {
        let (rows, cols) = match self.value(m).shape {
            Shape::Mat(r, c) => (r, c),
            Shape::Vec(n) => return Err(shape_err("matvec", format!("matrix is a {n}-vector"))),
        };
        let n = self.vec_len(x, "matvec")?;
        if n != cols {
            return Err(shape_err("matvec", format!("{rows}×{cols} times {n}-vector")));
        }
        let mv = &self.value(m).data;
        let xv = &self.value(x).data;
        let mut out = vec![0.0; rows];
        for i in 0..rows {
            let row = &mv[i * cols..(i + 1) * cols];
            out[i] = row.iter().zip(xv).map(|(a, b)| a * b).sum();
        }
        Ok(self.push(Op::MatVec(m, x), Tensor::vector(out)))
    }

    fn zip_elementwise(
        &mut self,
        a: NodeId,
        b: NodeId,
        op_name: &'static str,
        f: impl Fn(f64, f64) -> f64,
        op: impl Fn(NodeId, NodeId) -> Op,
    ) -> Result<NodeId> {
        let (sa, sb) = (self.value(a).shape, self.value(b).shape);
        if sa != sb {
            return Err(shape_err(op_name, format!("{sa:?} vs {sb:?}")));
        }
        let data = self
            .value(a)
            .data
            .iter()
            .zip(&self.value(b).data)
            .map(|(&x, &y)| f(x, y))
            .collect();
        let out = Tensor { shape: sa, data };
        Ok(self.push(op(a, b), out))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip_elementwise(a, b, "add", |x, y| x + y, Op::Add)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip_elementwise(a, b, "sub", |x, y| x - y, Op::Sub)
    }

    /// Pointwise (Hadamard) product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip_elementwise(a, b, "mul", |x, y| x * y, Op::Mul)
    }

    pub fn scale(&mut self, x: NodeId, k: f64) -> NodeId {
        let t = self.value(x);
        let out = Tensor {
            shape: t.shape,
            data: t.data.iter().map(|v| v * k).collect(),
        };
        self.push(Op::Scale(x, k), out)
    }

    /// `y = 1 − x` elementwise (the coupled forget gate).
    pub fn one_minus(&mut self, x: NodeId) -> NodeId {
        let t = self.value(x);
        let out = Tensor {
            shape: t.shape,
            data: t.data.iter().map(|v| 1.0 - v).collect(),
        };
        self.push(Op::OneMinus(x), out)
    }

    /// Concatenates vectors in order.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let mut data = Vec::new();
        for &p in parts {
            self.vec_len(p, "concat")?;
            data.extend_from_slice(&self.value(p).data);
        }
        Ok(self.push(Op::Concat(parts.to_vec()), Tensor::vector(data)))
    }

    fn map_elementwise(
        &mut self,
        x: NodeId,
        f: impl Fn(f64) -> f64,
        op: impl Fn(NodeId) -> Op,
    ) -> NodeId {
        let t = self.value(x);
        let out = Tensor {
            shape: t.shape,
            data: t.data.iter().map(|&v| f(v)).collect(),
        };
        self.push(op(x), out)
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        self.map_elementwise(x, f64::tanh, Op::Tanh)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        self.map_elementwise(x, |v| 1.0 / (1.0 + (-v).exp()), Op::Sigmoid)
    }

    /// Softmax of a vector, shifted by its max.
    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId> {
        self.vec_len(x, "softmax")?;
        let xs = &self.value(x).data;
        let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = xs.iter().map(|&v| (v - m).exp()).collect();
        let z: f64 = exps.iter().sum();
        let out = Tensor::vector(exps.into_iter().map(|e| e / z).collect());
        Ok(self.push(Op::Softmax(x), out))
    }

    /// Inverted dropout with a freshly drawn Bernoulli(1 − p) mask.
    /// Identity when `train` is false.
    pub fn dropout(
        &mut self,
        x: NodeId,
        p: f64,
        rng: &mut ChaCha8Rng,
        train: bool,
    ) -> Result<NodeId> {
        if !(0.0..1.0).contains(&p) {
            return Err(DeidError::InvalidArgument(format!(
                "dropout probability {p} outside [0, 1)"
            )));
        }
        if !train || p == 0.0 {
            return Ok(x);
        }
        let n = self.value(x).len();
        let mask: Vec<bool> = (0..n).map(|_| rng.gen_bool(1.0 - p)).collect();
        self.dropout_with_mask(x, &mask, p)
    }

    /// Dropout with an explicit mask (used to hold the mask fixed during
    /// gradient checks).
    pub fn dropout_with_mask(&mut self, x: NodeId, mask: &[bool], p: f64) -> Result<NodeId> {
        if !(0.0..1.0).contains(&p) {
            return Err(DeidError::InvalidArgument(format!(
                "dropout probability {p} outside [0, 1)"
            )));
        }
        let t = self.value(x);
        if mask.len() != t.len() {
            return Err(shape_err("dropout", "mask length".into()));
        }
        let scale = 1.0 / (1.0 - p);
        let out = Tensor {
            shape: t.shape,
            data: t
                .data
                .iter()
                .zip(mask)
                .map(|(&v, &keep)| if keep { v * scale } else { 0.0 })
                .collect(),
        };
        Ok(self.push(
            Op::Dropout {
                x,
                mask: mask.to_vec(),
                scale,
            },
            out,
        ))
    }

    /// One element of a vector, as a scalar (length-1 vector).
    pub fn pick(&mut self, x: NodeId, index: usize) -> Result<NodeId> {
        let n = self.vec_len(x, "pick")?;
        if index >= n {
            return Err(shape_err("pick", format!("index {index} of {n}")));
        }
        let v = self.value(x).data[index];
        Ok(self.push(Op::Pick(x, index), Tensor::scalar(v)))
    }

    /// One row of a matrix, as a vector.
    pub fn row(&mut self, m: NodeId, row: usize) -> Result<NodeId> {
        let (r, c) = match self.value(m).shape {
            Shape::Mat(r, c) => (r, c),
            Shape::Vec(_) => return Err(shape_err("row", "not a matrix".into())),
        };
        if row >= r {
            return Err(shape_err("row", format!("row {row} of {r}")));
        }
        let data = self.value(m).data[row * c..(row + 1) * c].to_vec();
        Ok(self.push(Op::Row(m, row), Tensor::vector(data)))
    }

    /// One column of a matrix, as a vector.
    pub fn col(&mut self, m: NodeId, col: usize) -> Result<NodeId> {
        let (r, c) = match self.value(m).shape {
            Shape::Mat(r, c) => (r, c),
            Shape::Vec(_) => return Err(shape_err("col", "not a matrix".into())),
        };
        if col >= c {
            return Err(shape_err("col", format!("column {col} of {c}")));
        }
        let data = (0..r).map(|i| self.value(m).data[i * c + col]).collect();
        Ok(self.push(Op::Col(m, col), Tensor::vector(data)))
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let s: f64 = self.value(x).data.iter().sum();
        self.push(Op::Sum(x), Tensor::scalar(s))
    }

    /// Overflow-safe log-sum-exp of a vector, as a scalar.
    pub fn log_sum_exp(&mut self, x: NodeId) -> Result<NodeId> {
        self.vec_len(x, "log_sum_exp")?;
        let xs = &self.value(x).data;
        let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let v = if m == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            m + xs.iter().map(|&v| (v - m).exp()).sum::<f64>().ln()
        };
        Ok(self.push(Op::LogSumExp(x), Tensor::scalar(v)))
    }

    /// Reverse pass from a scalar output; returns adjoints for every node.
    pub fn backward(&self, output: NodeId) -> Result<Gradients> {
        if self.value(output).len() != 1 {
            return Err(shape_err("backward", "output is not a scalar".into()));
        }
        let mut grads: Vec<Vec<f64>> =
            self.nodes.iter().map(|n| vec![0.0; n.value.len()]).collect();
        grads[output.0][0] = 1.0;
        for idx in (0..self.nodes.len()).rev() {
            let g = std::mem::take(&mut grads[idx]);
            if g.iter().all(|&v| v == 0.0) {
                grads[idx] = g;
                continue;
            }
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::MatVec(m, x) => {
                    let (rows, cols) = match self.value(*m).shape {
                        Shape::Mat(r, c) => (r, c),
                        _ => unreachable!(),
                    };
                    let xv = self.value(*x).data.clone();
                    let mv = &self.nodes[m.0].value.data;
                    let mut gx = vec![0.0; cols];
                    for i in 0..rows {
                        for j in 0..cols {
                            gx[j] += mv[i * cols + j] * g[i];
                        }
                    }
                    for i in 0..rows {
                        for j in 0..cols {
                            grads[m.0][i * cols + j] += g[i] * xv[j];
                        }
                    }
                    for (gj, v) in grads[x.0].iter_mut().zip(gx) {
                        *gj += v;
                    }
                }
                Op::Add(a, b) => {
                    for (ga, &gi) in grads[a.0].iter_mut().zip(&g) {
                        *ga += gi;
                    }
                    for (gb, &gi) in grads[b.0].iter_mut().zip(&g) {
                        *gb += gi;
                    }
                }
                Op::Sub(a, b) => {
                    for (ga, &gi) in grads[a.0].iter_mut().zip(&g) {
                        *ga += gi;
                    }
                    for (gb, &gi) in grads[b.0].iter_mut().zip(&g) {
                        *gb -= gi;
                    }
                }
                Op::Mul(a, b) => {
                    let av = self.value(*a).data.clone();
                    let bv = self.value(*b).data.clone();
                    for ((ga, &gi), &b_i) in grads[a.0].iter_mut().zip(&g).zip(&bv) {
                        *ga += gi * b_i;
                    }
                    for ((gb, &gi), &a_i) in grads[b.0].iter_mut().zip(&g).zip(&av) {
                        *gb += gi * a_i;
                    }
                }
                Op::Scale(x, k) => {
                    for (gx, &gi) in grads[x.0].iter_mut().zip(&g) {
                        *gx += k * gi;
                    }
                }
                Op::OneMinus(x) => {
                    for (gx, &gi) in grads[x.0].iter_mut().zip(&g) {
                        *gx -= gi;
                    }
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let n = self.value(p).len();
                        for (gp, &gi) in grads[p.0].iter_mut().zip(&g[off..off + n]) {
                            *gp += gi;
                        }
                        off += n;
                    }
                }
                Op::Tanh(x) => {
                    let y = &node.value.data;
                    for ((gx, &gi), &yi) in grads[x.0].iter_mut().zip(&g).zip(y) {
                        *gx += gi * (1.0 - yi * yi);
                    }
                }
                Op::Sigmoid(x) => {
                    let y = &node.value.data;
                    for ((gx, &gi), &yi) in grads[x.0].iter_mut().zip(&g).zip(y) {
                        *gx += gi * yi * (1.0 - yi);
                    }
                }
                Op::Softmax(x) => {
                    let y = &node.value.data;
                    let dot: f64 = g.iter().zip(y).map(|(gi, yi)| gi * yi).sum();
                    for ((gx, &gi), &yi) in grads[x.0].iter_mut().zip(&g).zip(y) {
                        *gx += yi * (gi - dot);
                    }
                }
                Op::Dropout { x, mask, scale } => {
                    for ((gx, &gi), &keep) in grads[x.0].iter_mut().zip(&g).zip(mask) {
                        if keep {
                            *gx += gi * scale;
                        }
                    }
                }
                Op::Pick(x, index) => {
                    grads[x.0][*index] += g[0];
                }
                Op::Row(m, row) => {
                    let c = g.len();
                    for (j, &gi) in g.iter().enumerate() {
                        grads[m.0][row * c + j] += gi;
                    }
                }
                Op::Col(m, col) => {
                    let c = match self.value(*m).shape {
                        Shape::Mat(_, c) => c,
                        _ => unreachable!(),
                    };
                    for (i, &gi) in g.iter().enumerate() {
                        grads[m.0][i * c + col] += gi;
                    }
                }
                Op::Sum(x) => {
                    for gx in grads[x.0].iter_mut() {
                        *gx += g[0];
                    }
                }
                Op::LogSumExp(x) => {
                    let xs = &self.value(*x).data;
                    let out = node.value.data[0];
                    for (gx, &xi) in grads[x.0].iter_mut().zip(xs) {
                        *gx += g[0] * (xi - out).exp();
                    }
                }
            }
            grads[idx] = g;
        }
        Ok(Gradients { grads })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut rng = rng(1);
        for _ in 0..50 {
            let n = rng.gen_range(1..8);
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-30.0..30.0)).collect();
            let mut tape = Tape::new();
            let x = tape.leaf(Tensor::vector(v));
            let s = tape.softmax(x).unwrap();
            let sum: f64 = tape.value(s).data.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lse_of_two_equal_values() {
        let mut tape = Tape::new();
        for a in [-700.0, -3.0, 0.0, 5.5, 700.0] {
            let x = tape.leaf(Tensor::vector(vec![a, a]));
            let y = tape.log_sum_exp(x).unwrap();
            assert!((tape.value(y).data[0] - (a + 2.0f64.ln())).abs() < 1e-12, "a={a}");
        }
    }

    #[test]
    fn lse_shift_identity() {
        let mut rng = rng(2);
        for _ in 0..30 {
            let n = rng.gen_range(1..6);
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let k = rng.gen_range(-100.0..100.0);
            let shifted: Vec<f64> = v.iter().map(|x| x + k).collect();
            let mut tape = Tape::new();
            let a = tape.leaf(Tensor::vector(v));
            let b = tape.leaf(Tensor::vector(shifted));
            let la = tape.log_sum_exp(a).unwrap();
            let lb = tape.log_sum_exp(b).unwrap();
            let diff = tape.value(lb).data[0] - tape.value(la).data[0];
            assert!((diff - k).abs() < 1e-12);
        }
    }

    #[test]
    fn dropout_p_zero_is_identity() {
        let mut tape = Tape::new();
        let mut r = rng(3);
        let x = tape.leaf(Tensor::vector(vec![1.0, -2.0, 3.0]));
        let y = tape.dropout(x, 0.0, &mut r, true).unwrap();
        assert_eq!(y, x);
        let z = tape.dropout(x, 0.7, &mut r, false).unwrap();
        assert_eq!(z, x);
    }

    #[test]
    fn dropout_rejects_bad_p() {
        let mut tape = Tape::new();
        let mut r = rng(4);
        let x = tape.leaf(Tensor::vector(vec![1.0]));
        assert!(tape.dropout(x, 1.0, &mut r, true).is_err());
        assert!(tape.dropout(x, -0.1, &mut r, true).is_err());
    }

    #[test]
    fn backward_of_sum_is_ones() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![3.0, -1.0, 2.5]));
        let s = tape.sum(x);
        let grads = tape.backward(s).unwrap();
        assert_eq!(grads.get(x), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn backward_of_lse_is_softmax() {
        let mut tape = Tape::new();
        let v = vec![0.3, -1.2, 2.0, 0.0];
        let x = tape.leaf(Tensor::vector(v.clone()));
        let l = tape.log_sum_exp(x).unwrap();
        let sm = tape.softmax(x).unwrap();
        let grads = tape.backward(l).unwrap();
        for (g, s) in grads.get(x).iter().zip(&tape.value(sm).data) {
            assert!((g - s).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_requires_scalar_output() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![1.0, 2.0]));
        assert!(tape.backward(x).is_err());
    }

    #[test]
    fn shape_mismatches_are_rejected() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::vector(vec![1.0, 2.0]));
        let b = tape.leaf(Tensor::vector(vec![1.0, 2.0, 3.0]));
        assert!(tape.add(a, b).is_err());
        let m = tape.leaf(Tensor::matrix(2, 2, vec![1.0; 4]));
        assert!(tape.matvec(m, b).is_err());
        assert!(tape.pick(a, 5).is_err());
    }

    /// Central finite differences on a scalar-valued graph builder.
    fn check_gradient<F>(seed: u64, n_inputs: usize, build: F)
    where
        F: Fn(&mut Tape, &[NodeId]) -> NodeId,
    {
        let mut r = rng(seed);
        let inputs: Vec<Vec<f64>> = (0..n_inputs)
            .map(|_| (0..4).map(|_| r.gen_range(-1.5..1.5)).collect())
            .collect();
        let eval = |perturb: Option<(usize, usize, f64)>| -> (f64, Option<Gradients>, Vec<NodeId>) {
            let mut tape = Tape::new();
            let ids: Vec<NodeId> = inputs
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let mut v = v.clone();
                    if let Some((pi, pj, eps)) = perturb {
                        if pi == i {
                            v[pj] += eps;
                        }
                    }
                    tape.leaf(Tensor::vector(v))
                })
                .collect();
            let out = build(&mut tape, &ids);
            let v = tape.value(out).data[0];
            let g = tape.backward(out).ok();
            (v, g, ids)
        };
        let (_, grads, ids) = eval(None);
        let grads = grads.unwrap();
        let eps = 1e-5;
        #[allow(clippy::needless_range_loop)]
        for i in 0..n_inputs {
            for j in 0..4 {
                let (fp, _, _) = eval(Some((i, j, eps)));
                let (fm, _, _) = eval(Some((i, j, -eps)));
                let fd = (fp - fm) / (2.0 * eps);
                let an = grads.get(ids[i])[j];
                let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1.0);
                assert!(rel < 1e-4, "input {i}[{j}]: analytic {an} vs fd {fd}");
            }
        }
    }

    #[test]
    fn gradcheck_elementwise_chain() {
        check_gradient(10, 2, |tape, ids| {
            let t = tape.tanh(ids[0]);
            let s = tape.sigmoid(ids[1]);
            let m = tape.mul(t, s).unwrap();
            let sm = tape.softmax(m).unwrap();
            tape.log_sum_exp(sm).unwrap()
        });
    }

    /// FD check over a graph with a matrix leaf: perturbs every entry of
    /// both leaves directly.
    fn check_matrix_graph<F>(seed: u64, f: F)
    where
        F: Fn(&mut Tape, NodeId, NodeId) -> NodeId,
    {
        let mut r = rng(seed);
        let m0: Vec<f64> = (0..4).map(|_| r.gen_range(-1.5..1.5)).collect();
        let x0: Vec<f64> = (0..2).map(|_| r.gen_range(-1.5..1.5)).collect();
        let eval = |m_data: &[f64], x_data: &[f64]| -> (f64, Vec<f64>, Vec<f64>) {
            let mut tape = Tape::new();
            let m = tape.leaf(Tensor::matrix(2, 2, m_data.to_vec()));
            let x = tape.leaf(Tensor::vector(x_data.to_vec()));
            let out = f(&mut tape, m, x);
            let v = tape.value(out).data[0];
            let g = tape.backward(out).unwrap();
            (v, g.get(m).to_vec(), g.get(x).to_vec())
        };
        let (_, gm, gx) = eval(&m0, &x0);
        let eps = 1e-5;
        for k in 0..4 {
            let mut p = m0.clone();
            p[k] += eps;
            let mut q = m0.clone();
            q[k] -= eps;
            let fd = (eval(&p, &x0).0 - eval(&q, &x0).0) / (2.0 * eps);
            let rel = (gm[k] - fd).abs() / gm[k].abs().max(fd.abs()).max(1.0);
            assert!(rel < 1e-4, "m[{k}]: analytic {} vs fd {fd}", gm[k]);
        }
        for k in 0..2 {
            let mut p = x0.clone();
            p[k] += eps;
            let mut q = x0.clone();
            q[k] -= eps;
            let fd = (eval(&m0, &p).0 - eval(&m0, &q).0) / (2.0 * eps);
            let rel = (gx[k] - fd).abs() / gx[k].abs().max(fd.abs()).max(1.0);
            assert!(rel < 1e-4, "x[{k}]: analytic {} vs fd {fd}", gx[k]);
        }
    }

    #[test]
    fn gradcheck_matvec_and_concat() {
        check_matrix_graph(11, |tape, m, x| {
            let mv = tape.matvec(m, x).unwrap();
            let cat = tape.concat(&[mv, x]).unwrap();
            let t = tape.tanh(cat);
            tape.sum(t)
        });
    }

    #[test]
    fn gradcheck_coupled_gate_shape() {
        check_gradient(12, 3, |tape, ids| {
            let i = tape.sigmoid(ids[0]);
            let f = tape.one_minus(i);
            let a = tape.mul(f, ids[1]).unwrap();
            let z = tape.tanh(ids[2]);
            let b = tape.mul(i, z).unwrap();
            let c = tape.add(a, b).unwrap();
            let o = tape.scale(c, 0.5);
            tape.sum(o)
        });
    }

    #[test]
    fn gradcheck_dropout_with_fixed_mask() {
        check_gradient(13, 1, |tape, ids| {
            let mask = [true, false, true, true];
            let d = tape.dropout_with_mask(ids[0], &mask, 0.5).unwrap();
            let t = tape.tanh(d);
            tape.sum(t)
        });
    }

    #[test]
    fn gradcheck_pick_row_col_sub() {
        check_matrix_graph(14, |tape, m, x| {
            let r = tape.row(m, 1).unwrap();
            let c = tape.col(m, 0).unwrap();
            let d = tape.sub(r, c).unwrap();
            let p = tape.pick(x, 1).unwrap();
            let s = tape.sum(d);
            let q = tape.mul(s, p).unwrap();
            tape.log_sum_exp(q).unwrap()
        });
    }

    #[test]
    fn gradcheck_random_composite_graphs() {
        // random DAGs of depth <= 6 over the primitive set
        for seed in 20..40 {
            check_gradient(seed, 2, |tape, ids| {
                let mut r = rng(seed * 7 + 1);
                let mut cur = ids[0];
                for _ in 0..r.gen_range(1..=6) {
                    cur = match r.gen_range(0..6) {
                        0 => tape.tanh(cur),
                        1 => tape.sigmoid(cur),
                        2 => tape.softmax(cur).unwrap(),
                        3 => tape.add(cur, ids[1]).unwrap(),
                        4 => tape.mul(cur, ids[1]).unwrap(),
                        _ => tape.scale(cur, r.gen_range(-1.5..1.5)),
                    };
                }
                tape.log_sum_exp(cur).unwrap()
            });
        }
    }
}

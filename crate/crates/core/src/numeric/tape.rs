//! Reverse-mode differentiation over a per-step tape.
//!
//! Every operation appends a node whose inputs are earlier nodes, so the tape
//! is topologically ordered by construction and `backward` is a single reverse
//! sweep. A fresh tape is built for each training step.

use crate::error::{Error, Result};

use super::matrix::{log_sigmoid, sigmoid, Matrix};

/// Variance epsilon used by [`Tape::layer_norm`].
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Constant,
    Param(usize),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddRow(Var, Var),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    LogSigmoid(Var),
    Square(Var),
    SoftmaxRows(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        normed: Matrix,
        inv_std: Vec<f64>,
    },
    Transpose(Var),
    SliceCols {
        x: Var,
        start: usize,
    },
    ConcatCols(Vec<Var>),
    PairwiseSum(Var, Var),
    Reshape(Var),
    MaskDiagonal(Var),
    Sum(Var),
    MeanRows(Var),
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
}

/// Ordered record of forward computations.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
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

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Input that receives no parameter gradient.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Constant)
    }

    /// Leaf tied to parameter slot `id`; its gradient is reported under that id.
    pub fn param(&mut self, id: usize, value: &Matrix) -> Var {
        self.push(value.clone(), Op::Param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).add(self.value(b))?;
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).sub(self.value(b))?;
        Ok(self.push(v, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).hadamard(self.value(b))?;
        Ok(self.push(v, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.value(a).scale(s);
        self.push(v, Op::Scale(a, s))
    }

    /// `x + 1·b` where `b` is a `1×cols` row broadcast over every row of `x`.
    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(b));
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return Err(Error::Shape {
                op: "add_row",
                lhs: xv.shape(),
                rhs: bv.shape(),
            });
        }
        let mut out = xv.clone();
        for i in 0..out.rows() {
            for (o, &bb) in out.row_mut(i).iter_mut().zip(bv.data()) {
                *o += bb;
            }
        }
        Ok(self.push(out, Op::AddRow(x, b)))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub fn log_sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(log_sigmoid);
        self.push(v, Op::LogSigmoid(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x * x);
        self.push(v, Op::Square(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let v = self.value(a).softmax_rows();
        self.push(v, Op::SoftmaxRows(a))
    }

    /// Per-row normalization to zero mean and unit variance followed by the
    /// affine map `gain ⊙ · + bias`; `gain` and `bias` are `1×cols`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        let xv = self.value(x);
        let (rows, cols) = xv.shape();
        for p in [gain, bias] {
            if self.shape(p) != (1, cols) {
                return Err(Error::Shape {
                    op: "layer_norm",
                    lhs: (rows, cols),
                    rhs: self.shape(p),
                });
            }
        }
        let mut normed = Matrix::zeros(rows, cols);
        let mut inv_std = Vec::with_capacity(rows);
        for i in 0..rows {
            let row = xv.row(i);
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            for (o, &v) in normed.row_mut(i).iter_mut().zip(row) {
                *o = (v - mean) * is;
            }
            inv_std.push(is);
        }
        let (g, b) = (self.value(gain), self.value(bias));
        let mut out = normed.clone();
        for i in 0..rows {
            for ((o, &gg), &bb) in out.row_mut(i).iter_mut().zip(g.data()).zip(b.data()) {
                *o = *o * gg + bb;
            }
        }
        Ok(self.push(
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                normed,
                inv_std,
            },
        ))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).transpose();
        self.push(v, Op::Transpose(a))
    }

    /// Columns `start..start + len` of `x`.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xv = self.value(x);
        if start + len > xv.cols() {
            return Err(Error::Shape {
                op: "slice_cols",
                lhs: xv.shape(),
                rhs: (start, len),
            });
        }
        let v = Matrix::from_fn(xv.rows(), len, |i, j| xv.get(i, start + j));
        Ok(self.push(v, Op::SliceCols { x, start }))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts.first().map_or(0, |&p| self.shape(p).0);
        let mut cols = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.0 != rows {
                return Err(Error::Shape {
                    op: "concat_cols",
                    lhs: (rows, cols),
                    rhs: s,
                });
            }
            cols += s.1;
        }
        let mut out = Matrix::zeros(rows, cols);
        let mut offset = 0;
        for &p in parts {
            let pv = &self.nodes[p.0].value;
            for i in 0..rows {
                out.row_mut(i)[offset..offset + pv.cols()].copy_from_slice(pv.row(i));
            }
            offset += pv.cols();
        }
        Ok(self.push(out, Op::ConcatCols(parts.to_vec())))
    }

    /// For `a, b` both `n×h`, the `n²×h` matrix whose row `i·n + j` is `a_i + b_j`.
    pub fn pairwise_sum(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        av.check_same(bv, "pairwise_sum")?;
        let (n, h) = av.shape();
        let mut out = Matrix::zeros(n * n, h);
        for i in 0..n {
            for j in 0..n {
                for ((o, &x), &y) in out.row_mut(i * n + j).iter_mut().zip(av.row(i)).zip(bv.row(j)) {
                    *o = x + y;
                }
            }
        }
        Ok(self.push(out, Op::PairwiseSum(a, b)))
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let av = self.value(a);
        if av.len() != rows * cols {
            return Err(Error::Shape {
                op: "reshape",
                lhs: av.shape(),
                rhs: (rows, cols),
            });
        }
        let v = Matrix::from_vec(rows, cols, av.data().to_vec())?;
        Ok(self.push(v, Op::Reshape(a)))
    }

    /// Replaces the diagonal of a square matrix with `fill`; no gradient flows
    /// through the replaced entries.
    pub fn mask_diagonal(&mut self, a: Var, fill: f64) -> Result<Var> {
        let av = self.value(a);
        if av.rows() != av.cols() {
            return Err(Error::Shape {
                op: "mask_diagonal",
                lhs: av.shape(),
                rhs: (av.cols(), av.rows()),
            });
        }
        let mut v = av.clone();
        for i in 0..v.rows() {
            v.set(i, i, fill);
        }
        Ok(self.push(v, Op::MaskDiagonal(a)))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Matrix::scalar(self.value(a).sum());
        self.push(v, Op::Sum(a))
    }

    /// Column means: `n×c → 1×c`.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let n = av.rows() as f64;
        let v = Matrix::from_fn(1, av.cols(), |_, j| (0..av.rows()).map(|i| av.get(i, j)).sum::<f64>() / n);
        self.push(v, Op::MeanRows(a))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.shape(loss) != (1, 1) {
            return Err(Error::usage(format!(
                "backward requires a 1x1 loss, got {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Constant | Op::Param(_) => {
                    // Leaves keep their gradient for the caller.
                    grads[idx] = Some(g);
                }
                Op::MatMul(a, b) => {
                    let av = self.value(*a);
                    let bv = self.value(*b);
                    accumulate(&mut grads, *a, g.matmul_t(bv)?)?;
                    accumulate(&mut grads, *b, av.t_matmul(&g)?)?;
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone())?;
                    accumulate(&mut grads, *b, g.clone())?;
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, g.clone())?;
                    accumulate(&mut grads, *b, g.scale(-1.0))?;
                }
                Op::Mul(a, b) => {
                    accumulate(&mut grads, *a, g.hadamard(self.value(*b))?)?;
                    accumulate(&mut grads, *b, g.hadamard(self.value(*a))?)?;
                }
                Op::Scale(a, s) => accumulate(&mut grads, *a, g.scale(*s))?,
                Op::AddRow(x, b) => {
                    let db = Matrix::from_fn(1, g.cols(), |_, j| (0..g.rows()).map(|i| g.get(i, j)).sum());
                    accumulate(&mut grads, *b, db)?;
                    accumulate(&mut grads, *x, g.clone())?;
                }
                Op::Tanh(a) => {
                    let d = g.zip_map(&node.value, "tanh'", |gg, y| gg * (1.0 - y * y))?;
                    accumulate(&mut grads, *a, d)?;
                }
                Op::Sigmoid(a) => {
                    let d = g.zip_map(&node.value, "sigmoid'", |gg, y| gg * y * (1.0 - y))?;
                    accumulate(&mut grads, *a, d)?;
                }
                Op::Relu(a) => {
                    let d = g.zip_map(self.value(*a), "relu'", |gg, x| if x > 0.0 { gg } else { 0.0 })?;
                    accumulate(&mut grads, *a, d)?;
                }
                Op::LogSigmoid(a) => {
                    let d = g.zip_map(self.value(*a), "log_sigmoid'", |gg, x| gg * sigmoid(-x))?;
                    accumulate(&mut grads, *a, d)?;
                }
                Op::Square(a) => {
                    let d = g.zip_map(self.value(*a), "square'", |gg, x| 2.0 * gg * x)?;
                    accumulate(&mut grads, *a, d)?;
                }
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let mut d = Matrix::zeros(y.rows(), y.cols());
                    for i in 0..y.rows() {
                        let dot: f64 = g.row(i).iter().zip(y.row(i)).map(|(a, b)| a * b).sum();
                        for ((o, &gg), &yy) in d.row_mut(i).iter_mut().zip(g.row(i)).zip(y.row(i)) {
                            *o = yy * (gg - dot);
                        }
                    }
                    accumulate(&mut grads, *a, d)?;
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    normed,
                    inv_std,
                } => {
                    let gv = self.value(*gain);
                    let (rows, cols) = normed.shape();
                    let mut dgain = Matrix::zeros(1, cols);
                    let mut dbias = Matrix::zeros(1, cols);
                    let mut dx = Matrix::zeros(rows, cols);
                    let n = cols as f64;
                    for i in 0..rows {
                        let gr = g.row(i);
                        let nr = normed.row(i);
                        let mut dn = vec![0.0; cols];
                        for j in 0..cols {
                            dgain.data_mut()[j] += gr[j] * nr[j];
                            dbias.data_mut()[j] += gr[j];
                            dn[j] = gr[j] * gv.data()[j];
                        }
                        let sum_dn: f64 = dn.iter().sum();
                        let sum_dn_n: f64 = dn.iter().zip(nr).map(|(a, b)| a * b).sum();
                        for (j, o) in dx.row_mut(i).iter_mut().enumerate() {
                            *o = inv_std[i] / n * (n * dn[j] - sum_dn - nr[j] * sum_dn_n);
                        }
                    }
                    accumulate(&mut grads, *gain, dgain)?;
                    accumulate(&mut grads, *bias, dbias)?;
                    accumulate(&mut grads, *x, dx)?;
                }
                Op::Transpose(a) => accumulate(&mut grads, *a, g.transpose())?,
                Op::SliceCols { x, start } => {
                    let (rows, cols) = self.shape(*x);
                    let mut d = Matrix::zeros(rows, cols);
                    for i in 0..rows {
                        d.row_mut(i)[*start..*start + g.cols()].copy_from_slice(g.row(i));
                    }
                    accumulate(&mut grads, *x, d)?;
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let (rows, cols) = self.shape(p);
                        let d = Matrix::from_fn(rows, cols, |i, j| g.get(i, offset + j));
                        accumulate(&mut grads, p, d)?;
                        offset += cols;
                    }
                }
                Op::PairwiseSum(a, b) => {
                    let (n, h) = self.shape(*a);
                    let mut da = Matrix::zeros(n, h);
                    let mut db = Matrix::zeros(n, h);
                    for i in 0..n {
                        for j in 0..n {
                            let gr = g.row(i * n + j);
                            for k in 0..h {
                                da.row_mut(i)[k] += gr[k];
                                db.row_mut(j)[k] += gr[k];
                            }
                        }
                    }
                    accumulate(&mut grads, *a, da)?;
                    accumulate(&mut grads, *b, db)?;
                }
                Op::Reshape(a) => {
                    let (rows, cols) = self.shape(*a);
                    accumulate(&mut grads, *a, Matrix::from_vec(rows, cols, g.into_vec())?)?;
                }
                Op::MaskDiagonal(a) => {
                    let mut d = g;
                    for i in 0..d.rows() {
                        d.set(i, i, 0.0);
                    }
                    accumulate(&mut grads, *a, d)?;
                }
                Op::Sum(a) => {
                    let (rows, cols) = self.shape(*a);
                    accumulate(&mut grads, *a, Matrix::filled(rows, cols, g.data()[0]))?;
                }
                Op::MeanRows(a) => {
                    let (rows, cols) = self.shape(*a);
                    let inv = 1.0 / rows as f64;
                    accumulate(&mut grads, *a, Matrix::from_fn(rows, cols, |_, j| g.get(0, j) * inv))?;
                }
            }
        }

        let params = self
            .nodes
            .iter()
            .enumerate()
            .take(loss.0 + 1)
            .filter_map(|(i, n)| match n.op {
                Op::Param(id) => Some((id, Var(i))),
                _ => None,
            })
            .collect();
        Ok(Gradients { grads, params })
    }
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) -> Result<()> {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => {
            *slot = Some(g);
            Ok(())
        }
    }
}

/// Result of [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
    params: Vec<(usize, Var)>,
}

impl Gradients {
    /// Gradient at a leaf (constant or parameter) node, if the loss depends on it.
    pub fn leaf(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient per parameter slot, summed over every registration of the slot.
    /// Slots the loss does not depend on get zeros shaped like `shapes[id]`.
    pub fn for_params(&self, shapes: &[(usize, usize)]) -> Result<Vec<Matrix>> {
        self.for_param_range(0, shapes)
    }

    /// Like [`for_params`](Self::for_params) for slots `base..base + shapes.len()`;
    /// slots outside the range are ignored.
    pub fn for_param_range(&self, base: usize, shapes: &[(usize, usize)]) -> Result<Vec<Matrix>> {
        let mut out: Vec<Matrix> = shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect();
        for &(id, var) in &self.params {
            if id < base || id >= base + shapes.len() {
                continue;
            }
            if let Some(g) = self.leaf(var) {
                out[id - base].add_assign(g)?;
            }
        }
        Ok(out)
    }
}

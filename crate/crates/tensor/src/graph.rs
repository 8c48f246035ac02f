//! Reverse-mode tape.
//!
//! Every vector-Jacobian product is itself recorded as graph operations, so a
//! gradient returned by [`Graph::grad`] is an ordinary [`Var`] that can be fed
//! into further computation and differentiated again. This is what makes
//! penalties on input gradients trainable.

use std::rc::Rc;

use crate::mat::{gemm_into, Mat};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Sentinel index in gather maps meaning "write zero".
pub const GATHER_ZERO: u32 = u32::MAX;

#[derive(Clone)]
enum Op {
    Leaf,
    MatMul { a: Var, b: Var, ta: bool, tb: bool },
    BatchMatMul { a: Var, b: Var, batch: usize, ta: bool, tb: bool },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    SumRows(Var),
    BroadcastRows(Var),
    SumCols(Var),
    BroadcastCols(Var),
    SumAll(Var),
    BroadcastAll(Var),
    Tanh(Var),
    Sigmoid(Var),
    Exp(Var),
    Ln(Var),
    Sqrt(Var),
    Recip(Var),
    MaskMul(Var, Rc<Mat>),
    Reshape(Var),
    Gather(Var, Rc<[u32]>),
    ScatterAdd(Var, Rc<[u32]>),
    ConcatCols(Vec<Var>),
    Surrogate(Var),
}

impl Op {
    fn inputs(&self) -> Vec<Var> {
        use Op::*;
        match self {
            Leaf => vec![],
            MatMul { a, b, .. } | BatchMatMul { a, b, .. } => vec![*a, *b],
            Add(a, b) | Sub(a, b) | Mul(a, b) => vec![*a, *b],
            Scale(a, _) | AddScalar(a) | SumRows(a) | BroadcastRows(a) | SumCols(a)
            | BroadcastCols(a) | SumAll(a) | BroadcastAll(a) | Tanh(a) | Sigmoid(a) | Exp(a)
            | Ln(a) | Sqrt(a) | Recip(a) | MaskMul(a, _) | Reshape(a) | Gather(a, _)
            | ScatterAdd(a, _) | Surrogate(a) => vec![*a],
            ConcatCols(vs) => vs.clone(),
        }
    }
}

struct Node {
    value: Mat,
    op: Op,
    requires_grad: bool,
}

/// Arena of recorded operations. Build one per step and drop it afterwards.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Smallest argument fed to `ln`; keeps `x ln x` finite at `x = 0`.
pub const LN_FLOOR: f64 = 1e-300;

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    #[inline]
    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A leaf that gradients are tracked for.
    pub fn param(&mut self, value: Mat) -> Var {
        self.push_raw(value, Op::Leaf, true)
    }

    /// A leaf that is never differentiated.
    pub fn constant(&mut self, value: Mat) -> Var {
        self.push_raw(value, Op::Leaf, false)
    }

    pub fn scalar(&mut self, value: f64) -> Var {
        self.constant(Mat::scalar(value))
    }

    /// Copies the value of `v` into a new constant leaf.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.value(v).clone();
        self.constant(value)
    }

    fn push_raw(&mut self, value: Mat, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, value: Mat, op: Op) -> Var {
        let requires_grad = op.inputs().iter().any(|v| self.nodes[v.0].requires_grad);
        self.push_raw(value, op, requires_grad)
    }

    // ---- primitive operations -------------------------------------------------

    pub fn matmul_t(&mut self, a: Var, b: Var, ta: bool, tb: bool) -> Var {
        let value = Mat::matmul_t(self.value(a), self.value(b), ta, tb);
        self.push(value, Op::MatMul { a, b, ta, tb })
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        self.matmul_t(a, b, false, false)
    }

    /// Block-wise product: `a` and `b` are stacks of `batch` equally sized
    /// row blocks, and block `i` of the output is `op(a_i) · op(b_i)`.
    pub fn batch_matmul(&mut self, a: Var, b: Var, batch: usize, ta: bool, tb: bool) -> Var {
        let value = batch_matmul_value(self.value(a), self.value(b), batch, ta, tb);
        self.push(value, Op::BatchMatMul { a, b, batch, ta, tb })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push(value, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push(value, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push(value, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let value = self.value(a).map(|x| x * k);
        self.push(value, Op::Scale(a, k))
    }

    pub fn add_scalar(&mut self, a: Var, k: f64) -> Var {
        let value = self.value(a).map(|x| x + k);
        self.push(value, Op::AddScalar(a))
    }

    /// Column sums as a `1 × n` row.
    pub fn sum_rows(&mut self, a: Var) -> Var {
        let m = self.value(a);
        let mut out = Mat::zeros(1, m.cols());
        for r in 0..m.rows() {
            for (o, x) in out.as_mut_slice().iter_mut().zip(m.row(r)) {
                *o += x;
            }
        }
        self.push(out, Op::SumRows(a))
    }

    /// Repeats a `1 × n` row `rows` times.
    pub fn broadcast_rows(&mut self, a: Var, rows: usize) -> Var {
        let m = self.value(a);
        assert_eq!(m.rows(), 1, "broadcast_rows expects a single row");
        let mut data = Vec::with_capacity(rows * m.cols());
        for _ in 0..rows {
            data.extend_from_slice(m.as_slice());
        }
        let out = Mat::from_vec(rows, m.cols(), data);
        self.push(out, Op::BroadcastRows(a))
    }

    /// Row sums as an `m × 1` column.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let m = self.value(a);
        let out = Mat::from_fn(m.rows(), 1, |r, _| m.row(r).iter().sum());
        self.push(out, Op::SumCols(a))
    }

    /// Repeats an `m × 1` column `cols` times.
    pub fn broadcast_cols(&mut self, a: Var, cols: usize) -> Var {
        let m = self.value(a);
        assert_eq!(m.cols(), 1, "broadcast_cols expects a single column");
        let out = Mat::from_fn(m.rows(), cols, |r, _| m.get(r, 0));
        self.push(out, Op::BroadcastCols(a))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let out = Mat::scalar(self.value(a).sum());
        self.push(out, Op::SumAll(a))
    }

    pub fn broadcast_all(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let m = self.value(a);
        assert_eq!(m.shape(), (1, 1), "broadcast_all expects a 1x1 input");
        let out = Mat::filled(rows, cols, m.get(0, 0));
        self.push(out, Op::BroadcastAll(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        self.push(value, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        self.push(value, Op::Sigmoid(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::exp);
        self.push(value, Op::Exp(a))
    }

    /// Natural log with the argument floored at [`LN_FLOOR`].
    pub fn ln(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.max(LN_FLOOR).ln());
        self.push(value, Op::Ln(a))
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::sqrt);
        self.push(value, Op::Sqrt(a))
    }

    pub fn recip(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| 1.0 / x);
        self.push(value, Op::Recip(a))
    }

    /// Elementwise product with a constant mask.
    pub fn mask_mul(&mut self, a: Var, mask: Rc<Mat>) -> Var {
        let value = self.value(a).zip_map(&mask, |x, m| x * m);
        self.push(value, Op::MaskMul(a, mask))
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let value = self.value(a).clone().reshaped(rows, cols);
        self.push(value, Op::Reshape(a))
    }

    /// `out[e] = a[idx[e]]` over flat row-major storage, with
    /// [`GATHER_ZERO`] producing zeros. `idx.len()` must equal `rows * cols`.
    pub fn gather(&mut self, a: Var, idx: Rc<[u32]>, rows: usize, cols: usize) -> Var {
        assert_eq!(idx.len(), rows * cols, "gather map does not match output shape");
        let src = self.value(a).as_slice();
        let data = idx
            .iter()
            .map(|&i| if i == GATHER_ZERO { 0.0 } else { src[i as usize] })
            .collect();
        let value = Mat::from_vec(rows, cols, data);
        self.push(value, Op::Gather(a, idx))
    }

    /// Adjoint of [`Graph::gather`]: accumulates `a[e]` into `out[idx[e]]`.
    pub fn scatter_add(&mut self, a: Var, idx: Rc<[u32]>, rows: usize, cols: usize) -> Var {
        let src = self.value(a).as_slice();
        assert_eq!(idx.len(), src.len(), "scatter map does not match input");
        let mut out = Mat::zeros(rows, cols);
        let buf = out.as_mut_slice();
        for (&i, &x) in idx.iter().zip(src) {
            if i != GATHER_ZERO {
                buf[i as usize] += x;
            }
        }
        self.push(out, Op::ScatterAdd(a, idx))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat of nothing");
        let rows = self.value(parts[0]).rows();
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = Mat::zeros(rows, total);
        let mut off = 0;
        for &p in parts {
            let m = self.value(p);
            assert_eq!(m.rows(), rows, "concat_cols row mismatch");
            for r in 0..rows {
                out.row_mut(r)[off..off + m.cols()].copy_from_slice(m.row(r));
            }
            off += m.cols();
        }
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    /// Takes `forward` as the value while gradients pass to `a` unchanged.
    pub fn surrogate(&mut self, a: Var, forward: Mat) -> Var {
        assert_eq!(self.shape(a), forward.shape(), "surrogate shape mismatch");
        self.push(forward, Op::Surrogate(a))
    }

    // ---- differentiation ----------------------------------------------------

    /// Gradients of the scalar `y` with respect to each of `wrt`.
    ///
    /// The returned vars live on this graph and can be differentiated again.
    /// A target that `y` does not depend on gets a zero constant.
    pub fn grad(&mut self, y: Var, wrt: &[Var]) -> Vec<Var> {
        assert_eq!(self.shape(y), (1, 1), "grad expects a scalar output");
        let seed = self.scalar(1.0);
        self.grad_with_seed(y, seed, wrt)
    }

    /// Vector-Jacobian product of `y` with cotangent `seed`.
    pub fn grad_with_seed(&mut self, y: Var, seed: Var, wrt: &[Var]) -> Vec<Var> {
        assert_eq!(self.shape(y), self.shape(seed), "seed shape differs from output");
        let n = y.0 + 1;
        let mut on_path = vec![false; n];
        for w in wrt {
            if w.0 < n {
                on_path[w.0] = self.nodes[w.0].requires_grad;
            }
        }
        for i in 0..n {
            if on_path[i] || !self.nodes[i].requires_grad {
                continue;
            }
            on_path[i] = self.nodes[i].op.inputs().iter().any(|v| on_path[v.0]);
        }

        let mut grads: Vec<Option<Var>> = vec![None; n];
        grads[y.0] = Some(seed);
        for i in (0..n).rev() {
            if !on_path[i] {
                continue;
            }
            let Some(g) = grads[i] else { continue };
            let op = self.nodes[i].op.clone();
            for (input, contribution) in self.vjp(Var(i), &op, g, &on_path) {
                grads[input.0] = Some(match grads[input.0] {
                    Some(prev) => self.add(prev, contribution),
                    None => contribution,
                });
            }
        }

        wrt.iter()
            .map(|&w| match grads.get(w.0).copied().flatten() {
                Some(g) => g,
                None => {
                    let (r, c) = self.shape(w);
                    self.constant(Mat::zeros(r, c))
                }
            })
            .collect()
    }

    fn vjp(&mut self, out: Var, op: &Op, g: Var, on_path: &[bool]) -> Vec<(Var, Var)> {
        let want = |v: &Var| on_path[v.0];
        let mut res = Vec::new();
        match op {
            Op::Leaf => {}
            Op::MatMul { a, b, ta, tb } => {
                let (a, b, ta, tb) = (*a, *b, *ta, *tb);
                if want(&a) {
                    let ga = match (ta, tb) {
                        (false, false) => self.matmul_t(g, b, false, true),
                        (false, true) => self.matmul_t(g, b, false, false),
                        (true, false) => self.matmul_t(b, g, false, true),
                        (true, true) => self.matmul_t(b, g, true, true),
                    };
                    res.push((a, ga));
                }
                if want(&b) {
                    let gb = match (ta, tb) {
                        (false, false) => self.matmul_t(a, g, true, false),
                        (false, true) => self.matmul_t(g, a, true, false),
                        (true, false) => self.matmul_t(a, g, false, false),
                        (true, true) => self.matmul_t(g, a, true, true),
                    };
                    res.push((b, gb));
                }
            }
            Op::BatchMatMul { a, b, batch, ta, tb } => {
                let (a, b, n, ta, tb) = (*a, *b, *batch, *ta, *tb);
                if want(&a) {
                    let ga = match (ta, tb) {
                        (false, false) => self.batch_matmul(g, b, n, false, true),
                        (false, true) => self.batch_matmul(g, b, n, false, false),
                        (true, false) => self.batch_matmul(b, g, n, false, true),
                        (true, true) => self.batch_matmul(b, g, n, true, true),
                    };
                    res.push((a, ga));
                }
                if want(&b) {
                    let gb = match (ta, tb) {
                        (false, false) => self.batch_matmul(a, g, n, true, false),
                        (false, true) => self.batch_matmul(g, a, n, true, false),
                        (true, false) => self.batch_matmul(a, g, n, false, false),
                        (true, true) => self.batch_matmul(g, a, n, true, true),
                    };
                    res.push((b, gb));
                }
            }
            Op::Add(a, b) => {
                if want(a) {
                    res.push((*a, g));
                }
                if want(b) {
                    res.push((*b, g));
                }
            }
            Op::Sub(a, b) => {
                if want(a) {
                    res.push((*a, g));
                }
                if want(b) {
                    let ng = self.scale(g, -1.0);
                    res.push((*b, ng));
                }
            }
            Op::Mul(a, b) => {
                if want(a) {
                    let ga = self.mul(g, *b);
                    res.push((*a, ga));
                }
                if want(b) {
                    let gb = self.mul(g, *a);
                    res.push((*b, gb));
                }
            }
            Op::Scale(a, k) => {
                let ga = self.scale(g, *k);
                res.push((*a, ga));
            }
            Op::AddScalar(a) | Op::Surrogate(a) => res.push((*a, g)),
            Op::SumRows(a) => {
                let rows = self.shape(*a).0;
                let ga = self.broadcast_rows(g, rows);
                res.push((*a, ga));
            }
            Op::BroadcastRows(a) => {
                let ga = self.sum_rows(g);
                res.push((*a, ga));
            }
            Op::SumCols(a) => {
                let cols = self.shape(*a).1;
                let ga = self.broadcast_cols(g, cols);
                res.push((*a, ga));
            }
            Op::BroadcastCols(a) => {
                let ga = self.sum_cols(g);
                res.push((*a, ga));
            }
            Op::SumAll(a) => {
                let (r, c) = self.shape(*a);
                let ga = self.broadcast_all(g, r, c);
                res.push((*a, ga));
            }
            Op::BroadcastAll(a) => {
                let ga = self.sum_all(g);
                res.push((*a, ga));
            }
            Op::Tanh(a) => {
                let y2 = self.mul(out, out);
                let neg = self.scale(y2, -1.0);
                let d = self.add_scalar(neg, 1.0);
                let ga = self.mul(g, d);
                res.push((*a, ga));
            }
            Op::Sigmoid(a) => {
                let neg = self.scale(out, -1.0);
                let one_minus = self.add_scalar(neg, 1.0);
                let d = self.mul(out, one_minus);
                let ga = self.mul(g, d);
                res.push((*a, ga));
            }
            Op::Exp(a) => {
                let ga = self.mul(g, out);
                res.push((*a, ga));
            }
            Op::Ln(a) => {
                let inv = self.recip(*a);
                let ga = self.mul(g, inv);
                res.push((*a, ga));
            }
            Op::Sqrt(a) => {
                let inv = self.recip(out);
                let half = self.scale(inv, 0.5);
                let ga = self.mul(g, half);
                res.push((*a, ga));
            }
            Op::Recip(a) => {
                let y2 = self.mul(out, out);
                let neg = self.scale(y2, -1.0);
                let ga = self.mul(g, neg);
                res.push((*a, ga));
            }
            Op::MaskMul(a, mask) => {
                let ga = self.mask_mul(g, mask.clone());
                res.push((*a, ga));
            }
            Op::Reshape(a) => {
                let (r, c) = self.shape(*a);
                let ga = self.reshape(g, r, c);
                res.push((*a, ga));
            }
            Op::Gather(a, idx) => {
                let (r, c) = self.shape(*a);
                let ga = self.scatter_add(g, idx.clone(), r, c);
                res.push((*a, ga));
            }
            Op::ScatterAdd(a, idx) => {
                let (r, c) = self.shape(*a);
                let ga = self.gather(g, idx.clone(), r, c);
                res.push((*a, ga));
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for p in parts {
                    let w = self.shape(*p).1;
                    if want(p) {
                        let gp = self.slice_cols(g, off, w);
                        res.push((*p, gp));
                    }
                    off += w;
                }
            }
        }
        res
    }

    // ---- composite helpers ----------------------------------------------------

    /// Columns `[start, start + width)`.
    pub fn slice_cols(&mut self, a: Var, start: usize, width: usize) -> Var {
        let (rows, cols) = self.shape(a);
        assert!(start + width <= cols, "column slice out of range");
        let idx: Vec<u32> = (0..rows)
            .flat_map(|r| (start..start + width).map(move |c| (r * cols + c) as u32))
            .collect();
        self.gather(a, idx.into(), rows, width)
    }

    /// Rows listed in `which`, in that order.
    pub fn select_rows(&mut self, a: Var, which: &[usize]) -> Var {
        let (rows, cols) = self.shape(a);
        let idx: Vec<u32> = which
            .iter()
            .flat_map(|&r| {
                assert!(r < rows, "row index out of range");
                (0..cols).map(move |c| (r * cols + c) as u32)
            })
            .collect();
        self.gather(a, idx.into(), which.len(), cols)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let (rows, cols) = self.shape(a);
        let idx: Vec<u32> = (0..cols)
            .flat_map(|c| (0..rows).map(move |r| (r * cols + c) as u32))
            .collect();
        self.gather(a, idx.into(), cols, rows)
    }

    /// `x · w + b` with `b` a `1 × n` row.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Var {
        let xw = self.matmul(x, w);
        let rows = self.shape(xw).0;
        let bb = self.broadcast_rows(b, rows);
        self.add(xw, bb)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let mask = self.value(a).map(|x| if x > 0.0 { 1.0 } else { slope });
        self.mask_mul(a, Rc::new(mask))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.leaky_relu(a, 0.0)
    }

    /// Clamps elementwise; the gradient is zero wherever the bound is active.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let v = self.value(a);
        let clamped = v.map(|x| x.clamp(lo, hi));
        let mask = v.map(|x| if x < lo || x > hi { 0.0 } else { 1.0 });
        let passthrough = self.mask_mul(a, Rc::new(mask));
        self.surrogate(passthrough, clamped)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.mul(a, a)
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let n = self.value(a).len() as f64;
        let s = self.sum_all(a);
        self.scale(s, 1.0 / n)
    }

    /// `x ln x` with the continuous extension `0` at `x = 0`.
    pub fn xlogx(&mut self, a: Var) -> Var {
        let l = self.ln(a);
        self.mul(a, l)
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let (rows, cols) = self.shape(a);
        let v = self.value(a);
        let maxes = Mat::from_fn(rows, 1, |r, _| {
            v.row(r).iter().copied().fold(f64::NEG_INFINITY, f64::max)
        });
        let m = self.constant(maxes);
        let mb = self.broadcast_cols(m, cols);
        let shifted = self.sub(a, mb);
        let e = self.exp(shifted);
        let s = self.sum_cols(e);
        let inv = self.recip(s);
        let ib = self.broadcast_cols(inv, cols);
        self.mul(e, ib)
    }

    /// Multiplies each row of `a` by the matching entry of the `m × 1` column `c`.
    pub fn mul_col(&mut self, a: Var, c: Var) -> Var {
        let cols = self.shape(a).1;
        let cb = self.broadcast_cols(c, cols);
        self.mul(a, cb)
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn batch_matmul_value(a: &Mat, b: &Mat, batch: usize, ta: bool, tb: bool) -> Mat {
    assert!(batch > 0, "batch_matmul with zero blocks");
    assert_eq!(a.rows() % batch, 0, "left operand rows not divisible by batch");
    assert_eq!(b.rows() % batch, 0, "right operand rows not divisible by batch");
    let (ar, ac) = (a.rows() / batch, a.cols());
    let (br, bc) = (b.rows() / batch, b.cols());
    let (m, k) = if ta { (ac, ar) } else { (ar, ac) };
    let (kb, n) = if tb { (bc, br) } else { (br, bc) };
    assert_eq!(k, kb, "batch_matmul inner dimensions differ");
    let mut out = Mat::zeros(batch * m, n);
    let (sa, sb, so) = (ar * ac, br * bc, m * n);
    let (ad, bd) = (a.as_slice(), b.as_slice());
    let od = out.as_mut_slice();
    for i in 0..batch {
        gemm_into(
            &ad[i * sa..(i + 1) * sa],
            ac,
            ta,
            &bd[i * sb..(i + 1) * sb],
            bc,
            tb,
            &mut od[i * so..(i + 1) * so],
            m,
            k,
            n,
        );
    }
    out
}

//! Sequence layers over the graph: activations are either a batch of flat
//! rows (`B × W`) or a batch of sequences stored as `(B·L) × C`, row `b·L + t`.

use std::rc::Rc;

use flowsynth_tensor::{Graph, Mat, Var, GATHER_ZERO};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::models::{init_weight, ParamSet};
use crate::rng::Rng;

pub const BN_MOMENTUM: f64 = 0.99;
pub const BN_EPS: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Layer {
    /// Stride-1 "same" convolution with a ReLU.
    Conv { c_in: usize, c_out: usize, kernel: usize },
    BatchNorm { channels: usize },
    /// Non-overlapping windows; a trailing partial window is dropped unless
    /// the sequence is shorter than one window.
    MaxPool { size: usize },
    Lstm { c_in: usize, hidden: usize, sequences: bool },
    BiLstm { c_in: usize, hidden: usize },
    Dropout { rate: f64 },
    Flatten,
    Dense { n_in: usize, n_out: usize, relu: bool },
}

#[derive(Clone, Copy, Debug)]
pub enum Act {
    Seq { v: Var, len: usize, ch: usize },
    Flat { v: Var, width: usize },
}

impl Act {
    pub fn var(self) -> Var {
        match self {
            Act::Seq { v, .. } | Act::Flat { v, .. } => v,
        }
    }
}

pub struct Ctx<'a> {
    pub batch: usize,
    pub training: bool,
    pub dropout: &'a mut Rng,
    /// Batch statistics `(mean, var)` of every batch-norm layer, in order.
    pub bn_batch: Vec<(Mat, Mat)>,
}

impl Layer {
    /// Appends this layer's trainable weights; batch-norm layers also append
    /// running statistics to `stats`.
    pub fn init(&self, i: usize, params: &mut ParamSet, stats: &mut ParamSet, rng: &mut Rng) {
        match *self {
            Layer::Conv { c_in, c_out, kernel } => {
                params.push(format!("l{i}.conv.w"), init_weight(rng, kernel * c_in, c_out));
                params.push(format!("l{i}.conv.b"), Mat::zeros(1, c_out));
            }
            Layer::BatchNorm { channels } => {
                params.push(format!("l{i}.bn.gamma"), Mat::filled(1, channels, 1.0));
                params.push(format!("l{i}.bn.beta"), Mat::zeros(1, channels));
                stats.push(format!("l{i}.bn.mean"), Mat::zeros(1, channels));
                stats.push(format!("l{i}.bn.var"), Mat::filled(1, channels, 1.0));
            }
            Layer::Lstm { c_in, hidden, .. } => lstm_init(&format!("l{i}.lstm"), c_in, hidden, params, rng),
            Layer::BiLstm { c_in, hidden } => {
                lstm_init(&format!("l{i}.fwd"), c_in, hidden, params, rng);
                lstm_init(&format!("l{i}.bwd"), c_in, hidden, params, rng);
            }
            Layer::Dense { n_in, n_out, .. } => {
                params.push(format!("l{i}.dense.w"), init_weight(rng, n_in, n_out));
                params.push(format!("l{i}.dense.b"), Mat::zeros(1, n_out));
            }
            Layer::MaxPool { .. } | Layer::Dropout { .. } | Layer::Flatten => {}
        }
    }

    pub fn n_params(&self) -> usize {
        match self {
            Layer::Conv { .. } | Layer::BatchNorm { .. } | Layer::Dense { .. } => 2,
            Layer::Lstm { .. } => 3,
            Layer::BiLstm { .. } => 6,
            _ => 0,
        }
    }

    /// `stats` is `(running mean, running var)` for batch-norm layers.
    pub fn forward(&self, g: &mut Graph, p: &[Var], stats: Option<(&Mat, &Mat)>, x: Act, ctx: &mut Ctx<'_>) -> Act {
        let b = ctx.batch;
        match (*self, x) {
            (Layer::Conv { c_in, c_out, kernel }, Act::Seq { v, len, ch }) => {
                debug_assert_eq!(ch, c_in);
                let cols = im2col(g, v, b, len, ch, kernel);
                let y = g.affine(cols, p[0], p[1]);
                Act::Seq {
                    v: g.relu(y),
                    len,
                    ch: c_out,
                }
            }
            (Layer::BatchNorm { .. }, Act::Seq { v, len, ch }) => {
                let y = batch_norm(g, v, p[0], p[1], stats.expect("batch-norm statistics"), ctx);
                Act::Seq { v: y, len, ch }
            }
            (Layer::MaxPool { size }, Act::Seq { v, len, ch }) => {
                let (y, out_len) = max_pool(g, v, b, len, ch, size);
                Act::Seq { v: y, len: out_len, ch }
            }
            (Layer::Lstm { hidden, sequences, .. }, Act::Seq { v, len, .. }) => {
                let steps = lstm_run(g, &p[..3], v, b, len, hidden, false);
                if sequences {
                    let stacked = g.concat_cols(&steps);
                    Act::Seq {
                        v: g.reshape(stacked, b * len, hidden),
                        len,
                        ch: hidden,
                    }
                } else {
                    Act::Flat {
                        v: *steps.last().expect("nonempty sequence"),
                        width: hidden,
                    }
                }
            }
            (Layer::BiLstm { hidden, .. }, Act::Seq { v, len, .. }) => {
                let f = *lstm_run(g, &p[..3], v, b, len, hidden, false).last().expect("nonempty");
                let r = *lstm_run(g, &p[3..6], v, b, len, hidden, true).last().expect("nonempty");
                Act::Flat {
                    v: g.concat_cols(&[f, r]),
                    width: 2 * hidden,
                }
            }
            (Layer::Dropout { rate }, x) => {
                if !ctx.training || rate <= 0.0 {
                    return x;
                }
                let v = x.var();
                let (rows, cols) = g.shape(v);
                let keep = 1.0 - rate;
                let mask = Mat::from_fn(rows, cols, |_, _| {
                    if ctx.dropout.random::<f64>() < keep {
                        1.0 / keep
                    } else {
                        0.0
                    }
                });
                let y = g.mask_mul(v, Rc::new(mask));
                match x {
                    Act::Seq { len, ch, .. } => Act::Seq { v: y, len, ch },
                    Act::Flat { width, .. } => Act::Flat { v: y, width },
                }
            }
            (Layer::Flatten, Act::Seq { v, len, ch }) => Act::Flat {
                v: g.reshape(v, b, len * ch),
                width: len * ch,
            },
            (Layer::Flatten, x @ Act::Flat { .. }) => x,
            (Layer::Dense { n_out, relu, .. }, x) => {
                let v = match x {
                    Act::Flat { v, .. } => v,
                    Act::Seq { v, len, ch } => g.reshape(v, b, len * ch),
                };
                let y = g.affine(v, p[0], p[1]);
                Act::Flat {
                    v: if relu { g.relu(y) } else { y },
                    width: n_out,
                }
            }
            (layer, _) => panic!("layer {layer:?} applied to a flat activation"),
        }
    }
}

fn lstm_init(prefix: &str, c_in: usize, hidden: usize, params: &mut ParamSet, rng: &mut Rng) {
    params.push(format!("{prefix}.w"), init_weight(rng, c_in, 4 * hidden));
    params.push(format!("{prefix}.u"), init_weight(rng, hidden, 4 * hidden));
    // gate order i, f, g, o; forget gate starts open
    let bias = Mat::from_fn(1, 4 * hidden, |_, c| if (hidden..2 * hidden).contains(&c) { 1.0 } else { 0.0 });
    params.push(format!("{prefix}.b"), bias);
}

/// `(B·L) × C` → `(B·L) × (k·C)` with zero padding, left pad `(k−1)/2`.
fn im2col(g: &mut Graph, v: Var, b: usize, len: usize, ch: usize, k: usize) -> Var {
    let pad = (k - 1) / 2;
    let mut idx = Vec::with_capacity(b * len * k * ch);
    for bi in 0..b {
        for t in 0..len {
            for j in 0..k {
                let src = t as isize + j as isize - pad as isize;
                for c in 0..ch {
                    idx.push(if src >= 0 && (src as usize) < len {
                        ((bi * len + src as usize) * ch + c) as u32
                    } else {
                        GATHER_ZERO
                    });
                }
            }
        }
    }
    g.gather(v, idx.into(), b * len, k * ch)
}

fn max_pool(g: &mut Graph, v: Var, b: usize, len: usize, ch: usize, size: usize) -> (Var, usize) {
    let out_len = (len / size).max(1);
    let val = g.value(v);
    let mut idx = Vec::with_capacity(b * out_len * ch);
    for bi in 0..b {
        for t in 0..out_len {
            let (lo, hi) = (t * size, (t * size + size).min(len));
            for c in 0..ch {
                let mut best = lo;
                for s in lo + 1..hi {
                    if val.get(bi * len + s, c) > val.get(bi * len + best, c) {
                        best = s;
                    }
                }
                idx.push(((bi * len + best) * ch + c) as u32);
            }
        }
    }
    (g.gather(v, idx.into(), b * out_len, ch), out_len)
}

fn batch_norm(g: &mut Graph, v: Var, gamma: Var, beta: Var, running: (&Mat, &Mat), ctx: &mut Ctx<'_>) -> Var {
    let rows = g.shape(v).0;
    let (mean, var) = if ctx.training {
        let s = g.sum_rows(v);
        let mean = g.scale(s, 1.0 / rows as f64);
        let mb = g.broadcast_rows(mean, rows);
        let centered = g.sub(v, mb);
        let sq = g.square(centered);
        let s2 = g.sum_rows(sq);
        let var = g.scale(s2, 1.0 / rows as f64);
        ctx.bn_batch.push((g.value(mean).clone(), g.value(var).clone()));
        (mean, var)
    } else {
        (g.constant(running.0.clone()), g.constant(running.1.clone()))
    };
    let mb = g.broadcast_rows(mean, rows);
    let centered = g.sub(v, mb);
    let ve = g.add_scalar(var, BN_EPS);
    let sd = g.sqrt(ve);
    let inv = g.recip(sd);
    let scale = g.mul(inv, gamma);
    let sb = g.broadcast_rows(scale, rows);
    let y = g.mul(centered, sb);
    let bb = g.broadcast_rows(beta, rows);
    g.add(y, bb)
}

/// Hidden states of every step, in processing order.
fn lstm_run(g: &mut Graph, p: &[Var], x: Var, b: usize, len: usize, hidden: usize, reverse: bool) -> Vec<Var> {
    let xw = g.affine(x, p[0], p[2]);
    let mut h = g.constant(Mat::zeros(b, hidden));
    let mut c = g.constant(Mat::zeros(b, hidden));
    let mut out = Vec::with_capacity(len);
    for step in 0..len {
        let t = if reverse { len - 1 - step } else { step };
        let rows: Vec<usize> = (0..b).map(|bi| bi * len + t).collect();
        let xt = g.select_rows(xw, &rows);
        let hu = g.matmul(h, p[1]);
        let z = g.add(xt, hu);
        let i = g.slice_cols(z, 0, hidden);
        let i = g.sigmoid(i);
        let f = g.slice_cols(z, hidden, hidden);
        let f = g.sigmoid(f);
        let gg = g.slice_cols(z, 2 * hidden, hidden);
        let gg = g.tanh(gg);
        let o = g.slice_cols(z, 3 * hidden, hidden);
        let o = g.sigmoid(o);
        let fc = g.mul(f, c);
        let ig = g.mul(i, gg);
        c = g.add(fc, ig);
        let tc = g.tanh(c);
        h = g.mul(o, tc);
        out.push(h);
    }
    out
}

//! Single-head self-attention across the feature axis.

use flowsynth_tensor::{Graph, Mat, Var};

use crate::error::{Error, Result};

/// `h` stacks `batch` token blocks of shape `F × d_m`. Returns the attended
/// tokens and the `(batch·F) × F` attention weights.
pub fn self_attention_graph(g: &mut Graph, h: Var, wq: Var, wk: Var, wv: Var, batch: usize) -> (Var, Var) {
    let d_k = g.shape(wq).1;
    let q = g.matmul(h, wq);
    let k = g.matmul(h, wk);
    let v = g.matmul(h, wv);
    let s = g.batch_matmul(q, k, batch, false, true);
    let s = g.scale(s, 1.0 / (d_k as f64).sqrt());
    let a = g.softmax_rows(s);
    (g.batch_matmul(a, v, batch, false, false), a)
}

/// Value-only form for a single `F × d_m` token matrix.
pub fn self_attention(h: &Mat, wq: &Mat, wk: &Mat, wv: &Mat) -> Result<(Mat, Mat)> {
    if h.cols() != wq.rows() || wq.shape() != wk.shape() || wv.rows() != h.cols() {
        return Err(Error::Shape("attention projections do not conform to the token width".into()));
    }
    if wq.cols() == 0 {
        return Err(Error::Shape("key width must be positive".into()));
    }
    if !(h.all_finite() && wq.all_finite() && wk.all_finite() && wv.all_finite()) {
        return Err(Error::Numeric("non-finite attention input".into()));
    }
    let mut g = Graph::new();
    let vars = [h, wq, wk, wv].map(|m| g.constant(m.clone()));
    let (out, a) = self_attention_graph(&mut g, vars[0], vars[1], vars[2], vars[3], 1);
    Ok((g.value(out).clone(), g.value(a).clone()))
}

//! Gumbel-softmax relaxation, straight-through one-hot, codebook projection.

use std::rc::Rc;

use flowsynth_tensor::{Graph, Mat, Var};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// Gumbel noise for one discrete head plus the temperature.
#[derive(Clone, Debug, PartialEq)]
pub struct GumbelDraw {
    pub g: Vec<f64>,
    pub tau: f64,
}

impl GumbelDraw {
    pub fn sample(rng: &mut Rng, k: usize, tau: f64) -> Self {
        GumbelDraw {
            g: (0..k).map(|_| rng::gumbel(rng)).collect(),
            tau,
        }
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("temperature must be positive, got {tau}")))
    }
}

/// `softmax((ℓ + g) / τ)`.
pub fn gumbel_softmax(logits: &[f64], draw: &GumbelDraw) -> Result<Vec<f64>> {
    check_tau(draw.tau)?;
    if logits.len() != draw.g.len() {
        return Err(Error::Shape("logit and noise lengths differ".into()));
    }
    let s: Vec<f64> = logits.iter().zip(&draw.g).map(|(l, g)| (l + g) / draw.tau).collect();
    let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = s.iter().map(|x| (x - m).exp()).collect();
    let z: f64 = e.iter().sum();
    Ok(e.into_iter().map(|x| x / z).collect())
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

pub fn straight_through(y_soft: &[f64]) -> Vec<f64> {
    let k = argmax(y_soft);
    (0..y_soft.len()).map(|i| if i == k { 1.0 } else { 0.0 }).collect()
}

pub fn codebook_project(y_hard: &[f64], codes: &[f64]) -> f64 {
    y_hard.iter().zip(codes).map(|(y, v)| y * v).sum()
}

/// Graph form over a batch: row-wise `softmax((logits + noise) / τ)`.
pub fn gumbel_softmax_rows(g: &mut Graph, logits: Var, noise: &Mat, tau: f64) -> Result<Var> {
    check_tau(tau)?;
    if g.shape(logits) != noise.shape() {
        return Err(Error::Shape("logit and noise shapes differ".into()));
    }
    let n = g.constant(noise.clone());
    let s = g.add(logits, n);
    let s = g.scale(s, 1.0 / tau);
    Ok(g.softmax_rows(s))
}

/// Forward value is the row-wise one-hot of `y_soft`; the gradient passes
/// through to `y_soft` unchanged.
pub fn straight_through_rows(g: &mut Graph, y_soft: Var) -> Var {
    let (rows, cols) = g.shape(y_soft);
    let v = g.value(y_soft);
    let mut hard = Mat::zeros(rows, cols);
    for r in 0..rows {
        hard.set(r, argmax(v.row(r)), 1.0);
    }
    g.surrogate(y_soft, hard)
}

/// `B × K` weights against a `K`-code column → `B × 1`.
pub fn codebook_project_rows(g: &mut Graph, y: Var, codes: &Rc<Mat>) -> Var {
    let c = g.constant(codes.as_ref().clone());
    g.matmul(y, c)
}

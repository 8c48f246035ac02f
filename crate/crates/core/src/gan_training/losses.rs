//! Loss terms as graph expressions, plus value-only convenience forms.

use flowsynth_tensor::{Graph, Mat, Var};

use crate::error::{Error, Result};
use crate::models::{Autoencoder, Critic, Gate};

/// Added under the square root of the input-gradient norm so it stays
/// differentiable at zero.
pub const NORM_EPS: f64 = 1e-12;

/// `x̂ᵢ = εᵢ xᵢ + (1 − εᵢ) x̃ᵢ`.
pub fn interpolate(real: &Mat, fake: &Mat, eps: &[f64]) -> Result<Mat> {
    if real.shape() != fake.shape() || eps.len() != real.rows() {
        return Err(Error::Shape("interpolation operands disagree in shape".into()));
    }
    Ok(Mat::from_fn(real.rows(), real.cols(), |r, c| {
        eps[r] * real.get(r, c) + (1.0 - eps[r]) * fake.get(r, c)
    }))
}

pub struct Penalty {
    pub gp: Var,
    /// Per-row `‖∇_x̂ C(x̂)‖₂`.
    pub norms: Var,
}

/// `λ · mean((‖∇_x̂ C(x̂)‖₂ − 1)²)`; `x_hat` must be a differentiable leaf.
/// The result stays differentiable with respect to the critic weights.
pub fn gradient_penalty_graph(g: &mut Graph, critic: &Critic, vars: &[Var], x_hat: Var, lambda: f64) -> Penalty {
    let s = critic.forward(g, vars, x_hat);
    let total = g.sum_all(s);
    let grad = g.grad(total, &[x_hat])[0];
    let sq = g.square(grad);
    let ss = g.sum_cols(sq);
    let ss = g.add_scalar(ss, NORM_EPS);
    let norms = g.sqrt(ss);
    let dev = g.add_scalar(norms, -1.0);
    let dev2 = g.square(dev);
    let m = g.mean_all(dev2);
    Penalty {
        gp: g.scale(m, lambda),
        norms,
    }
}

pub fn gradient_penalty(critic: &Critic, x_hat: &Mat, lambda: f64) -> Result<f64> {
    let mut g = Graph::new();
    let vars = critic.params.bind(&mut g, false);
    let xh = g.param(x_hat.clone());
    let p = gradient_penalty_graph(&mut g, critic, &vars, xh, lambda);
    let v = g.value(p.gp).get(0, 0);
    if !v.is_finite() || !g.value(p.norms).all_finite() {
        return Err(Error::Numeric("non-finite critic input gradient".into()));
    }
    Ok(v)
}

pub struct CriticLoss {
    pub loss: Var,
    pub gp: Var,
    /// `mean C(x̃) − mean C(x)`.
    pub gap: Var,
    pub norms: Var,
}

/// `mean C(x̃) − mean C(x) + GP`.
pub fn critic_loss_graph(
    g: &mut Graph,
    critic: &Critic,
    vars: &[Var],
    real: &Mat,
    fake: &Mat,
    x_hat: &Mat,
    lambda: f64,
) -> CriticLoss {
    let xr = g.constant(real.clone());
    let xf = g.constant(fake.clone());
    let xh = g.param(x_hat.clone());
    let sr = critic.forward(g, vars, xr);
    let sf = critic.forward(g, vars, xf);
    let mr = g.mean_all(sr);
    let mf = g.mean_all(sf);
    let gap = g.sub(mf, mr);
    let p = gradient_penalty_graph(g, critic, vars, xh, lambda);
    CriticLoss {
        loss: g.add(gap, p.gp),
        gp: p.gp,
        gap,
        norms: p.norms,
    }
}

/// `L_d = −mean C(x̃)`.
pub fn adversarial_loss_graph(g: &mut Graph, critic: &Critic, vars: &[Var], fake: Var) -> Var {
    let s = critic.forward(g, vars, fake);
    let m = g.mean_all(s);
    g.scale(m, -1.0)
}

/// `mean over rows of ‖x − AE(x)‖₂²`.
pub fn reconstruction_loss_graph(g: &mut Graph, ae: &Autoencoder, vars: &[Var], x: Var) -> Var {
    let rows = g.shape(x).0;
    let r = ae.forward(g, vars, x);
    let d = g.sub(x, r);
    let sq = g.square(d);
    let s = g.sum_all(sq);
    g.scale(s, 1.0 / rows as f64)
}

pub fn reconstruction_loss(ae: &Autoencoder, x: &Mat) -> f64 {
    let mut g = Graph::new();
    let vars = ae.params.bind(&mut g, false);
    let xv = g.constant(x.clone());
    let l = reconstruction_loss_graph(&mut g, ae, &vars, xv);
    g.value(l).get(0, 0)
}

/// How the two generator objectives are mixed.
pub enum Mixing<'a> {
    /// `L_d` alone.
    AdversarialOnly,
    /// `½ L_g^AE + ½ L_d`.
    Equal,
    /// Learned `(α, β)` with entropy weight `γ`.
    Gated {
        gate: &'a Gate,
        vars: &'a [Var],
        gamma: f64,
        a: f64,
        b: f64,
    },
}

pub struct GeneratorLoss {
    pub loss: Var,
    pub alpha: f64,
    pub beta: f64,
    pub entropy: f64,
}

/// `L_G^f = α L_g^AE + β L_d − γ H(α, β)` under the chosen mixing.
pub fn generator_loss_graph(g: &mut Graph, l_ae: Option<Var>, l_d: Var, mixing: Mixing<'_>) -> GeneratorLoss {
    let Some(l_ae) = l_ae else {
        return GeneratorLoss {
            loss: l_d,
            alpha: 0.0,
            beta: 1.0,
            entropy: 0.0,
        };
    };
    match mixing {
        Mixing::AdversarialOnly => GeneratorLoss {
            loss: l_d,
            alpha: 0.0,
            beta: 1.0,
            entropy: 0.0,
        },
        Mixing::Equal => {
            let s = g.add(l_ae, l_d);
            GeneratorLoss {
                loss: g.scale(s, 0.5),
                alpha: 0.5,
                beta: 0.5,
                entropy: std::f64::consts::LN_2,
            }
        }
        Mixing::Gated { gate, vars, gamma, a, b } => {
            let (lae, ld) = (g.value(l_ae).get(0, 0), g.value(l_d).get(0, 0));
            let w = gate.forward(g, vars, lae, ld, a, b);
            let alpha = g.slice_cols(w, 0, 1);
            let beta = g.slice_cols(w, 1, 1);
            let t1 = g.mul(alpha, l_ae);
            let t2 = g.mul(beta, l_d);
            let mixed = g.add(t1, t2);
            // −γH = γ Σ w ln w
            let xl = g.xlogx(w);
            let neg_h = g.sum_all(xl);
            let reg = g.scale(neg_h, gamma);
            let loss = g.add(mixed, reg);
            let wv = g.value(w);
            let (av, bv) = (wv.get(0, 0), wv.get(0, 1));
            GeneratorLoss {
                loss,
                alpha: av,
                beta: bv,
                entropy: -g.value(neg_h).get(0, 0),
            }
        }
    }
}

/// `H(α, β) = −α ln α − β ln β` with `0 ln 0 = 0`.
pub fn entropy2(alpha: f64, beta: f64) -> f64 {
    let t = |x: f64| if x > 0.0 { -x * x.ln() } else { 0.0 };
    t(alpha) + t(beta)
}

use flowsynth_tensor::{Graph, Mat, Var};

use super::params::{Activation, MlpSpec, ParamSet};
use super::ModelConfig;
use crate::rng::Rng;

/// Scalar-output MLP without normalization layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Critic {
    pub spec: MlpSpec,
    pub params: ParamSet,
}

impl Critic {
    pub fn init(config: &ModelConfig, width: usize, rng: &mut Rng) -> Self {
        let mut dims = vec![width];
        dims.extend(&config.critic_hidden);
        dims.push(1);
        let spec = MlpSpec::new(dims, Activation::LeakyRelu(config.leaky_slope), Activation::Identity);
        let mut params = ParamSet::new();
        spec.init_into(&mut params, "critic", rng);
        Critic { spec, params }
    }

    /// `B × 1` scores.
    pub fn forward(&self, g: &mut Graph, vars: &[Var], x: Var) -> Var {
        self.spec.forward(g, vars, x)
    }

    pub fn scores(&self, x: &Mat) -> Vec<f64> {
        let mut g = Graph::new();
        let vars = self.params.bind(&mut g, false);
        let xv = g.constant(x.clone());
        let s = self.forward(&mut g, &vars, xv);
        g.value(s).as_slice().to_vec()
    }
}

/// Encoder to a bottleneck, decoder back to `[-1, 1]^F`.
#[derive(Clone, Debug, PartialEq)]
pub struct Autoencoder {
    pub encoder: MlpSpec,
    pub decoder: MlpSpec,
    pub params: ParamSet,
}

impl Autoencoder {
    /// Bottleneck `max(8, F/4)` kept strictly below `F` (and at least 1).
    pub fn default_bottleneck(width: usize) -> usize {
        (width / 4).max(8).min(width.saturating_sub(1)).max(1)
    }

    pub fn init(config: &ModelConfig, width: usize, rng: &mut Rng) -> Self {
        let bn = config.ae_bottleneck.unwrap_or_else(|| Self::default_bottleneck(width));
        let act = Activation::LeakyRelu(config.leaky_slope);
        let encoder = MlpSpec {
            dims: vec![width, config.ae_hidden, bn],
            acts: vec![act, Activation::Identity],
        };
        let decoder = MlpSpec {
            dims: vec![bn, config.ae_hidden, width],
            acts: vec![act, Activation::Tanh],
        };
        let mut params = ParamSet::new();
        encoder.init_into(&mut params, "ae.enc", rng);
        decoder.init_into(&mut params, "ae.dec", rng);
        Autoencoder {
            encoder,
            decoder,
            params,
        }
    }

    /// Linear identity encoder and decoder; reconstructs any input exactly.
    pub fn identity(width: usize) -> Self {
        let spec = MlpSpec {
            dims: vec![width, width],
            acts: vec![Activation::Identity],
        };
        let mut params = ParamSet::new();
        for prefix in ["ae.enc.0", "ae.dec.0"] {
            params.push(format!("{prefix}.w"), Mat::identity(width));
            params.push(format!("{prefix}.b"), Mat::zeros(1, width));
        }
        Autoencoder {
            encoder: spec.clone(),
            decoder: spec,
            params,
        }
    }

    pub fn bottleneck(&self) -> usize {
        *self.encoder.dims.last().expect("nonempty")
    }

    pub fn forward(&self, g: &mut Graph, vars: &[Var], x: Var) -> Var {
        let split = 2 * self.encoder.layers();
        let code = self.encoder.forward(g, &vars[..split], x);
        self.decoder.forward(g, &vars[split..], code)
    }

    pub fn reconstruct(&self, x: &Mat) -> Mat {
        let mut g = Graph::new();
        let vars = self.params.bind(&mut g, false);
        let xv = g.constant(x.clone());
        let r = self.forward(&mut g, &vars, xv);
        g.value(r).clone()
    }
}

/// `[L_g^AE, L_d] → (α, β)`: two layers, softmax, elementwise clip.
#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    pub spec: MlpSpec,
    pub params: ParamSet,
}

impl Gate {
    pub fn init(config: &ModelConfig, rng: &mut Rng) -> Self {
        let spec = MlpSpec::new(vec![2, config.gate_hidden, 2], Activation::Relu, Activation::Identity);
        let mut params = ParamSet::new();
        spec.init_into(&mut params, "gate", rng);
        Gate { spec, params }
    }

    /// `1 × 2` row `(α, β)`. The two loss inputs enter as constants.
    pub fn forward(&self, g: &mut Graph, vars: &[Var], l_ae: f64, l_d: f64, a: f64, b: f64) -> Var {
        let input = g.constant(Mat::from_vec(1, 2, vec![l_ae, l_d]));
        let uv = self.spec.forward(g, vars, input);
        let w = g.softmax_rows(uv);
        g.clamp(w, a, b)
    }

    pub fn weights(&self, l_ae: f64, l_d: f64, a: f64, b: f64) -> (f64, f64) {
        let mut g = Graph::new();
        let vars = self.params.bind(&mut g, false);
        let w = self.forward(&mut g, &vars, l_ae, l_d, a, b);
        let v = g.value(w);
        (v.get(0, 0), v.get(0, 1))
    }
}

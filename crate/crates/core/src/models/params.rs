use flowsynth_tensor::{Graph, Mat, Var};
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::rng::Rng;

/// Ordered, named weight matrices of one network.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    values: Vec<Mat>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, value: Mat) -> usize {
        self.names.push(name.into());
        self.values.push(value);
        self.values.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Mat] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Mat] {
        &mut self.values
    }

    pub fn get(&self, name: &str) -> Option<&Mat> {
        self.names.iter().position(|n| n == name).map(|i| &self.values[i])
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.values.iter().map(Mat::shape).collect()
    }

    pub fn count(&self) -> usize {
        self.values.iter().map(Mat::len).sum()
    }

    /// Places every matrix on the graph, as trainable leaves or as constants.
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> Vec<Var> {
        self.values
            .iter()
            .map(|m| if trainable { g.param(m.clone()) } else { g.constant(m.clone()) })
            .collect()
    }

    /// SHA-256 over names, shapes and the exact bit patterns of all weights.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (n, m) in self.names.iter().zip(&self.values) {
            h.update(n.as_bytes());
            h.update((m.rows() as u64).to_le_bytes());
            h.update((m.cols() as u64).to_le_bytes());
            for x in m.as_slice() {
                h.update(x.to_bits().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// Replaces the values, keeping names; shapes must match.
    pub fn set_values(&mut self, values: Vec<Mat>) -> Result<(), String> {
        if values.len() != self.values.len() {
            return Err(format!("expected {} arrays, got {}", self.values.len(), values.len()));
        }
        for ((n, old), new) in self.names.iter().zip(&self.values).zip(&values) {
            if old.shape() != new.shape() {
                return Err(format!("array {n:?} has shape {:?}, expected {:?}", new.shape(), old.shape()));
            }
        }
        self.values = values;
        Ok(())
    }
}

/// Dense weight `fan_in × fan_out` drawn uniformly on `±sqrt(3 / fan_in)`
/// (unit-variance preserving for linear layers).
pub fn init_weight(rng: &mut Rng, fan_in: usize, fan_out: usize) -> Mat {
    let bound = (3.0 / fan_in.max(1) as f64).sqrt();
    Mat::from_fn(fan_in, fan_out, |_, _| rng.random_range(-bound..=bound))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu(f64),
    Tanh,
}

impl Activation {
    pub fn apply(self, g: &mut Graph, x: Var) -> Var {
        match self {
            Activation::Identity => x,
            Activation::Relu => g.relu(x),
            Activation::LeakyRelu(s) => g.leaky_relu(x, s),
            Activation::Tanh => g.tanh(x),
        }
    }
}

/// Fully connected stack: `dims[0] → … → dims[n]`, with `acts[i]` after layer `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub dims: Vec<usize>,
    pub acts: Vec<Activation>,
}

impl MlpSpec {
    pub fn new(dims: Vec<usize>, hidden: Activation, output: Activation) -> Self {
        let layers = dims.len() - 1;
        let mut acts = vec![hidden; layers];
        acts[layers - 1] = output;
        MlpSpec { dims, acts }
    }

    pub fn layers(&self) -> usize {
        self.acts.len()
    }

    /// Appends `prefix.{i}.w` / `prefix.{i}.b` for every layer.
    pub fn init_into(&self, params: &mut ParamSet, prefix: &str, rng: &mut Rng) {
        for i in 0..self.layers() {
            let (a, b) = (self.dims[i], self.dims[i + 1]);
            params.push(format!("{prefix}.{i}.w"), init_weight(rng, a, b));
            params.push(format!("{prefix}.{i}.b"), Mat::zeros(1, b));
        }
    }

    /// `vars` holds `w0, b0, w1, b1, …`.
    pub fn forward(&self, g: &mut Graph, vars: &[Var], x: Var) -> Var {
        debug_assert_eq!(vars.len(), 2 * self.layers());
        let mut h = x;
        for (i, act) in self.acts.iter().enumerate() {
            h = g.affine(h, vars[2 * i], vars[2 * i + 1]);
            h = act.apply(g, h);
        }
        h
    }
}

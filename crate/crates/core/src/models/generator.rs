use std::rc::Rc;

use flowsynth_tensor::{Graph, Mat, Var};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::attention::self_attention_graph;
use super::gumbel::{codebook_project_rows, gumbel_softmax_rows, straight_through_rows};
use super::params::{init_weight, Activation, MlpSpec, ParamSet};
use super::ModelConfig;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::schema_codec::{Codec, FeatureTransform};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OutputField {
    Discrete { name: String, codes: Vec<f64> },
    Continuous { name: String },
}

/// Per-feature output kinds in schema order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputLayout {
    pub fields: Vec<OutputField>,
}

impl OutputLayout {
    pub fn from_codec(codec: &Codec) -> Self {
        let fields = codec
            .transforms
            .iter()
            .map(|t| match t {
                FeatureTransform::Discrete(c) => OutputField::Discrete {
                    name: c.field_name.clone(),
                    codes: c.codes.clone(),
                },
                FeatureTransform::Continuous(s) => OutputField::Continuous {
                    name: s.field_name.clone(),
                },
            })
            .collect();
        OutputLayout { fields }
    }

    /// All-continuous layout with generated names.
    pub fn continuous(n: usize) -> Self {
        OutputLayout {
            fields: (0..n)
                .map(|i| OutputField::Continuous { name: format!("x{i}") })
                .collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.fields.len()
    }

    /// (feature index, codes) for every discrete field.
    pub fn discrete(&self) -> Vec<(usize, &[f64])> {
        self.fields
            .iter()
            .enumerate()
            .filter_map(|(i, f)| match f {
                OutputField::Discrete { codes, .. } => Some((i, codes.as_slice())),
                OutputField::Continuous { .. } => None,
            })
            .collect()
    }

    pub fn continuous_indices(&self) -> Vec<usize> {
        self.fields
            .iter()
            .enumerate()
            .filter(|(_, f)| matches!(f, OutputField::Continuous { .. }))
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Discrete cells carry the expected code under the relaxed sample.
    Soft,
    /// Discrete cells carry exact codes; gradients pass straight through.
    Hard,
}

pub struct GeneratorOutput {
    pub x: Var,
    /// Relaxed samples, one `B × K_c` block per discrete field.
    pub y_soft: Vec<Var>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub z_dim: usize,
    pub d_m: usize,
    pub d_k: usize,
    pub use_attention: bool,
    pub ff: MlpSpec,
    pub layout: OutputLayout,
    pub params: ParamSet,
    cells: Rc<[u32]>,
}

impl Generator {
    pub fn init(config: &ModelConfig, layout: OutputLayout, rng: &mut Rng) -> Result<Self> {
        let f = layout.width();
        if f == 0 || config.z_dim == 0 || config.d_m == 0 || config.d_k == 0 {
            return Err(Error::Config("generator dimensions must be positive".into()));
        }
        let (z_dim, d_m, d_k) = (config.z_dim, config.d_m, config.d_k);
        let mut params = ParamSet::new();
        params.push("gen.in.w", init_weight(rng, z_dim, f * d_m));
        params.push("gen.in.b", Mat::zeros(1, f * d_m));
        if config.use_attention {
            params.push("gen.attn.wq", init_weight(rng, d_m, d_k));
            params.push("gen.attn.wk", init_weight(rng, d_m, d_k));
            params.push("gen.attn.wv", init_weight(rng, d_m, d_m));
        }
        let mut dims = vec![f * d_m];
        dims.extend(&config.gen_hidden);
        let act = Activation::LeakyRelu(config.leaky_slope);
        let ff = MlpSpec {
            acts: vec![act; dims.len() - 1],
            dims,
        };
        ff.init_into(&mut params, "gen.ff", rng);
        let last = *ff.dims.last().expect("nonempty");
        for field in &layout.fields {
            if let OutputField::Discrete { name, codes } = field {
                params.push(format!("gen.head.{name}.w"), init_weight(rng, last, codes.len()));
                params.push(format!("gen.head.{name}.b"), Mat::zeros(1, codes.len()));
            }
        }
        let n_cont = layout.continuous_indices().len();
        if n_cont > 0 {
            params.push("gen.head.cont.w", init_weight(rng, last, n_cont));
            params.push("gen.head.cont.b", Mat::zeros(1, n_cont));
        }
        let cells = column_order(&layout);
        Ok(Generator {
            z_dim,
            d_m,
            d_k,
            use_attention: config.use_attention,
            ff,
            layout,
            params,
            cells,
        })
    }

    /// Output width of the logit head of the named discrete field.
    pub fn head_width(&self, field: &str) -> Option<usize> {
        self.params.get(&format!("gen.head.{field}.w")).map(Mat::cols)
    }

    pub fn forward(
        &self,
        g: &mut Graph,
        vars: &[Var],
        z: Var,
        noise: &[Mat],
        tau: f64,
        mode: Mode,
    ) -> Result<GeneratorOutput> {
        let (batch, zd) = g.shape(z);
        if zd != self.z_dim {
            return Err(Error::Shape(format!("latent width {zd}, expected {}", self.z_dim)));
        }
        let discrete = self.layout.discrete();
        if noise.len() != discrete.len() {
            return Err(Error::Shape("one noise block per discrete field is required".into()));
        }
        let f = self.layout.width();
        let mut k = 0;
        let mut next = || {
            k += 1;
            vars[k - 1]
        };
        let (w_in, b_in) = (next(), next());
        let mut h = g.affine(z, w_in, b_in);
        if self.use_attention {
            let (wq, wk, wv) = (next(), next(), next());
            let tokens = g.reshape(h, batch * f, self.d_m);
            let (att, _) = self_attention_graph(g, tokens, wq, wk, wv, batch);
            h = g.reshape(att, batch, f * self.d_m);
        }
        let ff_vars: Vec<Var> = (0..2 * self.ff.layers()).map(|_| next()).collect();
        let h = self.ff.forward(g, &ff_vars, h);

        let mut parts = Vec::with_capacity(discrete.len() + 1);
        let mut y_soft = Vec::with_capacity(discrete.len());
        for ((_, codes), noise) in discrete.iter().zip(noise) {
            let (w, b) = (next(), next());
            let logits = g.affine(h, w, b);
            let y = gumbel_softmax_rows(g, logits, noise, tau)?;
            y_soft.push(y);
            let y_used = match mode {
                Mode::Soft => y,
                Mode::Hard => straight_through_rows(g, y),
            };
            let col = Rc::new(Mat::from_vec(codes.len(), 1, codes.to_vec()));
            parts.push(codebook_project_rows(g, y_used, &col));
        }
        if discrete.len() < f {
            let (w, b) = (next(), next());
            let c = g.affine(h, w, b);
            parts.push(g.tanh(c));
        }
        let stacked = g.concat_cols(&parts);
        let idx: Vec<u32> = (0..batch)
            .flat_map(|r| self.cells.iter().map(move |&c| (r * f) as u32 + c))
            .collect();
        let x = g.gather(stacked, idx.into(), batch, f);
        Ok(GeneratorOutput { x, y_soft })
    }

    /// Hard-mode samples, drawn `chunk` rows at a time.
    pub fn sample(&self, n: usize, latent: &mut Rng, gumbel: &mut Rng, tau: f64, chunk: usize) -> Result<Mat> {
        let f = self.layout.width();
        let mut out = Vec::with_capacity(n * f);
        let mut done = 0;
        while done < n {
            let b = chunk.max(1).min(n - done);
            let z = sample_latent(latent, b, self.z_dim);
            let noise = sample_noise(gumbel, b, &self.layout);
            let mut g = Graph::new();
            let vars = self.params.bind(&mut g, false);
            let zv = g.constant(z);
            let o = self.forward(&mut g, &vars, zv, &noise, tau, Mode::Hard)?;
            out.extend_from_slice(g.value(o.x).as_slice());
            done += b;
        }
        Ok(Mat::from_vec(n, f, out))
    }
}

/// Position of each schema column in the `[discrete…, continuous…]` stack.
fn column_order(layout: &OutputLayout) -> Rc<[u32]> {
    let discrete: Vec<usize> = layout.discrete().iter().map(|(i, _)| *i).collect();
    let cont = layout.continuous_indices();
    (0..layout.width())
        .map(|j| match discrete.iter().position(|&i| i == j) {
            Some(p) => p as u32,
            None => (discrete.len() + cont.iter().position(|&i| i == j).expect("continuous")) as u32,
        })
        .collect()
}

pub fn sample_latent(rng: &mut Rng, batch: usize, z_dim: usize) -> Mat {
    Mat::from_fn(batch, z_dim, |_, _| StandardNormal.sample(rng))
}

pub fn sample_noise(rng: &mut Rng, batch: usize, layout: &OutputLayout) -> Vec<Mat> {
    layout
        .discrete()
        .iter()
        .map(|(_, codes)| Mat::from_fn(batch, codes.len(), |_, _| rng::gumbel(rng)))
        .collect()
}

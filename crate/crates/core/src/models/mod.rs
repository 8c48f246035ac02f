//! Generator, critic, autoencoder and loss gate.

mod attention;
pub mod checkpoint;
mod generator;
mod gumbel;
mod nets;
mod params;

use serde::{Deserialize, Serialize};

pub use attention::{self_attention, self_attention_graph};
pub use checkpoint::{Checkpoint, GMAC_MAGIC, IDSC_MAGIC};
pub use generator::{sample_latent, sample_noise, Generator, GeneratorOutput, Mode, OutputField, OutputLayout};
pub use gumbel::{
    argmax, codebook_project, codebook_project_rows, gumbel_softmax, gumbel_softmax_rows, straight_through,
    straight_through_rows, GumbelDraw,
};
pub use nets::{Autoencoder, Critic, Gate};
pub use params::{init_weight, Activation, MlpSpec, ParamSet};

use crate::error::Result;
use crate::rng;

/// Widths and switches that shape the networks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub z_dim: usize,
    pub d_m: usize,
    pub d_k: usize,
    pub gen_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub ae_hidden: usize,
    pub ae_bottleneck: Option<usize>,
    pub gate_hidden: usize,
    pub leaky_slope: f64,
    pub use_attention: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            z_dim: 64,
            d_m: 32,
            d_k: 32,
            gen_hidden: vec![256, 256],
            critic_hidden: vec![256, 256, 256],
            ae_hidden: 128,
            ae_bottleneck: None,
            gate_hidden: 16,
            leaky_slope: 0.2,
            use_attention: true,
        }
    }
}

/// The four parameter sets of one training run.
#[derive(Clone, Debug, PartialEq)]
pub struct Networks {
    pub generator: Generator,
    pub critic: Critic,
    pub ae: Autoencoder,
    pub gate: Gate,
}

impl Networks {
    pub fn init(seed: u64, config: &ModelConfig, layout: OutputLayout) -> Result<Self> {
        let width = layout.width();
        let generator = Generator::init(config, layout, &mut rng::substream(seed, "init.generator"))?;
        Ok(Networks {
            generator,
            critic: Critic::init(config, width, &mut rng::substream(seed, "init.critic")),
            ae: Autoencoder::init(config, width, &mut rng::substream(seed, "init.ae")),
            gate: Gate::init(config, &mut rng::substream(seed, "init.gate")),
        })
    }
}

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelConfig;

/// Hyperparameters of one per-class generator run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    /// Gradient-penalty weight λ.
    pub lambda_gp: f64,
    /// Critic updates per generator update.
    pub n_critic: usize,
    pub batch_size: usize,
    pub lr_critic: f64,
    pub lr_generator: f64,
    pub lr_ae: f64,
    /// Entropy weight γ on the gate output.
    pub gamma: f64,
    /// Clip bounds `[a, b]` applied to the gate softmax.
    pub gate_min: f64,
    pub gate_max: f64,
    pub epochs: usize,
    pub tau_start: f64,
    pub tau_end: f64,
    /// Fraction of epochs over which τ moves linearly from start to end.
    pub tau_anneal_fraction: f64,
    pub z_dim: usize,
    pub d_m: usize,
    pub d_k: usize,
    pub gen_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub ae_hidden: usize,
    pub ae_bottleneck: Option<usize>,
    pub gate_hidden: usize,
    pub leaky_slope: f64,
    pub use_ae_constraint: bool,
    pub use_gate: bool,
    pub use_attention: bool,
    pub swd_projections: usize,
    /// Epoch interval for SWD monitoring; 0 disables it.
    pub swd_every: usize,
    /// Rows drawn from each side for SWD monitoring.
    pub swd_sample: usize,
    /// Epoch interval for checkpoints; 0 writes only the final one.
    pub checkpoint_every: usize,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        let m = ModelConfig::default();
        TrainingConfig {
            lambda_gp: 10.0,
            n_critic: 5,
            batch_size: 128,
            lr_critic: 1e-4,
            lr_generator: 1e-4,
            lr_ae: 1e-3,
            gamma: 0.1,
            gate_min: 0.0,
            gate_max: 1.0,
            epochs: 5000,
            tau_start: 1.0,
            tau_end: 0.1,
            tau_anneal_fraction: 0.8,
            z_dim: m.z_dim,
            d_m: m.d_m,
            d_k: m.d_k,
            gen_hidden: m.gen_hidden,
            critic_hidden: m.critic_hidden,
            ae_hidden: m.ae_hidden,
            ae_bottleneck: m.ae_bottleneck,
            gate_hidden: m.gate_hidden,
            leaky_slope: m.leaky_slope,
            use_ae_constraint: true,
            use_gate: true,
            use_attention: true,
            swd_projections: 64,
            swd_every: 1,
            swd_sample: 512,
            checkpoint_every: 0,
            seed: 0,
        }
    }
}

/// The four ablation variants, from the plain baseline to the full model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Gumbel heads only.
    #[serde(rename = "g-wgan-gp")]
    GWganGp,
    /// Adds the autoencoder constraint with fixed equal weights.
    #[serde(rename = "ga-wgan-gp")]
    GaWganGp,
    /// Adds the adaptive loss gate.
    #[serde(rename = "gma-wgan-gp")]
    GmaWganGp,
    /// Adds feature-wise self-attention.
    #[serde(rename = "gma-sawgan-gp")]
    GmaSawganGp,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::GWganGp, Variant::GaWganGp, Variant::GmaWganGp, Variant::GmaSawganGp];

    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "g-wgan-gp" => Ok(Variant::GWganGp),
            "ga-wgan-gp" => Ok(Variant::GaWganGp),
            "gma-wgan-gp" => Ok(Variant::GmaWganGp),
            "gma-sawgan-gp" | "full" => Ok(Variant::GmaSawganGp),
            other => Err(Error::Config(format!("unknown variant {other:?}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::GWganGp => "g-wgan-gp",
            Variant::GaWganGp => "ga-wgan-gp",
            Variant::GmaWganGp => "gma-wgan-gp",
            Variant::GmaSawganGp => "gma-sawgan-gp",
        }
    }

    /// (use_ae_constraint, use_gate, use_attention).
    pub fn toggles(self) -> (bool, bool, bool) {
        match self {
            Variant::GWganGp => (false, false, false),
            Variant::GaWganGp => (true, false, false),
            Variant::GmaWganGp => (true, true, false),
            Variant::GmaSawganGp => (true, true, true),
        }
    }
}

impl TrainingConfig {
    /// Short runs for pipelines and CI.
    pub fn smoke() -> Self {
        TrainingConfig {
            epochs: 200,
            ..Self::default()
        }
    }

    /// Narrow networks for single-core runs on subsampled data.
    pub fn desk() -> Self {
        TrainingConfig {
            epochs: 500,
            z_dim: 16,
            d_m: 16,
            d_k: 16,
            gen_hidden: vec![64, 64],
            critic_hidden: vec![64, 64],
            ae_hidden: 32,
            gate_hidden: 8,
            swd_every: 50,
            swd_sample: 256,
            ..Self::default()
        }
    }

    pub fn with_variant(mut self, v: Variant) -> Self {
        (self.use_ae_constraint, self.use_gate, self.use_attention) = v.toggles();
        self
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let c: TrainingConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: TrainingConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("bad config echo: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !(self.lambda_gp >= 0.0 && self.lambda_gp.is_finite()) {
            return fail("lambda_gp must be >= 0");
        }
        if self.n_critic < 1 {
            return fail("n_critic must be >= 1");
        }
        if self.batch_size < 2 {
            return fail("batch_size must be >= 2");
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return fail("gamma must be >= 0");
        }
        if !(0.0 <= self.gate_min && self.gate_min <= self.gate_max && self.gate_max <= 1.0) {
            return fail("gate bounds must satisfy 0 <= gate_min <= gate_max <= 1");
        }
        if self.epochs < 1 {
            return fail("epochs must be >= 1");
        }
        if !(positive(self.lr_critic) && positive(self.lr_generator) && positive(self.lr_ae)) {
            return fail("learning rates must be positive");
        }
        if !(positive(self.tau_start) && positive(self.tau_end)) {
            return fail("temperatures must be positive");
        }
        if !(self.tau_anneal_fraction > 0.0 && self.tau_anneal_fraction <= 1.0) {
            return fail("tau_anneal_fraction must be in (0, 1]");
        }
        if self.z_dim == 0 || self.d_m == 0 || self.d_k == 0 || self.ae_hidden == 0 || self.gate_hidden == 0 {
            return fail("network widths must be positive");
        }
        if self.gen_hidden.contains(&0) || self.critic_hidden.contains(&0) {
            return fail("hidden widths must be positive");
        }
        if self.ae_bottleneck == Some(0) {
            return fail("ae_bottleneck must be positive");
        }
        if !(self.leaky_slope >= 0.0 && self.leaky_slope < 1.0) {
            return fail("leaky_slope must be in [0, 1)");
        }
        if self.swd_every > 0 && (self.swd_projections == 0 || self.swd_sample < 2) {
            return fail("SWD monitoring needs projections >= 1 and sample >= 2");
        }
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            z_dim: self.z_dim,
            d_m: self.d_m,
            d_k: self.d_k,
            gen_hidden: self.gen_hidden.clone(),
            critic_hidden: self.critic_hidden.clone(),
            ae_hidden: self.ae_hidden,
            ae_bottleneck: self.ae_bottleneck,
            gate_hidden: self.gate_hidden,
            leaky_slope: self.leaky_slope,
            use_attention: self.use_attention,
        }
    }

    /// Temperature used during (zero-based) epoch `epoch`.
    pub fn tau_at(&self, epoch: usize) -> f64 {
        let span = ((self.epochs as f64 * self.tau_anneal_fraction).floor() as usize).max(1);
        let p = (epoch as f64 / span as f64).min(1.0);
        self.tau_start + (self.tau_end - self.tau_start) * p
    }

    /// Temperature after the last epoch, used for sampling.
    pub fn final_tau(&self) -> f64 {
        self.tau_at(self.epochs - 1)
    }
}

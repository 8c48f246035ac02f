//! Sampling trained per-class generators and merging their rows into an
//! augmented training set.

use std::collections::BTreeMap;
use std::path::Path;

use flowsynth_tensor::Mat;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gan_training::TrainState;
use crate::models::{Checkpoint, Generator, GMAC_MAGIC};
use crate::rng;
use crate::schema_codec::{AugmentationPlan, Codec, EncodedDataset, Provenance};

/// Rows generated per forward pass.
const CHUNK: usize = 1024;

/// A loaded generator checkpoint.
#[derive(Clone, Debug)]
pub struct ClassGenerator {
    pub class_name: String,
    pub generator: Generator,
    /// Temperature reached at the end of training.
    pub tau: f64,
    /// Hex SHA-256 of the checkpoint bytes.
    pub id: String,
    pub codec: Option<Codec>,
}

impl ClassGenerator {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let ckpt = Checkpoint::from_bytes(bytes, GMAC_MAGIC)?;
        let state = TrainState::from_checkpoint(&ckpt)?;
        let codec = if ckpt.codec.is_empty() {
            None
        } else {
            Some(Codec::from_json(&ckpt.codec)?)
        };
        Ok(ClassGenerator {
            class_name: ckpt.meta("class").unwrap_or_default().to_string(),
            generator: state.nets.generator,
            tau: ckpt.tau,
            id: hex::encode(Sha256::digest(bytes)),
            codec,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn from_state(state: &TrainState, class_name: &str) -> Self {
        let bytes = state.to_checkpoint("", class_name).to_bytes();
        ClassGenerator {
            class_name: class_name.to_string(),
            generator: state.nets.generator.clone(),
            tau: state.sampling_tau(),
            id: hex::encode(Sha256::digest(&bytes)),
            codec: None,
        }
    }
}

/// Exactly `n` hard-mode rows at the generator's final temperature.
pub fn generate_class(gen: &ClassGenerator, n: usize, seed: u64) -> Result<Mat> {
    let s = rng::child_seed(seed, &format!("synthesis/{}", gen.class_name), 0);
    let mut latent = rng::substream(s, rng::LATENT);
    let mut gumbel = rng::substream(s, rng::GUMBEL);
    gen.generator.sample(n, &mut latent, &mut gumbel, gen.tau, CHUNK)
}

/// An augmented training set plus the generator id behind each augmented class.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedDataset {
    pub dataset: EncodedDataset,
    pub generators: BTreeMap<String, String>,
}

impl AugmentedDataset {
    pub fn to_bytes(&self) -> Vec<u8> {
        self.dataset.to_bytes_with_generators(&self.generators)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }
}

/// Real rows first (unchanged, in input order), then synthetic rows grouped
/// by class in plan order.
pub fn assemble(
    train: &EncodedDataset,
    plan: &AugmentationPlan,
    generators: &BTreeMap<String, ClassGenerator>,
    seed: u64,
) -> Result<AugmentedDataset> {
    plan.validate()?;
    let counts = train.class_counts();
    for e in &plan.entries {
        let idx = train
            .class_index(&e.class)
            .ok_or_else(|| Error::Data(format!("plan class {:?} is not in the training set", e.class)))?;
        if counts[idx] != e.original_count {
            return Err(Error::Data(format!(
                "plan expects {} rows of {:?}, training set has {}",
                e.original_count, e.class, counts[idx]
            )));
        }
    }
    let mut out = train.clone();
    let mut ids = BTreeMap::new();
    for e in plan.augmented_classes() {
        let gen = generators
            .get(&e.class)
            .ok_or_else(|| Error::Data(format!("no generator checkpoint for augmented class {:?}", e.class)))?;
        if gen.generator.layout.width() != train.n_features() {
            return Err(Error::Shape(format!(
                "generator for {:?} emits {} features, training set has {}",
                e.class,
                gen.generator.layout.width(),
                train.n_features()
            )));
        }
        if let Some(codec) = &gen.codec {
            if codec.feature_names() != train.feature_names {
                return Err(Error::Schema(format!(
                    "generator for {:?} was trained on a different schema",
                    e.class
                )));
            }
        }
        let label = train.class_index(&e.class).expect("checked above") as u32;
        let n = e.synthetic_count();
        let rows = generate_class(gen, n, seed)?;
        let synthetic = EncodedDataset {
            features: rows,
            labels: vec![label; n],
            class_names: train.class_names.clone(),
            feature_names: train.feature_names.clone(),
            provenance: vec![Provenance::Synthetic; n],
            split_tag: train.split_tag.clone(),
        };
        out = out.concat(&synthetic)?;
        ids.insert(e.class.clone(), gen.id.clone());
    }
    out.validate()?;
    Ok(AugmentedDataset {
        dataset: out,
        generators: ids,
    })
}

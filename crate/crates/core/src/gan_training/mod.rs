//! Adversarial training with gradient penalty, the autoencoder constraint and
//! the loss gate, plus SWD monitoring.

mod config;
pub mod losses;
mod swd;
mod train;

pub use config::{TrainingConfig, Variant};
pub use losses::{gradient_penalty, interpolate, reconstruction_loss};
pub use swd::{sliced_wasserstein, sliced_wasserstein_with};
pub use train::{
    checkpoint_layout, continue_training, train, write_loss_log, CriticStats, GeneratorStats, LossRecord,
    TrainOptions, TrainOutcome, TrainState, UpdateCounters,
};

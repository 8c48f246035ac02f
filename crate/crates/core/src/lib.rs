//! Class-conditional synthesis of network-flow records for intrusion detection.

pub mod binio;
pub mod error;
pub mod eval_metrics;
pub mod gan_training;
pub mod ids_zoo;
pub mod models;
pub mod presets;
pub mod rng;
pub mod schema_codec;
pub mod synthesis;

pub use error::{Error, Result};

//! Named random substreams derived from one run seed.
//!
//! Each consumer (latent draws, Gumbel noise, interpolation weights, batch
//! shuffling, monitoring, initialization, dropout) owns its own ChaCha stream,
//! so adding draws to one consumer never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const LATENT: &str = "latent";
pub const GUMBEL: &str = "gumbel";
pub const INTERP: &str = "interp";
pub const SHUFFLE: &str = "shuffle";
pub const MONITOR: &str = "monitor";
pub const INIT: &str = "init";
pub const DROPOUT: &str = "dropout";

fn stream_id(name: &str) -> u64 {
    // FNV-1a
    name.bytes().fold(0xcbf29ce484222325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x100000001b3)
    })
}

pub fn substream(seed: u64, name: &str) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(name));
    rng
}

/// Restores a substream at a saved word position.
pub fn substream_at(seed: u64, name: &str, word_pos: u128) -> Rng {
    let mut rng = substream(seed, name);
    rng.set_word_pos(word_pos);
    rng
}

/// Derives an independent child seed, e.g. for run `i` of a protocol.
pub fn child_seed(seed: u64, name: &str, index: u64) -> u64 {
    use rand::RngCore;
    let mut rng = substream(seed ^ index.wrapping_mul(0x9e3779b97f4a7c15), name);
    rng.next_u64()
}

/// Standard Gumbel draw `-ln(-ln U)` with `U` strictly inside (0, 1).
pub fn gumbel(rng: &mut Rng) -> f64 {
    use rand::Rng as _;
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return -(-u.ln()).ln();
        }
    }
}

//! Binary checkpoint container shared by generator runs (`GMAC`) and
//! classifiers (`IDSC`).
//!
//! Layout (little-endian): 4-byte magic, `u16` version, length-prefixed UTF-8
//! config echo and codec JSON, `u32`-counted metadata string pairs, `u64`
//! epoch, `f64` temperature, `u32`-counted named arrays (name, `u8` element
//! width 4 or 8, `u32` rows, `u32` cols, data), `u32`-counted named `u64`
//! counters and `u32`-counted named `u128` RNG word positions. Arrays are
//! written at full `f64` width by default so resuming is bit-exact.

use std::path::Path;

use flowsynth_tensor::Mat;

use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};

pub const GMAC_MAGIC: &[u8; 4] = b"GMAC";
pub const IDSC_MAGIC: &[u8; 4] = b"IDSC";
pub const VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub magic: [u8; 4],
    pub config: String,
    pub codec: String,
    pub meta: Vec<(String, String)>,
    pub epoch: u64,
    pub tau: f64,
    pub arrays: Vec<(String, Mat)>,
    pub counters: Vec<(String, u64)>,
    pub rng_positions: Vec<(String, u128)>,
}

fn what(magic: &[u8; 4]) -> &'static str {
    if magic == IDSC_MAGIC {
        "IDSC checkpoint"
    } else {
        "GMAC checkpoint"
    }
}

impl Checkpoint {
    pub fn new(magic: &[u8; 4]) -> Self {
        Checkpoint {
            magic: *magic,
            config: String::new(),
            codec: String::new(),
            meta: Vec::new(),
            epoch: 0,
            tau: 1.0,
            arrays: Vec::new(),
            counters: Vec::new(),
            rng_positions: Vec::new(),
        }
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn array(&self, name: &str) -> Option<&Mat> {
        self.arrays.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn counter(&self, name: &str) -> Option<u64> {
        self.counters.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn rng_position(&self, name: &str) -> Option<u128> {
        self.rng_positions.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    /// Arrays whose names start with `prefix`, in stored order.
    pub fn arrays_with_prefix(&self, prefix: &str) -> Vec<Mat> {
        self.arrays
            .iter()
            .filter(|(n, _)| n.starts_with(prefix))
            .map(|(_, m)| m.clone())
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(&self.magic);
        w.u16(VERSION);
        w.str(&self.config);
        w.str(&self.codec);
        w.u32(self.meta.len() as u32);
        for (k, v) in &self.meta {
            w.str(k);
            w.str(v);
        }
        w.u64(self.epoch);
        w.f64(self.tau);
        w.u32(self.arrays.len() as u32);
        for (name, m) in &self.arrays {
            w.str(name);
            w.bytes(&[8]);
            w.u32(m.rows() as u32);
            w.u32(m.cols() as u32);
            for &x in m.as_slice() {
                w.f64(x);
            }
        }
        w.u32(self.counters.len() as u32);
        for (name, v) in &self.counters {
            w.str(name);
            w.u64(*v);
        }
        w.u32(self.rng_positions.len() as u32);
        for (name, v) in &self.rng_positions {
            w.str(name);
            w.u128(*v);
        }
        w.into_bytes()
    }

    /// Parses a container, requiring the given magic.
    pub fn from_bytes(bytes: &[u8], magic: &[u8; 4]) -> Result<Self> {
        let what = what(magic);
        let mut r = Reader::new(bytes, what);
        r.expect_magic(magic)?;
        let version = r.u16()?;
        if version != VERSION {
            return Err(r.err(format!("unsupported version {version}")));
        }
        let config = r.str()?;
        let codec = r.str()?;
        let n_meta = r.u32()? as usize;
        r.check_count(n_meta, 8)?;
        let mut meta = Vec::with_capacity(n_meta);
        for _ in 0..n_meta {
            meta.push((r.str()?, r.str()?));
        }
        let epoch = r.u64()?;
        let tau = r.f64()?;
        let n_arrays = r.u32()? as usize;
        r.check_count(n_arrays, 13)?;
        let mut arrays = Vec::with_capacity(n_arrays);
        for _ in 0..n_arrays {
            let name = r.str()?;
            let width = r.take(1)?[0];
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let len = rows.checked_mul(cols).ok_or_else(|| r.err("array size overflows"))?;
            let data = match width {
                8 => {
                    r.check_count(len, 8)?;
                    (0..len).map(|_| r.f64()).collect::<Result<Vec<_>>>()?
                }
                4 => {
                    r.check_count(len, 4)?;
                    (0..len).map(|_| r.f32().map(f64::from)).collect::<Result<Vec<_>>>()?
                }
                other => return Err(r.err(format!("array {name:?} has element width {other}"))),
            };
            arrays.push((name, Mat::from_vec(rows, cols, data)));
        }
        let n_counters = r.u32()? as usize;
        r.check_count(n_counters, 12)?;
        let mut counters = Vec::with_capacity(n_counters);
        for _ in 0..n_counters {
            counters.push((r.str()?, r.u64()?));
        }
        let n_rng = r.u32()? as usize;
        r.check_count(n_rng, 20)?;
        let mut rng_positions = Vec::with_capacity(n_rng);
        for _ in 0..n_rng {
            rng_positions.push((r.str()?, r.u128()?));
        }
        r.finish()?;
        Ok(Checkpoint {
            magic: *magic,
            config,
            codec,
            meta,
            epoch,
            tau,
            arrays,
            counters,
            rng_positions,
        })
    }

    /// Writes via a temporary sibling and rename, so a crash never leaves a
    /// half-written checkpoint behind.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_bytes())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path, magic: &[u8; 4]) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes, magic)
    }

    pub fn require_array(&self, name: &str) -> Result<&Mat> {
        self.array(name)
            .ok_or_else(|| Error::format(what(&self.magic), format!("missing array {name:?}")))
    }
}

//! Encoded datasets and the `FSE1` container.
//!
//! Layout (little-endian): magic `FSE1`, `u32` row count, `u32` feature
//! count, the feature matrix as row-major `f32`, one `u32` label per row, and
//! the remainder of the file is a UTF-8 JSON footer carrying class names,
//! feature names, per-row provenance and the split tag.

use std::collections::BTreeMap;
use std::path::Path;

use flowsynth_tensor::Mat;
use serde::{Deserialize, Serialize};

use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};

pub const FSE1_MAGIC: &[u8; 4] = b"FSE1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    Real,
    Synthetic,
}

impl Provenance {
    fn flag(self) -> char {
        match self {
            Provenance::Real => 'R',
            Provenance::Synthetic => 'S',
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncodedDataset {
    pub features: Mat,
    pub labels: Vec<u32>,
    pub class_names: Vec<String>,
    pub feature_names: Vec<String>,
    pub provenance: Vec<Provenance>,
    pub split_tag: String,
}

#[derive(Serialize, Deserialize)]
struct Footer {
    class_names: Vec<String>,
    feature_names: Vec<String>,
    provenance: String,
    split_tag: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    generators: BTreeMap<String, String>,
}

impl EncodedDataset {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == name)
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.rows() != self.labels.len() || self.provenance.len() != self.labels.len() {
            return Err(Error::Shape("features, labels and provenance disagree on row count".into()));
        }
        if !self.feature_names.is_empty() && self.feature_names.len() != self.n_features() {
            return Err(Error::Shape("feature name count differs from feature width".into()));
        }
        if let Some(&l) = self.labels.iter().find(|&&l| l as usize >= self.class_names.len()) {
            return Err(Error::Data(format!("label {l} outside {} classes", self.class_names.len())));
        }
        if self
            .features
            .as_slice()
            .iter()
            .any(|x| !(x.is_finite() && (-1.0 - 1e-9..=1.0 + 1e-9).contains(x)))
        {
            return Err(Error::Data("feature value outside [-1, 1]".into()));
        }
        Ok(())
    }

    /// Row counts per class index.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_names.len()];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    pub fn rows_of_class(&self, class: usize) -> Vec<usize> {
        (0..self.n_rows()).filter(|&r| self.labels[r] as usize == class).collect()
    }

    /// Keeps the rows at `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> EncodedDataset {
        let f = self.n_features();
        let mut data = Vec::with_capacity(idx.len() * f);
        for &r in idx {
            data.extend_from_slice(self.features.row(r));
        }
        EncodedDataset {
            features: Mat::from_vec(idx.len(), f, data),
            labels: idx.iter().map(|&r| self.labels[r]).collect(),
            class_names: self.class_names.clone(),
            feature_names: self.feature_names.clone(),
            provenance: idx.iter().map(|&r| self.provenance[r]).collect(),
            split_tag: self.split_tag.clone(),
        }
    }

    /// Appends `other`'s rows; both must share classes and feature width.
    pub fn concat(&self, other: &EncodedDataset) -> Result<EncodedDataset> {
        if other.class_names != self.class_names || other.n_features() != self.n_features() {
            return Err(Error::Shape("cannot concatenate datasets with different layouts".into()));
        }
        let mut data = self.features.as_slice().to_vec();
        data.extend_from_slice(other.features.as_slice());
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        let mut provenance = self.provenance.clone();
        provenance.extend_from_slice(&other.provenance);
        Ok(EncodedDataset {
            features: Mat::from_vec(labels.len(), self.n_features(), data),
            labels,
            class_names: self.class_names.clone(),
            feature_names: self.feature_names.clone(),
            provenance,
            split_tag: self.split_tag.clone(),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.to_bytes_with_generators(&BTreeMap::new())
    }

    /// Container bytes with an extra footer map of class name to generator id.
    pub fn to_bytes_with_generators(&self, generators: &BTreeMap<String, String>) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(FSE1_MAGIC);
        w.u32(self.n_rows() as u32);
        w.u32(self.n_features() as u32);
        for &x in self.features.as_slice() {
            w.f32(x as f32);
        }
        for &l in &self.labels {
            w.u32(l);
        }
        let footer = Footer {
            class_names: self.class_names.clone(),
            feature_names: self.feature_names.clone(),
            provenance: self.provenance.iter().map(|p| p.flag()).collect(),
            split_tag: self.split_tag.clone(),
            generators: generators.clone(),
        };
        w.bytes(serde_json::to_string(&footer).expect("footer serializes").as_bytes());
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::from_bytes_with_generators(bytes).map(|(d, _)| d)
    }

    pub fn from_bytes_with_generators(bytes: &[u8]) -> Result<(Self, BTreeMap<String, String>)> {
        let mut r = Reader::new(bytes, "FSE1 container");
        r.expect_magic(FSE1_MAGIC)?;
        let n = r.u32()? as usize;
        let f = r.u32()? as usize;
        let cells = n
            .checked_mul(f)
            .ok_or_else(|| r.err("row count times width overflows"))?;
        r.check_count(cells, 4)?;
        let mut data = Vec::with_capacity(cells);
        for _ in 0..cells {
            data.push(r.f32()? as f64);
        }
        r.check_count(n, 4)?;
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            labels.push(r.u32()?);
        }
        let footer: Footer = serde_json::from_slice(r.rest())
            .map_err(|e| Error::format("FSE1 container", format!("bad footer: {e}")))?;
        let provenance = footer
            .provenance
            .chars()
            .map(|c| match c {
                'R' => Ok(Provenance::Real),
                'S' => Ok(Provenance::Synthetic),
                other => Err(Error::format("FSE1 container", format!("bad provenance flag {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if provenance.len() != n {
            return Err(Error::format("FSE1 container", "provenance length differs from row count"));
        }
        let ds = EncodedDataset {
            features: Mat::from_vec(n, f, data),
            labels,
            class_names: footer.class_names,
            feature_names: footer.feature_names,
            provenance,
            split_tag: footer.split_tag,
        };
        ds.validate()
            .map_err(|e| Error::format("FSE1 container", e.to_string()))?;
        Ok((ds, footer.generators))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

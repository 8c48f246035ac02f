//! Codebooks for discrete fields, min-max scalers for continuous ones, and
//! the encode/decode pair built from them.

use std::collections::HashMap;
use std::path::Path;

use flowsynth_tensor::Mat;
use serde::{Deserialize, Serialize};

use super::dataset::{EncodedDataset, Provenance};
use super::schema::{FeatureSchema, FieldKind};
use super::table::{RawColumn, RawDataset, SplitTag};
use crate::error::{Error, Result};

/// Rendered in decoded output for cells holding the out-of-vocabulary code.
pub const OOV_TOKEN: &str = "<oov>";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub field_name: String,
    pub legal_values: Vec<String>,
    pub codes: Vec<f64>,
    pub oov_code: f64,
    #[serde(skip)]
    lookup: HashMap<String, usize>,
}

fn round_f32(x: f64) -> f64 {
    x as f32 as f64
}

impl Codebook {
    /// Builds a codebook over the sorted distinct `values`.
    ///
    /// Codes are `K` evenly spaced points on [-1, 1] (a single value gets 0),
    /// rounded to `f32` so they survive the f32 dataset container exactly.
    /// The OOV code sits at the midpoint of the widest gap between adjacent
    /// codes, or at 0.5 when there is only one code.
    pub fn fit<'a>(field_name: &str, values: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut legal: Vec<String> = values.into_iter().map(str::to_string).collect();
        legal.sort();
        legal.dedup();
        if legal.is_empty() {
            return Err(Error::Data(format!(
                "discrete field {field_name:?} has no observed values"
            )));
        }
        let k = legal.len();
        let codes: Vec<f64> = if k == 1 {
            vec![0.0]
        } else {
            (0..k)
                .map(|i| round_f32(-1.0 + 2.0 * i as f64 / (k - 1) as f64))
                .collect()
        };
        if codes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Data(format!(
                "field {field_name:?} has too many categories ({k}) for distinct f32 codes"
            )));
        }
        let oov_code = if k == 1 {
            0.5
        } else {
            let (i, _) = codes
                .windows(2)
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, w)| {
                    let gap = w[1] - w[0];
                    if gap > best.1 {
                        (i, gap)
                    } else {
                        best
                    }
                });
            round_f32(0.5 * (codes[i] + codes[i + 1]))
        };
        Ok(Self::from_parts(field_name.to_string(), legal, codes, oov_code))
    }

    pub fn from_parts(field_name: String, legal_values: Vec<String>, codes: Vec<f64>, oov_code: f64) -> Self {
        let lookup = legal_values
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), i))
            .collect();
        Codebook {
            field_name,
            legal_values,
            codes,
            oov_code,
            lookup,
        }
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn index_of(&self, value: &str) -> Option<usize> {
        if self.lookup.is_empty() && !self.legal_values.is_empty() {
            return self.legal_values.iter().position(|v| v == value);
        }
        self.lookup.get(value).copied()
    }

    pub fn encode(&self, value: &str) -> f64 {
        self.index_of(value).map_or(self.oov_code, |i| self.codes[i])
    }

    pub fn is_legal(&self, x: f64) -> bool {
        self.codes.contains(&x)
    }

    /// Index of the code nearest to `x`, or `None` when the OOV code is strictly nearer.
    pub fn nearest(&self, x: f64) -> Option<usize> {
        let (best, dist) = self
            .codes
            .iter()
            .enumerate()
            .map(|(i, c)| (i, (x - c).abs()))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        if (x - self.oov_code).abs() < dist {
            None
        } else {
            Some(best)
        }
    }

    pub fn decode(&self, x: f64) -> &str {
        self.nearest(x).map_or(OOV_TOKEN, |i| &self.legal_values[i])
    }

    fn rebuild_lookup(&mut self) {
        self.lookup = self
            .legal_values
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), i))
            .collect();
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub field_name: String,
    pub raw_min: f64,
    pub raw_max: f64,
}

impl Scaler {
    pub fn fit(field_name: &str, values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Data(format!("continuous field {field_name:?} has no values")));
        }
        let raw_min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let raw_max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Scaler {
            field_name: field_name.to_string(),
            raw_min,
            raw_max,
        })
    }

    /// Affine map onto [-1, 1], clamped; a constant training column encodes to 0.
    pub fn encode(&self, x: f64) -> f64 {
        let range = self.raw_max - self.raw_min;
        if range <= 0.0 {
            return 0.0;
        }
        (2.0 * (x - self.raw_min) / range - 1.0).clamp(-1.0, 1.0)
    }

    pub fn decode(&self, e: f64) -> f64 {
        let range = self.raw_max - self.raw_min;
        if range <= 0.0 {
            return self.raw_min;
        }
        self.raw_min + (e + 1.0) * 0.5 * range
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureTransform {
    Discrete(Codebook),
    Continuous(Scaler),
}

impl FeatureTransform {
    pub fn name(&self) -> &str {
        match self {
            FeatureTransform::Discrete(c) => &c.field_name,
            FeatureTransform::Continuous(s) => &s.field_name,
        }
    }

    pub fn codebook(&self) -> Option<&Codebook> {
        match self {
            FeatureTransform::Discrete(c) => Some(c),
            FeatureTransform::Continuous(_) => None,
        }
    }
}

/// Everything fitted on the training split: one transform per feature plus
/// the class list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Codec {
    pub transforms: Vec<FeatureTransform>,
    pub class_names: Vec<String>,
    pub label_name: String,
}

fn require_train(train: &RawDataset) -> Result<()> {
    if train.split != SplitTag::Train {
        return Err(Error::Data(format!(
            "codebooks and scalers must be fitted on the training split, got {:?}",
            train.split.as_str()
        )));
    }
    Ok(())
}

fn check_columns(train: &RawDataset, schema: &FeatureSchema) -> Result<()> {
    if train.feature_names != schema.feature_names() {
        return Err(Error::Schema("dataset columns do not match schema features".into()));
    }
    Ok(())
}

pub fn fit_codebooks(train: &RawDataset, schema: &FeatureSchema) -> Result<Vec<Codebook>> {
    require_train(train)?;
    check_columns(train, schema)?;
    schema
        .features()
        .zip(&train.columns)
        .filter(|(f, _)| f.kind == FieldKind::Discrete)
        .map(|(f, col)| match col {
            RawColumn::Categorical(v) => Codebook::fit(&f.name, v.iter().map(String::as_str)),
            RawColumn::Numeric(_) => Err(Error::Schema(format!("field {:?} is not categorical", f.name))),
        })
        .collect()
}

pub fn fit_scalers(train: &RawDataset, schema: &FeatureSchema) -> Result<Vec<Scaler>> {
    require_train(train)?;
    check_columns(train, schema)?;
    schema
        .features()
        .zip(&train.columns)
        .filter(|(f, _)| f.kind == FieldKind::Continuous)
        .map(|(f, col)| match col {
            RawColumn::Numeric(v) => Scaler::fit(&f.name, v),
            RawColumn::Categorical(_) => Err(Error::Schema(format!("field {:?} is not numeric", f.name))),
        })
        .collect()
}

impl Codec {
    pub fn fit(train: &RawDataset, schema: &FeatureSchema) -> Result<Self> {
        let mut books = fit_codebooks(train, schema)?.into_iter();
        let mut scalers = fit_scalers(train, schema)?.into_iter();
        let transforms = schema
            .features()
            .map(|f| match f.kind {
                FieldKind::Discrete => FeatureTransform::Discrete(books.next().expect("one per field")),
                FieldKind::Continuous => FeatureTransform::Continuous(scalers.next().expect("one per field")),
            })
            .collect();
        let class_names = match &schema.classes {
            Some(c) => c.clone(),
            None => train.distinct_labels(),
        };
        Ok(Codec {
            transforms,
            class_names,
            label_name: schema.label_field().name.clone(),
        })
    }

    pub fn n_features(&self) -> usize {
        self.transforms.len()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.transforms.iter().map(|t| t.name().to_string()).collect()
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == name)
    }

    pub fn codebooks(&self) -> impl Iterator<Item = (usize, &Codebook)> {
        self.transforms
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.codebook().map(|c| (i, c)))
    }

    pub fn encode(&self, raw: &RawDataset) -> Result<EncodedDataset> {
        if raw.feature_names != self.feature_names() {
            return Err(Error::Schema("dataset columns do not match the fitted codec".into()));
        }
        let n = raw.n_rows();
        let f = self.n_features();
        let mut features = Mat::zeros(n, f);
        for (j, (t, col)) in self.transforms.iter().zip(&raw.columns).enumerate() {
            match (t, col) {
                (FeatureTransform::Continuous(s), RawColumn::Numeric(v)) => {
                    for (r, &x) in v.iter().enumerate() {
                        features.set(r, j, s.encode(x));
                    }
                }
                (FeatureTransform::Discrete(c), RawColumn::Categorical(v)) => {
                    for (r, x) in v.iter().enumerate() {
                        features.set(r, j, c.encode(x));
                    }
                }
                _ => return Err(Error::Schema(format!("column kind mismatch for {:?}", t.name()))),
            }
        }
        let labels = raw
            .labels
            .iter()
            .enumerate()
            .map(|(row, l)| {
                self.class_index(l).map(|i| i as u32).ok_or_else(|| Error::Row {
                    row,
                    msg: format!("label {l:?} is not a known class"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EncodedDataset {
            features,
            labels,
            class_names: self.class_names.clone(),
            feature_names: self.feature_names(),
            provenance: vec![Provenance::Real; n],
            split_tag: raw.split.as_str().to_string(),
        })
    }

    pub fn decode(&self, enc: &EncodedDataset) -> Result<RawDataset> {
        if enc.n_features() != self.n_features() {
            return Err(Error::Shape(format!(
                "dataset has {} features, codec {}",
                enc.n_features(),
                self.n_features()
            )));
        }
        let columns = self
            .transforms
            .iter()
            .enumerate()
            .map(|(j, t)| {
                let col = (0..enc.n_rows()).map(|r| enc.features.get(r, j));
                match t {
                    FeatureTransform::Continuous(s) => RawColumn::Numeric(col.map(|e| s.decode(e)).collect()),
                    FeatureTransform::Discrete(c) => {
                        RawColumn::Categorical(col.map(|e| c.decode(e).to_string()).collect())
                    }
                }
            })
            .collect();
        let labels = enc
            .labels
            .iter()
            .map(|&l| {
                enc.class_names
                    .get(l as usize)
                    .cloned()
                    .ok_or_else(|| Error::Data(format!("label index {l} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RawDataset {
            feature_names: self.feature_names(),
            columns,
            labels,
            split: SplitTag::parse(&enc.split_tag),
        })
    }

    /// Number of cells violating the encoded-range or legal-code invariants.
    pub fn count_violations(&self, enc: &EncodedDataset) -> usize {
        let mut bad = 0;
        for r in 0..enc.n_rows() {
            for (j, t) in self.transforms.iter().enumerate() {
                let x = enc.features.get(r, j);
                let ok = match t {
                    FeatureTransform::Continuous(_) => {
                        x.is_finite() && (-1.0 - 1e-9..=1.0 + 1e-9).contains(&x)
                    }
                    FeatureTransform::Discrete(c) => c.is_legal(x) || x == c.oov_code,
                };
                if !ok {
                    bad += 1;
                }
            }
        }
        bad
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("codec serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut codec: Codec =
            serde_json::from_str(text).map_err(|e| Error::format("codec", e.to_string()))?;
        for t in &mut codec.transforms {
            if let FeatureTransform::Discrete(c) = t {
                if c.codes.len() != c.legal_values.len() || c.codes.is_empty() {
                    return Err(Error::format("codec", format!("codebook {:?} is inconsistent", c.field_name)));
                }
                c.rebuild_lookup();
            }
        }
        Ok(codec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

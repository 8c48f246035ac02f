//! The five downstream intrusion-detection classifiers. Every kind reads a
//! record of `F` features as a length-`F`, single-channel sequence.

mod layers;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use flowsynth_tensor::{Adam, AdamConfig, Graph, Mat, Var};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use layers::{Layer, BN_EPS, BN_MOMENTUM};
use layers::{Act, Ctx};

use crate::error::{Error, Result};
use crate::models::{Checkpoint, ParamSet, IDSC_MAGIC};
use crate::rng::{self, Rng};
use crate::schema_codec::EncodedDataset;

pub const DEFAULT_EPOCHS: usize = 100;
pub const BATCH_SIZE: usize = 256;
pub const LEARNING_RATE: f64 = 1e-3;
const DROPOUT_RATE: f64 = 0.2;
const PREDICT_CHUNK: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Cnn,
    Dnn,
    Lstm,
    CnnBilstm,
    CnnLstm,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 5] = [
        ClassifierKind::Cnn,
        ClassifierKind::Dnn,
        ClassifierKind::Lstm,
        ClassifierKind::CnnBilstm,
        ClassifierKind::CnnLstm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Cnn => "cnn",
            ClassifierKind::Dnn => "dnn",
            ClassifierKind::Lstm => "lstm",
            ClassifierKind::CnnBilstm => "cnn_bilstm",
            ClassifierKind::CnnLstm => "cnn_lstm",
        }
    }

    /// Display name in report tables.
    pub fn label(self) -> &'static str {
        match self {
            ClassifierKind::Cnn => "CNN",
            ClassifierKind::Dnn => "DNN",
            ClassifierKind::Lstm => "LSTM",
            ClassifierKind::CnnBilstm => "CNN-BiLSTM",
            ClassifierKind::CnnLstm => "CNN-LSTM",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        ClassifierKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::Config(format!("unknown classifier kind {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    pub input_width: usize,
    pub n_classes: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn new(kind: ClassifierKind, input_width: usize, n_classes: usize, seed: u64) -> Self {
        ClassifierSpec {
            kind,
            input_width,
            n_classes,
            epochs: DEFAULT_EPOCHS,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_width == 0 {
            return Err(Error::Config("classifier input width must be at least 1".into()));
        }
        if self.n_classes < 2 {
            return Err(Error::Config("classifier needs at least two classes".into()));
        }
        Ok(())
    }

    /// The fixed layer stack of this kind.
    pub fn layers(&self) -> Vec<Layer> {
        use Layer::*;
        let f = self.input_width;
        let n = self.n_classes;
        let pooled = |len: usize, p: usize| (len / p).max(1);
        let out = |n_in| Dense { n_in, n_out: n, relu: false };
        match self.kind {
            ClassifierKind::Dnn => vec![
                Dense { n_in: f, n_out: 32, relu: true },
                Dense { n_in: 32, n_out: 16, relu: true },
                out(16),
            ],
            ClassifierKind::Lstm => vec![
                Lstm { c_in: 1, hidden: 64, sequences: true },
                Lstm { c_in: 64, hidden: 64, sequences: false },
                Dropout { rate: DROPOUT_RATE },
                Dense { n_in: 64, n_out: 32, relu: true },
                out(32),
            ],
            ClassifierKind::Cnn => {
                let len = pooled(f, 3);
                vec![
                    Conv { c_in: 1, c_out: 64, kernel: 5 },
                    BatchNorm { channels: 64 },
                    MaxPool { size: 3 },
                    Conv { c_in: 64, c_out: 64, kernel: 5 },
                    BatchNorm { channels: 64 },
                    Flatten,
                    Dense { n_in: len * 64, n_out: 16, relu: true },
                    out(16),
                ]
            }
            ClassifierKind::CnnLstm => vec![
                Conv { c_in: 1, c_out: 64, kernel: 3 },
                BatchNorm { channels: 64 },
                MaxPool { size: 2 },
                Conv { c_in: 64, c_out: 128, kernel: 3 },
                BatchNorm { channels: 128 },
                MaxPool { size: 2 },
                Lstm { c_in: 128, hidden: 100, sequences: false },
                Dropout { rate: DROPOUT_RATE },
                out(100),
            ],
            ClassifierKind::CnnBilstm => vec![
                Conv { c_in: 1, c_out: 32, kernel: 3 },
                MaxPool { size: 2 },
                BatchNorm { channels: 32 },
                BiLstm { c_in: 32, hidden: 32 },
                Dropout { rate: DROPOUT_RATE },
                Dense { n_in: 64, n_out: 25, relu: true },
                out(25),
            ],
        }
    }
}

/// A classifier with its weights, batch-norm running statistics and the
/// mean training loss of every epoch it has been fitted for.
#[derive(Clone, Debug, PartialEq)]
pub struct Classifier {
    pub spec: ClassifierSpec,
    pub layers: Vec<Layer>,
    pub params: ParamSet,
    pub stats: ParamSet,
    pub history: Vec<f64>,
}

pub type TrainedClassifier = Classifier;

pub fn build(spec: ClassifierSpec) -> Result<Classifier> {
    spec.validate()?;
    let layers = spec.layers();
    let mut params = ParamSet::default();
    let mut stats = ParamSet::default();
    let mut init = rng::substream(spec.seed, "init.ids");
    for (i, l) in layers.iter().enumerate() {
        l.init(i, &mut params, &mut stats, &mut init);
    }
    Ok(Classifier {
        spec,
        layers,
        params,
        stats,
        history: Vec::new(),
    })
}

impl Classifier {
    fn forward(&self, g: &mut Graph, vars: &[Var], x: &Mat, training: bool, dropout: &mut Rng) -> (Var, Vec<(Mat, Mat)>) {
        let b = x.rows();
        let f = self.spec.input_width;
        let input = g.constant(x.clone().reshaped(b * f, 1));
        let mut act = Act::Seq { v: input, len: f, ch: 1 };
        let mut ctx = Ctx {
            batch: b,
            training,
            dropout,
            bn_batch: Vec::new(),
        };
        let stats = self.stats.values();
        let (mut pi, mut si) = (0, 0);
        for l in &self.layers {
            let k = l.n_params();
            let running = if matches!(l, Layer::BatchNorm { .. }) {
                si += 2;
                Some((&stats[si - 2], &stats[si - 1]))
            } else {
                None
            };
            act = l.forward(g, &vars[pi..pi + k], running, act, &mut ctx);
            pi += k;
        }
        (act.var(), ctx.bn_batch)
    }

    fn check_width(&self, x: &Mat) -> Result<()> {
        if x.cols() != self.spec.input_width {
            return Err(Error::Shape(format!(
                "classifier expects {} features, got {}",
                self.spec.input_width,
                x.cols()
            )));
        }
        Ok(())
    }

    /// Class probabilities, one row per input row.
    pub fn predict_scores(&self, x: &Mat) -> Result<Mat> {
        self.check_width(x)?;
        let n = self.spec.n_classes;
        let mut out = Mat::zeros(x.rows(), n);
        let mut unused = rng::substream(self.spec.seed, rng::DROPOUT);
        let mut start = 0;
        while start < x.rows() {
            let end = (start + PREDICT_CHUNK).min(x.rows());
            let chunk = Mat::from_fn(end - start, x.cols(), |r, c| x.get(start + r, c));
            let mut g = Graph::new();
            let vars = self.params.bind(&mut g, false);
            let (logits, _) = self.forward(&mut g, &vars, &chunk, false, &mut unused);
            let lv = g.value(logits);
            for r in 0..lv.rows() {
                let row = lv.row(r);
                let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
                let s: f64 = e.iter().sum();
                for (c, v) in e.iter().enumerate() {
                    out.set(start + r, c, v / s);
                }
            }
            start = end;
        }
        if !out.all_finite() {
            return Err(Error::Numeric("non-finite classifier scores".into()));
        }
        Ok(out)
    }

    pub fn predict(&self, x: &Mat) -> Result<Vec<u32>> {
        let s = self.predict_scores(x)?;
        Ok((0..s.rows()).map(|r| argmax(s.row(r)) as u32).collect())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut c = Checkpoint::new(IDSC_MAGIC);
        c.config = serde_json::to_string(&self.spec).expect("spec serializes");
        c.epoch = self.history.len() as u64;
        c.meta.push((
            "history".into(),
            serde_json::to_string(&HistoryBits::from(&self.history[..])).expect("history serializes"),
        ));
        for (name, m) in self.params.names().iter().zip(self.params.values()) {
            c.arrays.push((name.clone(), m.clone()));
        }
        for (name, m) in self.stats.names().iter().zip(self.stats.values()) {
            c.arrays.push((name.clone(), m.clone()));
        }
        c
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.to_checkpoint().to_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let c = Checkpoint::from_bytes(bytes, IDSC_MAGIC)?;
        let spec: ClassifierSpec = serde_json::from_str(&c.config)
            .map_err(|e| Error::Format { what: "classifier checkpoint", msg: e.to_string() })?;
        let mut model = build(spec)?;
        let load = |set: &mut ParamSet| -> Result<()> {
            let vals = set
                .names()
                .iter()
                .map(|n| c.require_array(n).cloned())
                .collect::<Result<Vec<_>>>()?;
            set.set_values(vals)
                .map_err(|msg| Error::Format { what: "classifier checkpoint", msg })
        };
        load(&mut model.params)?;
        load(&mut model.stats)?;
        model.history = match c.meta("history") {
            Some(h) => serde_json::from_str::<HistoryBits>(h)
                .map_err(|e| Error::Format { what: "classifier checkpoint", msg: e.to_string() })?
                .into(),
            None => Vec::new(),
        };
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Loss history stored as raw bits so a reload is exact.
#[derive(Serialize, Deserialize)]
struct HistoryBits(Vec<u64>);

impl From<&[f64]> for HistoryBits {
    fn from(h: &[f64]) -> Self {
        HistoryBits(h.iter().map(|v| v.to_bits()).collect())
    }
}

impl From<HistoryBits> for Vec<f64> {
    fn from(h: HistoryBits) -> Self {
        h.0.into_iter().map(f64::from_bits).collect()
    }
}

pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// Mean cross-entropy of softmax(logits) against integer labels.
fn cross_entropy(g: &mut Graph, logits: Var, labels: &[u32]) -> Var {
    let (rows, cols) = g.shape(logits);
    let lv = g.value(logits);
    let shift = Mat::from_fn(rows, 1, |r, _| lv.row(r).iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let m = g.constant(shift);
    let mb = g.broadcast_cols(m, cols);
    let s = g.sub(logits, mb);
    let e = g.exp(s);
    let se = g.sum_cols(e);
    let lse = g.ln(se);
    let lb = g.broadcast_cols(lse, cols);
    let logp = g.sub(s, lb);
    let idx: Vec<u32> = labels.iter().enumerate().map(|(r, &y)| (r * cols) as u32 + y).collect();
    let picked = g.gather(logp, idx.into(), rows, 1);
    let mean = g.mean_all(picked);
    g.scale(mean, -1.0)
}

/// Trains `model` for `epochs` further epochs with shuffled minibatches.
/// Streams are derived from the spec seed and the epoch offset, so a model
/// fitted twice from the same state ends with the same weights.
pub fn fit(mut model: Classifier, train: &EncodedDataset, epochs: usize) -> Result<Classifier> {
    model.check_width(&train.features)?;
    if let Some(bad) = train.labels.iter().find(|&&y| y as usize >= model.spec.n_classes) {
        return Err(Error::Data(format!(
            "label {bad} is outside the classifier's {} classes",
            model.spec.n_classes
        )));
    }
    if epochs == 0 {
        return Ok(model);
    }
    let n = train.n_rows();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let seed = rng::child_seed(model.spec.seed, "ids.fit", model.history.len() as u64);
    let mut shuffle = rng::substream(seed, rng::SHUFFLE);
    let mut dropout = rng::substream(seed, rng::DROPOUT);
    let mut opt = Adam::new(AdamConfig::new(LEARNING_RATE, 0.9, 0.999), model.params.shapes());
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..epochs {
        order.shuffle(&mut shuffle);
        let mut total = 0.0;
        for batch in order.chunks(BATCH_SIZE) {
            let x = Mat::from_fn(batch.len(), train.n_features(), |r, c| train.features.get(batch[r], c));
            let y: Vec<u32> = batch.iter().map(|&i| train.labels[i]).collect();
            let mut g = Graph::new();
            let vars = model.params.bind(&mut g, true);
            let (logits, bn) = model.forward(&mut g, &vars, &x, true, &mut dropout);
            let loss = cross_entropy(&mut g, logits, &y);
            let lv = g.value(loss).get(0, 0);
            if !lv.is_finite() {
                model.history.push(lv);
                return Err(Error::Numeric(format!(
                    "{} classifier loss became non-finite in epoch {}; history {:?}",
                    model.spec.kind, epoch, model.history
                )));
            }
            total += lv * batch.len() as f64;
            let grads: Vec<Mat> = g.grad(loss, &vars).into_iter().map(|v| g.value(v).clone()).collect();
            opt.update(model.params.values_mut(), &grads);
            let mut stats = model.stats.values().to_vec();
            for (k, (mean, var)) in bn.into_iter().enumerate() {
                let blend = |old: &Mat, new: &Mat| old.zip_map(new, |o, v| BN_MOMENTUM * o + (1.0 - BN_MOMENTUM) * v);
                stats[2 * k] = blend(&stats[2 * k], &mean);
                stats[2 * k + 1] = blend(&stats[2 * k + 1], &var);
            }
            model.stats.set_values(stats).expect("shapes unchanged");
        }
        model.history.push(total / n as f64);
    }
    Ok(model)
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        ConfusionCounts { tp, tn, fp, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// `(TP + TN) / total`.
    pub fn accuracy(&self) -> Result<f64> {
        match self.total() {
            0 => Err(Error::Data("accuracy of an empty confusion table".into())),
            t => Ok((self.tp + self.tn) as f64 / t as f64),
        }
    }

    /// `2TP / (2TP + FP + FN)`, or 0 when nothing is predicted or present.
    pub fn f1(&self) -> f64 {
        match 2 * self.tp + self.fp + self.fn_ {
            0 => 0.0,
            d => (2 * self.tp) as f64 / d as f64,
        }
    }

    /// `TP / (TP + FN)`, 0 when the class has no rows.
    pub fn recall(&self) -> f64 {
        match self.tp + self.fn_ {
            0 => 0.0,
            d => self.tp as f64 / d as f64,
        }
    }
}

/// Counts of `positive` against all other labels.
pub fn binary_counts(pred: &[u32], truth: &[u32], positive: u32) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for (&p, &t) in pred.iter().zip(truth) {
        match (p == positive, t == positive) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    c
}

/// One-vs-rest counts for every class.
pub fn one_vs_rest(pred: &[u32], truth: &[u32], n_classes: usize) -> Result<Vec<ConfusionCounts>> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    if let Some(bad) = pred.iter().chain(truth).find(|&&l| l as usize >= n_classes) {
        return Err(Error::Data(format!("label {bad} outside {n_classes} classes")));
    }
    Ok((0..n_classes as u32).map(|c| binary_counts(pred, truth, c)).collect())
}

/// Fraction of rows whose prediction equals the label.
pub fn overall_accuracy(pred: &[u32], truth: &[u32]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Shape("prediction and label counts differ".into()));
    }
    if pred.is_empty() {
        return Err(Error::Data("accuracy of zero rows".into()));
    }
    Ok(pred.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / pred.len() as f64)
}

/// Unweighted mean of per-class F1.
pub fn macro_f1(per_class: &[ConfusionCounts]) -> f64 {
    if per_class.is_empty() {
        return 0.0;
    }
    per_class.iter().map(ConfusionCounts::f1).sum::<f64>() / per_class.len() as f64
}

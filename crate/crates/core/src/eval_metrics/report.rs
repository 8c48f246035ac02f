use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ids_zoo::ClassifierKind;

pub const ACCURACY: &str = "accuracy";
pub const MACRO_F1: &str = "macro_f1";
pub const AUROC: &str = "auroc";
pub const TPR_AT_5FPR: &str = "tpr_at_5fpr";

pub fn class_accuracy_key(class: &str) -> String {
    format!("acc/{class}")
}

pub fn class_f1_key(class: &str) -> String {
    format!("f1/{class}")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample (n − 1) standard deviation; 0 for a single value.
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<MeanStd> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Some(MeanStd { mean, std, n })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed { error: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub status: RunStatus,
    pub final_loss: Option<f64>,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub kind: ClassifierKind,
    pub runs: Vec<RunRecord>,
    pub failed_runs: usize,
    /// Set when the spread comes from a single successful run.
    pub single_run: bool,
    pub summary: BTreeMap<String, MeanStd>,
}

impl ModelReport {
    pub fn from_runs(kind: ClassifierKind, runs: Vec<RunRecord>) -> ModelReport {
        let ok: Vec<&RunRecord> = runs.iter().filter(|r| r.status == RunStatus::Ok).collect();
        let mut keys: Vec<&String> = ok.iter().flat_map(|r| r.metrics.keys()).collect();
        keys.sort();
        keys.dedup();
        let summary = keys
            .into_iter()
            .filter_map(|k| {
                let vals: Vec<f64> = ok.iter().filter_map(|r| r.metrics.get(k).copied()).collect();
                MeanStd::of(&vals).map(|m| (k.clone(), m))
            })
            .collect();
        ModelReport {
            kind,
            failed_runs: runs.len() - ok.len(),
            single_run: ok.len() == 1,
            runs,
            summary,
        }
    }
}

/// All per-run values of one experiment plus their aggregates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub experiment: String,
    pub condition: String,
    pub classes: Vec<String>,
    pub unknown_class: Option<String>,
    pub negatives: Option<String>,
    pub train_digest: String,
    pub test_digest: String,
    pub n_runs: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Summary keys in table order.
    pub columns: Vec<String>,
    pub models: Vec<ModelReport>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<EvalReport> {
        serde_json::from_str(s).map_err(|e| crate::Error::Format {
            what: "evaluation report",
            msg: e.to_string(),
        })
    }

    pub fn model(&self, kind: ClassifierKind) -> Option<&ModelReport> {
        self.models.iter().find(|m| m.kind == kind)
    }

    /// Human-readable `mean±std` table, rates in percent.
    pub fn to_table(&self) -> String {
        let header: Vec<String> = std::iter::once("Model".to_string())
            .chain(self.columns.iter().map(|c| column_title(c)))
            .collect();
        let mut rows = vec![header];
        for m in &self.models {
            let mut row = vec![m.kind.label().to_string()];
            for c in &self.columns {
                row.push(match m.summary.get(c) {
                    Some(v) => format!("{:.1}±{:.1}", 100.0 * v.mean, 100.0 * v.std),
                    None => "-".into(),
                });
            }
            if m.failed_runs > 0 {
                row[0].push_str(&format!(" ({} failed)", m.failed_runs));
            }
            rows.push(row);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|i| rows.iter().map(|r| r[i].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# {} [{}] runs={} epochs={}{}",
            self.experiment,
            self.condition,
            self.n_runs,
            self.epochs,
            self.unknown_class
                .as_deref()
                .map(|u| format!(" unknown={u}"))
                .unwrap_or_default()
        );
        for (i, r) in rows.iter().enumerate() {
            let cells: Vec<String> = r
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}", w = *w))
                .collect();
            let _ = writeln!(out, "| {} |", cells.join(" | "));
            if i == 0 {
                let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
                let _ = writeln!(out, "|-{}-|", rule.join("-|-"));
            }
        }
        out
    }

    /// Writes `<stem>.json` and `<stem>.txt` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::write(dir.join(format!("{stem}.json")), self.to_json())?;
        std::fs::write(dir.join(format!("{stem}.txt")), self.to_table())?;
        Ok(())
    }
}

fn column_title(key: &str) -> String {
    match key {
        ACCURACY => "Acc.(%)".into(),
        MACRO_F1 => "F1(%)".into(),
        AUROC => "AUROC(%)".into(),
        TPR_AT_5FPR => "TPR@5%FPR(%)".into(),
        k => match k.split_once('/') {
            Some(("acc", c)) => format!("{c} Acc.(%)"),
            Some(("f1", c)) => format!("{c} F1(%)"),
            _ => k.to_string(),
        },
    }
}

//! Per-class augmentation targets.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub class: String,
    pub original_count: usize,
    pub target_count: usize,
}

impl PlanEntry {
    pub fn synthetic_count(&self) -> usize {
        self.target_count - self.original_count
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentationPlan {
    pub entries: Vec<PlanEntry>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DatasetPreset {
    #[serde(rename = "nsl-kdd")]
    NslKdd,
    #[serde(rename = "unsw-nb15")]
    UnswNb15,
    #[serde(rename = "cicids2017")]
    Cicids2017,
}

impl DatasetPreset {
    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "nsl-kdd" | "nslkdd" => Ok(DatasetPreset::NslKdd),
            "unsw-nb15" | "unsw" => Ok(DatasetPreset::UnswNb15),
            "cicids2017" | "cicids" => Ok(DatasetPreset::Cicids2017),
            other => Err(Error::Config(format!("unknown dataset preset {other:?}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DatasetPreset::NslKdd => "nsl-kdd",
            DatasetPreset::UnswNb15 => "unsw-nb15",
            DatasetPreset::Cicids2017 => "cicids2017",
        }
    }

    /// (class, original training count, augmented training count).
    pub fn table(self) -> &'static [(&'static str, usize, usize)] {
        match self {
            DatasetPreset::NslKdd => &[
                ("Normal", 67343, 67343),
                ("R2L", 995, 10995),
                ("Probe", 11656, 21656),
                ("DoS", 45927, 45927),
                ("U2R", 52, 10052),
            ],
            DatasetPreset::UnswNb15 => &[
                ("Normal", 56000, 56000),
                ("DoS", 12264, 22264),
                ("Reconnaissance", 10491, 20491),
                ("Shellcode", 1133, 11133),
                ("Worms", 130, 10130),
            ],
            DatasetPreset::Cicids2017 => &[
                ("Benign", 105222, 105222),
                ("DoS", 21550, 34609),
                ("PortScan", 10809, 23868),
                ("BruteForce", 5235, 18294),
                ("WebAttack", 1476, 14535),
                ("Bot", 857, 13916),
            ],
        }
    }

    pub fn plan(self) -> AugmentationPlan {
        AugmentationPlan {
            entries: self
                .table()
                .iter()
                .map(|&(c, o, t)| PlanEntry {
                    class: c.to_string(),
                    original_count: o,
                    target_count: t,
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PlanPolicy {
    /// Table-defined targets. When observed counts differ from the table's
    /// originals, the table's per-class increments are applied instead.
    Preset(DatasetPreset),
    /// Explicit target count per class; unlisted classes keep their count.
    Targets(BTreeMap<String, usize>),
    /// `target = max(original, min(factor * original, cap))` for the listed classes.
    Scaled {
        classes: Vec<String>,
        factor: usize,
        cap: usize,
    },
}

/// `class_counts` is in class order; the plan lists classes in the same order.
pub fn build_augmentation_plan(
    class_counts: &[(String, usize)],
    policy: &PlanPolicy,
) -> Result<AugmentationPlan> {
    let entries = match policy {
        PlanPolicy::Preset(preset) => {
            let table = preset.table();
            let matches = table.len() == class_counts.len()
                && table
                    .iter()
                    .all(|(c, o, _)| class_counts.iter().any(|(n, k)| n == c && k == o));
            if matches {
                return Ok(preset.plan());
            }
            class_counts
                .iter()
                .map(|(class, count)| {
                    let increment = table
                        .iter()
                        .find(|(c, _, _)| c == class)
                        .map_or(0, |(_, o, t)| t - o);
                    PlanEntry {
                        class: class.clone(),
                        original_count: *count,
                        target_count: count + increment,
                    }
                })
                .collect()
        }
        PlanPolicy::Targets(targets) => {
            for name in targets.keys() {
                if !class_counts.iter().any(|(c, _)| c == name) {
                    return Err(Error::Config(format!("plan names unknown class {name:?}")));
                }
            }
            class_counts
                .iter()
                .map(|(class, count)| {
                    let target = targets.get(class).copied().unwrap_or(*count);
                    if target < *count {
                        return Err(Error::Config(format!(
                            "target {target} for {class:?} is below its original count {count}"
                        )));
                    }
                    Ok(PlanEntry {
                        class: class.clone(),
                        original_count: *count,
                        target_count: target,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
        PlanPolicy::Scaled { classes, factor, cap } => {
            for name in classes {
                if !class_counts.iter().any(|(c, _)| c == name) {
                    return Err(Error::Config(format!("plan names unknown class {name:?}")));
                }
            }
            class_counts
                .iter()
                .map(|(class, count)| {
                    let target = if classes.contains(class) {
                        (*count).max((count * factor).min(*cap))
                    } else {
                        *count
                    };
                    PlanEntry {
                        class: class.clone(),
                        original_count: *count,
                        target_count: target,
                    }
                })
                .collect()
        }
    };
    Ok(AugmentationPlan { entries })
}

impl AugmentationPlan {
    pub fn entry(&self, class: &str) -> Option<&PlanEntry> {
        self.entries.iter().find(|e| e.class == class)
    }

    /// Classes that receive synthetic rows.
    pub fn augmented_classes(&self) -> impl Iterator<Item = &PlanEntry> {
        self.entries.iter().filter(|e| e.target_count > e.original_count)
    }

    pub fn total_synthetic(&self) -> usize {
        self.entries.iter().map(PlanEntry::synthetic_count).sum()
    }

    pub fn validate(&self) -> Result<()> {
        for e in &self.entries {
            if e.target_count < e.original_count {
                return Err(Error::Config(format!(
                    "target {} for {:?} is below its original count {}",
                    e.target_count, e.class, e.original_count
                )));
            }
        }
        Ok(())
    }
}

//! Repeated-run evaluation of the classifier zoo.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::confusion::{macro_f1, one_vs_rest, overall_accuracy};
use super::report::*;
use super::roc::{roc_auroc, tpr_at_fpr};
use crate::error::{Error, Result};
use crate::ids_zoo::{build, fit, ClassifierKind, ClassifierSpec};
use crate::rng;
use crate::schema_codec::{collapse_binary_dataset, make_loao_split, EncodedDataset};

pub const TARGET_FPR: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Binary,
    Multi,
}

impl Task {
    pub fn parse(s: &str) -> Result<Task> {
        match s.trim().to_ascii_lowercase().as_str() {
            "binary" => Ok(Task::Binary),
            "multi" | "multiclass" | "multi-class" => Ok(Task::Multi),
            other => Err(Error::Config(format!("unknown task {other:?}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Binary => "binary",
            Task::Multi => "multi",
        }
    }
}

/// Which test rows count as negatives in the unseen-attack ROC.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoaoNegatives {
    /// Normal rows only; other attack classes are left out.
    Normal,
    /// Every row not of the unknown class.
    AllOthers,
}

impl LoaoNegatives {
    pub fn name(self) -> &'static str {
        match self {
            LoaoNegatives::Normal => "normal",
            LoaoNegatives::AllOthers => "all_others",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub kinds: Vec<ClassifierKind>,
    pub n_runs: usize,
    pub epochs: usize,
    pub seed: u64,
    pub normal_class: String,
    /// Free-form tag such as `original` or `augmented`.
    pub condition: String,
    /// Worker threads; results do not depend on it.
    pub jobs: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            kinds: ClassifierKind::ALL.to_vec(),
            n_runs: 20,
            epochs: crate::ids_zoo::DEFAULT_EPOCHS,
            seed: 0,
            normal_class: crate::schema_codec::NORMAL.into(),
            condition: "original".into(),
            jobs: 1,
        }
    }
}

impl ProtocolConfig {
    fn validate(&self) -> Result<()> {
        if self.kinds.is_empty() {
            return Err(Error::Config("no classifier kinds selected".into()));
        }
        if self.n_runs == 0 {
            return Err(Error::Config("n_runs must be at least 1".into()));
        }
        Ok(())
    }

    /// Seed of run `run` of `kind`; shared across conditions so original and
    /// augmented runs are paired.
    pub fn run_seed(&self, kind: ClassifierKind, run: usize) -> u64 {
        rng::child_seed(self.seed, &format!("ids/{kind}"), run as u64)
    }
}

pub fn dataset_digest(ds: &EncodedDataset) -> String {
    hex::encode(Sha256::digest(ds.to_bytes()))
}

fn check_shared_schema(train: &EncodedDataset, test: &EncodedDataset) -> Result<()> {
    if train.feature_names != test.feature_names {
        return Err(Error::Schema("train and test feature lists differ".into()));
    }
    if train.class_names != test.class_names {
        return Err(Error::Schema("train and test class lists differ".into()));
    }
    train.validate()?;
    test.validate()
}

/// Runs every `(kind, run)` job, in parallel when `jobs > 1`; results come
/// back in job order.
fn run_jobs<F>(cfg: &ProtocolConfig, job: F) -> Result<Vec<ModelReport>>
where
    F: Fn(ClassifierKind, usize, u64) -> Result<RunRecord> + Sync,
{
    let list: Vec<(ClassifierKind, usize)> = cfg
        .kinds
        .iter()
        .flat_map(|&k| (0..cfg.n_runs).map(move |r| (k, r)))
        .collect();
    let slots: Mutex<Vec<Option<Result<RunRecord>>>> = Mutex::new((0..list.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let work = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some(&(kind, run)) = list.get(i) else { break };
        let out = job(kind, run, cfg.run_seed(kind, run));
        slots.lock().expect("worker panicked")[i] = Some(out);
    };
    let workers = cfg.jobs.clamp(1, list.len().max(1));
    if workers == 1 {
        work();
    } else {
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(&work);
            }
        });
    }
    let mut results = slots.into_inner().expect("worker panicked").into_iter();
    let mut reports = Vec::new();
    for &kind in &cfg.kinds {
        let mut runs = Vec::with_capacity(cfg.n_runs);
        for _ in 0..cfg.n_runs {
            runs.push(results.next().flatten().expect("every job ran")?);
        }
        reports.push(ModelReport::from_runs(kind, runs));
    }
    Ok(reports)
}

/// A numeric abort fails the run; any other error fails the experiment.
fn failed_or_err(run: usize, seed: u64, e: Error) -> Result<RunRecord> {
    match e {
        Error::Numeric(msg) => Ok(RunRecord {
            run,
            seed,
            status: RunStatus::Failed { error: msg },
            final_loss: None,
            metrics: BTreeMap::new(),
        }),
        other => Err(other),
    }
}

fn multi_metrics(pred: &[u32], truth: &[u32], classes: &[String]) -> Result<BTreeMap<String, f64>> {
    let per = one_vs_rest(pred, truth, classes.len())?;
    let mut m = BTreeMap::new();
    m.insert(ACCURACY.to_string(), overall_accuracy(pred, truth)?);
    m.insert(MACRO_F1.to_string(), macro_f1(&per));
    for (c, counts) in classes.iter().zip(&per) {
        m.insert(class_accuracy_key(c), counts.recall());
        m.insert(class_f1_key(c), counts.f1());
    }
    Ok(m)
}

/// Trains each kind `n_runs` times on `train` and scores `test`. In the
/// binary task every class except the normal one is merged first.
pub fn run_protocol(train: &EncodedDataset, test: &EncodedDataset, task: Task, cfg: &ProtocolConfig) -> Result<EvalReport> {
    cfg.validate()?;
    check_shared_schema(train, test)?;
    let (train, test) = match task {
        Task::Binary => (
            collapse_binary_dataset(train, &cfg.normal_class)?,
            collapse_binary_dataset(test, &cfg.normal_class)?,
        ),
        Task::Multi => (train.clone(), test.clone()),
    };
    let classes = train.class_names.clone();
    let models = run_jobs(cfg, |kind, run, seed| {
        let spec = ClassifierSpec {
            epochs: cfg.epochs,
            ..ClassifierSpec::new(kind, train.n_features(), classes.len(), seed)
        };
        let model = match fit(build(spec)?, &train, cfg.epochs) {
            Ok(m) => m,
            Err(e) => return failed_or_err(run, seed, e),
        };
        let scores = match model.predict_scores(&test.features) {
            Ok(s) => s,
            Err(e) => return failed_or_err(run, seed, e),
        };
        let pred: Vec<u32> = (0..scores.rows()).map(|r| crate::ids_zoo::argmax(scores.row(r)) as u32).collect();
        let mut metrics = multi_metrics(&pred, &test.labels, &classes)?;
        if task == Task::Binary {
            let s: Vec<f64> = (0..scores.rows()).map(|r| scores.get(r, 1)).collect();
            let y: Vec<bool> = test.labels.iter().map(|&l| l == 1).collect();
            if let Ok((curve, auroc)) = roc_auroc(&s, &y) {
                metrics.insert(AUROC.into(), auroc);
                metrics.insert(TPR_AT_5FPR.into(), tpr_at_fpr(&curve, TARGET_FPR));
            }
        }
        Ok(RunRecord {
            run,
            seed,
            status: RunStatus::Ok,
            final_loss: model.history.last().copied(),
            metrics,
        })
    })?;
    let mut columns = vec![ACCURACY.to_string(), MACRO_F1.to_string()];
    if task == Task::Multi {
        for c in classes.iter().filter(|c| **c != cfg.normal_class) {
            columns.push(class_accuracy_key(c));
            columns.push(class_f1_key(c));
        }
    }
    Ok(EvalReport {
        experiment: format!("{}-classification", task.name()),
        condition: cfg.condition.clone(),
        classes,
        unknown_class: None,
        negatives: None,
        train_digest: dataset_digest(&train),
        test_digest: dataset_digest(&test),
        n_runs: cfg.n_runs,
        epochs: cfg.epochs,
        seed: cfg.seed,
        columns,
        models,
    })
}

/// Row indices of `test` in the unseen-attack ROC population and whether
/// each is positive (of the unknown class).
pub fn loao_population(
    test: &EncodedDataset,
    unknown_class: &str,
    normal_class: &str,
    negatives: LoaoNegatives,
) -> Result<(Vec<usize>, Vec<bool>)> {
    let unknown = test
        .class_index(unknown_class)
        .ok_or_else(|| Error::Data(format!("unknown class {unknown_class:?} not in test classes")))? as u32;
    let normal = test
        .class_index(normal_class)
        .ok_or_else(|| Error::Data(format!("normal class {normal_class:?} not in test classes")))? as u32;
    let mut rows = Vec::new();
    let mut positive = Vec::new();
    for (r, &l) in test.labels.iter().enumerate() {
        let keep = l == unknown || l == normal || negatives == LoaoNegatives::AllOthers;
        if keep {
            rows.push(r);
            positive.push(l == unknown);
        }
    }
    Ok((rows, positive))
}

/// AUROC and TPR at 5% FPR of per-row `scores` over the LOAO population.
pub fn score_loao(
    scores: &[f64],
    test: &EncodedDataset,
    unknown_class: &str,
    normal_class: &str,
    negatives: LoaoNegatives,
) -> Result<(f64, f64)> {
    if scores.len() != test.n_rows() {
        return Err(Error::Shape("one score per test row expected".into()));
    }
    let (rows, y) = loao_population(test, unknown_class, normal_class, negatives)?;
    let s: Vec<f64> = rows.iter().map(|&r| scores[r]).collect();
    let (curve, auroc) = roc_auroc(&s, &y)?;
    Ok((auroc, tpr_at_fpr(&curve, TARGET_FPR)))
}

/// Leave-one-attack-out: trains on every class but `unknown_class` and
/// scores the test set with `1 − P(normal)`.
pub fn run_loao(
    train: &EncodedDataset,
    test: &EncodedDataset,
    unknown_class: &str,
    negatives: LoaoNegatives,
    cfg: &ProtocolConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    check_shared_schema(train, test)?;
    let (known, test) = make_loao_split(train, test, unknown_class, &cfg.normal_class)?;
    let normal = known
        .class_index(&cfg.normal_class)
        .ok_or_else(|| Error::Data(format!("normal class {:?} absent from training", cfg.normal_class)))?;
    // validates the population before any training
    loao_population(&test, unknown_class, &cfg.normal_class, negatives)?;
    let models = run_jobs(cfg, |kind, run, seed| {
        if known.class_index(unknown_class).is_some() {
            return Err(Error::Data(format!("{unknown_class:?} leaked into LOAO training")));
        }
        let spec = ClassifierSpec {
            epochs: cfg.epochs,
            ..ClassifierSpec::new(kind, known.n_features(), known.n_classes(), seed)
        };
        let model = match fit(build(spec)?, &known, cfg.epochs) {
            Ok(m) => m,
            Err(e) => return failed_or_err(run, seed, e),
        };
        let p = match model.predict_scores(&test.features) {
            Ok(p) => p,
            Err(e) => return failed_or_err(run, seed, e),
        };
        let s: Vec<f64> = (0..p.rows()).map(|r| 1.0 - p.get(r, normal)).collect();
        let (auroc, tpr) = score_loao(&s, &test, unknown_class, &cfg.normal_class, negatives)?;
        let mut metrics = BTreeMap::new();
        metrics.insert(AUROC.to_string(), auroc);
        metrics.insert(TPR_AT_5FPR.to_string(), tpr);
        metrics.insert("unknown_train_rows".into(), 0.0);
        Ok(RunRecord {
            run,
            seed,
            status: RunStatus::Ok,
            final_loss: model.history.last().copied(),
            metrics,
        })
    })?;
    Ok(EvalReport {
        experiment: "loao".into(),
        condition: cfg.condition.clone(),
        classes: known.class_names.clone(),
        unknown_class: Some(unknown_class.to_string()),
        negatives: Some(negatives.name().into()),
        train_digest: dataset_digest(&known),
        test_digest: dataset_digest(&test),
        n_runs: cfg.n_runs,
        epochs: cfg.epochs,
        seed: cfg.seed,
        columns: vec![AUROC.into(), TPR_AT_5FPR.into()],
        models,
    })
}

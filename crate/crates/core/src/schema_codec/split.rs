//! Relabeling and split construction.

use rand::seq::SliceRandom;

use super::dataset::EncodedDataset;
use super::table::RawDataset;
use crate::error::{Error, Result};
use crate::rng;

pub const NORMAL: &str = "Normal";
pub const ABNORMAL: &str = "Abnormal";

/// Maps every non-normal class to `Abnormal`. Output classes are
/// `[Normal, Abnormal]`; row order is preserved.
pub fn collapse_binary(labels: &[u32], class_names: &[String], normal_class: &str) -> Result<Vec<u32>> {
    let normal = class_names
        .iter()
        .position(|c| c == normal_class)
        .ok_or_else(|| Error::Data(format!("normal class {normal_class:?} not among classes")))?;
    Ok(labels
        .iter()
        .map(|&l| if l as usize == normal { 0 } else { 1 })
        .collect())
}

pub fn collapse_binary_dataset(ds: &EncodedDataset, normal_class: &str) -> Result<EncodedDataset> {
    let labels = collapse_binary(&ds.labels, &ds.class_names, normal_class)?;
    Ok(EncodedDataset {
        labels,
        class_names: vec![NORMAL.to_string(), ABNORMAL.to_string()],
        ..ds.clone()
    })
}

/// Removes `unknown_class` from training. The returned training set drops the
/// class from its class list; the test set is returned unchanged.
pub fn make_loao_split(
    train: &EncodedDataset,
    test: &EncodedDataset,
    unknown_class: &str,
    normal_class: &str,
) -> Result<(EncodedDataset, EncodedDataset)> {
    if unknown_class == normal_class {
        return Err(Error::Config("the unknown class must be an attack class".into()));
    }
    let unknown = train
        .class_index(unknown_class)
        .ok_or_else(|| Error::Data(format!("unknown class {unknown_class:?} absent from training classes")))?;
    if train.class_counts()[unknown] == 0 {
        return Err(Error::Data(format!("unknown class {unknown_class:?} has no training rows")));
    }
    match test.class_index(unknown_class) {
        Some(i) if test.class_counts()[i] > 0 => {}
        _ => {
            return Err(Error::Data(format!(
                "unknown class {unknown_class:?} has no test rows"
            )))
        }
    }
    let keep: Vec<usize> = (0..train.n_rows())
        .filter(|&r| train.labels[r] as usize != unknown)
        .collect();
    let mut known = train.select(&keep);
    known.class_names.remove(unknown);
    for l in &mut known.labels {
        if *l as usize > unknown {
            *l -= 1;
        }
    }
    Ok((known, test.clone()))
}

/// Shuffled split with `train_fraction` of the rows (rounded down) in train.
pub fn shuffle_split(raw: &RawDataset, train_fraction: f64, seed: u64) -> (RawDataset, RawDataset) {
    let mut idx: Vec<usize> = (0..raw.n_rows()).collect();
    idx.shuffle(&mut rng::substream(seed, rng::SHUFFLE));
    let cut = ((raw.n_rows() as f64) * train_fraction).floor() as usize;
    let (a, b) = idx.split_at(cut);
    (
        raw.select(a).with_split(super::SplitTag::Train),
        raw.select(b).with_split(super::SplitTag::Test),
    )
}

/// Class-stratified subsample of about `n` rows, keeping class ratios
/// (each class keeps at least one row).
pub fn stratified_subsample(ds: &EncodedDataset, n: usize, seed: u64) -> EncodedDataset {
    let total = ds.n_rows();
    let mut rng = rng::substream(seed, rng::SHUFFLE);
    let mut keep = Vec::new();
    for class in 0..ds.n_classes() {
        let mut rows = ds.rows_of_class(class);
        if rows.is_empty() {
            continue;
        }
        let want = ((rows.len() as f64) * n as f64 / total as f64).round().max(1.0) as usize;
        rows.shuffle(&mut rng);
        rows.truncate(want.min(rows.len()));
        keep.extend(rows);
    }
    keep.sort_unstable();
    ds.select(&keep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema_codec::dataset::Provenance;
    use flowsynth_tensor::Mat;

    fn ds(labels: Vec<u32>) -> EncodedDataset {
        let n = labels.len();
        EncodedDataset {
            features: Mat::from_fn(n, 1, |r, _| r as f64 / n.max(1) as f64),
            labels,
            class_names: vec!["Normal".into(), "R2L".into(), "Probe".into()],
            feature_names: vec!["x".into()],
            provenance: vec![Provenance::Real; n],
            split_tag: "train".into(),
        }
    }

    #[test]
    fn collapse_keeps_order() {
        let names: Vec<String> = vec!["Normal".into(), "R2L".into(), "Probe".into()];
        assert_eq!(collapse_binary(&[2, 0, 1, 0], &names, "Normal").unwrap(), vec![1, 0, 1, 0]);
        assert_eq!(collapse_binary(&[0, 0], &names, "Normal").unwrap(), vec![0, 0]);
        assert!(collapse_binary(&[], &names, "Normal").unwrap().is_empty());
        assert!(collapse_binary(&[0], &names, "Benign").is_err());
    }

    #[test]
    fn loao_removes_exactly_the_unknown_class() {
        let train = ds(vec![0, 1, 2, 2, 0, 1]);
        let test = ds(vec![0, 2, 1]);
        let (tr, te) = make_loao_split(&train, &test, "Probe", "Normal").unwrap();
        assert_eq!(tr.n_rows(), 4);
        assert_eq!(tr.class_names, vec!["Normal", "R2L"]);
        assert_eq!(tr.labels, vec![0, 1, 0, 1]);
        assert_eq!(te, test);
    }

    #[test]
    fn loao_with_single_unknown_row_and_errors() {
        let train = ds(vec![0, 1, 2]);
        let test = ds(vec![2]);
        let (tr, _) = make_loao_split(&train, &test, "Probe", "Normal").unwrap();
        assert_eq!(tr.n_rows(), 2);
        let no_probe = ds(vec![0, 1]);
        assert!(make_loao_split(&no_probe, &test, "Probe", "Normal").is_err());
        assert!(make_loao_split(&train, &test, "Normal", "Normal").is_err());
    }

    #[test]
    fn stratified_subsample_preserves_ratios() {
        let mut labels = vec![0u32; 800];
        labels.extend(vec![1u32; 150]);
        labels.extend(vec![2u32; 50]);
        let s = stratified_subsample(&ds(labels), 100, 1);
        assert_eq!(s.class_counts(), vec![80, 15, 5]);
    }
}

use flowsynth::ids_zoo::{build, fit, Classifier, ClassifierKind, ClassifierSpec};
use flowsynth::schema_codec::{EncodedDataset, Provenance};
use flowsynth_tensor::Mat;
use proptest::prelude::*;

fn dataset(features: Mat, labels: Vec<u32>, classes: &[&str]) -> EncodedDataset {
    let n = labels.len();
    EncodedDataset {
        feature_names: (0..features.cols()).map(|i| format!("f{i}")).collect(),
        features,
        labels,
        class_names: classes.iter().map(|s| s.to_string()).collect(),
        provenance: vec![Provenance::Real; n],
        split_tag: "train".into(),
    }
}

/// Two classes split by the sign of `x0 + x1`, with a margin of 0.2.
fn separable(n: usize) -> EncodedDataset {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut i = 0u64;
    while rows.len() < n {
        i += 1;
        let h = |k: u64| ((i.wrapping_mul(2654435761).wrapping_add(k * 40503)) % 1000) as f64 / 500.0 - 1.0;
        let (a, b, c) = (h(1), h(2), h(3));
        let s = a + b;
        if s.abs() < 0.2 {
            continue;
        }
        rows.push(vec![a, b, c, a * 0.5]);
        labels.push(u32::from(s > 0.0));
    }
    dataset(Mat::from_rows(&rows), labels, &["Normal", "Attack"])
}

fn accuracy(m: &Classifier, d: &EncodedDataset) -> f64 {
    let p = m.predict(&d.features).unwrap();
    p.iter().zip(&d.labels).filter(|(a, b)| a == b).count() as f64 / d.n_rows() as f64
}

#[test]
fn dnn_fits_a_separable_toy_set() {
    let d = separable(200);
    let m = build(ClassifierSpec::new(ClassifierKind::Dnn, 4, 2, 7)).unwrap();
    let m = fit(m, &d, 100).unwrap();
    assert_eq!(m.history.len(), 100);
    assert!(m.history.last().unwrap() < &m.history[0]);
    let acc = accuracy(&m, &d);
    assert!(acc >= 0.99, "training accuracy {acc}");
}

#[test]
fn zero_epochs_is_identity_and_fits_are_deterministic() {
    let d = separable(60);
    for kind in ClassifierKind::ALL {
        let m = build(ClassifierSpec::new(kind, 4, 2, 3)).unwrap();
        assert_eq!(fit(m.clone(), &d, 0).unwrap(), m);
        let a = fit(m.clone(), &d, 2).unwrap();
        let b = fit(m.clone(), &d, 2).unwrap();
        assert_eq!(a.params.digest(), b.params.digest(), "{kind}");
        assert_eq!(a.stats.values(), b.stats.values());
        assert_eq!(a.history.len(), 2);
        assert_ne!(a.params.digest(), m.params.digest());
        let x = &d.features;
        assert_eq!(a.predict_scores(x).unwrap(), b.predict_scores(x).unwrap());
    }
}

#[test]
fn same_seed_same_init_different_seed_differs() {
    let s = |seed| build(ClassifierSpec::new(ClassifierKind::Cnn, 9, 3, seed)).unwrap().params.digest();
    assert_eq!(s(11), s(11));
    assert_ne!(s(11), s(12));
}

#[test]
fn scores_follow_row_permutations() {
    let d = separable(40);
    for kind in ClassifierKind::ALL {
        let m = fit(build(ClassifierSpec::new(kind, 4, 2, 5)).unwrap(), &d, 1).unwrap();
        let s = m.predict_scores(&d.features).unwrap();
        let perm: Vec<usize> = (0..40).rev().collect();
        let xp = Mat::from_fn(40, 4, |r, c| d.features.get(perm[r], c));
        let sp = m.predict_scores(&xp).unwrap();
        for r in 0..40 {
            assert_eq!(sp.row(r), s.row(perm[r]), "{kind}");
        }
    }
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let d = separable(50);
    let m = fit(build(ClassifierSpec::new(ClassifierKind::CnnBilstm, 4, 2, 2)).unwrap(), &d, 1).unwrap();
    let bytes = m.to_bytes();
    let back = Classifier::from_bytes(&bytes).unwrap();
    assert_eq!(back, m);
    assert_eq!(back.to_bytes(), bytes);
    assert!(Classifier::from_bytes(&bytes[..bytes.len() - 3]).is_err());
}

#[test]
fn input_errors() {
    let d = separable(10);
    let m = build(ClassifierSpec::new(ClassifierKind::Dnn, 5, 2, 0)).unwrap();
    assert!(m.predict_scores(&d.features).is_err());
    assert!(fit(m, &d, 1).is_err());
    let three = build(ClassifierSpec::new(ClassifierKind::Dnn, 4, 2, 0)).unwrap();
    let mut bad = d.clone();
    bad.labels[0] = 2;
    assert!(fit(three, &bad, 1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scores_are_probability_vectors(
        kind in prop::sample::select(ClassifierKind::ALL.to_vec()),
        f in 1usize..7,
        n_classes in 2usize..5,
        seed in 0u64..1000,
        cells in prop::collection::vec(-1.0f64..=1.0, 7 * 4),
    ) {
        let m = build(ClassifierSpec::new(kind, f, n_classes, seed)).unwrap();
        let x = Mat::from_fn(4, f, |r, c| cells[r * 7 + c]);
        let s = m.predict_scores(&x).unwrap();
        prop_assert_eq!(s.shape(), (4, n_classes));
        for r in 0..4 {
            prop_assert!(s.row(r).iter().all(|p| (0.0..=1.0).contains(p)));
            prop_assert!((s.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-5);
        }
    }
}

mod support;

use flowsynth::eval_metrics::*;
use flowsynth::ids_zoo::ClassifierKind;
use flowsynth::schema_codec::{EncodedDataset, Provenance};
use flowsynth_tensor::Mat;
use proptest::prelude::*;
use support::oracles::{brute_auroc, brute_tpr_at};

fn scored_sets() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..=200).prop_flat_map(|n| {
        (
            prop::collection::vec((0u8..12).prop_map(|v| v as f64 / 11.0), n),
            prop::collection::vec(any::<bool>(), n),
        )
            .prop_filter("both classes", |(_, l)| l.iter().any(|&x| x) && l.iter().any(|&x| !x))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn auroc_matches_pairwise((s, l) in scored_sets()) {
        let (curve, a) = roc_auroc(&s, &l).unwrap();
        prop_assert!((a - brute_auroc(&s, &l)).abs() <= 1e-12);
        prop_assert_eq!(curve.fpr.len(), curve.tpr.len());
        prop_assert!(curve.fpr.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(curve.tpr.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(curve.thresholds.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn tpr_matches_dense_oracle((s, l) in scored_sets(), t in 0.0f64..=1.0) {
        let (curve, _) = roc_auroc(&s, &l).unwrap();
        for target in [0.05, t] {
            let got = tpr_at_fpr(&curve, target);
            prop_assert!((got - brute_tpr_at(&s, &l, target)).abs() <= 1e-9);
        }
        let mut prev = 0.0;
        for k in 0..=40 {
            let v = tpr_at_fpr(&curve, k as f64 / 40.0);
            prop_assert!(v + 1e-15 >= prev);
            prev = v;
        }
    }

    #[test]
    fn confusion_arithmetic(tp in 0u64..50, tn in 0u64..50, fp in 0u64..50, fn_ in 0u64..50) {
        let c = ConfusionCounts::new(tp, tn, fp, fn_);
        let total = tp + tn + fp + fn_;
        if total == 0 {
            prop_assert!(c.accuracy().is_err());
        } else {
            prop_assert_eq!(c.accuracy().unwrap(), (tp + tn) as f64 / total as f64);
        }
        let d = 2 * tp + fp + fn_;
        prop_assert_eq!(c.f1(), if d == 0 { 0.0 } else { (2 * tp) as f64 / d as f64 });
    }

    #[test]
    fn per_class_counts_cover_rows(pairs in prop::collection::vec((0u32..4, 0u32..4), 1..80)) {
        let (pred, truth): (Vec<u32>, Vec<u32>) = pairs.into_iter().unzip();
        let per = one_vs_rest(&pred, &truth, 4).unwrap();
        for (k, c) in per.iter().enumerate() {
            prop_assert_eq!(c.total() as usize, truth.len());
            prop_assert_eq!((c.tp + c.fn_) as usize, truth.iter().filter(|&&t| t == k as u32).count());
        }
        let correct = per.iter().map(|c| c.tp).sum::<u64>() as f64;
        prop_assert_eq!(overall_accuracy(&pred, &truth).unwrap(), correct / truth.len() as f64);
    }
}

/// Jacobi eigenvalues of a symmetric matrix.
fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _ in 0..200 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p][q] * a[p][q];
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
        if off < 1e-30 {
            break;
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
    ev
}

fn fixture(n: usize, f: usize) -> EncodedDataset {
    let features = Mat::from_fn(n, f, |r, c| {
        let t = r as f64 * 0.37;
        (t * (c as f64 + 1.0)).sin() * (c as f64 + 1.0) + (r * c % 5) as f64 * 0.1
    });
    EncodedDataset {
        features,
        labels: vec![0; n],
        class_names: vec!["Normal".into(), "X".into()],
        feature_names: (0..f).map(|i| format!("f{i}")).collect(),
        provenance: vec![Provenance::Real; n],
        split_tag: "train".into(),
    }
}

#[test]
fn pca_variances_are_top_eigenvalues() {
    let ds = fixture(50, 5);
    let (basis, proj) = pca_project("real", &ds, &[], 2).unwrap();
    let p = &proj[0].coords;
    let n = 50.0;
    let mean = |j: usize| (0..50).map(|r| p.get(r, j)).sum::<f64>() / n;
    let cov = |a: usize, b: usize| (0..50).map(|r| (p.get(r, a) - mean(a)) * (p.get(r, b) - mean(b))).sum::<f64>() / (n - 1.0);
    assert!(mean(0).abs() < 1e-9 && mean(1).abs() < 1e-9);
    assert!(cov(0, 1).abs() < 1e-9);

    // oracle: covariance of the standardized features
    let x = &ds.features;
    let f = 5;
    let mu: Vec<f64> = (0..f).map(|c| (0..50).map(|r| x.get(r, c)).sum::<f64>() / n).collect();
    let sd: Vec<f64> = (0..f)
        .map(|c| ((0..50).map(|r| (x.get(r, c) - mu[c]).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
        .collect();
    let c: Vec<Vec<f64>> = (0..f)
        .map(|i| {
            (0..f)
                .map(|j| (0..50).map(|r| (x.get(r, i) - mu[i]) / sd[i] * (x.get(r, j) - mu[j]) / sd[j]).sum::<f64>() / (n - 1.0))
                .collect()
        })
        .collect();
    let ev = jacobi_eigenvalues(c);
    assert!((cov(0, 0) - ev[0]).abs() < 1e-9, "{} vs {}", cov(0, 0), ev[0]);
    assert!((cov(1, 1) - ev[1]).abs() < 1e-9);
    assert!((basis.eigenvalues[0] - ev[0]).abs() < 1e-9);

    // colour scalar is standardized on the fitting set
    let col = &proj[0].color;
    let cm = col.iter().sum::<f64>() / n;
    let cv = col.iter().map(|v| (v - cm).powi(2)).sum::<f64>() / (n - 1.0);
    assert!(cm.abs() < 1e-9 && (cv - 1.0).abs() < 1e-9);
}

#[test]
fn pca_shared_basis_and_csv() {
    let real = fixture(30, 3);
    let mut synth = fixture(20, 3);
    synth.features = synth.features.map(|v| v * 1.5);
    let (_, proj) = pca_project("real", &real, &[("synthetic", &synth)], 2).unwrap();
    assert_eq!(proj.len(), 2);
    // identical rows project identically regardless of set
    let again = pca_project("real", &real, &[("copy", &real)], 2).unwrap().1;
    assert_eq!(again[0].coords, again[1].coords);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pca.csv");
    write_projection_csv(&path, &proj).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("dataset_tag,pc1,pc2,color\n"));
    assert_eq!(text.lines().count(), 51);
    let mut other = fixture(5, 4);
    other.feature_names[0] = "zz".into();
    assert!(pca_project("real", &real, &[("bad", &other)], 2).is_err());
}

fn labelled(n_per: &[usize], classes: &[&str], seed: u64) -> EncodedDataset {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
    let mut u = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for (k, &count) in n_per.iter().enumerate() {
        for _ in 0..count {
            let centre = -0.8 + 1.6 * k as f64 / (n_per.len() - 1) as f64;
            rows.push(vec![centre + 0.1 * (u() - 0.5), -centre + 0.1 * (u() - 0.5), u() - 0.5]);
            labels.push(k as u32);
        }
    }
    EncodedDataset {
        features: Mat::from_rows(&rows),
        labels,
        class_names: classes.iter().map(|s| s.to_string()).collect(),
        feature_names: vec!["a".into(), "b".into(), "c".into()],
        provenance: vec![Provenance::Real; n_per.iter().sum()],
        split_tag: "x".into(),
    }
}

fn quick_cfg(n_runs: usize) -> ProtocolConfig {
    ProtocolConfig {
        kinds: vec![ClassifierKind::Dnn],
        n_runs,
        epochs: 30,
        seed: 5,
        ..ProtocolConfig::default()
    }
}

#[test]
fn protocol_report_shape_and_reproducibility() {
    let classes = ["Normal", "DoS", "Probe"];
    let train = labelled(&[60, 40, 20], &classes, 1);
    let test = labelled(&[30, 20, 10], &classes, 2);
    let single = run_protocol(&train, &test, Task::Multi, &ProtocolConfig { epochs: 300, ..quick_cfg(1) }).unwrap();
    let m = &single.models[0];
    assert!(m.single_run);
    assert_eq!(m.summary[ACCURACY].std, 0.0);
    assert_eq!(
        single.columns,
        vec!["accuracy", "macro_f1", "acc/DoS", "f1/DoS", "acc/Probe", "f1/Probe"]
    );
    assert!(m.summary[ACCURACY].mean > 0.9);

    let a = run_protocol(&train, &test, Task::Binary, &quick_cfg(3)).unwrap();
    let b = run_protocol(&train, &test, Task::Binary, &ProtocolConfig { jobs: 3, ..quick_cfg(3) }).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.to_table(), b.to_table());
    assert_eq!(a.classes, vec!["Normal", "Abnormal"]);
    let ma = &a.models[0];
    assert_eq!((ma.runs.len(), ma.failed_runs, ma.single_run), (3, 0, false));
    assert_eq!(ma.summary[ACCURACY].n, 3);
    let vals: Vec<f64> = ma.runs.iter().map(|r| r.metrics[ACCURACY]).collect();
    let mean = vals.iter().sum::<f64>() / 3.0;
    assert!((ma.summary[ACCURACY].mean - mean).abs() < 1e-15);
    assert!(a.to_table().contains("| DNN"));
    assert_eq!(EvalReport::from_json(&a.to_json()).unwrap(), a);
}

#[test]
fn loao_excludes_the_unknown_class() {
    let classes = ["Normal", "DoS", "Probe"];
    let train = labelled(&[60, 40, 20], &classes, 3);
    let test = labelled(&[30, 20, 10], &classes, 4);
    let r1 = run_loao(&train, &test, "Probe", LoaoNegatives::Normal, &quick_cfg(2)).unwrap();
    assert_eq!(r1.classes, vec!["Normal", "DoS"]);
    assert_eq!(r1.test_digest, dataset_digest(&test));
    let aug = train.concat(&labelled(&[0, 0, 50], &classes, 9)).unwrap();
    let r2 = run_loao(&aug, &test, "Probe", LoaoNegatives::Normal, &ProtocolConfig { condition: "augmented".into(), ..quick_cfg(2) }).unwrap();
    assert_eq!(r1.test_digest, r2.test_digest);
    assert_eq!(r1.train_digest, r2.train_digest, "synthetic unknown-class rows are excluded too");
    for run in &r1.models[0].runs {
        assert_eq!(run.metrics["unknown_train_rows"], 0.0);
        assert!((0.0..=1.0).contains(&run.metrics[AUROC]));
    }
    assert!(run_loao(&train, &test, "Normal", LoaoNegatives::Normal, &quick_cfg(1)).is_err());
    assert!(run_loao(&train, &test, "U2R", LoaoNegatives::Normal, &quick_cfg(1)).is_err());

    let (rows, pos) = loao_population(&test, "Probe", "Normal", LoaoNegatives::Normal).unwrap();
    assert_eq!((rows.len(), pos.iter().filter(|&&p| p).count()), (40, 10));
    let (rows, _) = loao_population(&test, "Probe", "Normal", LoaoNegatives::AllOthers).unwrap();
    assert_eq!(rows.len(), 60);
}

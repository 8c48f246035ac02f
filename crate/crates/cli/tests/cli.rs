use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const SCHEMA: &str = r#"
[[field]]
name = "bytes"
kind = "continuous"

[[field]]
name = "proto"
kind = "discrete"

[[field]]
name = "duration"
kind = "continuous"

[[field]]
name = "label"
kind = "discrete"
role = "label"
"#;

const TINY_GAN: &str = r#"
epochs = 2
batch_size = 16
z_dim = 4
d_m = 4
d_k = 4
gen_hidden = [8, 8]
critic_hidden = [8, 8]
ae_hidden = 6
gate_hidden = 4
swd_every = 0
"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_flowsynth"));
    c.env_remove("FLOWSYNTH_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let o = run(args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

/// Deterministic three-class table; Probe rows sit apart from the others.
fn write_table(path: &Path, n: usize, offset: usize) {
    let mut text = String::from("bytes,proto,duration,label\n");
    for i in offset..offset + n {
        let (label, shift) = match i % 6 {
            0..=2 => ("Normal", 0.0),
            3 | 4 => ("DoS", 3.0),
            _ => ("Probe", -3.0),
        };
        let jitter = ((i * 37) % 17) as f64 / 17.0;
        let proto = ["tcp", "udp", "icmp"][(i / 6) % 3];
        text.push_str(&format!(
            "{:.4},{proto},{:.4},{label}\n",
            100.0 + 20.0 * (shift + jitter),
            1.0 + shift.abs() + jitter
        ));
    }
    fs::write(path, text).unwrap();
}

struct Fixture {
    _tmp: tempfile::TempDir,
    root: PathBuf,
}

impl Fixture {
    fn new() -> Fixture {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().to_path_buf();
        fs::write(root.join("schema.toml"), SCHEMA).unwrap();
        fs::write(root.join("gan.toml"), TINY_GAN).unwrap();
        write_table(&root.join("train.csv"), 240, 0);
        write_table(&root.join("test.csv"), 120, 1000);
        Fixture { _tmp: tmp, root }
    }

    fn p(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn preprocess(&self, out: &str) -> PathBuf {
        let dir = self.p(out);
        ok(&[
            "preprocess",
            "--data",
            s(&self.p("train.csv")),
            s(&self.p("test.csv")),
            "--schema",
            s(&self.p("schema.toml")),
            "--out",
            s(&dir),
        ]);
        dir
    }

    fn train_gan(&self, data: &Path, class: &str, out: &str, extra: &[&str]) -> PathBuf {
        let dir = self.p(out);
        let mut args = vec![
            "train-gan",
            "--train",
            s(&data.join("train.fse")).to_string().leak(),
            "--class",
            class,
            "--config",
            s(&self.p("gan.toml")).to_string().leak(),
            "--out",
            s(&dir).to_string().leak(),
        ];
        args.extend_from_slice(extra);
        ok(&args);
        dir
    }
}

/// Runs the full chain; returns every directory it wrote.
fn pipeline(fx: &Fixture, tag: &str) -> Vec<PathBuf> {
    let data = fx.preprocess(&format!("{tag}/data"));
    let g_probe = fx.train_gan(&data, "Probe", &format!("{tag}/gan_probe"), &["--seed", "5"]);
    let g_dos = fx.train_gan(&data, "DoS", &format!("{tag}/gan_dos"), &["--seed", "6"]);
    let gen = fx.p(&format!("{tag}/gen"));
    ok(&[
        "generate",
        "--generator",
        s(&g_probe.join("generator.gmac")),
        "--n",
        "50",
        "--seed",
        "3",
        "--csv",
        "--out",
        s(&gen),
    ]);
    let aug = fx.p(&format!("{tag}/aug"));
    ok(&[
        "augment",
        "--train",
        s(&data.join("train.fse")),
        "--generator",
        s(&g_probe.join("generator.gmac")),
        "--generator",
        s(&g_dos.join("generator.gmac")),
        "--scale",
        "Probe,DoS",
        "--factor",
        "2",
        "--cap",
        "30",
        "--seed",
        "1",
        "--out",
        s(&aug),
    ]);
    let ids = fx.p(&format!("{tag}/ids"));
    ok(&[
        "train-ids",
        "--train",
        s(&aug.join("augmented.fse")),
        "--kind",
        "dnn",
        "--epochs",
        "2",
        "--seed",
        "4",
        "--out",
        s(&ids),
    ]);
    let eval = fx.p(&format!("{tag}/eval"));
    ok(&[
        "eval",
        "--train",
        s(&aug.join("augmented.fse")),
        "--test",
        s(&data.join("test.fse")),
        "--task",
        "multi",
        "--kinds",
        "dnn",
        "--runs",
        "2",
        "--epochs",
        "2",
        "--seed",
        "8",
        "--out",
        s(&eval),
    ]);
    let swd = fx.p(&format!("{tag}/swd"));
    ok(&[
        "swd",
        "--a",
        s(&data.join("train.fse")),
        "--b",
        s(&gen.join("synthetic.fse")),
        "--class",
        "Probe",
        "--projections",
        "16",
        "--seed",
        "2",
        "--out",
        s(&swd),
    ]);
    let pca = fx.p(&format!("{tag}/pca"));
    ok(&[
        "pca",
        "--reference",
        s(&data.join("train.fse")),
        "--compare",
        &format!("synthetic={}", s(&gen.join("synthetic.fse"))),
        "--class",
        "Probe",
        "--out",
        s(&pca),
    ]);
    vec![data, g_probe, g_dos, gen, aug, ids, eval, swd, pca]
}

#[test]
fn end_to_end_pipeline_is_reproducible() {
    let fx = Fixture::new();
    let a = pipeline(&fx, "a");
    let b = pipeline(&fx, "b");
    for (da, db) in a.iter().zip(&b) {
        let ma = manifest(da);
        let mb = manifest(db);
        assert_eq!(ma["status"], "ok", "{}", da.display());
        assert!(!ma["outputs"].as_array().unwrap().is_empty(), "{}", da.display());
        for out in ma["outputs"].as_array().unwrap() {
            let name = out["path"].as_str().unwrap();
            assert_eq!(
                fs::read(da.join(name)).unwrap(),
                fs::read(db.join(name)).unwrap(),
                "{name} differs between reruns"
            );
        }
        assert_eq!(ma["outputs"], mb["outputs"]);
        let cfg = |m: &Value| m["config"].to_string().replace("/a/", "/").replace("/b/", "/");
        assert_eq!(cfg(&ma), cfg(&mb));
        assert_eq!(ma["seed"], mb["seed"]);
        assert!(!da.join(".staging").exists());
    }
    let decoded = fs::read_to_string(a[3].join("synthetic.csv")).unwrap();
    assert_eq!(decoded.lines().count(), 51);
    assert!(decoded
        .lines()
        .skip(1)
        .all(|l| ["tcp", "udp", "icmp"].iter().any(|p| l.split(',').nth(1) == Some(p))));
    let plan: Value = serde_json::from_str(&fs::read_to_string(a[4].join("plan.json")).unwrap()).unwrap();
    assert!(plan.to_string().contains("Probe"));
}

#[test]
fn failure_leaves_only_the_manifest() {
    let fx = Fixture::new();
    let data = fx.preprocess("data");
    let out = fx.p("gan");
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join("generator.gmac"), b"stale").unwrap();
    let o = run(&[
        "train-gan",
        "--train",
        s(&data.join("train.fse")),
        "--class",
        "NoSuchClass",
        "--config",
        s(&fx.p("gan.toml")),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(listing(&out), vec!["manifest.json"]);
    let m = manifest(&out);
    assert_eq!(m["status"], "failed");
    assert_eq!(m["exit_code"], 3);
    assert!(m["outputs"].as_array().unwrap().is_empty());
}

#[test]
fn exit_codes_distinguish_config_and_data_errors() {
    let fx = Fixture::new();
    let data = fx.preprocess("data");
    let bad_cfg = fx.p("bad.toml");
    fs::write(&bad_cfg, "learning_rate_typo = 3\n").unwrap();
    let o = run(&[
        "train-gan",
        "--train",
        s(&data.join("train.fse")),
        "--class",
        "Probe",
        "--config",
        s(&bad_cfg),
        "--out",
        s(&fx.p("c1")),
    ]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&[
        "train-gan",
        "--train",
        s(&data.join("train.fse")),
        "--class",
        "Probe",
        "--config",
        s(&fx.p("gan.toml")),
        "--batch-size",
        "0",
        "--out",
        s(&fx.p("c2")),
    ]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&[
        "preprocess",
        "--data",
        s(&fx.p("missing.csv")),
        s(&fx.p("test.csv")),
        "--schema",
        s(&fx.p("schema.toml")),
        "--out",
        s(&fx.p("c3")),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(listing(&fx.p("c3")), vec!["manifest.json"]);
}

#[test]
fn tampered_inputs_are_rejected_before_work() {
    let fx = Fixture::new();
    let data = fx.preprocess("data");
    let mut bytes = fs::read(data.join("train.fse")).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    fs::write(data.join("train.fse"), bytes).unwrap();
    let out = fx.p("gan");
    let o = run(&[
        "train-gan",
        "--train",
        s(&data.join("train.fse")),
        "--class",
        "Probe",
        "--config",
        s(&fx.p("gan.toml")),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(manifest(&out)["error"].as_str().unwrap().contains("digest"));
}

#[test]
fn seed_precedence_is_file_then_env_then_flag() {
    let fx = Fixture::new();
    let data = fx.preprocess("data");
    let cfg = fx.p("seeded.toml");
    fs::write(&cfg, format!("{TINY_GAN}epochs = 1\nseed = 11\n").replace("epochs = 2\n", "")).unwrap();
    let train = |out: &str, env: Option<&str>, flag: Option<&str>| -> Value {
        let dir = fx.p(out);
        let mut c = bin();
        c.args([
            "train-gan",
            "--train",
            s(&data.join("train.fse")),
            "--class",
            "DoS",
            "--config",
            s(&cfg),
            "--out",
            s(&dir),
        ]);
        if let Some(e) = env {
            c.env("FLOWSYNTH_SEED", e);
        }
        if let Some(f) = flag {
            c.args(["--seed", f]);
        }
        assert!(c.output().unwrap().status.success());
        manifest(&dir)
    };
    let m = train("file", None, None);
    assert_eq!(m["seed"], 11);
    assert_eq!(m["config"]["training"]["epochs"], 1);
    assert_eq!(m["config"]["training"]["batch_size"], 16);
    assert_eq!(train("env", Some("12"), None)["seed"], 12);
    assert_eq!(train("flag", Some("12"), Some("13"))["seed"], 13);

    let mut c = bin();
    let o = c
        .args(["generate", "--generator", "x", "--n", "1", "--out", s(&fx.p("bad_env"))])
        .env("FLOWSYNTH_SEED", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn variant_and_ablation_flags_resolve_toggles() {
    let fx = Fixture::new();
    let data = fx.preprocess("data");
    let dir = fx.train_gan(
        &data,
        "Probe",
        "abl",
        &["--variant", "gma-sawgan-gp", "--ablate", "gate", "--epochs", "1"],
    );
    let t = &manifest(&dir)["config"]["training"];
    assert_eq!(t["use_ae_constraint"], true);
    assert_eq!(t["use_gate"], false);
    assert_eq!(t["use_attention"], true);
    assert_eq!(t["epochs"], 1);
    let o = run(&[
        "train-gan",
        "--train",
        s(&data.join("train.fse")),
        "--class",
        "Probe",
        "--variant",
        "nonsense",
        "--out",
        s(&fx.p("abl2")),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn loao_excludes_the_unknown_class_from_training() {
    let fx = Fixture::new();
    let data = fx.preprocess("data");
    let out = fx.p("loao");
    ok(&[
        "loao",
        "--train",
        s(&data.join("train.fse")),
        "--test",
        s(&data.join("test.fse")),
        "--unknown",
        "Probe",
        "--kinds",
        "dnn",
        "--runs",
        "1",
        "--epochs",
        "1",
        "--out",
        s(&out),
    ]);
    let r: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(r["unknown_class"], "Probe");
    assert!(!r["classes"].as_array().unwrap().iter().any(|c| c == "Probe"));
    assert!(r.to_string().contains("unknown_train_rows"));
    assert!(out.join("report.txt").exists());
}

#[test]
fn preset_split_rules_are_enforced_before_writing() {
    let fx = Fixture::new();
    let out = fx.p("pre");
    // the NSL-KDD preset expects separate train and test files
    let o = run(&[
        "preprocess",
        "--data",
        s(&fx.p("train.csv")),
        "--dataset-preset",
        "nsl-kdd",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(listing(&out), vec!["manifest.json"]);

    // a user schema that disagrees with the preset schema
    let o = run(&[
        "preprocess",
        "--data",
        s(&fx.p("train.csv")),
        s(&fx.p("test.csv")),
        "--schema",
        s(&fx.p("schema.toml")),
        "--dataset-preset",
        "nsl-kdd",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(listing(&out), vec!["manifest.json"]);
}

#[test]
fn single_file_is_split_by_fraction() {
    let fx = Fixture::new();
    let out = fx.p("single");
    ok(&[
        "preprocess",
        "--data",
        s(&fx.p("train.csv")),
        "--schema",
        s(&fx.p("schema.toml")),
        "--train-fraction",
        "0.75",
        "--split-seed",
        "9",
        "--out",
        s(&out),
    ]);
    let m = manifest(&out);
    assert_eq!(m["seed"], 9);
    assert_eq!(m["config"]["split"]["train_fraction"], 0.75);
    assert_eq!(listing(&out), vec!["codec.json", "manifest.json", "test.fse", "train.fse"]);
}

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use flowsynth::eval_metrics::{pca_project, run_loao, run_protocol, write_projection_csv, LoaoNegatives, ProtocolConfig, Task};
use flowsynth::gan_training::{sliced_wasserstein, train, TrainOptions, TrainingConfig, Variant};
use flowsynth::ids_zoo::{build, fit, ClassifierKind, ClassifierSpec, DEFAULT_EPOCHS};
use flowsynth::models::OutputLayout;
use flowsynth::presets::{PresetBundle, SplitRule};
use flowsynth::schema_codec::{
    build_augmentation_plan, collapse_binary_dataset, load_flow_table, shuffle_split, Codec, DatasetPreset,
    EncodedDataset, FeatureSchema, PlanPolicy, Provenance, SplitTag,
};
use flowsynth::synthesis::{assemble, generate_class, ClassGenerator};
use flowsynth::{Error, Result};
use serde_json::{json, Value};

use crate::layered::{env_seed, resolve, Flags};
use crate::manifest::{verify_input, FileRecord, OutputDir, RunManifest, RunStatus};
use crate::*;

/// What a command reports back for its manifest.
#[derive(Default)]
struct Ctx {
    inputs: Vec<FileRecord>,
    config: Value,
    seed: Option<u64>,
    keep_partial: bool,
}

impl Ctx {
    fn input(&mut self, role: &str, path: &Path) -> Result<()> {
        self.inputs.push(verify_input(role, path)?);
        Ok(())
    }

    fn load_dataset(&mut self, role: &str, path: &Path) -> Result<EncodedDataset> {
        self.input(role, path)?;
        EncodedDataset::load(path)
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Schema(_) => 2,
        Error::Numeric(_) => 4,
        _ => 3,
    }
}

fn outputs_of(cmd: &Command) -> (&'static str, PathBuf, Vec<(&'static str, &'static str)>) {
    match cmd {
        Command::Preprocess(a) => (
            "preprocess",
            a.out.clone(),
            vec![("train", "train.fse"), ("test", "test.fse"), ("codec", "codec.json")],
        ),
        Command::TrainGan(a) => (
            "train-gan",
            a.out.clone(),
            vec![("generator", "generator.gmac"), ("loss log", "loss_log.csv")],
        ),
        Command::Generate(a) => (
            "generate",
            a.out.clone(),
            vec![("synthetic", "synthetic.fse"), ("decoded", "synthetic.csv")],
        ),
        Command::Augment(a) => ("augment", a.out.clone(), vec![("augmented", "augmented.fse"), ("plan", "plan.json")]),
        Command::TrainIds(a) => ("train-ids", a.out.clone(), vec![("classifier", "classifier.idsc")]),
        Command::Eval(a) => (
            "eval",
            a.protocol.out.clone(),
            vec![("report", "report.json"), ("table", "report.txt")],
        ),
        Command::Loao(a) => (
            "loao",
            a.protocol.out.clone(),
            vec![("report", "report.json"), ("table", "report.txt")],
        ),
        Command::Swd(a) => ("swd", a.out.clone(), vec![("distance", "swd.json")]),
        Command::Pca(a) => ("pca", a.out.clone(), vec![("projection", "pca.csv"), ("basis", "basis.json")]),
    }
}

/// Runs one command and writes its manifest; returns the process exit code.
pub fn run(cmd: Command) -> i32 {
    let started = Instant::now();
    let (name, dir, declared) = outputs_of(&cmd);
    let out = match OutputDir::create(&dir, &declared) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let mut ctx = Ctx::default();
    let result = match &cmd {
        Command::Preprocess(a) => preprocess(a, &mut ctx, &out),
        Command::TrainGan(a) => train_gan(a, &mut ctx, &out),
        Command::Generate(a) => generate(a, &mut ctx, &out),
        Command::Augment(a) => augment(a, &mut ctx, &out),
        Command::TrainIds(a) => train_ids(a, &mut ctx, &out),
        Command::Eval(a) => eval(a, &mut ctx, &out),
        Command::Loao(a) => loao(a, &mut ctx, &out),
        Command::Swd(a) => swd(a, &mut ctx, &out),
        Command::Pca(a) => pca(a, &mut ctx, &out),
    };
    let (status, outputs, code) = match result {
        Ok(()) => match out.commit() {
            Ok(files) => (RunStatus::Ok, files, 0),
            Err(e) => failure(&e, Vec::new()),
        },
        Err(e) => {
            let kept = if ctx.keep_partial {
                out.commit().unwrap_or_default()
            } else {
                out.abandon();
                Vec::new()
            };
            failure(&e, kept)
        }
    };
    let manifest = RunManifest {
        command: name.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: ctx.seed,
        config: ctx.config,
        inputs: ctx.inputs,
        outputs,
        duration_secs: started.elapsed().as_secs_f64(),
        status,
    };
    if let Err(e) = manifest.write(&dir) {
        eprintln!("error: cannot write manifest: {e}");
        return if code == 0 { exit_code(&e) } else { code };
    }
    code
}

fn failure(e: &Error, kept: Vec<FileRecord>) -> (RunStatus, Vec<FileRecord>, i32) {
    eprintln!("error: {e}");
    let code = exit_code(e);
    (
        RunStatus::Failed {
            exit_code: code,
            error: e.to_string(),
        },
        kept,
        code,
    )
}

fn dataset_preset(p: Preset) -> DatasetPreset {
    match p {
        Preset::NslKdd => DatasetPreset::NslKdd,
        Preset::UnswNb15 => DatasetPreset::UnswNb15,
        Preset::Cicids2017 => DatasetPreset::Cicids2017,
    }
}

/// `--seed`, else `FLOWSYNTH_SEED`, else 0.
fn plain_seed(flag: Option<u64>) -> Result<u64> {
    Ok(match flag {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    })
}

fn class_subset(ds: &EncodedDataset, class: &str) -> Result<EncodedDataset> {
    let idx = ds
        .class_index(class)
        .ok_or_else(|| Error::Data(format!("class {class:?} not in {:?}", ds.class_names)))?;
    let rows = ds.rows_of_class(idx);
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(ds.select(&rows))
}

// ---------------------------------------------------------------- commands

fn preprocess(a: &PreprocessArgs, ctx: &mut Ctx, out: &OutputDir) -> Result<()> {
    let bundle = a.dataset_preset.map(|p| PresetBundle::get(dataset_preset(p)));
    let user = a.schema.as_deref().map(FeatureSchema::load).transpose()?;
    if let (Some(b), Some(u)) = (&bundle, &user) {
        check_preset_agreement(b, u)?;
    }
    let schema = match (&bundle, user) {
        (Some(b), u) => b.resolve_schema(u)?,
        (None, Some(s)) => s,
        (None, None) => return Err(Error::Config("either --schema or --dataset-preset is required".into())),
    };
    let rule = bundle.as_ref().map(|b| b.split.clone());
    let split = match (a.data.len(), rule) {
        (2, None | Some(SplitRule::OfficialFiles)) => None,
        (2, Some(SplitRule::Shuffle { .. })) => {
            return Err(Error::Config("this preset splits a single table; pass one --data file".into()))
        }
        (_, Some(SplitRule::OfficialFiles)) => {
            return Err(Error::Config("this preset uses separate train and test files; pass two --data files".into()))
        }
        (_, Some(SplitRule::Shuffle { train_fraction, seed })) => Some((
            a.train_fraction.unwrap_or(train_fraction),
            a.split_seed.unwrap_or(seed),
        )),
        (_, None) => {
            let f = a
                .train_fraction
                .ok_or_else(|| Error::Config("a single --data file needs --train-fraction".into()))?;
            Some((f, plain_seed(a.split_seed)?))
        }
    };
    if let Some((f, _)) = split {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::Config(format!("train fraction {f} must lie strictly between 0 and 1")));
        }
    }
    for (i, p) in a.data.iter().enumerate() {
        ctx.input(if i == 0 { "data" } else { "test data" }, p)?;
    }
    if let Some(p) = &a.schema {
        ctx.input("schema", p)?;
    }
    ctx.seed = split.map(|(_, s)| s);
    ctx.config = json!({
        "dataset_preset": bundle.as_ref().map(|b| b.preset.name()),
        "schema": serde_json::to_value(&schema).expect("schema serializes"),
        "split": match split {
            None => json!("official files"),
            Some((f, s)) => json!({"train_fraction": f, "seed": s}),
        },
    });
    let (train_raw, test_raw) = match split {
        None => (
            load_flow_table(&a.data[0], &schema, SplitTag::Train)?,
            load_flow_table(&a.data[1], &schema, SplitTag::Test)?,
        ),
        Some((f, seed)) => shuffle_split(&load_flow_table(&a.data[0], &schema, SplitTag::Train)?, f, seed),
    };
    if train_raw.n_rows() == 0 || test_raw.n_rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let codec = Codec::fit(&train_raw, &schema)?;
    let train = codec.encode(&train_raw)?;
    let test = codec.encode(&test_raw)?;
    log::info!("encoded {} train and {} test rows", train.n_rows(), test.n_rows());
    train.save(&out.file("train.fse"))?;
    test.save(&out.file("test.fse"))?;
    std::fs::write(out.file("codec.json"), codec.to_json())?;
    Ok(())
}

/// A user schema may add label rules to a preset but must not contradict its
/// column list or its normal class.
fn check_preset_agreement(b: &PresetBundle, user: &FeatureSchema) -> Result<()> {
    let name = b.preset.name();
    if let Some(ps) = &b.schema {
        let cols = |s: &FeatureSchema| s.fields.iter().map(|f| (f.name.clone(), f.kind, f.role)).collect::<Vec<_>>();
        if cols(ps) != cols(user) {
            return Err(Error::Config(format!("--schema columns differ from the {name} preset's columns")));
        }
    }
    match &user.normal_class {
        Some(n) if n != b.normal_class => Err(Error::Config(format!(
            "--schema names normal class {n:?} but the {name} preset uses {:?}",
            b.normal_class
        ))),
        _ => Ok(()),
    }
}

fn train_gan(a: &TrainGanArgs, ctx: &mut Ctx, out: &OutputDir) -> Result<()> {
    ctx.keep_partial = a.keep_partial;
    let base = match a.preset {
        TrainPreset::Paper => TrainingConfig::default(),
        TrainPreset::Smoke => TrainingConfig::smoke(),
        TrainPreset::Desk => TrainingConfig::desk(),
    };
    let mut flags = Flags::default();
    flags.set("epochs", a.epochs).set("batch_size", a.batch_size).set("seed", a.seed);
    if let Some(v) = &a.variant {
        let (ae, gate, attn) = Variant::parse(v)?.toggles();
        flags
            .set("use_ae_constraint", Some(ae))
            .set("use_gate", Some(gate))
            .set("use_attention", Some(attn));
    }
    for c in &a.ablate {
        let key = match c {
            Component::Ae => "use_ae_constraint",
            Component::Gate => "use_gate",
            Component::Attention => "use_attention",
        };
        flags.set(key, Some(false));
    }
    let cfg: TrainingConfig = resolve(&base, a.config.as_deref(), flags.0)?;
    cfg.validate()?;
    ctx.seed = Some(cfg.seed);
    ctx.config = json!({"class": a.class, "training": serde_json::to_value(&cfg).expect("config serializes")});
    if let Some(p) = &a.config {
        ctx.input("config", p)?;
    }
    let data = ctx.load_dataset("train", &a.train)?;
    let codec_path = a.codec.clone().or_else(|| {
        let p = a.train.parent().unwrap_or(Path::new(".")).join("codec.json");
        p.exists().then_some(p)
    });
    let codec = match &codec_path {
        Some(p) => {
            ctx.input("codec", p)?;
            let c = Codec::load(p)?;
            if c.feature_names() != data.feature_names {
                return Err(Error::Schema("codec and training set list different features".into()));
            }
            Some(c)
        }
        None => None,
    };
    let rows = class_subset(&data, &a.class)?;
    let layout = match &codec {
        Some(c) => OutputLayout::from_codec(c),
        None => OutputLayout::continuous(data.n_features()),
    };
    let opts = TrainOptions {
        checkpoint_path: Some(out.file("generator.gmac")),
        loss_log_path: Some(out.file("loss_log.csv")),
        codec_json: codec.as_ref().map(Codec::to_json).unwrap_or_default(),
        class_name: a.class.clone(),
    };
    log::info!("training {} on {} rows for {} epochs", a.class, rows.n_rows(), cfg.epochs);
    train(&rows.features, layout, &cfg, &opts)?;
    Ok(())
}

fn generate(a: &GenerateArgs, ctx: &mut Ctx, out: &OutputDir) -> Result<()> {
    let seed = plain_seed(a.seed)?;
    ctx.seed = Some(seed);
    ctx.config = json!({"n": a.n, "csv": a.csv});
    ctx.input("generator", &a.generator)?;
    let gen = ClassGenerator::load(&a.generator)?;
    if a.csv && gen.codec.is_none() {
        return Err(Error::Config("--csv needs a generator trained with a codec".into()));
    }
    let (class_names, feature_names, label) = match &gen.codec {
        Some(c) => {
            let label = c
                .class_index(&gen.class_name)
                .ok_or_else(|| Error::Data(format!("class {:?} unknown to the embedded codec", gen.class_name)))?;
            (c.class_names.clone(), c.feature_names(), label as u32)
        }
        None => (
            vec![gen.class_name.clone()],
            (0..gen.generator.layout.width()).map(|i| format!("f{i}")).collect(),
            0,
        ),
    };
    let features = generate_class(&gen, a.n, seed)?;
    let ds = EncodedDataset {
        features,
        labels: vec![label; a.n],
        class_names,
        feature_names,
        provenance: vec![Provenance::Synthetic; a.n],
        split_tag: "synthetic".into(),
    };
    ds.save(&out.file("synthetic.fse"))?;
    if let Some(c) = &gen.codec.as_ref().filter(|_| a.csv) {
        let raw = c.decode(&ds)?;
        let f = std::fs::File::create(out.file("synthetic.csv"))?;
        raw.write_csv(std::io::BufWriter::new(f), &c.label_name)?;
    }
    Ok(())
}

fn augment(a: &AugmentArgs, ctx: &mut Ctx, out: &OutputDir) -> Result<()> {
    let seed = plain_seed(a.seed)?;
    let policy = if let Some(p) = a.dataset_preset {
        PlanPolicy::Preset(dataset_preset(p))
    } else if let Some(path) = &a.targets {
        ctx.input("targets", path)?;
        let text = std::fs::read_to_string(path)?;
        let targets: BTreeMap<String, usize> =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        PlanPolicy::Targets(targets)
    } else if !a.scale.is_empty() {
        PlanPolicy::Scaled {
            classes: a.scale.clone(),
            factor: a.factor,
            cap: a.cap,
        }
    } else {
        return Err(Error::Config("choose a plan: --dataset-preset, --targets or --scale".into()));
    };
    ctx.seed = Some(seed);
    let train = ctx.load_dataset("train", &a.train)?;
    let mut gens = BTreeMap::new();
    for p in &a.generators {
        ctx.input("generator", p)?;
        let g = ClassGenerator::load(p)?;
        if gens.contains_key(&g.class_name) {
            return Err(Error::Config(format!("two generators for class {:?}", g.class_name)));
        }
        gens.insert(g.class_name.clone(), g);
    }
    let counts: Vec<(String, usize)> = train.class_names.iter().cloned().zip(train.class_counts()).collect();
    let plan = build_augmentation_plan(&counts, &policy)?;
    ctx.config = json!({"plan": serde_json::to_value(&plan).expect("plan serializes")});
    let aug = assemble(&train, &plan, &gens, seed)?;
    aug.save(&out.file("augmented.fse"))?;
    let mut text = serde_json::to_string_pretty(&plan).expect("plan serializes");
    text.push('\n');
    std::fs::write(out.file("plan.json"), text)?;
    Ok(())
}

fn task_of(t: TaskArg) -> Task {
    match t {
        TaskArg::Binary => Task::Binary,
        TaskArg::Multi => Task::Multi,
    }
}

fn train_ids(a: &TrainIdsArgs, ctx: &mut Ctx, out: &OutputDir) -> Result<()> {
    let kind: ClassifierKind = a.kind.parse()?;
    let seed = plain_seed(a.seed)?;
    let epochs = a.epochs.unwrap_or(DEFAULT_EPOCHS);
    ctx.seed = Some(seed);
    ctx.config = json!({
        "kind": kind, "task": task_of(a.task).name(), "epochs": epochs, "normal_class": a.normal_class,
    });
    let mut train = ctx.load_dataset("train", &a.train)?;
    if let TaskArg::Binary = a.task {
        train = collapse_binary_dataset(&train, &a.normal_class)?;
    }
    let spec = ClassifierSpec {
        epochs,
        ..ClassifierSpec::new(kind, train.n_features(), train.n_classes(), seed)
    };
    let model = fit(build(spec)?, &train, epochs)?;
    model.save(&out.file("classifier.idsc"))?;
    Ok(())
}

fn protocol_config(a: &ProtocolArgs, ctx: &mut Ctx) -> Result<ProtocolConfig> {
    let kinds = a
        .kinds
        .iter()
        .map(|k| k.parse::<ClassifierKind>())
        .collect::<Result<Vec<_>>>()?;
    let mut flags = Flags::default();
    flags
        .set("kinds", (!kinds.is_empty()).then_some(kinds))
        .set("n_runs", a.runs)
        .set("epochs", a.epochs)
        .set("seed", a.seed)
        .set("condition", a.condition.clone())
        .set("normal_class", a.normal_class.clone())
        .set("jobs", a.jobs);
    if let Some(p) = &a.config {
        ctx.input("config", p)?;
    }
    let cfg: ProtocolConfig = resolve(&ProtocolConfig::default(), a.config.as_deref(), flags.0)?;
    if cfg.jobs == 0 {
        return Err(Error::Config("--jobs must be at least 1".into()));
    }
    ctx.seed = Some(cfg.seed);
    Ok(cfg)
}

fn eval(a: &EvalArgs, ctx: &mut Ctx, out: &OutputDir) -> Result<()> {
    let cfg = protocol_config(&a.protocol, ctx)?;
    let task = task_of(a.task);
    ctx.config = json!({"task": task.name(), "protocol": serde_json::to_value(&cfg).expect("config serializes")});
    let train = ctx.load_dataset("train", &a.protocol.train)?;
    let test = ctx.load_dataset("test", &a.protocol.test)?;
    let report = run_protocol(&train, &test, task, &cfg)?;
    report.save(out.staging(), "report")?;
    print!("{}", report.to_table());
    Ok(())
}

fn loao(a: &LoaoArgs, ctx: &mut Ctx, out: &OutputDir) -> Result<()> {
    let cfg = protocol_config(&a.protocol, ctx)?;
    let negatives = match a.negatives {
        NegativesArg::Normal => LoaoNegatives::Normal,
        NegativesArg::AllOthers => LoaoNegatives::AllOthers,
    };
    ctx.config = json!({
        "unknown": a.unknown,
        "negatives": negatives.name(),
        "protocol": serde_json::to_value(&cfg).expect("config serializes"),
    });
    let train = ctx.load_dataset("train", &a.protocol.train)?;
    let test = ctx.load_dataset("test", &a.protocol.test)?;
    let report = run_loao(&train, &test, &a.unknown, negatives, &cfg)?;
    report.save(out.staging(), "report")?;
    print!("{}", report.to_table());
    Ok(())
}

fn swd(a: &SwdArgs, ctx: &mut Ctx, out: &OutputDir) -> Result<()> {
    let seed = plain_seed(a.seed)?;
    ctx.seed = Some(seed);
    ctx.config = json!({"class": a.class, "projections": a.projections});
    let mut x = ctx.load_dataset("a", &a.a)?;
    let mut y = ctx.load_dataset("b", &a.b)?;
    if x.feature_names != y.feature_names {
        return Err(Error::Schema("the two sets list different features".into()));
    }
    if let Some(c) = &a.class {
        x = class_subset(&x, c)?;
        y = class_subset(&y, c)?;
    }
    let d = sliced_wasserstein(&x.features, &y.features, a.projections, seed)?;
    let body = json!({
        "swd": d, "projections": a.projections, "seed": seed, "rows_a": x.n_rows(), "rows_b": y.n_rows(),
    });
    std::fs::write(out.file("swd.json"), format!("{}\n", serde_json::to_string_pretty(&body).unwrap()))?;
    println!("{d}");
    Ok(())
}

fn pca(a: &PcaArgs, ctx: &mut Ctx, out: &OutputDir) -> Result<()> {
    ctx.config = json!({
        "reference_tag": a.reference_tag, "compare": a.compare, "class": a.class, "components": a.components,
    });
    let sub = |ds: EncodedDataset| match &a.class {
        Some(c) => class_subset(&ds, c),
        None => Ok(ds),
    };
    let reference = sub(ctx.load_dataset("reference", &a.reference)?)?;
    let mut others = Vec::new();
    for spec in &a.compare {
        let (tag, path) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--compare expects tag=path, got {spec:?}")))?;
        others.push((tag.to_string(), sub(ctx.load_dataset("compare", Path::new(path))?)?));
    }
    let refs: Vec<(&str, &EncodedDataset)> = others.iter().map(|(t, d)| (t.as_str(), d)).collect();
    let (basis, projections) = pca_project(&a.reference_tag, &reference, &refs, a.components)?;
    write_projection_csv(&out.file("pca.csv"), &projections)?;
    let body = json!({
        "eigenvalues": basis.eigenvalues,
        "degenerate": basis.degenerate,
        "mean": basis.mean,
        "scale": basis.scale,
    });
    std::fs::write(out.file("basis.json"), format!("{}\n", serde_json::to_string_pretty(&body).unwrap()))?;
    Ok(())
}

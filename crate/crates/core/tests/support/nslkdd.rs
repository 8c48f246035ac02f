//! NSL-KDD-format flow tables: the official files when `FLOWSYNTH_NSL_KDD_DIR`
//! points at a directory holding `KDDTrain+.txt` and `KDDTest+.txt`, otherwise
//! a seeded surrogate with the same column layout and class proportions.

use std::fmt::Write as _;
use std::path::PathBuf;

use flowsynth::presets::PresetBundle;
use flowsynth::rng;
use flowsynth::schema_codec::{read_flow_table, load_flow_table, DatasetPreset, FeatureSchema, RawDataset, SplitTag};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

pub const DATA_DIR_VAR: &str = "FLOWSYNTH_NSL_KDD_DIR";

pub struct Tables {
    pub train: RawDataset,
    pub test: RawDataset,
    pub source: String,
}

pub fn schema() -> FeatureSchema {
    PresetBundle::get(DatasetPreset::NslKdd).schema.expect("preset schema")
}

pub fn load(seed: u64) -> flowsynth::Result<Tables> {
    let schema = schema();
    if let Some(dir) = std::env::var_os(DATA_DIR_VAR).map(PathBuf::from) {
        return Ok(Tables {
            train: load_flow_table(&dir.join("KDDTrain+.txt"), &schema, SplitTag::Train)?,
            test: load_flow_table(&dir.join("KDDTest+.txt"), &schema, SplitTag::Test)?,
            source: dir.display().to_string(),
        });
    }
    let (train, test) = surrogate_csv(seed);
    Ok(Tables {
        train: read_flow_table(train.as_bytes(), &schema, SplitTag::Train)?,
        test: read_flow_table(test.as_bytes(), &schema, SplitTag::Test)?,
        source: "surrogate".into(),
    })
}

struct Profile {
    names: &'static [&'static str],
    protocol: [f64; 3],
    service: [f64; 8],
    flag: [f64; 4],
    /// Scale of the mean offset from normal traffic.
    shift: f64,
}

const PROTOCOLS: [&str; 3] = ["tcp", "udp", "icmp"];
const SERVICES: [&str; 8] = ["http", "private", "ftp_data", "smtp", "telnet", "domain_u", "ecr_i", "other"];
const FLAGS: [&str; 4] = ["SF", "S0", "REJ", "RSTR"];
/// Continuous columns, the difficulty column excluded.
const N_CONTINUOUS: usize = 38;
/// Columns on which each attack class departs from normal traffic.
const SHIFTED: usize = 8;

/// Normal, R2L, Probe, DoS, U2R.
const PROFILES: [Profile; 5] = [
    Profile {
        names: &["normal"],
        protocol: [0.8, 0.15, 0.05],
        service: [0.45, 0.05, 0.15, 0.1, 0.02, 0.13, 0.02, 0.08],
        flag: [0.9, 0.03, 0.05, 0.02],
        shift: 0.0,
    },
    Profile {
        names: &["guess_passwd", "warezclient", "ftp_write", "imap"],
        protocol: [0.95, 0.05, 0.0],
        service: [0.15, 0.05, 0.35, 0.1, 0.25, 0.0, 0.0, 0.1],
        flag: [0.8, 0.05, 0.05, 0.1],
        shift: 0.9,
    },
    Profile {
        names: &["satan", "ipsweep", "portsweep", "nmap"],
        protocol: [0.5, 0.15, 0.35],
        service: [0.05, 0.4, 0.02, 0.02, 0.02, 0.04, 0.3, 0.15],
        flag: [0.4, 0.2, 0.3, 0.1],
        shift: 1.4,
    },
    Profile {
        names: &["neptune", "smurf", "back", "teardrop"],
        protocol: [0.7, 0.05, 0.25],
        service: [0.1, 0.5, 0.02, 0.02, 0.03, 0.0, 0.25, 0.08],
        flag: [0.25, 0.6, 0.1, 0.05],
        shift: 1.8,
    },
    Profile {
        names: &["buffer_overflow", "rootkit", "loadmodule"],
        protocol: [1.0, 0.0, 0.0],
        service: [0.05, 0.0, 0.2, 0.05, 0.65, 0.0, 0.0, 0.05],
        flag: [0.95, 0.0, 0.0, 0.05],
        shift: 1.0,
    },
];

/// Official training and test counts divided by five.
const TRAIN_COUNTS: [usize; 5] = [13469, 199, 2331, 9185, 10];
const TEST_COUNTS: [usize; 5] = [1942, 577, 484, 1492, 13];

fn pick<'a>(r: &mut rng::Rng, names: &[&'a str], weights: &[f64]) -> &'a str {
    let total: f64 = weights.iter().sum();
    let mut u = r.random::<f64>() * total;
    for (n, w) in names.iter().zip(weights) {
        if u < *w {
            return n;
        }
        u -= w;
    }
    names[names.len() - 1]
}

/// Per-class column means, fixed independently of the row seed.
fn class_means() -> Vec<Vec<f64>> {
    let mut r = rng::substream(0x6b64, "fixture.nslkdd.profile");
    let normal: Vec<f64> = (0..N_CONTINUOUS).map(|_| StandardNormal.sample(&mut r)).collect();
    PROFILES
        .iter()
        .map(|p| {
            let mut m = normal.clone();
            let mut cols: Vec<usize> = (0..N_CONTINUOUS).collect();
            for k in 0..SHIFTED {
                let j = r.random_range(k..N_CONTINUOUS);
                cols.swap(k, j);
                let d: f64 = StandardNormal.sample(&mut r);
                m[cols[k]] += p.shift * (1.0 + d.abs()) * d.signum();
            }
            m
        })
        .collect()
}

fn write_rows(out: &mut String, class: usize, n: usize, means: &[Vec<f64>], r: &mut rng::Rng) {
    let p = &PROFILES[class];
    for _ in 0..n {
        let label = p.names[r.random_range(0..p.names.len())];
        let cont: Vec<String> = (0..N_CONTINUOUS).map(|j| {
            let z: f64 = StandardNormal.sample(r);
            let x = means[class][j] + z;
            // heavy-tailed byte counts, unit-interval rates, plain values elsewhere
            match j {
                1 | 2 => format!("{:.0}", 50.0 * (1.5 * x).exp()),
                21..=37 => format!("{:.2}", 1.0 / (1.0 + (-x).exp())),
                _ => format!("{:.3}", x),
            }
        }).collect();
        let _ = write!(out, "{}", cont[0]);
        let _ = write!(
            out,
            ",{},{},{}",
            pick(r, &PROTOCOLS, &p.protocol),
            pick(r, &SERVICES, &p.service),
            pick(r, &FLAGS, &p.flag)
        );
        for c in &cont[1..] {
            let _ = write!(out, ",{c}");
        }
        let _ = writeln!(out, ",{label},{}", r.random_range(5..22));
    }
}

/// Headerless train and test tables, rows interleaved across classes.
pub fn surrogate_csv(seed: u64) -> (String, String) {
    let means = class_means();
    let table = |counts: &[usize; 5], name: &str| {
        let mut r = rng::substream(seed, name);
        let chunks: Vec<String> = (0..5)
            .map(|c| {
                let mut s = String::new();
                write_rows(&mut s, c, counts[c], &means, &mut r);
                s
            })
            .collect();
        let mut lines: Vec<&str> = chunks.iter().flat_map(|s| s.lines()).collect();
        lines.shuffle(&mut r);
        let mut out = lines.join("\n");
        out.push('\n');
        out
    };
    (table(&TRAIN_COUNTS, "fixture.nslkdd.train"), table(&TEST_COUNTS, "fixture.nslkdd.test"))
}

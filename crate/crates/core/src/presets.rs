//! Per-dataset bundles: schema, split rule, normal class, augmentation table.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::schema_codec::{DatasetPreset, FeatureSchema, FieldSpec};

#[derive(Clone, Debug, PartialEq)]
pub enum SplitRule {
    /// Separate official train and test files.
    OfficialFiles,
    /// One file, shuffled with a fixed seed and cut at `train_fraction`.
    Shuffle { train_fraction: f64, seed: u64 },
}

#[derive(Clone, Debug)]
pub struct PresetBundle {
    pub preset: DatasetPreset,
    /// `None` when the column set has to come from a user schema file.
    pub schema: Option<FeatureSchema>,
    pub normal_class: &'static str,
    pub split: SplitRule,
    /// Attack classes held out in the leave-one-attack-out runs.
    pub loao_unknown: [&'static str; 2],
    pub label_map: BTreeMap<String, String>,
    pub classes: Vec<String>,
}

const NSL_KDD_FEATURES: [&str; 41] = [
    "duration",
    "protocol_type",
    "service",
    "flag",
    "src_bytes",
    "dst_bytes",
    "land",
    "wrong_fragment",
    "urgent",
    "hot",
    "num_failed_logins",
    "logged_in",
    "num_compromised",
    "root_shell",
    "su_attempted",
    "num_root",
    "num_file_creations",
    "num_shells",
    "num_access_files",
    "num_outbound_cmds",
    "is_host_login",
    "is_guest_login",
    "count",
    "srv_count",
    "serror_rate",
    "srv_serror_rate",
    "rerror_rate",
    "srv_rerror_rate",
    "same_srv_rate",
    "diff_srv_rate",
    "srv_diff_host_rate",
    "dst_host_count",
    "dst_host_srv_count",
    "dst_host_same_srv_rate",
    "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate",
    "dst_host_srv_diff_host_rate",
    "dst_host_serror_rate",
    "dst_host_srv_serror_rate",
    "dst_host_rerror_rate",
    "dst_host_srv_rerror_rate",
];

const NSL_KDD_ATTACKS: [(&str, &[&str]); 4] = [
    (
        "DoS",
        &[
            "back", "land", "neptune", "pod", "smurf", "teardrop", "apache2", "udpstorm",
            "processtable", "mailbomb", "worm",
        ],
    ),
    ("Probe", &["satan", "ipsweep", "nmap", "portsweep", "mscan", "saint"]),
    (
        "R2L",
        &[
            "guess_passwd", "ftp_write", "imap", "phf", "multihop", "warezmaster", "warezclient",
            "spy", "xlock", "xsnoop", "snmpguess", "snmpgetattack", "httptunnel", "sendmail",
            "named",
        ],
    ),
    (
        "U2R",
        &["buffer_overflow", "loadmodule", "rootkit", "perl", "sqlattack", "xterm", "ps"],
    ),
];

const UNSW_FEATURES: [&str; 42] = [
    "dur",
    "proto",
    "service",
    "state",
    "spkts",
    "dpkts",
    "sbytes",
    "dbytes",
    "rate",
    "sttl",
    "dttl",
    "sload",
    "dload",
    "sloss",
    "dloss",
    "sinpkt",
    "dinpkt",
    "sjit",
    "djit",
    "swin",
    "stcpb",
    "dtcpb",
    "dwin",
    "tcprtt",
    "synack",
    "ackdat",
    "smean",
    "dmean",
    "trans_depth",
    "response_body_len",
    "ct_srv_src",
    "ct_state_ttl",
    "ct_dst_ltm",
    "ct_src_dport_ltm",
    "ct_dst_sport_ltm",
    "ct_dst_src_ltm",
    "is_ftp_login",
    "ct_ftp_cmd",
    "ct_flw_http_mthd",
    "ct_src_ltm",
    "ct_srv_dst",
    "is_sm_ips_ports",
];

const CICIDS_LABELS: [(&str, &str); 14] = [
    ("BENIGN", "Benign"),
    ("DoS Hulk", "DoS"),
    ("DoS GoldenEye", "DoS"),
    ("DoS slowloris", "DoS"),
    ("DoS Slowhttptest", "DoS"),
    ("PortScan", "PortScan"),
    ("FTP-Patator", "BruteForce"),
    ("SSH-Patator", "BruteForce"),
    ("Web Attack - Brute Force", "WebAttack"),
    ("Web Attack - XSS", "WebAttack"),
    ("Web Attack - Sql Injection", "WebAttack"),
    ("Web Attack \u{2013} Brute Force", "WebAttack"),
    ("Web Attack \u{2013} XSS", "WebAttack"),
    ("Web Attack \u{2013} Sql Injection", "WebAttack"),
];

fn classes_of(preset: DatasetPreset) -> Vec<String> {
    preset.table().iter().map(|(c, _, _)| c.to_string()).collect()
}

impl PresetBundle {
    pub fn get(preset: DatasetPreset) -> PresetBundle {
        match preset {
            DatasetPreset::NslKdd => {
                let mut fields: Vec<FieldSpec> = NSL_KDD_FEATURES
                    .iter()
                    .map(|&n| match n {
                        "protocol_type" | "service" | "flag" => FieldSpec::discrete(n),
                        _ => FieldSpec::continuous(n),
                    })
                    .collect();
                fields.push(FieldSpec::label("label"));
                let mut label_map: BTreeMap<String, String> = NSL_KDD_ATTACKS
                    .iter()
                    .flat_map(|(cat, names)| names.iter().map(move |n| (n.to_string(), cat.to_string())))
                    .collect();
                label_map.insert("normal".into(), "Normal".into());
                let classes = classes_of(preset);
                let mut schema = FeatureSchema::new(fields).expect("static schema is valid");
                // official KDDTrain+/KDDTest+ files carry no header and a trailing difficulty column
                schema.header = false;
                schema.classes = Some(classes.clone());
                schema.normal_class = Some("Normal".into());
                schema.label_map = label_map.clone();
                PresetBundle {
                    preset,
                    schema: Some(schema),
                    normal_class: "Normal",
                    split: SplitRule::OfficialFiles,
                    loao_unknown: ["Probe", "R2L"],
                    label_map,
                    classes,
                }
            }
            DatasetPreset::UnswNb15 => {
                let mut fields: Vec<FieldSpec> = UNSW_FEATURES
                    .iter()
                    .map(|&n| match n {
                        "proto" | "service" | "state" => FieldSpec::discrete(n),
                        _ => FieldSpec::continuous(n),
                    })
                    .collect();
                fields.push(FieldSpec::label("attack_cat"));
                let classes = classes_of(preset);
                let mut schema = FeatureSchema::new(fields).expect("static schema is valid");
                schema.classes = Some(classes.clone());
                schema.normal_class = Some("Normal".into());
                PresetBundle {
                    preset,
                    schema: Some(schema),
                    normal_class: "Normal",
                    split: SplitRule::OfficialFiles,
                    loao_unknown: ["DoS", "Reconnaissance"],
                    label_map: BTreeMap::new(),
                    classes,
                }
            }
            DatasetPreset::Cicids2017 => PresetBundle {
                preset,
                schema: None,
                normal_class: "Benign",
                split: SplitRule::Shuffle {
                    train_fraction: 0.8,
                    seed: 2017,
                },
                loao_unknown: ["DoS", "PortScan"],
                label_map: CICIDS_LABELS
                    .iter()
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .collect(),
                classes: classes_of(preset),
            },
        }
    }

    /// The schema to use, merging this preset's label rules into a user schema
    /// when one is given. Values the user set explicitly win.
    pub fn resolve_schema(&self, user: Option<FeatureSchema>) -> Result<FeatureSchema> {
        let mut schema = match (user, &self.schema) {
            (Some(s), _) => s,
            (None, Some(s)) => return Ok(s.clone()),
            (None, None) => {
                return Err(Error::Config(format!(
                    "preset {} needs a --schema file listing its columns",
                    self.preset.name()
                )))
            }
        };
        if schema.classes.is_none() {
            schema.classes = Some(self.classes.clone());
        }
        if schema.normal_class.is_none() {
            schema.normal_class = Some(self.normal_class.to_string());
        }
        for (k, v) in &self.label_map {
            schema.label_map.entry(k.clone()).or_insert_with(|| v.clone());
        }
        schema.validate()?;
        Ok(schema)
    }
}

//! Defaults < config file < environment < flags.

use std::path::Path;

use flowsynth::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

pub const SEED_VAR: &str = "FLOWSYNTH_SEED";

/// Overlays a TOML file and then `flags` onto `defaults`. Keys the defaults
/// do not have are rejected.
pub fn resolve<T: Serialize + DeserializeOwned>(defaults: &T, file: Option<&Path>, flags: Map<String, Value>) -> Result<T> {
    let Value::Object(mut merged) = serde_json::to_value(defaults).expect("config serializes") else {
        unreachable!("configs are structs")
    };
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let table: toml::Table =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let Value::Object(values) = serde_json::to_value(table).expect("toml maps to json") else {
            unreachable!()
        };
        overlay(&mut merged, values, &path.display().to_string())?;
    }
    if let Some(seed) = env_seed()? {
        if merged.contains_key("seed") {
            merged.insert("seed".into(), seed.into());
        }
    }
    overlay(&mut merged, flags, "command line")?;
    serde_json::from_value(Value::Object(merged)).map_err(|e| Error::Config(e.to_string()))
}

fn overlay(base: &mut Map<String, Value>, values: Map<String, Value>, origin: &str) -> Result<()> {
    for (k, v) in values {
        if !base.contains_key(&k) {
            return Err(Error::Config(format!("{origin}: unknown setting {k:?}")));
        }
        base.insert(k, v);
    }
    Ok(())
}

pub fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_VAR) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{SEED_VAR}={s:?} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

/// Flag map builder that skips unset options.
#[derive(Default)]
pub struct Flags(pub Map<String, Value>);

impl Flags {
    pub fn set<V: Serialize>(&mut self, key: &str, v: Option<V>) -> &mut Self {
        if let Some(v) = v {
            self.0.insert(key.into(), serde_json::to_value(v).expect("flag serializes"));
        }
        self
    }
}

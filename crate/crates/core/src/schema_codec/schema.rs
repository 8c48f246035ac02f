//! Field declarations and the schema file format.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Discrete,
    Continuous,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldRole {
    #[default]
    Feature,
    Label,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    pub kind: FieldKind,
    #[serde(default)]
    pub role: FieldRole,
}

impl FieldSpec {
    pub fn discrete(name: impl Into<String>) -> Self {
        FieldSpec {
            name: name.into(),
            kind: FieldKind::Discrete,
            role: FieldRole::Feature,
        }
    }

    pub fn continuous(name: impl Into<String>) -> Self {
        FieldSpec {
            name: name.into(),
            kind: FieldKind::Continuous,
            role: FieldRole::Feature,
        }
    }

    pub fn label(name: impl Into<String>) -> Self {
        FieldSpec {
            name: name.into(),
            kind: FieldKind::Discrete,
            role: FieldRole::Label,
        }
    }
}

/// Which columns of a flow table are features, which one is the label, and
/// how raw label strings map onto class names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    #[serde(rename = "field")]
    pub fields: Vec<FieldSpec>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    /// When false, columns are matched to fields by position.
    #[serde(default = "default_true")]
    pub header: bool,
    /// Ordered class list. Rows whose label maps outside it are dropped; when
    /// absent, every label becomes a class in order of first appearance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normal_class: Option<String>,
    /// Raw label (normalized) to class name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub label_map: BTreeMap<String, String>,
    /// Drop rows with unparseable or non-finite numeric cells instead of failing.
    #[serde(default)]
    pub skip_invalid_rows: bool,
}

fn default_delimiter() -> char {
    ','
}

fn default_true() -> bool {
    true
}

/// Case-folded, whitespace-collapsed form used for label matching.
pub fn normalize_label(raw: &str) -> String {
    raw.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

impl FeatureSchema {
    pub fn new(fields: Vec<FieldSpec>) -> Result<Self> {
        let schema = FeatureSchema {
            fields,
            delimiter: ',',
            header: true,
            classes: None,
            normal_class: None,
            label_map: BTreeMap::new(),
            skip_invalid_rows: false,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let schema: FeatureSchema =
            toml::from_str(text).map_err(|e| Error::Schema(format!("cannot parse schema: {e}")))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Schema(format!("cannot read schema {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("schema serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let labels = self.fields.iter().filter(|f| f.role == FieldRole::Label).count();
        if labels != 1 {
            return Err(Error::Schema(format!(
                "exactly one label field required, found {labels}"
            )));
        }
        let mut seen = HashSet::new();
        for f in &self.fields {
            if f.name.trim().is_empty() {
                return Err(Error::Schema("field with empty name".into()));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Schema(format!("duplicate field name {:?}", f.name)));
            }
        }
        if self.features().next().is_none() {
            return Err(Error::Schema("schema declares no feature fields".into()));
        }
        if !self.delimiter.is_ascii() {
            return Err(Error::Schema("delimiter must be a single ASCII character".into()));
        }
        if let Some(classes) = &self.classes {
            let mut seen = HashSet::new();
            for c in classes {
                if !seen.insert(normalize_label(c)) {
                    return Err(Error::Schema(format!("duplicate class {c:?}")));
                }
            }
            if let Some(normal) = &self.normal_class {
                if !classes.iter().any(|c| normalize_label(c) == normalize_label(normal)) {
                    return Err(Error::Schema(format!(
                        "normal class {normal:?} not in class list"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn features(&self) -> impl Iterator<Item = &FieldSpec> {
        self.fields.iter().filter(|f| f.role == FieldRole::Feature)
    }

    pub fn feature_count(&self) -> usize {
        self.features().count()
    }

    pub fn label_field(&self) -> &FieldSpec {
        self.fields
            .iter()
            .find(|f| f.role == FieldRole::Label)
            .expect("validated schema has a label")
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features().map(|f| f.name.clone()).collect()
    }

    /// Maps a raw label to its class name after normalization and `label_map`.
    pub fn canonical_label(&self, raw: &str) -> String {
        let key = normalize_label(raw);
        if let Some(mapped) = self
            .label_map
            .iter()
            .find(|(k, _)| normalize_label(k) == key)
            .map(|(_, v)| v)
        {
            return self.match_class(mapped).unwrap_or_else(|| mapped.clone());
        }
        self.match_class(raw)
            .unwrap_or_else(|| raw.split_whitespace().collect::<Vec<_>>().join(" "))
    }

    fn match_class(&self, name: &str) -> Option<String> {
        let key = normalize_label(name);
        self.classes
            .as_ref()?
            .iter()
            .find(|c| normalize_label(c) == key)
            .cloned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCHEMA: &str = r#"
        delimiter = ","
        normal_class = "Normal"
        classes = ["Normal", "DoS"]

        [[field]]
        name = "proto"
        kind = "discrete"

        [[field]]
        name = "bytes"
        kind = "continuous"

        [[field]]
        name = "label"
        kind = "discrete"
        role = "label"

        [label_map]
        neptune = "DoS"
    "#;

    #[test]
    fn parses_schema_file() {
        let s = FeatureSchema::from_toml_str(SCHEMA).unwrap();
        assert_eq!(s.feature_names(), vec!["proto", "bytes"]);
        assert_eq!(s.label_field().name, "label");
        assert!(s.header);
    }

    #[test]
    fn label_normalization_and_mapping() {
        let s = FeatureSchema::from_toml_str(SCHEMA).unwrap();
        assert_eq!(s.canonical_label("  NEPTUNE "), "DoS");
        assert_eq!(s.canonical_label("normal"), "Normal");
        assert_eq!(s.canonical_label("dos"), "DoS");
        assert_eq!(s.canonical_label("Web   Attack"), "Web Attack");
    }

    #[test]
    fn rejects_two_labels_and_duplicates() {
        let two = FeatureSchema::new(vec![
            FieldSpec::continuous("a"),
            FieldSpec::label("y"),
            FieldSpec::label("z"),
        ]);
        assert!(matches!(two, Err(Error::Schema(_))));
        let dup = FeatureSchema::new(vec![
            FieldSpec::continuous("a"),
            FieldSpec::discrete("a"),
            FieldSpec::label("y"),
        ]);
        assert!(matches!(dup, Err(Error::Schema(_))));
    }

    #[test]
    fn toml_round_trip() {
        let s = FeatureSchema::from_toml_str(SCHEMA).unwrap();
        let again = FeatureSchema::from_toml_str(&s.to_toml_string()).unwrap();
        assert_eq!(s, again);
    }
}

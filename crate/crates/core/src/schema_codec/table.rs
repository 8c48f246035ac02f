//! Raw flow tables as read from delimiter-separated text.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::schema::{normalize_label, FeatureSchema, FieldKind};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Test,
    Other(String),
}

impl SplitTag {
    pub fn as_str(&self) -> &str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Test => "test",
            SplitTag::Other(s) => s,
        }
    }

    pub fn parse(s: &str) -> SplitTag {
        match s {
            "train" => SplitTag::Train,
            "test" => SplitTag::Test,
            other => SplitTag::Other(other.to_string()),
        }
    }
}

impl fmt::Display for SplitTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RawColumn {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl RawColumn {
    pub fn len(&self) -> usize {
        match self {
            RawColumn::Numeric(v) => v.len(),
            RawColumn::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RawCell<'a> {
    Num(f64),
    Cat(&'a str),
}

/// Rows in schema feature order, stored column-wise.
#[derive(Clone, Debug, PartialEq)]
pub struct RawDataset {
    pub feature_names: Vec<String>,
    pub columns: Vec<RawColumn>,
    /// Canonical class name per row.
    pub labels: Vec<String>,
    pub split: SplitTag,
}

impl RawDataset {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn cell(&self, row: usize, feature: usize) -> RawCell<'_> {
        match &self.columns[feature] {
            RawColumn::Numeric(v) => RawCell::Num(v[row]),
            RawColumn::Categorical(v) => RawCell::Cat(&v[row]),
        }
    }

    /// Class names in order of first appearance.
    pub fn distinct_labels(&self) -> Vec<String> {
        let mut seen = std::collections::HashSet::new();
        self.labels
            .iter()
            .filter(|l| seen.insert(l.as_str()))
            .cloned()
            .collect()
    }

    pub fn class_counts(&self) -> std::collections::BTreeMap<String, usize> {
        let mut out = std::collections::BTreeMap::new();
        for l in &self.labels {
            *out.entry(l.clone()).or_insert(0) += 1;
        }
        out
    }

    /// Keeps the rows at `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> RawDataset {
        let columns = self
            .columns
            .iter()
            .map(|c| match c {
                RawColumn::Numeric(v) => RawColumn::Numeric(idx.iter().map(|&i| v[i]).collect()),
                RawColumn::Categorical(v) => {
                    RawColumn::Categorical(idx.iter().map(|&i| v[i].clone()).collect())
                }
            })
            .collect();
        RawDataset {
            feature_names: self.feature_names.clone(),
            columns,
            labels: idx.iter().map(|&i| self.labels[i].clone()).collect(),
            split: self.split.clone(),
        }
    }

    pub fn with_split(mut self, split: SplitTag) -> Self {
        self.split = split;
        self
    }

    /// Writes the table back out with a header row.
    pub fn write_csv<W: std::io::Write>(&self, out: W, label_name: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = self.feature_names.clone();
        header.push(label_name.to_string());
        w.write_record(&header).map_err(csv_io)?;
        for r in 0..self.n_rows() {
            let mut rec: Vec<String> = (0..self.columns.len())
                .map(|c| match self.cell(r, c) {
                    RawCell::Num(x) => format!("{x}"),
                    RawCell::Cat(s) => s.to_string(),
                })
                .collect();
            rec.push(self.labels[r].clone());
            w.write_record(&rec).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Data(format!("csv: {e}"))
}

pub fn load_flow_table(path: &Path, schema: &FeatureSchema, split: SplitTag) -> Result<RawDataset> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    read_flow_table(std::io::BufReader::new(file), schema, split)
}

/// Parses a delimiter-separated flow table against `schema`.
pub fn read_flow_table<R: std::io::Read>(
    input: R,
    schema: &FeatureSchema,
    split: SplitTag,
) -> Result<RawDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .has_headers(schema.header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);

    let features: Vec<_> = schema.features().collect();
    let label = schema.label_field();
    let positions: Vec<usize> = if schema.header {
        let header = reader
            .headers()
            .map_err(|e| Error::Schema(format!("cannot read header: {e}")))?
            .clone();
        let find = |name: &str| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Schema(format!("column {name:?} missing from header")))
        };
        let mut pos = Vec::with_capacity(features.len() + 1);
        for f in &features {
            pos.push(find(&f.name)?);
        }
        pos.push(find(&label.name)?);
        pos
    } else {
        // column i holds field i as declared
        let mut pos: Vec<usize> = (0..schema.fields.len())
            .filter(|&i| schema.fields[i].name != label.name)
            .collect();
        pos.push(
            schema
                .fields
                .iter()
                .position(|f| f.name == label.name)
                .expect("label present"),
        );
        pos
    };
    let needed = positions.iter().copied().max().unwrap_or(0) + 1;

    let mut columns: Vec<RawColumn> = features
        .iter()
        .map(|f| match f.kind {
            FieldKind::Continuous => RawColumn::Numeric(Vec::new()),
            FieldKind::Discrete => RawColumn::Categorical(Vec::new()),
        })
        .collect();
    let mut labels = Vec::new();
    let allowed: Option<Vec<String>> = schema
        .classes
        .as_ref()
        .map(|cs| cs.iter().map(|c| normalize_label(c)).collect());

    let mut record = csv::StringRecord::new();
    let mut row = 0usize;
    loop {
        let more = reader.read_record(&mut record).map_err(|e| Error::Row {
            row,
            msg: format!("{e}"),
        })?;
        if !more {
            break;
        }
        let this_row = row;
        row += 1;
        if record.len() == 1 && record.get(0).is_some_and(str::is_empty) {
            continue;
        }
        if record.len() < needed {
            if schema.skip_invalid_rows {
                continue;
            }
            return Err(Error::Row {
                row: this_row,
                msg: format!("expected at least {needed} cells, found {}", record.len()),
            });
        }
        let class = schema.canonical_label(&record[positions[features.len()]]);
        if let Some(allowed) = &allowed {
            if !allowed.contains(&normalize_label(&class)) {
                continue;
            }
        }
        let mut numeric = Vec::with_capacity(features.len());
        let mut bad = None;
        for (fi, f) in features.iter().enumerate() {
            let cell = &record[positions[fi]];
            if f.kind == FieldKind::Continuous {
                match cell.parse::<f64>() {
                    Ok(x) if x.is_finite() => numeric.push(x),
                    _ => {
                        bad = Some(format!("field {:?}: cannot parse {cell:?} as a finite number", f.name));
                        break;
                    }
                }
            }
        }
        if let Some(msg) = bad {
            if schema.skip_invalid_rows {
                continue;
            }
            return Err(Error::Row { row: this_row, msg });
        }
        let mut num_iter = numeric.into_iter();
        for (fi, col) in columns.iter_mut().enumerate() {
            match col {
                RawColumn::Numeric(v) => v.push(num_iter.next().expect("parsed above")),
                RawColumn::Categorical(v) => v.push(record[positions[fi]].to_string()),
            }
        }
        labels.push(class);
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(RawDataset {
        feature_names: features.iter().map(|f| f.name.clone()).collect(),
        columns,
        labels,
        split,
    })
}

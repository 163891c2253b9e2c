//! Feature tables, feature-name normalization, holdout splitting and dataset manifests.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::flow::records::{IDENTITY_COLUMNS, LABEL_COLUMN};
use crate::flow::{Feature, FEATURE_COUNT};
use crate::labeling::{binary_class, LabeledRow, DEFAULT_LABEL};

/// Renders a real with at most 6 fractional digits and no trailing zeros.
pub fn format_real(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let s = format!("{x:.6}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s.as_str()
    };
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// Short-name spellings used by newer CICFlowMeter releases and the
/// CICIDS2017 CSVs, mapped to the long canonical names.
const ALIASES: &[(&str, &str)] = &[
    ("Src IP", "Source IP"),
    ("Src Port", "Source Port"),
    ("Dst IP", "Destination IP"),
    ("Dst Port", "Destination Port"),
    ("Tot Fwd Pkts", "Total Fwd Packets"),
    ("Total Fwd Packet", "Total Fwd Packets"),
    ("Tot Bwd Pkts", "Total Backward Packets"),
    ("Total Bwd packets", "Total Backward Packets"),
    ("TotLen Fwd Pkts", "Total Length of Fwd Packets"),
    ("Total Length of Fwd Packet", "Total Length of Fwd Packets"),
    ("TotLen Bwd Pkts", "Total Length of Bwd Packets"),
    ("Total Length of Bwd Packet", "Total Length of Bwd Packets"),
    ("Fwd Pkt Len Max", "Fwd Packet Length Max"),
    ("Fwd Pkt Len Min", "Fwd Packet Length Min"),
    ("Fwd Pkt Len Mean", "Fwd Packet Length Mean"),
    ("Fwd Pkt Len Std", "Fwd Packet Length Std"),
    ("Bwd Pkt Len Max", "Bwd Packet Length Max"),
    ("Bwd Pkt Len Min", "Bwd Packet Length Min"),
    ("Bwd Pkt Len Mean", "Bwd Packet Length Mean"),
    ("Bwd Pkt Len Std", "Bwd Packet Length Std"),
    ("Flow Byts/s", "Flow Bytes/s"),
    ("Flow Pkts/s", "Flow Packets/s"),
    ("Fwd IAT Tot", "Fwd IAT Total"),
    ("Bwd IAT Tot", "Bwd IAT Total"),
    ("Fwd Header Len", "Fwd Header Length"),
    ("Bwd Header Len", "Bwd Header Length"),
    ("Fwd Pkts/s", "Fwd Packets/s"),
    ("Bwd Pkts/s", "Bwd Packets/s"),
    ("Pkt Len Min", "Min Packet Length"),
    ("Packet Length Min", "Min Packet Length"),
    ("Pkt Len Max", "Max Packet Length"),
    ("Packet Length Max", "Max Packet Length"),
    ("Pkt Len Mean", "Packet Length Mean"),
    ("Pkt Len Std", "Packet Length Std"),
    ("Pkt Len Var", "Packet Length Variance"),
    ("FIN Flag Cnt", "FIN Flag Count"),
    ("SYN Flag Cnt", "SYN Flag Count"),
    ("RST Flag Cnt", "RST Flag Count"),
    ("PSH Flag Cnt", "PSH Flag Count"),
    ("ACK Flag Cnt", "ACK Flag Count"),
    ("URG Flag Cnt", "URG Flag Count"),
    ("CWE Flag Count", "CWR Flag Count"),
    ("CWE Flag Cnt", "CWR Flag Count"),
    ("CWR Flag Cnt", "CWR Flag Count"),
    ("ECE Flag Cnt", "ECE Flag Count"),
    ("Pkt Size Avg", "Average Packet Size"),
    ("Fwd Seg Size Avg", "Avg Fwd Segment Size"),
    ("Fwd Segment Size Avg", "Avg Fwd Segment Size"),
    ("Bwd Seg Size Avg", "Avg Bwd Segment Size"),
    ("Bwd Segment Size Avg", "Avg Bwd Segment Size"),
    ("Init Fwd Win Byts", "Init Fwd Win Bytes"),
    ("Init_Win_bytes_forward", "Init Fwd Win Bytes"),
    ("FWD Init Win Bytes", "Init Fwd Win Bytes"),
    ("Init Bwd Win Byts", "Init Bwd Win Bytes"),
    ("Init_Win_bytes_backward", "Init Bwd Win Bytes"),
    ("Bwd Init Win Bytes", "Init Bwd Win Bytes"),
];

/// Alias → canonical feature name. Lookups ignore case and repeated whitespace.
#[derive(Debug, Clone)]
pub struct NameAliasMap {
    map: HashMap<String, String>,
}

fn fold(name: &str) -> String {
    name.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

impl NameAliasMap {
    /// Canonical feature, identity and label names plus the built-in aliases.
    pub fn standard() -> Self {
        let mut m = NameAliasMap {
            map: HashMap::new(),
        };
        let canonical = Feature::ALL
            .iter()
            .map(|f| f.name())
            .chain(IDENTITY_COLUMNS)
            .chain([LABEL_COLUMN]);
        for c in canonical {
            m.map.insert(fold(c), c.to_string());
        }
        for (alias, canon) in ALIASES {
            m.insert(alias, canon);
        }
        m
    }

    pub fn insert(&mut self, alias: &str, canonical: &str) {
        self.map.insert(fold(alias), canonical.to_string());
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.map.get(&fold(name)).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.map.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

impl Default for NameAliasMap {
    fn default() -> Self {
        NameAliasMap::standard()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Normalized {
    pub name: String,
    /// False when the name was not recognized and was passed through.
    pub known: bool,
}

pub fn normalize_feature_name(name: &str, map: &NameAliasMap) -> Normalized {
    match map.get(name) {
        Some(canon) => Normalized {
            name: canon.to_string(),
            known: true,
        },
        None => Normalized {
            name: name.to_string(),
            known: false,
        },
    }
}

/// Numeric feature matrix with optional binary labels (1 = attack).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Option<Vec<u8>>,
}

impl FeatureTable {
    pub fn new(columns: Vec<String>, rows: Vec<Vec<f64>>, labels: Option<Vec<u8>>) -> Result<Self> {
        if let Some((i, _)) = rows.iter().enumerate().find(|(_, r)| r.len() != columns.len()) {
            return Err(Error::validation(format!(
                "row {i} has {} values, expected {}",
                rows[i].len(),
                columns.len()
            )));
        }
        if let Some(l) = &labels {
            if l.len() != rows.len() {
                return Err(Error::validation("label count does not match row count"));
            }
            if l.iter().any(|&y| y > 1) {
                return Err(Error::validation("labels must be 0 or 1"));
            }
        }
        Ok(FeatureTable {
            columns,
            rows,
            labels,
        })
    }

    /// Model matrix of labeled flows: the 65 features, identity columns excluded.
    pub fn from_labeled(rows: &[LabeledRow], negative_label: &str) -> Self {
        FeatureTable {
            columns: Feature::ALL.iter().map(|f| f.name().to_string()).collect(),
            rows: rows.iter().map(|r| r.features.values.to_vec()).collect(),
            labels: Some(
                rows.iter()
                    .map(|r| binary_class(&r.label, negative_label))
                    .collect(),
            ),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    pub fn labels(&self) -> Result<&[u8]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::validation("table has no labels"))
    }

    /// Projects onto the named columns, in the given order.
    pub fn select(&self, names: &[String]) -> Result<FeatureTable> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| Error::validation(format!("no column named `{n}`")))
            })
            .collect::<Result<_>>()?;
        Ok(FeatureTable {
            columns: names.to_vec(),
            rows: self
                .rows
                .iter()
                .map(|r| idx.iter().map(|&j| r[j]).collect())
                .collect(),
            labels: self.labels.clone(),
        })
    }

    pub fn take_rows(&self, idx: &[usize]) -> FeatureTable {
        FeatureTable {
            columns: self.columns.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| idx.iter().map(|&i| l[i]).collect()),
        }
    }
}

pub fn read_feature_csv(path: impl AsRef<Path>, negative_label: &str) -> Result<FeatureTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_feature_table(BufReader::new(file), negative_label)
}

/// Reads a feature CSV. Headers are normalized; identity columns are
/// dropped; a `Label` column becomes binary labels (`0`/`1` taken as-is,
/// otherwise 0 iff it equals `negative_label`).
pub fn read_feature_table<R: Read>(input: R, negative_label: &str) -> Result<FeatureTable> {
    let aliases = NameAliasMap::standard();
    let mut r = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let raw_headers: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut feature_cols = Vec::new();
    let mut columns = Vec::new();
    let mut label_col = None;
    for (j, h) in raw_headers.iter().enumerate() {
        let n = normalize_feature_name(h, &aliases);
        if !n.known {
            warn!("unrecognized feature column `{h}` kept as-is");
        }
        if n.name == LABEL_COLUMN {
            label_col = Some(j);
        } else if !IDENTITY_COLUMNS.contains(&n.name.as_str()) {
            if columns.contains(&n.name) {
                warn!("duplicate column `{}` ignored", n.name);
                continue;
            }
            feature_cols.push(j);
            columns.push(n.name);
        }
    }

    let mut rows = Vec::new();
    let mut labels = label_col.map(|_| Vec::new());
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(i as u64 + 2);
        if rec.len() != raw_headers.len() {
            return Err(Error::Row {
                line,
                message: format!(
                    "ragged row: {} cells, header has {}",
                    rec.len(),
                    raw_headers.len()
                ),
            });
        }
        let mut row = Vec::with_capacity(feature_cols.len());
        for (&j, name) in feature_cols.iter().zip(&columns) {
            let cell = rec[j].trim();
            let v: f64 = cell.parse().map_err(|_| Error::Row {
                line,
                message: format!("column `{name}`: non-numeric value `{cell}`"),
            })?;
            row.push(v);
        }
        rows.push(row);
        if let (Some(c), Some(labels)) = (label_col, labels.as_mut()) {
            let cell = rec[c].trim();
            labels.push(match cell {
                "0" => 0,
                "1" => 1,
                other => binary_class(other, negative_label),
            });
        }
    }
    FeatureTable::new(columns, rows, labels)
}

pub fn write_feature_table<W: Write>(out: W, table: &FeatureTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = table.columns.iter().map(String::as_str).collect();
    if table.labels.is_some() {
        header.push(LABEL_COLUMN);
    }
    w.write_record(&header)?;
    for (i, row) in table.rows.iter().enumerate() {
        let mut cells: Vec<String> = row.iter().map(|x| format_real(*x)).collect();
        if let Some(l) = &table.labels {
            cells.push(l[i].to_string());
        }
        w.write_record(&cells)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_feature_csv(table: &FeatureTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_feature_table(BufWriter::new(file), table)
}

/// Indices of a seeded holdout split: `round(ratio * n)` training rows, the
/// rest for testing, each list ascending.
pub fn split_indices(n: usize, ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    check_split(n, ratio)?;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (ratio * n as f64).round() as usize;
    let mut train = perm[..n_train].to_vec();
    let mut test = perm[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

fn check_split(n: usize, ratio: f64) -> Result<()> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::validation(format!("split ratio {ratio} outside (0, 1)")));
    }
    if n < 2 {
        return Err(Error::validation("need at least 2 rows to split"));
    }
    Ok(())
}

/// Per-class variant of [`split_indices`]; each class contributes
/// `round(ratio * n_class)` training rows.
pub fn stratified_split_indices(labels: &[u8], ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    check_split(labels.len(), ratio)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let k = (ratio * idx.len() as f64).round() as usize;
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn train_test_split(table: &FeatureTable, ratio: f64, seed: u64) -> Result<(FeatureTable, FeatureTable)> {
    table.labels()?;
    let (train, test) = split_indices(table.n_rows(), ratio, seed)?;
    Ok((table.take_rows(&train), table.take_rows(&test)))
}

pub fn train_test_split_stratified(
    table: &FeatureTable,
    ratio: f64,
    seed: u64,
) -> Result<(FeatureTable, FeatureTable)> {
    let (train, test) = stratified_split_indices(table.labels()?, ratio, seed)?;
    Ok((table.take_rows(&train), table.take_rows(&test)))
}

/// Where one dataset's inputs live.
///
/// Plain-text `key = value` file; `#` starts a comment. Keys:
/// `name`, `captures` (comma-separated, may repeat), `rules`,
/// `default_label` (default `Normal`), `notes`, and `labeled` (an already
/// labeled feature CSV, which skips extraction and labeling). Relative paths
/// resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub name: String,
    pub captures: Vec<PathBuf>,
    pub rules: Option<PathBuf>,
    pub default_label: String,
    pub notes: String,
    pub labeled: Option<PathBuf>,
}

impl DatasetManifest {
    pub fn new(name: &str) -> Self {
        DatasetManifest {
            name: name.to_string(),
            captures: Vec::new(),
            rules: None,
            default_label: DEFAULT_LABEL.to_string(),
            notes: String::new(),
            labeled: None,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut name = None;
        let mut m = DatasetManifest::new("");
        let resolve = |p: &str| {
            let p = Path::new(p.trim());
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Row {
                line: i as u64 + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let value = value.trim();
            match key.trim() {
                "name" => name = Some(value.to_string()),
                "captures" => m.captures.extend(
                    value
                        .split(',')
                        .filter(|s| !s.trim().is_empty())
                        .map(resolve),
                ),
                "rules" => m.rules = Some(resolve(value)),
                "default_label" => m.default_label = value.to_string(),
                "notes" => m.notes = value.to_string(),
                "labeled" => m.labeled = Some(resolve(value)),
                other => {
                    return Err(Error::Row {
                        line: i as u64 + 1,
                        message: format!("unknown manifest key `{other}`"),
                    })
                }
            }
        }
        m.name = name.ok_or_else(|| Error::Schema("name".into()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::validation("manifest name is empty"));
        }
        if self.captures.is_empty() && self.labeled.is_none() {
            return Err(Error::validation(format!(
                "manifest `{}` lists neither captures nor a labeled CSV",
                self.name
            )));
        }
        if self.default_label.is_empty() {
            return Err(Error::validation("default_label is empty"));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("name = {}\n", self.name);
        for c in &self.captures {
            s.push_str(&format!("captures = {}\n", c.display()));
        }
        if let Some(r) = &self.rules {
            s.push_str(&format!("rules = {}\n", r.display()));
        }
        if let Some(l) = &self.labeled {
            s.push_str(&format!("labeled = {}\n", l.display()));
        }
        s.push_str(&format!("default_label = {}\n", self.default_label));
        if !self.notes.is_empty() {
            s.push_str(&format!("notes = {}\n", self.notes));
        }
        s
    }
}

const _: () = assert!(FEATURE_COUNT == 65);

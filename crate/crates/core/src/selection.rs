//! Per-dataset feature ranking by logistic-regression coefficient magnitude,
//! and the cross-dataset frequency count that yields the universal set.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::classifiers::{LogisticParams, LogisticRegression};
use crate::dataset::{format_real, normalize_feature_name, FeatureTable, NameAliasMap};
use crate::error::{Error, Result};
use crate::scaling::StandardizationParams;

pub const DEFAULT_TOP_K: usize = 10;
pub const DEFAULT_THRESHOLD: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct RankedFeature {
    pub name: String,
    /// |coefficient| on standardized inputs.
    pub score: f64,
}

/// Top-k features of one dataset, most significant first.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedFeatureList {
    pub dataset: String,
    pub entries: Vec<RankedFeature>,
}

impl RankedFeatureList {
    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.name.clone()).collect()
    }

    /// A list with no scores attached, e.g. transcribed from a report.
    pub fn from_names(dataset: &str, names: &[&str]) -> Self {
        RankedFeatureList {
            dataset: dataset.to_string(),
            entries: names
                .iter()
                .map(|n| RankedFeature {
                    name: n.to_string(),
                    score: 0.0,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniversalMember {
    pub name: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniversalFeatureSet {
    /// Ordered by count descending, then name ascending.
    pub members: Vec<UniversalMember>,
    pub threshold: usize,
}

impl UniversalFeatureSet {
    pub fn names(&self) -> Vec<String> {
        self.members.iter().map(|m| m.name.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Fits LR on an already standardized table and keeps the `k` features with
/// the largest |w|. Ties go to the alphabetically smaller name. Constant
/// columns are dropped before fitting.
pub fn rank_features_lr(
    dataset: &str,
    table: &FeatureTable,
    k: usize,
    hyper: &LogisticParams,
) -> Result<RankedFeatureList> {
    let labels = table.labels()?;
    if !(labels.contains(&0) && labels.contains(&1)) {
        return Err(Error::validation(format!(
            "dataset `{dataset}` has a single class; cannot rank features"
        )));
    }
    let scaler = StandardizationParams::fit(&table.rows)?;
    let keep: Vec<String> = table
        .columns
        .iter()
        .zip(&scaler.constant)
        .filter(|(_, &c)| !c)
        .map(|(n, _)| n.clone())
        .collect();
    if k == 0 || k > keep.len() {
        return Err(Error::validation(format!(
            "top-k of {k} requested but `{dataset}` has {} non-constant features",
            keep.len()
        )));
    }
    let sub = table.select(&keep)?;
    let model = LogisticRegression::fit(hyper, &sub.rows, labels)?;
    let mut entries: Vec<RankedFeature> = keep
        .into_iter()
        .zip(&model.weights)
        .map(|(name, w)| RankedFeature { name, score: w.abs() })
        .collect();
    entries.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.name.cmp(&b.name)));
    entries.truncate(k);
    Ok(RankedFeatureList {
        dataset: dataset.to_string(),
        entries,
    })
}

/// Counts how many lists select each feature (after alias normalization)
/// and keeps those selected at least `threshold` times.
pub fn derive_universal_set(
    lists: &[RankedFeatureList],
    map: &NameAliasMap,
    threshold: usize,
) -> Result<UniversalFeatureSet> {
    if threshold < 1 {
        return Err(Error::validation("threshold must be at least 1"));
    }
    if lists.len() < 2 {
        return Err(Error::validation(format!(
            "need at least 2 ranked lists, got {}",
            lists.len()
        )));
    }
    if let Some(l) = lists.iter().find(|l| l.entries.is_empty()) {
        return Err(Error::validation(format!("ranked list `{}` is empty", l.dataset)));
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for list in lists {
        let mut seen: Vec<String> = list
            .entries
            .iter()
            .map(|e| normalize_feature_name(&e.name, map).name)
            .collect();
        seen.sort();
        seen.dedup();
        for name in seen {
            *counts.entry(name).or_default() += 1;
        }
    }
    let mut members: Vec<UniversalMember> = counts
        .into_iter()
        .filter(|(_, c)| *c >= threshold)
        .map(|(name, count)| UniversalMember { name, count })
        .collect();
    members.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.name.cmp(&b.name)));
    Ok(UniversalFeatureSet { members, threshold })
}

pub fn write_ranking<W: Write>(out: W, list: &RankedFeatureList) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["name", "score"])?;
    for e in &list.entries {
        w.write_record([e.name.as_str(), &format_real(e.score)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_ranking_file(path: impl AsRef<Path>, list: &RankedFeatureList) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_ranking(file, list)
}

fn read_pairs<R: Read>(input: R, value_col: &str) -> Result<Vec<(String, String)>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = r.headers()?.clone();
    let ni = headers
        .iter()
        .position(|h| h == "name")
        .ok_or_else(|| Error::Schema("name".into()))?;
    let vi = headers
        .iter()
        .position(|h| h == value_col)
        .ok_or_else(|| Error::Schema(value_col.into()))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let get = |i: usize| {
            rec.get(i).map(str::to_string).ok_or_else(|| Error::Row {
                line,
                message: "short row".into(),
            })
        };
        out.push((get(ni)?, get(vi)?));
    }
    Ok(out)
}

pub fn read_ranking<R: Read>(dataset: &str, input: R) -> Result<RankedFeatureList> {
    let entries = read_pairs(input, "score")?
        .into_iter()
        .enumerate()
        .map(|(i, (name, s))| {
            let score = s.parse().map_err(|_| Error::Row {
                line: i as u64 + 2,
                message: format!("bad score `{s}`"),
            })?;
            Ok(RankedFeature { name, score })
        })
        .collect::<Result<_>>()?;
    Ok(RankedFeatureList {
        dataset: dataset.to_string(),
        entries,
    })
}

/// Reads a ranking CSV; the dataset name is the file stem.
pub fn read_ranking_file(path: impl AsRef<Path>) -> Result<RankedFeatureList> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
    read_ranking(stem, file)
}

pub fn write_universal<W: Write>(out: W, set: &UniversalFeatureSet) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["name", "count"])?;
    for m in &set.members {
        w.write_record([m.name.as_str(), &m.count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_universal_file(path: impl AsRef<Path>, set: &UniversalFeatureSet) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_universal(file, set)
}

/// Reads a universal-set CSV. The threshold is not stored, so it is taken as
/// the smallest count present.
pub fn read_universal<R: Read>(input: R) -> Result<UniversalFeatureSet> {
    let members: Vec<UniversalMember> = read_pairs(input, "count")?
        .into_iter()
        .enumerate()
        .map(|(i, (name, c))| {
            let count = c.parse().map_err(|_| Error::Row {
                line: i as u64 + 2,
                message: format!("bad count `{c}`"),
            })?;
            Ok(UniversalMember { name, count })
        })
        .collect::<Result<_>>()?;
    let threshold = members.iter().map(|m| m.count).min().unwrap_or(1);
    Ok(UniversalFeatureSet { members, threshold })
}

pub fn read_universal_file(path: impl AsRef<Path>) -> Result<UniversalFeatureSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_universal(file)
}

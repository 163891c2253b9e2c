//! End-to-end run: extract, label, rank, derive the universal set, train
//! and evaluate, with every intermediate artifact written to disk.
//!
//! Layout under `out_dir`:
//!
//! ```text
//! features/<dataset>.csv        one row per flow
//! labeled/<dataset>.csv         the same rows plus a Label column
//! ranking/<dataset>.csv         top-k features (name,score)
//! universal.csv                 universal features set (name,count)
//! models/<dataset>_<KIND>.json  trained classifiers
//! report.csv, report.txt        metrics per dataset and classifier
//! ```
//!
//! A failing stage leaves what was already written in place and adds a
//! `FAILED` file naming the stage.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Deserialize;

use crate::classifiers::{self, LogisticParams, Model, ModelFile, ModelKind, ModelSpec};
use crate::dataset::{
    read_feature_csv, split_indices, stratified_split_indices, DatasetManifest, FeatureTable, NameAliasMap,
};
use crate::error::{Error, Result};
use crate::evaluation::{compute_metrics, confusion, write_report_file, MetricsReport, ReportFormat};
use crate::flow::records::write_flows_file;
use crate::flow::{ingest_capture, FeatureVector, MeterConfig};
use crate::labeling::{label_flows, parse_rules_file, write_rules, LabeledRow, MatchReport, RuleSet};
use crate::scaling::standardize;
use crate::selection::{
    derive_universal_set, rank_features_lr, write_ranking_file, write_universal_file, RankedFeatureList,
    UniversalFeatureSet, UniversalMember, DEFAULT_THRESHOLD, DEFAULT_TOP_K,
};
use crate::synth::{generate_synthetic_capture, scenario_dataset, Scenario};

pub const FAILURE_MARKER: &str = "FAILED";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Extract,
    Label,
    Rank,
    Universal,
    Train,
    Evaluate,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Extract => "extract",
            Stage::Label => "label",
            Stage::Rank => "rank",
            Stage::Universal => "universal",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("stage `{stage}` failed: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, PipelineError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, PipelineError> {
        self.map_err(|source| PipelineError { stage, source })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Training share of the holdout split.
    pub ratio: f64,
    pub stratified: bool,
    pub meter: MeterConfig,
    pub top_k: usize,
    pub threshold: usize,
    /// Classifiers to train, in any order; the report is always NB, KNN, RF, LR.
    pub models: Vec<ModelSpec>,
    pub datasets: Vec<DatasetManifest>,
}

impl PipelineConfig {
    pub fn new(out_dir: impl Into<PathBuf>, datasets: Vec<DatasetManifest>, seed: u64) -> Self {
        PipelineConfig {
            out_dir: out_dir.into(),
            seed,
            ratio: 0.8,
            stratified: false,
            meter: MeterConfig::default(),
            top_k: DEFAULT_TOP_K,
            threshold: DEFAULT_THRESHOLD,
            models: ModelKind::ALL
                .into_iter()
                .map(|k| ModelSpec::default_for(k, seed))
                .collect(),
            datasets,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::Config("no datasets configured".into()));
        }
        let mut names: Vec<&str> = self.datasets.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("dataset name `{}` used twice", w[0])));
        }
        for d in &self.datasets {
            d.validate()?;
            if d.name.contains(['/', '\\']) {
                return Err(Error::Config(format!("dataset name `{}` contains a path separator", d.name)));
            }
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::Config(format!("ratio {} outside (0, 1)", self.ratio)));
        }
        if self.top_k == 0 {
            return Err(Error::Config("top_k must be at least 1".into()));
        }
        if self.threshold == 0 {
            return Err(Error::Config("threshold must be at least 1".into()));
        }
        if self.models.is_empty() {
            return Err(Error::Config("no classifiers configured".into()));
        }
        for m in &self.models {
            m.validate()?;
        }
        self.meter.validate()
    }

    /// LR settings used for ranking: the configured LR model if any.
    pub fn ranking_params(&self) -> LogisticParams {
        self.models
            .iter()
            .find_map(|m| match m {
                ModelSpec::LR(p) => Some(p.clone()),
                _ => None,
            })
            .unwrap_or_else(|| LogisticParams {
                seed: self.seed,
                ..Default::default()
            })
    }

    /// Overrides the seed everywhere it is used.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        for m in &mut self.models {
            match m {
                ModelSpec::RF(p) => p.seed = seed,
                ModelSpec::LR(p) => p.seed = seed,
                _ => {}
            }
        }
    }

    /// Reads a TOML config. Relative paths resolve against the file's directory.
    ///
    /// ```toml
    /// out_dir = "run"
    /// seed = 7
    /// ratio = 0.8
    /// manifests = ["ddos.manifest"]
    ///
    /// [meter]
    /// flow_timeout_s = 120
    /// activity_timeout_s = 5
    ///
    /// [selection]
    /// top_k = 10
    /// threshold = 2
    ///
    /// [models]
    /// kinds = ["NB", "KNN", "RF", "LR"]
    /// RF = { n_trees = 50 }
    ///
    /// [[dataset]]
    /// name = "botnet"
    /// captures = ["botnet.pcap"]
    /// rules = "botnet.rules.csv"
    /// ```
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        let seed = raw.seed.unwrap_or(0);
        let mut datasets = Vec::new();
        for m in &raw.manifests {
            datasets.push(DatasetManifest::load(resolve(m))?);
        }
        for d in raw.dataset {
            let mut m = DatasetManifest::new(&d.name);
            m.captures = d.captures.iter().map(|p| resolve(p)).collect();
            m.rules = d.rules.as_deref().map(resolve);
            m.labeled = d.labeled.as_deref().map(resolve);
            if let Some(l) = d.default_label {
                m.default_label = l;
            }
            m.notes = d.notes.unwrap_or_default();
            datasets.push(m);
        }
        let mut cfg = PipelineConfig::new(
            resolve(raw.out_dir.as_deref().unwrap_or(Path::new("botflow-out"))),
            datasets,
            seed,
        );
        if let Some(r) = raw.ratio {
            cfg.ratio = r;
        }
        cfg.stratified = raw.stratified;
        let mut meter = MeterConfig::default();
        if let Some(t) = raw.meter.flow_timeout_s {
            meter.flow_timeout_us = seconds_to_us(t)?;
        }
        if let Some(t) = raw.meter.activity_timeout_s {
            meter.activity_timeout_us = seconds_to_us(t)?;
        }
        if let Some(p) = raw.meter.home_prefixes {
            meter.home_prefixes = p
                .iter()
                .map(|s| s.parse().map_err(|_| Error::Config(format!("bad prefix `{s}`"))))
                .collect::<Result<_>>()?;
        }
        cfg.meter = meter;
        if let Some(k) = raw.selection.top_k {
            cfg.top_k = k;
        }
        if let Some(t) = raw.selection.threshold {
            cfg.threshold = t;
        }
        let kinds = match &raw.models.kinds {
            Some(ks) => ks.iter().map(|k| k.parse()).collect::<Result<Vec<ModelKind>>>()?,
            None => ModelKind::ALL.to_vec(),
        };
        cfg.models = kinds
            .into_iter()
            .map(|k| raw.models.spec(k, seed))
            .collect::<Result<_>>()?;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn seconds_to_us(s: f64) -> Result<i64> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::Config(format!("timeout {s} s must be positive")));
    }
    Ok((s * 1e6).round() as i64)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    out_dir: Option<PathBuf>,
    seed: Option<u64>,
    ratio: Option<f64>,
    #[serde(default)]
    stratified: bool,
    #[serde(default)]
    manifests: Vec<PathBuf>,
    #[serde(default)]
    meter: RawMeter,
    #[serde(default)]
    selection: RawSelection,
    #[serde(default)]
    models: RawModels,
    #[serde(default)]
    dataset: Vec<RawDataset>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeter {
    flow_timeout_s: Option<f64>,
    activity_timeout_s: Option<f64>,
    home_prefixes: Option<Vec<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSelection {
    top_k: Option<usize>,
    threshold: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModels {
    kinds: Option<Vec<String>>,
    #[serde(rename = "NB")]
    nb: Option<toml::Value>,
    #[serde(rename = "KNN")]
    knn: Option<toml::Value>,
    #[serde(rename = "RF")]
    rf: Option<toml::Value>,
    #[serde(rename = "LR")]
    lr: Option<toml::Value>,
}

impl RawModels {
    fn spec(&self, kind: ModelKind, seed: u64) -> Result<ModelSpec> {
        let table = match kind {
            ModelKind::NB => &self.nb,
            ModelKind::KNN => &self.knn,
            ModelKind::RF => &self.rf,
            ModelKind::LR => &self.lr,
        };
        let Some(v) = table else {
            return Ok(ModelSpec::default_for(kind, seed));
        };
        let bad = |e: toml::de::Error| Error::Config(format!("[models.{kind}]: {e}"));
        let mut v = v.clone();
        // the run seed applies unless the table sets its own
        if matches!(kind, ModelKind::RF | ModelKind::LR) {
            if let toml::Value::Table(t) = &mut v {
                t.entry("seed").or_insert(toml::Value::Integer(seed as i64));
            }
        }
        Ok(match kind {
            ModelKind::NB => ModelSpec::NB(v.try_into().map_err(bad)?),
            ModelKind::KNN => ModelSpec::KNN(v.try_into().map_err(bad)?),
            ModelKind::RF => ModelSpec::RF(v.try_into().map_err(bad)?),
            ModelKind::LR => ModelSpec::LR(v.try_into().map_err(bad)?),
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    name: String,
    #[serde(default)]
    captures: Vec<PathBuf>,
    rules: Option<PathBuf>,
    labeled: Option<PathBuf>,
    default_label: Option<String>,
    notes: Option<String>,
}

/// Extracts flows from every capture of a dataset, in listed order.
pub fn extract_dataset(manifest: &DatasetManifest, meter: &MeterConfig) -> Result<Vec<FeatureVector>> {
    let mut flows = Vec::new();
    for capture in &manifest.captures {
        let ex = ingest_capture(capture, meter)?;
        info!(
            "{}: {} frames, {} packets, {} skipped, {} flows",
            capture.display(),
            ex.stats.frames,
            ex.stats.packets,
            ex.stats.skipped(),
            ex.stats.flows
        );
        flows.extend(ex.flows);
    }
    Ok(flows)
}

/// Labels flows with the dataset's rule file (all flows get the default
/// label when there is none).
pub fn label_dataset(manifest: &DatasetManifest, flows: &[FeatureVector]) -> Result<(Vec<LabeledRow>, MatchReport)> {
    let rules = match &manifest.rules {
        Some(p) => parse_rules_file(p)?,
        None => {
            warn!("dataset `{}` has no rules file", manifest.name);
            Vec::new()
        }
    };
    Ok(label_flows(flows, &RuleSet::new(rules), &manifest.default_label))
}

/// Standardizes a labeled table and ranks its features, clamping `k` to the
/// number of non-constant columns.
pub fn rank_table(dataset: &str, table: &FeatureTable, top_k: usize, hyper: &LogisticParams) -> Result<RankedFeatureList> {
    let (std_table, params) = standardize(table)?;
    let usable = params.constant.iter().filter(|c| !**c).count();
    let k = top_k.min(usable);
    if k < top_k {
        warn!("dataset `{dataset}` has only {usable} non-constant features; ranking {k}");
    }
    rank_features_lr(dataset, &std_table, k, hyper)
}

/// Universal set over all lists; a single dataset keeps its own ranking.
pub fn universal_from_lists(lists: &[RankedFeatureList], threshold: usize) -> Result<UniversalFeatureSet> {
    let map = NameAliasMap::standard();
    if let [only] = lists {
        warn!("one dataset only; its ranked features are used as the universal set");
        return Ok(UniversalFeatureSet {
            members: only
                .entries
                .iter()
                .map(|e| UniversalMember {
                    name: crate::dataset::normalize_feature_name(&e.name, &map).name,
                    count: 1,
                })
                .collect(),
            threshold: 1,
        });
    }
    let set = derive_universal_set(lists, &map, threshold)?;
    if set.is_empty() {
        return Err(Error::validation(format!(
            "no feature was selected by at least {threshold} datasets"
        )));
    }
    Ok(set)
}

/// Holdout split of a labeled table.
pub fn split_table(table: &FeatureTable, ratio: f64, seed: u64, stratified: bool) -> Result<(FeatureTable, FeatureTable)> {
    let labels = table.labels()?;
    let (train, test) = if stratified {
        stratified_split_indices(labels, ratio, seed)?
    } else {
        split_indices(labels.len(), ratio, seed)?
    };
    Ok((table.take_rows(&train), table.take_rows(&test)))
}

pub fn train_models(train: &FeatureTable, specs: &[ModelSpec]) -> Result<Vec<Model>> {
    let y = train.labels()?;
    specs.iter().map(|s| classifiers::fit(s, &train.rows, y)).collect()
}

pub fn evaluate_model(dataset: &str, model: &Model, test: &FeatureTable) -> Result<MetricsReport> {
    let pred = model.predict(&test.rows)?;
    let cm = confusion(test.labels()?, &pred)?;
    compute_metrics(dataset, model.kind(), cm)
}

/// Paths of a finished run.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub universal: UniversalFeatureSet,
    pub rankings: Vec<RankedFeatureList>,
    pub reports: Vec<MetricsReport>,
    pub report_csv: PathBuf,
}

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

pub fn run_pipeline(config: &PipelineConfig) -> std::result::Result<PipelineOutcome, PipelineError> {
    let out = &config.out_dir;
    let result = run_stages(config);
    let marker = out.join(FAILURE_MARKER);
    match &result {
        Ok(_) => {
            if marker.exists() {
                let _ = fs::remove_file(&marker);
            }
        }
        Err(e) => {
            let _ = fs::create_dir_all(out);
            let _ = fs::write(&marker, format!("stage: {}\nerror: {}\n", e.stage, e.source));
        }
    }
    result
}

fn run_stages(config: &PipelineConfig) -> std::result::Result<PipelineOutcome, PipelineError> {
    config.validate().at(Stage::Config)?;
    let out = &config.out_dir;
    create_dir(out).at(Stage::Config)?;

    let mut tables = Vec::with_capacity(config.datasets.len());
    for ds in &config.datasets {
        let table = match &ds.labeled {
            Some(path) => read_feature_csv(path, &ds.default_label).at(Stage::Label)?,
            None => {
                let flows = extract_dataset(ds, &config.meter).at(Stage::Extract)?;
                let dir = out.join("features");
                create_dir(&dir).at(Stage::Extract)?;
                write_flows_file(dir.join(format!("{}.csv", ds.name)), &flows, None).at(Stage::Extract)?;

                let (rows, report) = label_dataset(ds, &flows).at(Stage::Label)?;
                info!("{}: labels {:?}, unmatched {}", ds.name, report.per_label, report.unmatched);
                let dir = out.join("labeled");
                create_dir(&dir).at(Stage::Label)?;
                let labels: Vec<String> = rows.iter().map(|r| r.label.clone()).collect();
                write_flows_file(dir.join(format!("{}.csv", ds.name)), &flows, Some(&labels)).at(Stage::Label)?;
                FeatureTable::from_labeled(&rows, &ds.default_label)
            }
        };
        tables.push(table);
    }

    let hyper = config.ranking_params();
    let rank_dir = out.join("ranking");
    create_dir(&rank_dir).at(Stage::Rank)?;
    let mut rankings = Vec::new();
    for (ds, table) in config.datasets.iter().zip(&tables) {
        let list = rank_table(&ds.name, table, config.top_k, &hyper)
            .map_err(|e| Error::validation(format!("dataset `{}`: {e}", ds.name)))
            .at(Stage::Rank)?;
        write_ranking_file(rank_dir.join(format!("{}.csv", ds.name)), &list).at(Stage::Rank)?;
        rankings.push(list);
    }

    let universal = universal_from_lists(&rankings, config.threshold).at(Stage::Universal)?;
    write_universal_file(out.join("universal.csv"), &universal).at(Stage::Universal)?;
    let names = universal.names();
    info!("universal features: {}", names.join(", "));

    let model_dir = out.join("models");
    create_dir(&model_dir).at(Stage::Train)?;
    let mut reports = Vec::new();
    for (ds, table) in config.datasets.iter().zip(&tables) {
        let sub = table.select(&names).at(Stage::Train)?;
        let (train, test) = split_table(&sub, config.ratio, config.seed, config.stratified).at(Stage::Train)?;
        let models = train_models(&train, &config.models)
            .map_err(|e| Error::validation(format!("dataset `{}`: {e}", ds.name)))
            .at(Stage::Train)?;
        for model in &models {
            let path = model_dir.join(format!("{}_{}.json", ds.name, model.kind()));
            ModelFile::new(model.clone(), names.clone()).save(path).at(Stage::Train)?;
            reports.push(evaluate_model(&ds.name, model, &test).at(Stage::Evaluate)?);
        }
    }

    let report_csv = out.join("report.csv");
    write_report_file(&report_csv, &reports, ReportFormat::Csv).at(Stage::Evaluate)?;
    write_report_file(out.join("report.txt"), &reports, ReportFormat::Text).at(Stage::Evaluate)?;
    Ok(PipelineOutcome {
        universal,
        rankings,
        reports,
        report_csv,
    })
}

/// Writes `<scenario>.pcap`, `<scenario>.rules.csv` and
/// `<scenario>.manifest` for each scenario, returning the manifests.
pub fn write_synthetic_corpus(
    dir: &Path,
    scenarios: &[Scenario],
    normal: usize,
    attack: usize,
    seed: u64,
) -> Result<Vec<DatasetManifest>> {
    create_dir(dir)?;
    let mut manifests = Vec::new();
    for &s in scenarios {
        let data = scenario_dataset(s, normal, attack, seed);
        let pcap = dir.join(format!("{}.pcap", s.name()));
        let bytes = generate_synthetic_capture(&data.blueprints, seed)?;
        fs::write(&pcap, bytes).map_err(|e| Error::io(&pcap, e))?;
        let rules = dir.join(format!("{}.rules.csv", s.name()));
        let file = fs::File::create(&rules).map_err(|e| Error::io(&rules, e))?;
        write_rules(file, &data.rules)?;
        let mut m = DatasetManifest::new(s.name());
        m.captures = vec![pcap];
        m.rules = Some(rules);
        m.notes = format!("synthetic {} scenario, seed {seed}", s.name());
        // paths inside a manifest resolve against its own directory
        let mut local = m.clone();
        local.captures = vec![PathBuf::from(format!("{}.pcap", s.name()))];
        local.rules = Some(PathBuf::from(format!("{}.rules.csv", s.name())));
        let path = dir.join(format!("{}.manifest", s.name()));
        fs::write(&path, local.to_text()).map_err(|e| Error::io(&path, e))?;
        manifests.push(m);
    }
    Ok(manifests)
}

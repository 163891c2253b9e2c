//! The four detectors: Gaussian naive Bayes, k-nearest-neighbours, random
//! forest and logistic regression, behind one fit/predict contract.
//!
//! KNN and LR standardize their inputs internally and store the parameters;
//! NB and RF consume raw feature values.

pub mod forest;
pub mod knn;
pub mod logistic;
pub mod naive_bayes;

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use forest::{DecisionTree, ForestParams, Node, RandomForest};
pub use knn::{Knn, KnnParams};
pub use logistic::{LogisticObjective, LogisticParams, LogisticRegression};
pub use naive_bayes::{GaussianNb, NaiveBayesParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    NB,
    KNN,
    RF,
    LR,
}

impl ModelKind {
    /// Report order.
    pub const ALL: [ModelKind; 4] = [ModelKind::NB, ModelKind::KNN, ModelKind::RF, ModelKind::LR];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::NB => "NB",
            ModelKind::KNN => "KNN",
            ModelKind::RF => "RF",
            ModelKind::LR => "LR",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::validation(format!("unknown classifier `{s}`")))
    }
}

/// Classifier kind plus hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ModelSpec {
    NB(NaiveBayesParams),
    KNN(KnnParams),
    RF(ForestParams),
    LR(LogisticParams),
}

impl ModelSpec {
    /// Defaults for `kind`, with `seed` applied where the model uses one.
    pub fn default_for(kind: ModelKind, seed: u64) -> Self {
        match kind {
            ModelKind::NB => ModelSpec::NB(NaiveBayesParams::default()),
            ModelKind::KNN => ModelSpec::KNN(KnnParams::default()),
            ModelKind::RF => ModelSpec::RF(ForestParams {
                seed,
                ..Default::default()
            }),
            ModelKind::LR => ModelSpec::LR(LogisticParams {
                seed,
                ..Default::default()
            }),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::NB(_) => ModelKind::NB,
            ModelSpec::KNN(_) => ModelKind::KNN,
            ModelSpec::RF(_) => ModelKind::RF,
            ModelSpec::LR(_) => ModelKind::LR,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::validation(format!("{}: {m}", self.kind())));
        match self {
            ModelSpec::NB(p) if !(p.var_smoothing >= 0.0 && p.var_smoothing.is_finite()) => {
                bad("var_smoothing must be a non-negative number")
            }
            ModelSpec::KNN(p) if p.k == 0 => bad("k must be at least 1"),
            ModelSpec::RF(p) if p.n_trees == 0 => bad("n_trees must be at least 1"),
            ModelSpec::RF(p) if p.max_features == Some(0) => bad("max_features must be at least 1"),
            ModelSpec::LR(p) if !(p.l2_lambda >= 0.0) => bad("l2_lambda must be non-negative"),
            ModelSpec::LR(p) if !(p.learning_rate > 0.0) => bad("learning_rate must be positive"),
            _ => Ok(()),
        }
    }
}

/// A fitted classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "state")]
pub enum Model {
    NB(GaussianNb),
    KNN(Knn),
    RF(RandomForest),
    LR(LogisticRegression),
}

fn check_matrix(x: &[Vec<f64>], width: Option<usize>) -> Result<usize> {
    let d = match width {
        Some(d) => d,
        None => x
            .first()
            .map(|r| r.len())
            .ok_or_else(|| Error::validation("no training rows"))?,
    };
    if d == 0 {
        return Err(Error::validation("no feature columns"));
    }
    for (i, row) in x.iter().enumerate() {
        if row.len() != d {
            return Err(Error::validation(format!(
                "row {i} has {} columns, model expects {d}",
                row.len()
            )));
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("non-finite value at row {i}, column {j}")));
        }
    }
    Ok(d)
}

pub fn fit(spec: &ModelSpec, x: &[Vec<f64>], y: &[u8]) -> Result<Model> {
    spec.validate()?;
    check_matrix(x, None)?;
    if x.len() != y.len() {
        return Err(Error::validation(format!(
            "{} rows but {} labels",
            x.len(),
            y.len()
        )));
    }
    if y.iter().any(|&c| c > 1) {
        return Err(Error::validation("labels must be 0 or 1"));
    }
    if !(y.contains(&0) && y.contains(&1)) {
        return Err(Error::validation("training labels contain a single class"));
    }
    Ok(match spec {
        ModelSpec::NB(p) => Model::NB(GaussianNb::fit(p, x, y)),
        ModelSpec::KNN(p) => Model::KNN(Knn::fit(p, x, y)?),
        ModelSpec::RF(p) => Model::RF(RandomForest::fit(p, x, y)),
        ModelSpec::LR(p) => Model::LR(LogisticRegression::fit(p, x, y)?),
    })
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::NB(_) => ModelKind::NB,
            Model::KNN(_) => ModelKind::KNN,
            Model::RF(_) => ModelKind::RF,
            Model::LR(_) => ModelKind::LR,
        }
    }

    pub fn spec(&self) -> ModelSpec {
        match self {
            Model::NB(m) => ModelSpec::NB(m.params.clone()),
            Model::KNN(m) => ModelSpec::KNN(m.params.clone()),
            Model::RF(m) => ModelSpec::RF(m.params.clone()),
            Model::LR(m) => ModelSpec::LR(m.params.clone()),
        }
    }

    /// Number of input columns the model was trained on.
    pub fn width(&self) -> usize {
        match self {
            Model::NB(m) => m.means[0].len(),
            Model::KNN(m) => m.scaler.width(),
            Model::RF(m) => m.width(),
            Model::LR(m) => m.weights.len(),
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> u8 {
        match self {
            Model::NB(m) => m.predict_row(row),
            Model::KNN(m) => m.predict_row(row),
            Model::RF(m) => m.predict_row(row),
            Model::LR(m) => m.predict_row(row),
        }
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<u8>> {
        if !x.is_empty() {
            check_matrix(x, Some(self.width()))?;
        }
        Ok(x.par_iter().map(|r| self.predict_row(r)).collect())
    }
}

pub const MODEL_FORMAT: &str = "botflow-model";
pub const MODEL_VERSION: u32 = 1;

/// On-disk JSON envelope for a trained model.
///
/// ```json
/// {"format": "botflow-model", "version": 1,
///  "feature_names": ["Packet Length Mean", ...],
///  "model": {"kind": "RF", "state": {"params": {...}, "trees": [...]}}}
/// ```
///
/// The model state embeds its hyperparameters. Floats round-trip exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub feature_names: Vec<String>,
    pub model: Model,
}

impl ModelFile {
    pub fn new(model: Model, feature_names: Vec<String>) -> Self {
        ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            feature_names,
            model,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer(&mut w, self)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mf: ModelFile = serde_json::from_reader(BufReader::new(file))?;
        if mf.format != MODEL_FORMAT {
            return Err(Error::Format(format!("`{}` is not a model file", path.display())));
        }
        if mf.version != MODEL_VERSION {
            return Err(Error::Format(format!(
                "unsupported model version {} (expected {MODEL_VERSION})",
                mf.version
            )));
        }
        if mf.feature_names.len() != mf.model.width() {
            return Err(Error::Format("feature name count does not match model width".into()));
        }
        Ok(mf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Vec<Vec<f64>>, Vec<u8>) {
        let x: Vec<Vec<f64>> = (0..60)
            .map(|i| {
                let t = i as f64 / 10.0;
                vec![t, (t * 1.7).sin(), 3.0]
            })
            .collect();
        let y = x.iter().map(|r| (r[0] > 3.0) as u8).collect();
        (x, y)
    }

    #[test]
    fn single_class_is_rejected() {
        let err = fit(&ModelSpec::default_for(ModelKind::LR, 0), &[vec![1.0], vec![2.0]], &[1, 1]);
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn non_finite_names_position() {
        let x = vec![vec![1.0, 2.0], vec![3.0, f64::NAN]];
        let msg = fit(&ModelSpec::default_for(ModelKind::NB, 0), &x, &[0, 1])
            .unwrap_err()
            .to_string();
        assert!(msg.contains("row 1") && msg.contains("column 1"), "{msg}");
    }

    #[test]
    fn width_mismatch_on_predict() {
        let (x, y) = toy();
        let m = fit(&ModelSpec::default_for(ModelKind::KNN, 0), &x, &y).unwrap();
        assert!(m.predict(&[vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn save_load_reproduces_predictions() {
        let (x, y) = toy();
        let dir = tempfile::tempdir().unwrap();
        for kind in ModelKind::ALL {
            let model = fit(&ModelSpec::default_for(kind, 7), &x, &y).unwrap();
            let names = vec!["a".to_string(), "b".to_string(), "c".to_string()];
            let path = dir.path().join(format!("{kind}.json"));
            ModelFile::new(model.clone(), names).save(&path).unwrap();
            let back = ModelFile::load(&path).unwrap();
            assert_eq!(back.model, model, "{kind}");
            assert_eq!(back.model.spec(), ModelSpec::default_for(kind, 7));
            assert_eq!(back.model.predict(&x).unwrap(), model.predict(&x).unwrap());
        }
    }

    #[test]
    fn fitting_is_deterministic() {
        let (x, y) = toy();
        for kind in ModelKind::ALL {
            let spec = ModelSpec::default_for(kind, 3);
            assert_eq!(fit(&spec, &x, &y).unwrap(), fit(&spec, &x, &y).unwrap());
        }
    }

    #[test]
    fn kind_round_trips_through_text() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().to_lowercase().parse::<ModelKind>().unwrap(), k);
        }
    }
}

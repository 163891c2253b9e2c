//! Confusion matrices and the four detection metrics, as percentages.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::classifiers::ModelKind;
use crate::error::{Error, Result};

/// Counts with class 1 (attack) as positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// The same predictions scored with class 0 as positive.
    pub fn swapped(&self) -> Self {
        ConfusionMatrix {
            tp: self.tn,
            tn: self.tp,
            fp: self.fn_,
            fn_: self.fp,
        }
    }
}

pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::validation(format!(
            "{} true labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::validation("nothing to evaluate"));
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t != 0, p != 0) {
            (true, true) => cm.tp += 1,
            (false, false) => cm.tn += 1,
            (false, true) => cm.fp += 1,
            (true, false) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub dataset: String,
    pub classifier: ModelKind,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when TP + FP = 0 and precision was defined as 0.
    pub precision_degenerate: bool,
    /// Set when TP + FN = 0 and recall was defined as 0.
    pub recall_degenerate: bool,
}

pub fn compute_metrics(dataset: &str, classifier: ModelKind, cm: ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::validation("confusion matrix is empty"));
    }
    let pct = |num: u64, den: u64| {
        if den == 0 {
            (0.0, true)
        } else {
            (num as f64 / den as f64 * 100.0, false)
        }
    };
    let (accuracy, _) = pct(cm.tp + cm.tn, total);
    let (precision, precision_degenerate) = pct(cm.tp, cm.tp + cm.fp);
    let (recall, recall_degenerate) = pct(cm.tp, cm.tp + cm.fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * (recall * precision) / (recall + precision)
    } else {
        0.0
    };
    Ok(MetricsReport {
        dataset: dataset.to_string(),
        classifier,
        confusion: cm,
        accuracy,
        precision,
        recall,
        f1,
        precision_degenerate,
        recall_degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
}

pub const REPORT_COLUMNS: [&str; 6] = ["dataset", "classifier", "accuracy", "precision", "recall", "f1"];

/// Renders one row per report. Datasets keep their first-seen order;
/// within a dataset rows follow NB, KNN, RF, LR.
pub fn render_report(reports: &[MetricsReport], format: ReportFormat) -> String {
    let mut datasets: Vec<&str> = Vec::new();
    for r in reports {
        if !datasets.contains(&r.dataset.as_str()) {
            datasets.push(&r.dataset);
        }
    }
    let mut sorted: Vec<&MetricsReport> = reports.iter().collect();
    sorted.sort_by_key(|r| (datasets.iter().position(|d| *d == r.dataset), r.classifier));
    let rows: Vec<[String; 6]> = sorted
        .iter()
        .map(|r| {
            [
                r.dataset.clone(),
                r.classifier.name().to_string(),
                format!("{:.2}", r.accuracy),
                format!("{:.2}", r.precision),
                format!("{:.2}", r.recall),
                format!("{:.2}", r.f1),
            ]
        })
        .collect();
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            out.push_str(&REPORT_COLUMNS.join(","));
            out.push('\n');
            for row in &rows {
                let cells: Vec<String> = row.iter().map(|c| csv_cell(c)).collect();
                out.push_str(&cells.join(","));
                out.push('\n');
            }
        }
        ReportFormat::Text => {
            let header = ["Dataset", "Classifier", "Accuracy", "Precision", "Recall", "F1"];
            let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
            for row in &rows {
                for (w, c) in widths.iter_mut().zip(row) {
                    *w = (*w).max(c.len());
                }
            }
            let line = |cells: &[&str], out: &mut String| {
                let mut s = String::new();
                for (j, (c, w)) in cells.iter().zip(&widths).enumerate() {
                    if j > 0 {
                        s.push_str("  ");
                    }
                    if j < 2 {
                        let _ = write!(s, "{c:<w$}");
                    } else {
                        let _ = write!(s, "{c:>w$}");
                    }
                }
                out.push_str(s.trim_end());
                out.push('\n');
            };
            line(&header, &mut out);
            for row in &rows {
                let cells: Vec<&str> = row.iter().map(String::as_str).collect();
                line(&cells, &mut out);
            }
        }
    }
    out
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_report_file(path: impl AsRef<Path>, reports: &[MetricsReport], format: ReportFormat) -> Result<()> {
    let path = path.as_ref();
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(render_report(reports, format).as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// One parsed row of a report CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub dataset: String,
    pub classifier: ModelKind,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn read_report<R: Read>(input: R) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    let idx: Vec<usize> = REPORT_COLUMNS
        .iter()
        .map(|c| {
            headers
                .iter()
                .position(|h| h == *c)
                .ok_or_else(|| Error::Schema(c.to_string()))
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let cell = |k: usize| rec.get(idx[k]).unwrap_or("");
        let num = |k: usize| {
            cell(k).parse::<f64>().map_err(|_| Error::Row {
                line,
                message: format!("bad {} `{}`", REPORT_COLUMNS[k], cell(k)),
            })
        };
        out.push(ReportRow {
            dataset: cell(0).to_string(),
            classifier: cell(1).parse().map_err(|e: Error| Error::Row {
                line,
                message: e.to_string(),
            })?,
            accuracy: num(2)?,
            precision: num(3)?,
            recall: num(4)?,
            f1: num(5)?,
        });
    }
    Ok(out)
}

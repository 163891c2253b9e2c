use serde::{Deserialize, Serialize};

use crate::dataset::FeatureTable;
use crate::error::{Error, Result};

/// Per-column mean and sample standard deviation.
///
/// A column whose values are all identical is marked constant; it maps to 0
/// and is never ranked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub constant: Vec<bool>,
}

impl StandardizationParams {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::validation("cannot standardize an empty table"))?;
        let d = first.len();
        let n = rows.len() as f64;
        let mut means = vec![0.0; d];
        let mut stds = vec![0.0; d];
        let mut constant = vec![true; d];
        for j in 0..d {
            let x0 = first[j];
            let mut sum = 0.0;
            for r in rows {
                sum += r[j];
                if r[j] != x0 {
                    constant[j] = false;
                }
            }
            let mean = sum / n;
            means[j] = mean;
            if !constant[j] {
                let ss: f64 = rows.iter().map(|r| (r[j] - mean).powi(2)).sum();
                stds[j] = (ss / (n - 1.0)).sqrt();
            }
        }
        Ok(StandardizationParams {
            means,
            stds,
            constant,
        })
    }

    pub fn identity(d: usize) -> Self {
        StandardizationParams {
            means: vec![0.0; d],
            stds: vec![1.0; d],
            constant: vec![false; d],
        }
    }

    pub fn width(&self) -> usize {
        self.means.len()
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &x)| {
                if self.constant[j] {
                    0.0
                } else {
                    (x - self.means[j]) / self.stds[j]
                }
            })
            .collect()
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }
}

/// Standardizes every column of a table.
pub fn standardize(table: &FeatureTable) -> Result<(FeatureTable, StandardizationParams)> {
    let params = StandardizationParams::fit(&table.rows)?;
    let out = FeatureTable {
        columns: table.columns.clone(),
        rows: params.transform(&table.rows),
        labels: table.labels.clone(),
    };
    Ok((out, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(cols: &[&[f64]]) -> FeatureTable {
        let n = cols[0].len();
        FeatureTable::new(
            (0..cols.len()).map(|j| format!("c{j}")).collect(),
            (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn one_two_three() {
        let (t, p) = standardize(&table(&[&[1.0, 2.0, 3.0]])).unwrap();
        assert_eq!(t.column(0), vec![-1.0, 0.0, 1.0]);
        assert_eq!(p.means, vec![2.0]);
        assert_eq!(p.stds, vec![1.0]);
    }

    #[test]
    fn constant_column_flagged() {
        let (t, p) = standardize(&table(&[&[5.0, 5.0, 5.0]])).unwrap();
        assert_eq!(t.column(0), vec![0.0, 0.0, 0.0]);
        assert!(p.constant[0]);
    }

    #[test]
    fn idempotent_on_standardized_input() {
        let raw = table(&[&[3.0, -1.5, 8.25, 0.0, 2.0], &[1e5, 2e5, 3e5, 4e5, 1e5]]);
        let (once, _) = standardize(&raw).unwrap();
        let (twice, _) = standardize(&once).unwrap();
        for j in 0..2 {
            let col = once.column(j);
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let sd = (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (col.len() - 1) as f64).sqrt();
            assert!(mean.abs() < 1e-9);
            assert!((sd - 1.0).abs() < 1e-9);
            for (a, b) in col.iter().zip(twice.column(j)) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn empty_is_error() {
        assert!(StandardizationParams::fit(&[]).is_err());
    }
}

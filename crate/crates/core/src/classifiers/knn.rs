use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scaling::StandardizationParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 5 }
    }
}

/// Brute-force k-nearest-neighbours, Euclidean distance in standardized space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub params: KnnParams,
    pub scaler: StandardizationParams,
    pub train: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl Knn {
    pub fn fit(params: &KnnParams, x: &[Vec<f64>], y: &[u8]) -> Result<Self> {
        let scaler = StandardizationParams::fit(x)?;
        Ok(Knn {
            params: params.clone(),
            train: scaler.transform(x),
            scaler,
            labels: y.to_vec(),
        })
    }

    /// Training indices of the k nearest rows, nearest first; equal
    /// distances resolve to the lower index.
    pub fn neighbours(&self, row: &[f64]) -> Vec<usize> {
        let q = self.scaler.transform_row(row);
        let mut d: Vec<(f64, usize)> = self
            .train
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let dist: f64 = t.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
                (dist, i)
            })
            .collect();
        let k = self.params.k.min(d.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, cmp);
            d.truncate(k);
        }
        d.sort_by(cmp);
        d.into_iter().map(|(_, i)| i).collect()
    }

    pub fn predict_row(&self, row: &[f64]) -> u8 {
        let nn = self.neighbours(row);
        let ones = nn.iter().filter(|&&i| self.labels[i] == 1).count();
        (2 * ones > nn.len()) as u8
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Vec<u8> {
        x.par_iter().map(|r| self.predict_row(r)).collect()
    }
}

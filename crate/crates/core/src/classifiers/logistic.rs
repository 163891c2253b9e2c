//! L2-regularized logistic regression trained by full-batch gradient descent.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scaling::StandardizationParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticParams {
    pub l2_lambda: f64,
    pub learning_rate: f64,
    pub max_iters: usize,
    /// Stop once the largest parameter update falls below this.
    pub tol: f64,
    /// Recorded for reproducibility; training starts from zero weights and
    /// is deterministic regardless.
    pub seed: u64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            l2_lambda: 1.0,
            learning_rate: 0.1,
            max_iters: 1000,
            tol: 1e-6,
            seed: 0,
        }
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean regularized log-loss over a standardized design matrix:
/// `(sum_i [softplus(z_i) - y_i z_i] + lambda/2 |w|^2) / n`, bias unpenalized.
pub struct LogisticObjective<'a> {
    pub x: &'a [Vec<f64>],
    pub y: &'a [u8],
    pub l2_lambda: f64,
}

impl LogisticObjective<'_> {
    pub fn loss(&self, w: &[f64], b: f64) -> f64 {
        let n = self.x.len() as f64;
        let data: f64 = self
            .x
            .iter()
            .zip(self.y)
            .map(|(row, &y)| {
                let z = dot(row, w) + b;
                softplus(z) - y as f64 * z
            })
            .sum();
        let penalty = 0.5 * self.l2_lambda * w.iter().map(|v| v * v).sum::<f64>();
        (data + penalty) / n
    }

    /// Analytic gradient `(d/dw, d/db)` of [`loss`](Self::loss).
    pub fn gradient(&self, w: &[f64], b: f64) -> (Vec<f64>, f64) {
        let n = self.x.len() as f64;
        let mut gw: Vec<f64> = w.iter().map(|v| self.l2_lambda * v).collect();
        let mut gb = 0.0;
        for (row, &y) in self.x.iter().zip(self.y) {
            let r = sigmoid(dot(row, w) + b) - y as f64;
            for (g, x) in gw.iter_mut().zip(row) {
                *g += r * x;
            }
            gb += r;
        }
        for g in &mut gw {
            *g /= n;
        }
        (gw, gb / n)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    pub params: LogisticParams,
    pub scaler: StandardizationParams,
    /// Coefficients in standardized feature space.
    pub weights: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
}

impl LogisticRegression {
    pub fn fit(params: &LogisticParams, x: &[Vec<f64>], y: &[u8]) -> Result<Self> {
        let scaler = StandardizationParams::fit(x)?;
        let xs = scaler.transform(x);
        let objective = LogisticObjective {
            x: &xs,
            y,
            l2_lambda: params.l2_lambda,
        };
        let mut w = vec![0.0; scaler.width()];
        let mut b = 0.0;
        let mut iterations = 0;
        for _ in 0..params.max_iters {
            iterations += 1;
            let (gw, gb) = objective.gradient(&w, b);
            let mut largest = (params.learning_rate * gb).abs();
            for (wj, g) in w.iter_mut().zip(&gw) {
                let step = params.learning_rate * g;
                *wj -= step;
                largest = largest.max(step.abs());
            }
            b -= params.learning_rate * gb;
            if largest < params.tol {
                break;
            }
        }
        Ok(LogisticRegression {
            params: params.clone(),
            scaler,
            weights: w,
            bias: b,
            iterations,
        })
    }

    /// A model with given coefficients over unscaled inputs.
    pub fn from_parts(weights: Vec<f64>, bias: f64) -> Self {
        LogisticRegression {
            params: LogisticParams::default(),
            scaler: StandardizationParams::identity(weights.len()),
            weights,
            bias,
            iterations: 0,
        }
    }

    pub fn probability(&self, row: &[f64]) -> f64 {
        let xs = self.scaler.transform_row(row);
        sigmoid(dot(&xs, &self.weights) + self.bias)
    }

    pub fn predict_row(&self, row: &[f64]) -> u8 {
        (self.probability(row) >= 0.5) as u8
    }
}

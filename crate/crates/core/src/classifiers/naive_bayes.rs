use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NaiveBayesParams {
    /// Fraction of the largest feature variance added to every variance.
    pub var_smoothing: f64,
}

impl Default for NaiveBayesParams {
    fn default() -> Self {
        NaiveBayesParams {
            var_smoothing: 1e-9,
        }
    }
}

/// Gaussian naive Bayes over two classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    pub params: NaiveBayesParams,
    pub priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    pub variances: [Vec<f64>; 2],
    /// Smoothing floor actually added to each variance.
    pub epsilon: f64,
}

fn population_variance(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

impl GaussianNb {
    /// Callers guarantee both classes are present and `x` is non-empty.
    pub fn fit(params: &NaiveBayesParams, x: &[Vec<f64>], y: &[u8]) -> Self {
        let d = x[0].len();
        let max_var = (0..d)
            .map(|j| population_variance(x.iter().map(move |r| r[j])).1)
            .fold(0.0, f64::max);
        // all-constant input: fall back to an absolute floor
        let epsilon = if max_var > 0.0 {
            params.var_smoothing * max_var
        } else {
            params.var_smoothing
        };
        let n = x.len() as f64;
        let mut priors = [0.0; 2];
        let mut means: [Vec<f64>; 2] = [vec![0.0; d], vec![0.0; d]];
        let mut variances: [Vec<f64>; 2] = [vec![0.0; d], vec![0.0; d]];
        for class in 0..2u8 {
            let c = class as usize;
            let rows: Vec<&Vec<f64>> = x
                .iter()
                .zip(y)
                .filter(|(_, &t)| t == class)
                .map(|(r, _)| r)
                .collect();
            priors[c] = rows.len() as f64 / n;
            for j in 0..d {
                let (m, v) = population_variance(rows.iter().map(|r| r[j]));
                means[c][j] = m;
                variances[c][j] = v + epsilon;
            }
        }
        GaussianNb {
            params: params.clone(),
            priors,
            means,
            variances,
            epsilon,
        }
    }

    /// Unnormalized log posterior of each class.
    pub fn class_scores(&self, row: &[f64]) -> [f64; 2] {
        let mut scores = [0.0; 2];
        for (c, score) in scores.iter_mut().enumerate() {
            let mut s = self.priors[c].ln();
            for ((x, m), v) in row.iter().zip(&self.means[c]).zip(&self.variances[c]) {
                s -= 0.5 * (2.0 * std::f64::consts::PI * v).ln() + (x - m).powi(2) / (2.0 * v);
            }
            *score = s;
        }
        scores
    }

    /// Posterior probabilities, normalized in log space.
    pub fn posterior(&self, row: &[f64]) -> [f64; 2] {
        let s = self.class_scores(row);
        let top = s[0].max(s[1]);
        let e = [(s[0] - top).exp(), (s[1] - top).exp()];
        let z = e[0] + e[1];
        [e[0] / z, e[1] / z]
    }

    pub fn predict_row(&self, row: &[f64]) -> u8 {
        let s = self.class_scores(row);
        (s[1] > s[0]) as u8
    }
}

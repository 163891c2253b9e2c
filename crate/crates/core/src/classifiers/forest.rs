//! CART classification trees (Gini impurity) and a bagged random forest.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Candidate features per split; `None` means `ceil(sqrt(d))`.
    pub max_features: Option<usize>,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_features: None,
            min_samples_split: 2,
            max_depth: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn features_per_split(&self, d: usize) -> usize {
        self.max_features
            .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
            .clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// Training samples per class reaching this leaf.
    Leaf { counts: [u64; 2] },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Nodes in an arena; index 0 is the root. `x[feature] <= threshold` goes left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

fn gini(c: [u64; 2]) -> f64 {
    let n = (c[0] + c[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p = c[0] as f64 / n;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

fn best_split_on(x: &[Vec<f64>], y: &[u8], idx: &[usize], feature: usize, totals: [u64; 2]) -> Option<BestSplit> {
    let mut vals: Vec<(f64, u8)> = idx.iter().map(|&i| (x[i][feature], y[i])).collect();
    vals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = vals.len() as f64;
    let mut left = [0u64; 2];
    let mut best: Option<BestSplit> = None;
    for i in 0..vals.len() - 1 {
        left[vals[i].1 as usize] += 1;
        let (lo, hi) = (vals[i].0, vals[i + 1].0);
        if lo == hi {
            continue;
        }
        let right = [totals[0] - left[0], totals[1] - left[1]];
        let nl = (left[0] + left[1]) as f64;
        let impurity = (nl * gini(left) + (n - nl) * gini(right)) / n;
        if best.as_ref().map_or(true, |b| impurity < b.impurity) {
            let mid = lo + (hi - lo) / 2.0;
            let threshold = if mid < hi { mid } else { lo };
            best = Some(BestSplit {
                feature,
                threshold,
                impurity,
            });
        }
    }
    best
}

impl DecisionTree {
    /// Grows a tree on the rows `idx` (duplicates allowed) until leaves are
    /// pure or smaller than `min_samples_split`.
    pub fn grow(x: &[Vec<f64>], y: &[u8], idx: Vec<usize>, params: &ForestParams, rng: &mut ChaCha8Rng) -> Self {
        let d = x[0].len();
        let mtry = params.features_per_split(d);
        let mut nodes = vec![Node::Leaf { counts: [0, 0] }];
        let mut stack = vec![(0usize, idx, 0usize)];
        let mut features: Vec<usize> = (0..d).collect();
        while let Some((slot, rows, depth)) = stack.pop() {
            let mut counts = [0u64; 2];
            for &i in &rows {
                counts[y[i] as usize] += 1;
            }
            let pure = counts[0] == 0 || counts[1] == 0;
            let depth_capped = params.max_depth.is_some_and(|m| depth >= m);
            if pure || rows.len() < params.min_samples_split || depth_capped {
                nodes[slot] = Node::Leaf { counts };
                continue;
            }
            features.shuffle(rng);
            // try the sampled features first; keep going if none can split
            let mut best: Option<BestSplit> = None;
            for (k, &f) in features.iter().enumerate() {
                if k >= mtry && best.is_some() {
                    break;
                }
                if let Some(s) = best_split_on(x, y, &rows, f, counts) {
                    if best.as_ref().map_or(true, |b| s.impurity < b.impurity) {
                        best = Some(s);
                    }
                }
            }
            let Some(split) = best else {
                nodes[slot] = Node::Leaf { counts };
                continue;
            };
            let (l, r): (Vec<usize>, Vec<usize>) = rows
                .into_iter()
                .partition(|&i| x[i][split.feature] <= split.threshold);
            let left = nodes.len();
            nodes.push(Node::Leaf { counts: [0, 0] });
            let right = nodes.len();
            nodes.push(Node::Leaf { counts: [0, 0] });
            nodes[slot] = Node::Split {
                feature: split.feature,
                threshold: split.threshold,
                left,
                right,
            };
            stack.push((right, r, depth + 1));
            stack.push((left, l, depth + 1));
        }
        DecisionTree { nodes }
    }

    pub fn leaf_for(&self, row: &[f64]) -> [u64; 2] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { counts } => return *counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> u8 {
        let c = self.leaf_for(row);
        (c[1] > c[0]) as u8
    }

    pub fn leaves(&self) -> impl Iterator<Item = [u64; 2]> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { counts } => Some(*counts),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub params: ForestParams,
    pub n_features: usize,
    pub trees: Vec<DecisionTree>,
}

/// Independent PRNG stream for tree `t`, so trees can be grown in any order.
fn tree_rng(seed: u64, t: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t as u64);
    rng
}

impl RandomForest {
    pub fn fit(params: &ForestParams, x: &[Vec<f64>], y: &[u8]) -> Self {
        let n = x.len();
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = tree_rng(params.seed, t);
                let idx: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.gen_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                DecisionTree::grow(x, y, idx, params, &mut rng)
            })
            .collect();
        RandomForest {
            params: params.clone(),
            n_features: x[0].len(),
            trees,
        }
    }

    pub fn width(&self) -> usize {
        self.n_features
    }

    pub fn votes(&self, row: &[f64]) -> [usize; 2] {
        let ones = self.trees.iter().filter(|t| t.predict_row(row) == 1).count();
        [self.trees.len() - ones, ones]
    }

    pub fn predict_row(&self, row: &[f64]) -> u8 {
        let v = self.votes(row);
        (v[1] > v[0]) as u8
    }
}

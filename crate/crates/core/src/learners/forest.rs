use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow_cart, CartParams, Tree};
use crate::rng::{self, Domain};
use crate::tabular::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Candidate features per node; `None` means `ceil(sqrt(p))`.
    pub mtry: Option<usize>,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Draw a bootstrap sample per tree; when off every tree sees all rows.
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 200,
            mtry: None,
            max_depth: 12,
            min_leaf: 5,
            bootstrap: true,
        }
    }
}

pub fn default_mtry(p: usize) -> usize {
    ((p as f64).sqrt().ceil() as usize).clamp(1, p.max(1))
}

/// Bagged regression trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    /// Per tree, how often each training row was drawn.
    #[serde(skip)]
    pub in_bag: Vec<Vec<u32>>,
    /// Out-of-bag prediction per training row; NaN where a row was in every
    /// bootstrap sample.
    #[serde(skip)]
    pub oob_predictions: Vec<f64>,
}

/// Bootstrap draw of `n` rows as in-bag counts.
pub(crate) fn bootstrap_counts<R: Rng>(n: usize, rng: &mut R) -> Vec<u32> {
    let mut counts = vec![0u32; n];
    for _ in 0..n {
        counts[rng.random_range(0..n)] += 1;
    }
    counts
}

pub(crate) fn rows_from_counts(counts: &[u32]) -> Vec<usize> {
    counts
        .iter()
        .enumerate()
        .flat_map(|(i, &c)| std::iter::repeat_n(i, c as usize))
        .collect()
}

pub fn fit_forest(x: &FeatureMatrix, y: &[f64], params: &ForestParams, seed: u64) -> Forest {
    let n = x.n_rows();
    let mtry = Some(params.mtry.unwrap_or_else(|| default_mtry(x.n_features())));
    let cart = CartParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
        mtry,
    };
    let fitted: Vec<(Tree, Vec<u32>)> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::stream(seed, Domain::ForestTree, &[t as u64]);
            let counts = if params.bootstrap {
                bootstrap_counts(n, &mut rng)
            } else {
                vec![1; n]
            };
            let tree = grow_cart(x, y, rows_from_counts(&counts), &cart, &mut rng);
            (tree, counts)
        })
        .collect();
    let (trees, in_bag): (Vec<Tree>, Vec<Vec<u32>>) = fitted.into_iter().unzip();

    let mut sum = vec![0.0; n];
    let mut cnt = vec![0usize; n];
    for (tree, counts) in trees.iter().zip(&in_bag) {
        for i in (0..n).filter(|&i| counts[i] == 0) {
            sum[i] += tree.predict_row(x, i);
            cnt[i] += 1;
        }
    }
    let oob_predictions = sum
        .iter()
        .zip(&cnt)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { f64::NAN })
        .collect();
    Forest {
        trees,
        in_bag,
        oob_predictions,
    }
}

impl Forest {
    pub fn predict_row(&self, x: &FeatureMatrix, row: usize) -> f64 {
        let s: f64 = self.trees.iter().map(|t| t.predict_row(x, row)).sum();
        s / self.trees.len() as f64
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Vec<f64> {
        (0..x.n_rows()).map(|i| self.predict_row(x, i)).collect()
    }
}

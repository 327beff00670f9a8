//! Conditional-inference forest: association-test split selection with a
//! Bonferroni stopping rule, grown on bootstrap samples of `(X, phi)`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::hettest::linear_statistic_rows;
use crate::learners::forest::{bootstrap_counts, default_mtry, rows_from_counts};
use crate::learners::tree::{best_variance_split, candidate_features, Node, Tree};
use crate::rng::{self, Domain};
use crate::stats::two_sided_p;
use crate::tabular::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CiForestParams {
    pub n_trees: usize,
    /// Candidate covariates per node; `None` means `ceil(sqrt(p))`.
    pub mtry: Option<usize>,
    /// Split only when the Bonferroni-adjusted minimum p-value is at most
    /// this level.
    pub alpha: f64,
    pub min_leaf: usize,
}

impl Default for CiForestParams {
    fn default() -> Self {
        CiForestParams {
            n_trees: 500,
            mtry: None,
            alpha: 0.05,
            min_leaf: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiForest {
    pub trees: Vec<Tree>,
    /// Per tree, bootstrap draw counts for every row.
    pub in_bag: Vec<Vec<u32>>,
    pub params: CiForestParams,
}

impl CiForest {
    pub fn predict_row(&self, x: &FeatureMatrix, row: usize) -> f64 {
        self.trees.iter().map(|t| t.predict_row(x, row)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Vec<f64> {
        (0..x.n_rows()).map(|i| self.predict_row(x, i)).collect()
    }
}

/// Association p-value of one covariate with `phi` on `rows`, normal
/// approximation. Factors with three or more observed levels are adjusted
/// for the maximum over their level statistics.
pub fn node_p_value(x: &FeatureMatrix, phi: &[f64], rows: &[usize], feature: usize) -> (f64, f64) {
    let s = linear_statistic_rows(&x.features[feature], phi, rows);
    let p = (two_sided_p(s.z) * s.n_components as f64).min(1.0);
    (p, s.z)
}

/// Grow one tree on the multiset `rows`.
pub fn grow_ci_tree<R: Rng>(x: &FeatureMatrix, phi: &[f64], rows: Vec<usize>, params: &CiForestParams, rng: &mut R) -> Tree {
    let mtry = params.mtry.unwrap_or_else(|| default_mtry(x.n_features()));
    let mut tree = Tree { nodes: Vec::new() };
    grow(x, phi, rows, params, mtry, rng, &mut tree);
    tree
}

fn grow<R: Rng>(
    x: &FeatureMatrix,
    phi: &[f64],
    rows: Vec<usize>,
    params: &CiForestParams,
    mtry: usize,
    rng: &mut R,
    tree: &mut Tree,
) -> usize {
    let id = tree.nodes.len();
    let n = rows.len();
    let mean = if n == 0 { 0.0 } else { rows.iter().map(|&i| phi[i]).sum::<f64>() / n as f64 };
    tree.nodes.push(Node::Leaf { value: mean, n });
    let min_leaf = params.min_leaf.max(1);
    if n < 2 * min_leaf {
        return id;
    }
    let candidates = candidate_features(x.n_features(), Some(mtry), rng);
    let n_candidates = candidates.len();
    // Smallest p-value; ties (including underflow to 0) go to the larger
    // statistic, then the lower covariate index.
    let mut best: Option<(usize, f64, f64)> = None;
    for j in candidates {
        let (p, z) = node_p_value(x, phi, &rows, j);
        let better = match best {
            None => true,
            Some((_, bp, bz)) => p < bp || (p == bp && z > bz),
        };
        if better {
            best = Some((j, p, z));
        }
    }
    let Some((feature, p, z)) = best else { return id };
    if z == 0.0 || p * n_candidates as f64 > params.alpha {
        return id;
    }
    // The two-sample standardized statistic for a cut is a monotone
    // function of the variance reduction at that cut, so the
    // variance-reduction search finds the same split.
    let Some(split) = best_variance_split(x, phi, &rows, feature, min_leaf) else {
        return id;
    };
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
        rows.iter().partition(|&&i| split.split.goes_left(x.value(feature, i)));
    drop(rows);
    let left = grow(x, phi, left_rows, params, mtry, rng, tree);
    let right = grow(x, phi, right_rows, params, mtry, rng, tree);
    tree.nodes[id] = Node::Internal {
        feature,
        split: split.split,
        left,
        right,
    };
    id
}

/// Fit the forest; tree `t` draws from stream `(seed, t)`.
pub fn fit_ciforest(x: &FeatureMatrix, phi: &[f64], params: &CiForestParams, seed: u64) -> CiForest {
    let n = x.n_rows();
    let (trees, in_bag): (Vec<Tree>, Vec<Vec<u32>>) = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::stream(seed, Domain::CiTree, &[t as u64]);
            let counts = bootstrap_counts(n, &mut rng);
            let tree = grow_ci_tree(x, phi, rows_from_counts(&counts), params, &mut rng);
            (tree, counts)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .unzip();
    CiForest {
        trees,
        in_bag,
        params: *params,
    }
}

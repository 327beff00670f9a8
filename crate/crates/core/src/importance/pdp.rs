//! Partial dependence of forest predictions and the partial-dependence
//! interaction statistic.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::learners::tree::{Node, Tree};
use crate::stats::{quantile_sorted, sd, sorted_copy};
use crate::tabular::{Feature, FeatureMatrix};

pub const DEFAULT_GRID_SIZE: usize = 20;

/// Grid for one covariate: `size` quantiles at equispaced probabilities
/// (duplicates removed) for continuous covariates, every level code for
/// categorical ones.
pub fn default_grid(x: &FeatureMatrix, feature: usize, size: usize) -> Vec<f64> {
    match &x.features[feature] {
        Feature::Categorical { levels, .. } => (0..levels.len()).map(|l| l as f64).collect(),
        Feature::Continuous(v) => {
            let s = sorted_copy(v);
            if s.is_empty() {
                return Vec::new();
            }
            let k = size.max(1);
            let mut g: Vec<f64> = (0..k)
                .map(|i| {
                    let prob = if k == 1 { 0.5 } else { i as f64 / (k - 1) as f64 };
                    quantile_sorted(&s, prob)
                })
                .collect();
            g.dedup();
            g
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialDependence {
    pub features: Vec<usize>,
    pub grids: Vec<Vec<f64>>,
    /// Row-major over the grid product (last feature varies fastest).
    pub values: Vec<f64>,
}

impl PartialDependence {
    pub fn at(&self, idx: &[usize]) -> f64 {
        let mut flat = 0;
        for (d, &k) in idx.iter().enumerate() {
            flat = flat * self.grids[d].len() + k;
        }
        self.values[flat]
    }
}

/// Average over rows of the forest prediction with `features` forced to
/// each grid combination.
///
/// Computed exactly per tree in one pass: rows descend the tree, following
/// only their own branch at splits on other covariates and both branches
/// at splits on the forced covariates, while the grid cells compatible with
/// each branch are tracked. Each leaf then adds its row count times its
/// value to the compatible grid cells.
pub fn partial_dependence(trees: &[Tree], x: &FeatureMatrix, features: &[usize], grids: &[Vec<f64>]) -> PartialDependence {
    let cells: usize = grids.iter().map(Vec::len).product();
    let n = x.n_rows();
    let mut values = vec![0.0; cells];
    if trees.is_empty() || n == 0 || cells == 0 {
        return PartialDependence {
            features: features.to_vec(),
            grids: grids.to_vec(),
            values,
        };
    }
    let per_tree: Vec<Vec<f64>> = trees
        .par_iter()
        .map(|tree| {
            let mut acc = vec![0.0; cells];
            let masks: Vec<Vec<bool>> = grids.iter().map(|g| vec![true; g.len()]).collect();
            descend(tree, 0, x, features, grids, (0..n).collect(), masks, &mut acc);
            acc
        })
        .collect();
    for acc in &per_tree {
        for (v, a) in values.iter_mut().zip(acc) {
            *v += a;
        }
    }
    let scale = 1.0 / (n as f64 * trees.len() as f64);
    for v in &mut values {
        *v *= scale;
    }
    PartialDependence {
        features: features.to_vec(),
        grids: grids.to_vec(),
        values,
    }
}

#[allow(clippy::too_many_arguments)]
fn descend(
    tree: &Tree,
    node: usize,
    x: &FeatureMatrix,
    features: &[usize],
    grids: &[Vec<f64>],
    rows: Vec<usize>,
    masks: Vec<Vec<bool>>,
    acc: &mut [f64],
) {
    if rows.is_empty() {
        return;
    }
    match &tree.nodes[node] {
        Node::Leaf { value, .. } => {
            let w = rows.len() as f64 * value;
            let allowed: Vec<Vec<usize>> = masks
                .iter()
                .map(|m| (0..m.len()).filter(|&k| m[k]).collect())
                .collect();
            add_cells(&allowed, grids, 0, 0, w, acc);
        }
        Node::Internal {
            feature,
            split,
            left,
            right,
        } => {
            if let Some(d) = features.iter().position(|f| f == feature) {
                let side = |go_left: bool| -> Vec<Vec<bool>> {
                    let mut m = masks.clone();
                    for (k, keep) in m[d].iter_mut().enumerate() {
                        *keep = *keep && split.goes_left(grids[d][k]) == go_left;
                    }
                    m
                };
                let lm = side(true);
                let rm = side(false);
                if lm[d].iter().any(|&b| b) {
                    descend(tree, *left, x, features, grids, rows.clone(), lm, acc);
                }
                if rm[d].iter().any(|&b| b) {
                    descend(tree, *right, x, features, grids, rows, rm, acc);
                }
            } else {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&i| split.goes_left(x.value(*feature, i)));
                descend(tree, *left, x, features, grids, l, masks.clone(), acc);
                descend(tree, *right, x, features, grids, r, masks, acc);
            }
        }
    }
}

fn add_cells(allowed: &[Vec<usize>], grids: &[Vec<f64>], d: usize, flat: usize, w: f64, acc: &mut [f64]) {
    if d == allowed.len() {
        acc[flat] += w;
        return;
    }
    for &k in &allowed[d] {
        add_cells(allowed, grids, d + 1, flat * grids[d].len() + k, w, acc);
    }
}

/// Direct evaluation: copy the data with the features forced and average
/// the forest predictions. Quadratic in work; used as a reference.
pub fn partial_dependence_brute(trees: &[Tree], x: &FeatureMatrix, features: &[usize], point: &[f64]) -> f64 {
    let n = x.n_rows();
    let mut total = 0.0;
    for i in 0..n {
        let get = |f: usize| match features.iter().position(|&g| g == f) {
            Some(d) => point[d],
            None => x.value(f, i),
        };
        total += trees.iter().map(|t| t.predict_with(get)).sum::<f64>() / trees.len() as f64;
    }
    total / n as f64
}

/// Pairwise interaction strength from a two-way partial dependence table.
///
/// For each level `b` of the second covariate the spread (standard
/// deviation) of the partial dependence across the first covariate's grid
/// is computed; the spread of these values across `b` measures how much the
/// first covariate's importance depends on the second. The statistic is the
/// mean of this quantity in both directions, so it is symmetric and zero
/// for additive tables.
pub fn pair_interaction(pd: &PartialDependence) -> f64 {
    assert_eq!(pd.grids.len(), 2, "pair interaction needs a two-way table");
    let (na, nb) = (pd.grids[0].len(), pd.grids[1].len());
    if na < 2 || nb < 2 {
        return 0.0;
    }
    let imp_a_given_b: Vec<f64> = (0..nb)
        .map(|b| sd(&(0..na).map(|a| pd.at(&[a, b])).collect::<Vec<_>>()))
        .collect();
    let imp_b_given_a: Vec<f64> = (0..na)
        .map(|a| sd(&(0..nb).map(|b| pd.at(&[a, b])).collect::<Vec<_>>()))
        .collect();
    0.5 * (sd(&imp_a_given_b) + sd(&imp_b_given_a))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VintMatrix {
    pub names: Vec<String>,
    /// Symmetric; the diagonal carries the permutation importance.
    pub values: Vec<Vec<f64>>,
}

impl VintMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == a)?;
        let j = self.names.iter().position(|n| n == b)?;
        Some(self.values[i][j])
    }

    /// Off-diagonal entries of the upper triangle.
    pub fn off_diagonal(&self) -> Vec<f64> {
        let k = self.names.len();
        (0..k)
            .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
            .map(|(i, j)| self.values[i][j])
            .collect()
    }
}

/// Interaction importance over the listed covariates with the permutation
/// importance on the diagonal.
pub fn interaction_importance(
    trees: &[Tree],
    x: &FeatureMatrix,
    features: &[usize],
    vimp: &[f64],
    grid_size: usize,
) -> VintMatrix {
    let k = features.len();
    let grids: Vec<Vec<f64>> = features.iter().map(|&f| default_grid(x, f, grid_size)).collect();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
    let stats: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let pd = partial_dependence(trees, x, &[features[i], features[j]], &[grids[i].clone(), grids[j].clone()]);
            pair_interaction(&pd)
        })
        .collect();
    let mut values = vec![vec![0.0; k]; k];
    for (i, &f) in features.iter().enumerate() {
        values[i][i] = vimp[f];
    }
    for (&(i, j), &s) in pairs.iter().zip(&stats) {
        values[i][j] = s;
        values[j][i] = s;
    }
    VintMatrix {
        names: features.iter().map(|&f| x.names[f].clone()).collect(),
        values,
    }
}

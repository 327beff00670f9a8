use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::ciforest::CiForest;
use crate::learners::tree::Tree;
use crate::rng::{self, Domain};
use crate::tabular::FeatureMatrix;

fn oob_mse(tree: &Tree, x: &FeatureMatrix, phi: &[f64], oob: &[usize]) -> f64 {
    oob.iter().map(|&i| (phi[i] - tree.predict_row(x, i)).powi(2)).sum::<f64>() / oob.len() as f64
}

/// Out-of-bag permutation importance per covariate.
///
/// For every tree and covariate the covariate's values are shuffled among
/// the tree's out-of-bag rows (stream keyed by tree, covariate and repeat),
/// and the increase in out-of-bag squared error is averaged over trees and
/// repeats. A tree that never splits on a covariate contributes exactly 0.
pub fn permutation_importance(forest: &CiForest, x: &FeatureMatrix, phi: &[f64], n_repeats: usize, seed: u64) -> Vec<f64> {
    let p = x.n_features();
    let n_trees = forest.trees.len();
    if n_trees == 0 || n_repeats == 0 {
        return vec![0.0; p];
    }
    let per_tree: Vec<Vec<f64>> = forest
        .trees
        .par_iter()
        .zip(&forest.in_bag)
        .enumerate()
        .map(|(t, (tree, counts))| {
            let mut out = vec![0.0; p];
            let oob: Vec<usize> = (0..counts.len()).filter(|&i| counts[i] == 0).collect();
            if oob.is_empty() || tree.is_leaf_only() {
                return out;
            }
            let base = oob_mse(tree, x, phi, &oob);
            let mut values = Vec::with_capacity(oob.len());
            for (j, slot) in out.iter_mut().enumerate() {
                if !tree.uses_feature(j) {
                    continue;
                }
                let mut acc = 0.0;
                for r in 0..n_repeats {
                    values.clear();
                    values.extend(oob.iter().map(|&i| x.value(j, i)));
                    values.shuffle(&mut rng::stream(seed, Domain::Vimp, &[t as u64, j as u64, r as u64]));
                    let mse = oob
                        .iter()
                        .zip(&values)
                        .map(|(&i, &v)| {
                            let pred = tree.predict_with(|f| if f == j { v } else { x.value(f, i) });
                            (phi[i] - pred).powi(2)
                        })
                        .sum::<f64>()
                        / oob.len() as f64;
                    acc += mse - base;
                }
                *slot = acc / n_repeats as f64;
            }
            out
        })
        .collect();
    (0..p)
        .map(|j| per_tree.iter().map(|v| v[j]).sum::<f64>() / n_trees as f64)
        .collect()
}

use serde::{Deserialize, Serialize};

use super::tree::{grow_cart_presorted, presort, CartParams, Tree};
use crate::tabular::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostingParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for BoostingParams {
    fn default() -> Self {
        BoostingParams {
            n_rounds: 200,
            learning_rate: 0.05,
            max_depth: 3,
            min_leaf: 10,
        }
    }
}

/// Squared-error gradient boosting: stagewise CART fits to residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedTrees {
    pub init: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
}

pub fn fit_boosting(x: &FeatureMatrix, y: &[f64], params: &BoostingParams, _seed: u64) -> BoostedTrees {
    let n = x.n_rows();
    let init = if n == 0 { 0.0 } else { y.iter().sum::<f64>() / n as f64 };
    let mut pred = vec![init; n];
    let cart = CartParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
        mtry: None,
    };
    let order = presort(x);
    let mut trees = Vec::with_capacity(params.n_rounds);
    let mut residual = vec![0.0; n];
    for _ in 0..params.n_rounds {
        for i in 0..n {
            residual[i] = y[i] - pred[i];
        }
        let tree = grow_cart_presorted(x, &residual, &order, &cart);
        for (i, p) in pred.iter_mut().enumerate() {
            *p += params.learning_rate * tree.predict_row(x, i);
        }
        trees.push(tree);
    }
    BoostedTrees {
        init,
        learning_rate: params.learning_rate,
        trees,
    }
}

impl BoostedTrees {
    pub fn predict_row(&self, x: &FeatureMatrix, row: usize) -> f64 {
        self.init + self.learning_rate * self.trees.iter().map(|t| t.predict_row(x, row)).sum::<f64>()
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Vec<f64> {
        (0..x.n_rows()).map(|i| self.predict_row(x, i)).collect()
    }
}

//! Which covariates drive the pseudo-outcomes: a conditional-inference
//! forest on `(X, phi)`, out-of-bag permutation importance, partial
//! dependence interaction importance and bootstrap selection stability.

pub mod ciforest;
pub mod pdp;
pub mod stability;
pub mod vimp;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use ciforest::{fit_ciforest, CiForest, CiForestParams};
pub use pdp::{default_grid, interaction_importance, pair_interaction, partial_dependence, PartialDependence, VintMatrix};
pub use stability::nogueira_stability;
pub use vimp::permutation_importance;

use crate::error::{Result, WatchError};
use crate::learners::forest::{bootstrap_counts, rows_from_counts};
use crate::rng::{self, Domain};
use crate::tabular::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImportanceConfig {
    pub forest: CiForestParams,
    pub n_repeats: usize,
    pub top_k: usize,
    pub grid_size: usize,
    pub bootstrap_reps: usize,
}

impl Default for ImportanceConfig {
    fn default() -> Self {
        ImportanceConfig {
            forest: CiForestParams::default(),
            n_repeats: 5,
            top_k: 10,
            grid_size: pdp::DEFAULT_GRID_SIZE,
            bootstrap_reps: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub covariates: Vec<String>,
    pub vimp: Vec<f64>,
    /// Covariates by decreasing importance, ties by name.
    pub ranking: Vec<String>,
    pub vint: VintMatrix,
    pub bootstrap_vimp: Vec<Vec<f64>>,
    /// Undefined (null) when every run selects none or all covariates.
    pub stability: Option<f64>,
    pub top_k: usize,
}

impl ImportanceReport {
    /// 1-based rank of a covariate.
    pub fn rank_of(&self, name: &str) -> Option<usize> {
        self.ranking.iter().position(|n| n == name).map(|r| r + 1)
    }
}

/// Indices ordered by decreasing score, ties by name.
pub fn rank_order(names: &[String], scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..names.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then_with(|| names[a].cmp(&names[b])));
    order
}

fn selection(names: &[String], scores: &[f64], top_k: usize) -> Vec<bool> {
    let mut sel = vec![false; names.len()];
    for f in rank_order(names, scores).into_iter().take(top_k) {
        sel[f] = true;
    }
    sel
}

/// Refit forest and importance on `b_reps` bootstrap resamples; run `b`
/// resamples rows with stream `(seed, b)`. Returns the `B x p` importance
/// matrix and the stability of the top-`k` selections.
pub fn bootstrap_stability(
    x: &FeatureMatrix,
    phi: &[f64],
    b_reps: usize,
    config: &ImportanceConfig,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, Option<f64>)> {
    if b_reps < 2 {
        return Err(WatchError::Config("bootstrap stability needs at least 2 runs".into()));
    }
    let n = x.n_rows();
    let runs: Vec<Vec<f64>> = (0..b_reps)
        .into_par_iter()
        .map(|b| {
            let run_seed = rng::derive_seed(seed, Domain::Bootstrap, &[b as u64]);
            let rows = rows_from_counts(&bootstrap_counts(n, &mut rng::stream(run_seed, Domain::Bootstrap, &[])));
            let xb = x.select_rows(&rows);
            let pb: Vec<f64> = rows.iter().map(|&i| phi[i]).collect();
            let forest = fit_ciforest(&xb, &pb, &config.forest, run_seed);
            permutation_importance(&forest, &xb, &pb, config.n_repeats, run_seed)
        })
        .collect();
    let z: Vec<Vec<bool>> = runs.iter().map(|v| selection(&x.names, v, config.top_k)).collect();
    Ok((runs, nogueira_stability(&z)))
}

/// Forest, importance, ranking and interaction importance without the
/// bootstrap part.
pub fn importance_core(x: &FeatureMatrix, phi: &[f64], config: &ImportanceConfig, seed: u64) -> Result<(CiForest, ImportanceReport)> {
    if phi.len() != x.n_rows() {
        return Err(WatchError::Data("pseudo-outcomes and covariates differ in length".into()));
    }
    if x.n_features() == 0 {
        return Err(WatchError::Data("no covariates to rank".into()));
    }
    let forest = fit_ciforest(x, phi, &config.forest, seed);
    let vimp = permutation_importance(&forest, x, phi, config.n_repeats, seed);
    let order = rank_order(&x.names, &vimp);
    let top: Vec<usize> = order.iter().copied().take(config.top_k).collect();
    let vint = interaction_importance(&forest.trees, x, &top, &vimp, config.grid_size);
    let report = ImportanceReport {
        covariates: x.names.clone(),
        ranking: order.iter().map(|&j| x.names[j].clone()).collect(),
        vimp,
        vint,
        bootstrap_vimp: Vec::new(),
        stability: None,
        top_k: config.top_k,
    };
    Ok((forest, report))
}

/// Full importance analysis including bootstrap stability (skipped when
/// `config.bootstrap_reps < 2`).
pub fn analyze_importance(x: &FeatureMatrix, phi: &[f64], config: &ImportanceConfig, seed: u64) -> Result<ImportanceReport> {
    let (_, mut report) = importance_core(x, phi, config, seed)?;
    if config.bootstrap_reps >= 2 {
        let (runs, stability) = bootstrap_stability(x, phi, config.bootstrap_reps, config, seed)?;
        report.bootstrap_vimp = runs;
        report.stability = stability;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranking_ties_by_name() {
        let names: Vec<String> = ["b", "a", "c"].iter().map(|s| s.to_string()).collect();
        assert_eq!(rank_order(&names, &[1.0, 1.0, 2.0]), vec![2, 1, 0]);
    }

    #[test]
    fn dominant_covariate_ranks_first() {
        let n = 200;
        let cols: Vec<Vec<f64>> = (0..4).map(|j| (0..n).map(|i| ((i * (7 + 6 * j) + j) % 41) as f64).collect()).collect();
        let phi = cols[2].clone();
        let x = FeatureMatrix::from_columns(cols);
        let cfg = ImportanceConfig {
            forest: CiForestParams { n_trees: 30, ..Default::default() },
            top_k: 3,
            bootstrap_reps: 0,
            ..Default::default()
        };
        let (_, r) = importance_core(&x, &phi, &cfg, 1).unwrap();
        assert_eq!(r.ranking[0], "x3");
        assert!(r.vimp[2] > 0.0);
        let k = r.vint.names.len();
        for i in 0..k {
            for j in 0..k {
                assert_eq!(r.vint.values[i][j], r.vint.values[j][i]);
            }
            let f = x.index_of(&r.vint.names[i]).unwrap();
            assert_eq!(r.vint.values[i][i], r.vimp[f]);
        }
    }
}

//! Cross-validated stacking: out-of-fold base predictions combined by
//! least squares over the probability simplex.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{fit, LearnerSpec, Model, Task};
use crate::error::{Result, WatchError};
use crate::rng::{self, Domain};
use crate::tabular::FeatureMatrix;

const MAX_ITER: usize = 200_000;
const WEIGHT_TOL: f64 = 1e-10;
/// Relative suboptimality at which the solver stops.
const GAP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedModel {
    pub base: Vec<Model>,
    pub weights: Vec<f64>,
    /// Index into the requested learner list for each retained base model.
    pub learner_index: Vec<usize>,
    /// Out-of-fold mean squared error per retained base learner.
    pub cv_mse: Vec<f64>,
    /// Out-of-fold mean squared error of the weighted combination.
    pub stacked_cv_mse: f64,
    /// Learners dropped because fitting failed, with the reason.
    pub dropped: Vec<(usize, String)>,
}

impl StackedModel {
    pub fn predict(&self, x: &FeatureMatrix) -> Vec<f64> {
        let mut out = vec![0.0; x.n_rows()];
        for (m, &w) in self.base.iter().zip(&self.weights) {
            if w == 0.0 {
                continue;
            }
            for (o, p) in out.iter_mut().zip(m.predict(x)) {
                *o += w * p;
            }
        }
        out
    }
}

/// Euclidean projection onto `{w >= 0, sum w = 1}`.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cum += uk;
        let t = (cum - 1.0) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

fn objective(gram: &DMatrix<f64>, cross: &DVector<f64>, w: &DVector<f64>) -> f64 {
    (w.transpose() * gram * w)[(0, 0)] - 2.0 * cross.dot(w)
}

/// Minimize `||y - Z w||^2` over the simplex, `z` given column-wise.
///
/// Accelerated projected gradient from the uniform vector. Starting at the
/// barycenter and using symmetric updates keeps exchangeable columns at
/// equal weight, so exact ties resolve to uniform weights on the tied set.
pub fn simplex_least_squares(z: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let m = z.len();
    if m == 1 {
        return vec![1.0];
    }
    let gram = DMatrix::from_fn(m, m, |a, b| z[a].iter().zip(&z[b]).map(|(u, v)| u * v).sum());
    let cross = DVector::from_fn(m, |a, _| z[a].iter().zip(y).map(|(u, v)| u * v).sum());
    let top: f64 = SymmetricEigen::new(gram.clone()).eigenvalues.max();
    let lip = 2.0 * top.max(f64::MIN_POSITIVE);
    let step = 1.0 / lip;

    let gap_tol = GAP_TOL * (1.0 + gram.trace());
    let mut w = DVector::from_element(m, 1.0 / m as f64);
    let mut v = w.clone();
    let mut t = 1.0f64;
    for _ in 0..MAX_ITER {
        let grad = 2.0 * (&gram * &v - &cross);
        let next = DVector::from_vec(project_simplex((&v - step * grad).as_slice()));
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let delta = &next - &w;
        let moved = delta.amax();
        v = &next + ((t - 1.0) / t_next) * &delta;
        // Restart momentum when the objective goes up.
        if objective(&gram, &cross, &next) > objective(&gram, &cross, &w) {
            v = next.clone();
            t = 1.0;
        } else {
            t = t_next;
        }
        w = next;
        // Frank-Wolfe gap: an upper bound on the objective's distance from
        // its minimum over the simplex.
        let g = 2.0 * (&gram * &w - &cross);
        let gap = g.dot(&w) - g.min();
        if moved < WEIGHT_TOL || gap <= gap_tol {
            break;
        }
    }

    let mut best = objective(&gram, &cross, &w);
    let mut out: Vec<f64> = w.iter().copied().collect();
    for k in 0..m {
        let val = gram[(k, k)] - 2.0 * cross[k];
        if val < best - 1e-12 * (1.0 + best.abs()) {
            best = val;
            out = (0..m).map(|j| f64::from(j == k)).collect();
        }
    }
    out
}

/// Random fold labels `0..k` balanced by position after a seeded shuffle.
pub(crate) fn fold_labels(n: usize, k: usize, seed: u64, domain: Domain) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, domain, &[]));
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % k;
    }
    fold
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>() / a.len() as f64
}

/// Fit each base learner out-of-fold, weight them on the simplex, and refit
/// every retained learner on all rows.
pub fn fit_stacked(
    specs: &[LearnerSpec],
    x: &FeatureMatrix,
    y: &[f64],
    task: Task,
    cv_folds: usize,
    seed: u64,
) -> Result<StackedModel> {
    if specs.is_empty() {
        return Err(WatchError::Config("stacking needs at least one learner".into()));
    }
    let n = x.n_rows();
    if n < 2 {
        return Err(WatchError::Data("stacking needs at least two rows".into()));
    }
    let k = cv_folds.clamp(2, n);
    let fold = fold_labels(n, k, seed, Domain::StackFolds);

    let mut columns = Vec::new();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    'learner: for (l, spec) in specs.iter().enumerate() {
        let mut oof = vec![0.0; n];
        for f in 0..k {
            let train: Vec<usize> = (0..n).filter(|&i| fold[i] != f).collect();
            let test: Vec<usize> = (0..n).filter(|&i| fold[i] == f).collect();
            let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let sub_seed = rng::derive_seed(seed, Domain::StackFolds, &[l as u64, f as u64]);
            match fit(spec, &x.select_rows(&train), &ytr, task, sub_seed) {
                Ok(model) => {
                    let pred = model.predict(&x.select_rows(&test));
                    if pred.iter().any(|v| !v.is_finite()) {
                        dropped.push((l, "non-finite out-of-fold predictions".to_string()));
                        continue 'learner;
                    }
                    for (&i, p) in test.iter().zip(pred) {
                        oof[i] = p;
                    }
                }
                Err(e) => {
                    dropped.push((l, e.to_string()));
                    continue 'learner;
                }
            }
        }
        columns.push(oof);
        kept.push(l);
    }
    if kept.is_empty() {
        return Err(WatchError::Numerical("every base learner failed to fit".into()));
    }

    let weights = simplex_least_squares(&columns, y);
    let cv_mse: Vec<f64> = columns.iter().map(|c| mse(c, y)).collect();
    let combined: Vec<f64> = (0..n).map(|i| columns.iter().zip(&weights).map(|(c, w)| w * c[i]).sum()).collect();
    let stacked_cv_mse = mse(&combined, y);

    let mut base = Vec::with_capacity(kept.len());
    for &l in &kept {
        base.push(fit(&specs[l], x, y, task, rng::derive_seed(seed, Domain::StackFolds, &[l as u64, u64::MAX]))?);
    }
    Ok(StackedModel {
        base,
        weights,
        learner_index: kept,
        cv_mse,
        stacked_cv_mse,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_lands_on_simplex() {
        let w = project_simplex(&[0.3, -1.0, 2.5]);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(w, vec![0.0, 0.0, 1.0]);
        let inside = project_simplex(&[0.2, 0.3, 0.5]);
        for (a, b) in inside.iter().zip([0.2, 0.3, 0.5]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_learner_gets_full_weight() {
        assert_eq!(simplex_least_squares(&[vec![1.0, 2.0]], &[0.0, 5.0]), vec![1.0]);
    }

    #[test]
    fn duplicate_columns_split_evenly() {
        let c = vec![1.0, 2.0, 3.0, 4.0];
        let w = simplex_least_squares(&[c.clone(), c.clone(), vec![0.0, 0.0, 1.0, 0.0]], &[1.0, 2.0, 3.0, 4.2]);
        assert!((w[0] - w[1]).abs() < 1e-9, "{w:?}");
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

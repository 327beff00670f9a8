//! L1-penalized least squares by cyclic coordinate descent.
//!
//! Columns are standardized internally (population standard deviation) and
//! the response centered, so the penalty applies to standardized slopes:
//!
//! `(1 / 2n) * ||y - b0 - Z b||^2 + lambda * ||b||_1`
//!
//! Fitted coefficients are reported on the original column scale.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WatchError};
use crate::rng::{self, Domain};
use crate::tabular::DesignMatrix;

pub const TOLERANCE: f64 = 1e-7;
pub const MAX_SWEEPS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LassoParams {
    /// Explicit penalty grid; when empty a log-spaced grid from the smallest
    /// all-zero penalty down to `lambda_min_ratio` of it is used.
    pub lambda_grid: Vec<f64>,
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
    pub cv_folds: usize,
}

impl Default for LassoParams {
    fn default() -> Self {
        LassoParams {
            lambda_grid: Vec::new(),
            n_lambda: 50,
            lambda_min_ratio: 1e-3,
            cv_folds: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub labels: Vec<String>,
    pub lambda: f64,
}

impl LassoModel {
    pub fn predict(&self, design: &DesignMatrix) -> Vec<f64> {
        let mut out = vec![self.intercept; design.n_rows];
        for (col, &b) in design.columns.iter().zip(&self.coefficients) {
            if b != 0.0 {
                for (o, v) in out.iter_mut().zip(col) {
                    *o += b * v;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPoint {
    pub lambda: f64,
    pub mean_mse: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    pub model: LassoModel,
    pub cv: Vec<CvPoint>,
    pub lambda_min: f64,
}

struct Standardized {
    z: Vec<Vec<f64>>,
    means: Vec<f64>,
    scales: Vec<f64>,
    y_mean: f64,
    r: Vec<f64>,
    n: usize,
}

fn standardize(columns: &[Vec<f64>], rows: &[usize], y: &[f64]) -> Standardized {
    let n = rows.len();
    let nf = n as f64;
    let mut z = Vec::with_capacity(columns.len());
    let mut means = Vec::with_capacity(columns.len());
    let mut scales = Vec::with_capacity(columns.len());
    for col in columns {
        let m = rows.iter().map(|&i| col[i]).sum::<f64>() / nf;
        let var = rows.iter().map(|&i| (col[i] - m).powi(2)).sum::<f64>() / nf;
        let s = var.sqrt();
        let scale = if s > 1e-12 * (1.0 + m.abs()) { s } else { 0.0 };
        z.push(if scale > 0.0 {
            rows.iter().map(|&i| (col[i] - m) / scale).collect()
        } else {
            vec![0.0; n]
        });
        means.push(m);
        scales.push(scale);
    }
    let y_mean = rows.iter().map(|&i| y[i]).sum::<f64>() / nf;
    let r = rows.iter().map(|&i| y[i] - y_mean).collect();
    Standardized {
        z,
        means,
        scales,
        y_mean,
        r,
        n,
    }
}

fn soft_threshold(v: f64, lambda: f64) -> f64 {
    if v > lambda {
        v - lambda
    } else if v < -lambda {
        v + lambda
    } else {
        0.0
    }
}

impl Standardized {
    fn lambda_max(&self) -> f64 {
        let nf = self.n as f64;
        self.z
            .iter()
            .map(|zj| zj.iter().zip(&self.r).map(|(a, b)| a * b).sum::<f64>().abs() / nf)
            .fold(0.0, f64::max)
    }

    /// Coordinate descent from warm start `b`; `resid` must equal
    /// `r - Z b` on entry and is kept in sync. Full sweeps alternate with
    /// sweeps over the nonzero coefficients only; convergence is declared
    /// on a full sweep.
    fn descend(&self, lambda: f64, b: &mut [f64], resid: &mut [f64]) {
        let mut sweeps = 0;
        while sweeps < MAX_SWEEPS {
            sweeps += 1;
            if self.sweep(lambda, b, resid, false) < TOLERANCE {
                break;
            }
            while sweeps < MAX_SWEEPS {
                sweeps += 1;
                if self.sweep(lambda, b, resid, true) < TOLERANCE {
                    break;
                }
            }
        }
    }

    /// One pass of coordinate updates; returns the largest change.
    fn sweep(&self, lambda: f64, b: &mut [f64], resid: &mut [f64], active_only: bool) -> f64 {
        let nf = self.n as f64;
        let mut max_change = 0.0f64;
        for (j, zj) in self.z.iter().enumerate() {
            if self.scales[j] == 0.0 || (active_only && b[j] == 0.0) {
                continue;
            }
            let old = b[j];
            let rho = zj.iter().zip(resid.iter()).map(|(a, r)| a * r).sum::<f64>() / nf + old;
            let new = soft_threshold(rho, lambda);
            if new != old {
                let d = new - old;
                for (r, a) in resid.iter_mut().zip(zj) {
                    *r -= d * a;
                }
                b[j] = new;
                max_change = max_change.max(d.abs());
            }
        }
        max_change
    }

    fn to_model(&self, b: &[f64], lambda: f64, labels: &[String]) -> LassoModel {
        let coefficients: Vec<f64> = b
            .iter()
            .zip(&self.scales)
            .map(|(bj, s)| if *s > 0.0 { bj / s } else { 0.0 })
            .collect();
        let intercept = self.y_mean - coefficients.iter().zip(&self.means).map(|(c, m)| c * m).sum::<f64>();
        LassoModel {
            intercept,
            coefficients,
            labels: labels.to_vec(),
            lambda,
        }
    }

    /// Solutions along a descending penalty path (warm-started).
    fn path(&self, lambdas: &[f64]) -> Vec<Vec<f64>> {
        let p = self.z.len();
        let mut b = vec![0.0; p];
        let mut resid = self.r.clone();
        lambdas
            .iter()
            .map(|&l| {
                self.descend(l, &mut b, &mut resid);
                b.clone()
            })
            .collect()
    }
}

fn check_inputs(design: &DesignMatrix, y: &[f64]) -> Result<()> {
    if y.len() != design.n_rows {
        return Err(WatchError::Data("response length does not match design".into()));
    }
    if design.n_rows < 2 {
        return Err(WatchError::Data("lasso needs at least two rows".into()));
    }
    if y.iter().any(|v| !v.is_finite()) || design.columns.iter().flatten().any(|v| !v.is_finite()) {
        return Err(WatchError::Numerical("lasso inputs must be finite".into()));
    }
    Ok(())
}

/// Solve at a single fixed penalty on all rows.
pub fn fit_lasso_fixed(design: &DesignMatrix, y: &[f64], lambda: f64) -> Result<LassoModel> {
    check_inputs(design, y)?;
    let rows: Vec<usize> = (0..design.n_rows).collect();
    let st = standardize(&design.columns, &rows, y);
    let b = st.path(&[lambda]).pop().expect("one lambda");
    Ok(st.to_model(&b, lambda, &design.labels))
}

/// Smallest penalty at which every standardized slope is zero.
pub fn lambda_max(design: &DesignMatrix, y: &[f64]) -> f64 {
    let rows: Vec<usize> = (0..design.n_rows).collect();
    standardize(&design.columns, &rows, y).lambda_max()
}

/// Lasso with the penalty chosen by K-fold cross-validated MSE and the
/// one-standard-error rule.
pub fn fit_lasso(design: &DesignMatrix, y: &[f64], params: &LassoParams, seed: u64) -> Result<LassoFit> {
    check_inputs(design, y)?;
    let n = design.n_rows;
    let all: Vec<usize> = (0..n).collect();
    let full = standardize(&design.columns, &all, y);

    let mut lambdas: Vec<f64> = if params.lambda_grid.is_empty() {
        let top = full.lambda_max();
        if top <= 0.0 {
            vec![0.0]
        } else {
            let k = params.n_lambda.max(2);
            (0..k)
                .map(|i| top * params.lambda_min_ratio.powf(i as f64 / (k - 1) as f64))
                .collect()
        }
    } else {
        params.lambda_grid.clone()
    };
    lambdas.sort_by(|a, b| b.total_cmp(a));
    lambdas.dedup();

    let k = params.cv_folds.clamp(2, n);
    let mut order = all.clone();
    order.shuffle(&mut rng::stream(seed, Domain::LassoFolds, &[]));
    let mut fold_of = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % k;
    }

    let mut fold_mse = vec![vec![0.0; lambdas.len()]; k];
    for (f, mse_row) in fold_mse.iter_mut().enumerate() {
        let train: Vec<usize> = all.iter().copied().filter(|&i| fold_of[i] != f).collect();
        let test: Vec<usize> = all.iter().copied().filter(|&i| fold_of[i] == f).collect();
        let st = standardize(&design.columns, &train, y);
        for (l, b) in st.path(&lambdas).iter().enumerate() {
            let m = st.to_model(b, lambdas[l], &design.labels);
            let sse: f64 = test
                .iter()
                .map(|&i| {
                    let pred = m.intercept
                        + design.columns.iter().zip(&m.coefficients).map(|(c, bj)| bj * c[i]).sum::<f64>();
                    (y[i] - pred).powi(2)
                })
                .sum();
            mse_row[l] = sse / test.len() as f64;
        }
    }

    let cv: Vec<CvPoint> = lambdas
        .iter()
        .enumerate()
        .map(|(l, &lambda)| {
            let vals: Vec<f64> = fold_mse.iter().map(|r| r[l]).collect();
            let mean = crate::stats::mean(&vals);
            let se = crate::stats::sd(&vals) / (k as f64).sqrt();
            CvPoint {
                lambda,
                mean_mse: mean,
                se: if se.is_finite() { se } else { 0.0 },
            }
        })
        .collect();
    let best = cv
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.mean_mse.total_cmp(&b.1.mean_mse).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .expect("non-empty grid");
    let bound = cv[best].mean_mse + cv[best].se;
    // Grid is descending, so the first point under the bound is the largest
    // penalty within one standard error.
    let chosen = cv.iter().position(|c| c.mean_mse <= bound).unwrap_or(best);

    let b = full.path(&lambdas[..=chosen]).pop().expect("non-empty path");
    Ok(LassoFit {
        model: full.to_model(&b, lambdas[chosen], &design.labels),
        cv,
        lambda_min: lambdas[best],
    })
}

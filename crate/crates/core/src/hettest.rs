//! Global permutation test of independence between the pseudo-outcomes and
//! the covariates, with the surprise-value and verbal evidence scale.

use std::fmt;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WatchError};
use crate::rng::{self, Domain};
use crate::tabular::{Feature, FeatureMatrix};

/// Standardized linear association between one covariate and a score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearStat {
    /// Absolute standardized statistic (max over levels for categoricals).
    pub z: f64,
    /// Number of standardized components the maximum was taken over.
    pub n_components: usize,
}

/// Standardized statistic over the rows in `rows` (duplicates allowed).
///
/// Continuous `x`: `|sum (x - mean x)(phi - mean phi)| / sqrt(Sxx * Sphiphi / (n - 1))`,
/// the linear statistic divided by its permutation standard deviation.
/// Categorical `x`: the same standardization applied to each level
/// indicator, combined by the maximum absolute value. Zero variance on
/// either side yields 0.
pub fn linear_statistic_rows(x: &Feature, phi: &[f64], rows: &[usize]) -> LinearStat {
    let n = rows.len();
    let zero = LinearStat { z: 0.0, n_components: 1 };
    if n < 2 {
        return zero;
    }
    let nf = n as f64;
    let phi_mean = rows.iter().map(|&i| phi[i]).sum::<f64>() / nf;
    let s_pp: f64 = rows.iter().map(|&i| (phi[i] - phi_mean).powi(2)).sum();
    if s_pp <= 1e-300 {
        return zero;
    }
    match x {
        Feature::Continuous(v) => {
            let x_mean = rows.iter().map(|&i| v[i]).sum::<f64>() / nf;
            let mut s_xx = 0.0;
            let mut s_xp = 0.0;
            for &i in rows {
                let dx = v[i] - x_mean;
                s_xx += dx * dx;
                s_xp += dx * (phi[i] - phi_mean);
            }
            if s_xx <= 1e-300 * (1.0 + x_mean * x_mean) {
                return zero;
            }
            LinearStat {
                z: s_xp.abs() / (s_xx * s_pp / (nf - 1.0)).sqrt(),
                n_components: 1,
            }
        }
        Feature::Categorical { codes, levels } => {
            let mut count = vec![0usize; levels.len()];
            let mut sum = vec![0.0; levels.len()];
            for &i in rows {
                count[codes[i] as usize] += 1;
                sum[codes[i] as usize] += phi[i];
            }
            let v_h = s_pp / nf;
            let mut best = 0.0f64;
            let mut present = 0;
            for (&c, &s) in count.iter().zip(&sum) {
                if c == 0 {
                    continue;
                }
                present += 1;
                if c == n {
                    continue;
                }
                let cf = c as f64;
                let var = v_h * cf * (nf - cf) / (nf - 1.0);
                best = best.max((s - cf * phi_mean).abs() / var.sqrt());
            }
            LinearStat {
                z: best,
                // A two-level factor has a single distinct standardized
                // component (both indicators give the same |z|).
                n_components: if present <= 2 { 1 } else { present },
            }
        }
    }
}

pub fn linear_statistic(x: &Feature, phi: &[f64]) -> f64 {
    let rows: Vec<usize> = (0..phi.len()).collect();
    linear_statistic_rows(x, phi, &rows).z
}

/// Verbal summary of the evidence against homogeneity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Verbal {
    Low,
    Moderate,
    Noteworthy,
    Strong,
    VeryStrong,
}

impl Verbal {
    pub fn label(self) -> &'static str {
        match self {
            Verbal::Low => "low",
            Verbal::Moderate => "moderate",
            Verbal::Noteworthy => "noteworthy",
            Verbal::Strong => "strong",
            Verbal::VeryStrong => "very strong",
        }
    }
}

impl fmt::Display for Verbal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Map a p-value to the verbal scale. Boundaries belong to the weaker
/// category's upper interval end: `[0.25, 1]` Low, `[0.063, 0.25)` Moderate,
/// `[0.008, 0.063)` Noteworthy, `[0.001, 0.008)` Strong, below that
/// VeryStrong.
pub fn verbal_category(p: f64) -> Result<Verbal> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(WatchError::Numerical(format!("p-value {p} outside (0, 1]")));
    }
    Ok(if p >= 0.25 {
        Verbal::Low
    } else if p >= 0.063 {
        Verbal::Moderate
    } else if p >= 0.008 {
        Verbal::Noteworthy
    } else if p >= 0.001 {
        Verbal::Strong
    } else {
        Verbal::VeryStrong
    })
}

/// Surprise value in bits, `-log2(p)`.
pub fn surprise(p: f64) -> f64 {
    let s = -p.log2();
    if s == 0.0 {
        0.0
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateStatistic {
    pub name: String,
    pub statistic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HetTestResult {
    pub statistic: f64,
    pub per_covariate: Vec<CovariateStatistic>,
    pub p_value: f64,
    pub surprise: f64,
    pub verbal: Verbal,
    pub n_permutations: usize,
    pub seed: u64,
}

/// Precomputed per-covariate weights so a permuted score costs one pass.
enum Scorer {
    Linear(Vec<f64>),
    Levels { codes: Vec<u32>, counts: Vec<f64>, scale: Vec<f64> },
    Zero,
}

impl Scorer {
    fn new(x: &Feature, s_pp: f64) -> Scorer {
        let n = x.len();
        let nf = n as f64;
        if s_pp <= 1e-300 || n < 2 {
            return Scorer::Zero;
        }
        match x {
            Feature::Continuous(v) => {
                let m = v.iter().sum::<f64>() / nf;
                let s_xx: f64 = v.iter().map(|a| (a - m).powi(2)).sum();
                if s_xx <= 1e-300 * (1.0 + m * m) {
                    return Scorer::Zero;
                }
                let denom = (s_xx * s_pp / (nf - 1.0)).sqrt();
                Scorer::Linear(v.iter().map(|a| (a - m) / denom).collect())
            }
            Feature::Categorical { codes, levels } => {
                let mut counts = vec![0.0; levels.len()];
                for &c in codes {
                    counts[c as usize] += 1.0;
                }
                let v_h = s_pp / nf;
                let scale = counts
                    .iter()
                    .map(|&c| {
                        if c == 0.0 || c == nf {
                            0.0
                        } else {
                            1.0 / (v_h * c * (nf - c) / (nf - 1.0)).sqrt()
                        }
                    })
                    .collect();
                Scorer::Levels {
                    codes: codes.clone(),
                    counts,
                    scale,
                }
            }
        }
    }

    fn score(&self, phi: &[f64], phi_mean: f64, buf: &mut Vec<f64>) -> f64 {
        match self {
            Scorer::Zero => 0.0,
            Scorer::Linear(w) => w.iter().zip(phi).map(|(a, b)| a * b).sum::<f64>().abs(),
            Scorer::Levels { codes, counts, scale } => {
                buf.clear();
                buf.resize(counts.len(), 0.0);
                for (&c, &p) in codes.iter().zip(phi) {
                    buf[c as usize] += p;
                }
                buf.iter()
                    .zip(counts)
                    .zip(scale)
                    .map(|((s, c), k)| (s - c * phi_mean).abs() * k)
                    .fold(0.0, f64::max)
            }
        }
    }
}

/// Max-type statistic over covariates for a given score vector.
fn max_statistic(scorers: &[Scorer], phi: &[f64], phi_mean: f64, buf: &mut Vec<f64>) -> f64 {
    scorers.iter().map(|s| s.score(phi, phi_mean, buf)).fold(0.0, f64::max)
}

/// Permutation test of `phi` independent of the covariates in `x`.
///
/// Permutation `b` shuffles `phi` with stream `(seed, b)` against the intact
/// covariate rows. The p-value counts permuted statistics at least as large
/// as the observed one, with the add-one correction.
pub fn global_test(x: &FeatureMatrix, phi: &[f64], n_permutations: usize, seed: u64) -> Result<HetTestResult> {
    if phi.len() != x.n_rows() {
        return Err(WatchError::Data("pseudo-outcomes and covariates differ in length".into()));
    }
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(WatchError::Numerical("non-finite pseudo-outcome".into()));
    }
    let n = phi.len();
    let phi_mean = crate::stats::mean(phi);
    let s_pp: f64 = phi.iter().map(|v| (v - phi_mean).powi(2)).sum();
    let scorers: Vec<Scorer> = x.features.iter().map(|f| Scorer::new(f, s_pp)).collect();

    let rows: Vec<usize> = (0..n).collect();
    let per_covariate: Vec<CovariateStatistic> = x
        .names
        .iter()
        .zip(&x.features)
        .map(|(name, f)| CovariateStatistic {
            name: name.clone(),
            statistic: linear_statistic_rows(f, phi, &rows).z,
        })
        .collect();
    let observed = max_statistic(&scorers, phi, phi_mean, &mut Vec::new());
    let cutoff = observed - 1e-9 * (1.0 + observed.abs());

    let exceed: usize = (0..n_permutations)
        .into_par_iter()
        .map_init(
            || (phi.to_vec(), Vec::new()),
            |(perm, buf), b| {
                perm.copy_from_slice(phi);
                perm.shuffle(&mut rng::stream(seed, Domain::Permutation, &[b as u64]));
                usize::from(max_statistic(&scorers, perm, phi_mean, buf) >= cutoff)
            },
        )
        .sum();
    let p_value = (1 + exceed) as f64 / (1 + n_permutations) as f64;
    Ok(HetTestResult {
        statistic: observed,
        per_covariate,
        p_value,
        surprise: surprise(p_value),
        verbal: verbal_category(p_value)?,
        n_permutations,
        seed,
    })
}

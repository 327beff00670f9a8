//! Synthetic randomized trials with known treatment effects.
//!
//! Covariates come from a Gaussian copula; treatment is a fair coin; the
//! outcome mean is
//!
//! `mu = 1.38 * (1{X1 = N} - 0.5 * X17) + A * (-0.105 + 0.725 * 1{X14 > 0.25} * 1{X1 = N})`
//!
//! with unit-variance Gaussian noise shared by both potential outcomes.

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WatchError};
use crate::rng::{self, Domain};
use crate::stats::normal_quantile;
use crate::tabular::{write_csv, Column, Dataset, Roles};

pub const BASELINE_COEF: f64 = 1.38;
pub const TAU_BASE: f64 = -0.105;
pub const TAU_SUBGROUP: f64 = 0.725;
pub const X14_CUT: f64 = 0.25;
pub const OUTCOME: &str = "Y";
pub const TREATMENT: &str = "A";

const BLOCK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    PaperHeterogeneous,
    Homogeneous { tau0: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Marginal {
    Normal { mean: f64, sd: f64 },
    Categorical { levels: Vec<String>, probs: Vec<f64> },
}

impl Marginal {
    fn binary(a: &str, b: &str, pa: f64) -> Marginal {
        Marginal::Categorical {
            levels: vec![a.into(), b.into()],
            probs: vec![pa, 1.0 - pa],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Copula {
    Exchangeable { rho: f64 },
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSpec {
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    pub effect: Effect,
    /// One entry per covariate; empty means [`default_marginals`].
    pub marginals: Vec<Marginal>,
    pub copula: Copula,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            n: 500,
            p: 30,
            seed: 0,
            effect: Effect::PaperHeterogeneous,
            marginals: Vec::new(),
            copula: Copula::Exchangeable { rho: 0.2 },
        }
    }
}

/// Default covariate marginals: X1 and X9 binary `{Y, N}`, X5 and X21
/// three-level, X25 binary, everything else standard normal.
pub fn default_marginals(p: usize) -> Vec<Marginal> {
    (1..=p)
        .map(|j| match j {
            1 => Marginal::binary("Y", "N", 0.5),
            5 => Marginal::Categorical {
                levels: vec!["A".into(), "B".into(), "C".into()],
                probs: vec![0.5, 0.3, 0.2],
            },
            9 => Marginal::binary("Y", "N", 0.6),
            21 => Marginal::Categorical {
                levels: vec!["L".into(), "M".into(), "H".into()],
                probs: vec![0.3, 0.4, 0.3],
            },
            25 => Marginal::binary("Y", "N", 0.7),
            _ => Marginal::Normal { mean: 0.0, sd: 1.0 },
        })
        .collect()
}

pub fn covariate_name(j: usize) -> String {
    format!("X{}", j + 1)
}

/// Noise-free outcome mean given the three covariates that enter it.
pub fn true_mu(effect: Effect, x1_is_n: bool, x14: f64, x17: f64, treated: bool) -> f64 {
    let base = BASELINE_COEF * (f64::from(x1_is_n) - 0.5 * x17);
    base + if treated { true_cate(effect, x1_is_n, x14) } else { 0.0 }
}

/// Treatment effect `mu(x, 1) - mu(x, 0)`.
pub fn true_cate(effect: Effect, x1_is_n: bool, x14: f64) -> f64 {
    match effect {
        Effect::PaperHeterogeneous => TAU_BASE + TAU_SUBGROUP * f64::from(x14 > X14_CUT && x1_is_n),
        Effect::Homogeneous { tau0 } => tau0,
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedTrial {
    pub dataset: Dataset,
    pub tau_true: Vec<f64>,
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
    /// Noise-free control-arm mean per row.
    pub mu0: Vec<f64>,
}

impl GeneratedTrial {
    pub fn mu1(&self) -> Vec<f64> {
        self.mu0.iter().zip(&self.tau_true).map(|(a, b)| a + b).collect()
    }
}

fn correlation(spec: &ScenarioSpec) -> Result<DMatrix<f64>> {
    let p = spec.p;
    let m = match &spec.copula {
        Copula::Exchangeable { rho } => DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { *rho }),
        Copula::Matrix(rows) => {
            if rows.len() != p || rows.iter().any(|r| r.len() != p) {
                return Err(WatchError::Config(format!("correlation matrix must be {p} x {p}")));
            }
            DMatrix::from_fn(p, p, |i, j| rows[i][j])
        }
    };
    for i in 0..p {
        if (m[(i, i)] - 1.0).abs() > 1e-12 {
            return Err(WatchError::Config("correlation matrix must have a unit diagonal".into()));
        }
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 {
                return Err(WatchError::Config("correlation matrix must be symmetric".into()));
            }
        }
    }
    Ok(m)
}

/// `L` with `L L^T = C`, from the eigendecomposition; fails when `C` has a
/// clearly negative eigenvalue.
fn copula_factor(c: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(c);
    let min = eig.eigenvalues.min();
    if min < -1e-10 {
        return Err(WatchError::Config(format!(
            "correlation matrix is not positive semidefinite (smallest eigenvalue {min:.3e})"
        )));
    }
    let sqrt = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt))
}

enum Transform {
    Normal(f64, f64),
    /// Ascending latent cutpoints; level `k` when the latent value lies
    /// below cut `k` and above the previous one.
    Cuts(Vec<f64>),
}

fn transforms(marginals: &[Marginal]) -> Result<Vec<Transform>> {
    marginals
        .iter()
        .enumerate()
        .map(|(j, m)| match m {
            Marginal::Normal { mean, sd } => {
                if !(sd.is_finite() && *sd > 0.0 && mean.is_finite()) {
                    return Err(WatchError::Config(format!("{}: invalid normal marginal", covariate_name(j))));
                }
                Ok(Transform::Normal(*mean, *sd))
            }
            Marginal::Categorical { levels, probs } => {
                let total: f64 = probs.iter().sum();
                if levels.len() < 2 || levels.len() != probs.len() || probs.iter().any(|&q| q <= 0.0) || (total - 1.0).abs() > 1e-9 {
                    return Err(WatchError::Config(format!(
                        "{}: categorical marginal needs >= 2 levels with positive probabilities summing to 1",
                        covariate_name(j)
                    )));
                }
                let mut cum = 0.0;
                let cuts = probs[..probs.len() - 1]
                    .iter()
                    .map(|q| {
                        cum += q;
                        normal_quantile(cum)
                    })
                    .collect();
                Ok(Transform::Cuts(cuts))
            }
        })
        .collect()
}

fn validate(spec: &ScenarioSpec, marginals: &[Marginal]) -> Result<()> {
    if spec.n == 0 {
        return Err(WatchError::Config("scenario needs n > 0".into()));
    }
    if marginals.len() != spec.p {
        return Err(WatchError::Config(format!("expected {} marginals, got {}", spec.p, marginals.len())));
    }
    if spec.p < 17 {
        return Err(WatchError::Config("scenario needs at least 17 covariates (X1, X14, X17 enter the outcome)".into()));
    }
    match &marginals[0] {
        Marginal::Categorical { levels, .. } if levels.len() == 2 && levels.iter().any(|l| l == "N") => {}
        _ => return Err(WatchError::Config("X1 must be categorical with levels {Y, N}".into())),
    }
    for j in [13, 16] {
        if !matches!(marginals[j], Marginal::Normal { .. }) {
            return Err(WatchError::Config(format!("{} must be continuous", covariate_name(j))));
        }
    }
    Ok(())
}

/// Row block: covariate cells (continuous value or level code), arm, noise.
struct Block {
    cells: Vec<Vec<f64>>,
    arm: Vec<u32>,
    noise: Vec<f64>,
}

/// Generate a trial. Rows are produced in blocks of 1024, block `b` drawing
/// from stream `(seed, b)`, so output does not depend on thread count.
pub fn generate(spec: &ScenarioSpec) -> Result<GeneratedTrial> {
    let marginals = if spec.marginals.is_empty() {
        default_marginals(spec.p)
    } else {
        spec.marginals.clone()
    };
    validate(spec, &marginals)?;
    let factor = copula_factor(correlation(spec)?)?;
    let tf = transforms(&marginals)?;
    let p = spec.p;
    let n_blocks = spec.n.div_ceil(BLOCK);

    let blocks: Vec<Block> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let rows = BLOCK.min(spec.n - b * BLOCK);
            let mut rng = rng::stream(spec.seed, Domain::Generator, &[b as u64]);
            let mut cells = vec![Vec::with_capacity(rows); p];
            let mut arm = Vec::with_capacity(rows);
            let mut noise = Vec::with_capacity(rows);
            let mut e = vec![0.0; p];
            for _ in 0..rows {
                for v in e.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                for (j, col) in cells.iter_mut().enumerate() {
                    let z: f64 = (0..p).map(|k| factor[(j, k)] * e[k]).sum();
                    col.push(match &tf[j] {
                        Transform::Normal(m, s) => m + s * z,
                        Transform::Cuts(cuts) => cuts.iter().take_while(|&&c| z >= c).count() as f64,
                    });
                }
                arm.push(u32::from(rng.random_bool(0.5)));
                noise.push(rng.sample::<f64, _>(StandardNormal));
            }
            Block { cells, arm, noise }
        })
        .collect();

    let mut cells = vec![Vec::with_capacity(spec.n); p];
    let mut arm = Vec::with_capacity(spec.n);
    let mut noise = Vec::with_capacity(spec.n);
    for blk in blocks {
        for (c, bc) in cells.iter_mut().zip(blk.cells) {
            c.extend(bc);
        }
        arm.extend(blk.arm);
        noise.extend(blk.noise);
    }

    let x1_n_code = match &marginals[0] {
        Marginal::Categorical { levels, .. } => levels.iter().position(|l| l == "N").expect("validated") as f64,
        Marginal::Normal { .. } => unreachable!("validated"),
    };
    let mut mu0 = Vec::with_capacity(spec.n);
    let mut tau = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let is_n = cells[0][i] == x1_n_code;
        mu0.push(true_mu(spec.effect, is_n, cells[13][i], cells[16][i], false));
        tau.push(true_cate(spec.effect, is_n, cells[13][i]));
    }
    let y0: Vec<f64> = mu0.iter().zip(&noise).map(|(m, e)| m + e).collect();
    let y1: Vec<f64> = y0.iter().zip(&tau).map(|(y, t)| y + t).collect();
    let y: Vec<f64> = (0..spec.n).map(|i| if arm[i] == 1 { y1[i] } else { y0[i] }).collect();

    let mut columns: Vec<Column> = cells
        .into_iter()
        .zip(&marginals)
        .enumerate()
        .map(|(j, (vals, m))| match m {
            Marginal::Normal { .. } => Column::from_f64(covariate_name(j), &vals),
            Marginal::Categorical { levels, .. } => {
                Column::categorical(covariate_name(j), levels.clone(), vals.iter().map(|&v| Some(v as u32)).collect())
            }
        })
        .collect();
    columns.push(Column::from_f64(OUTCOME, &y));
    columns.push(Column::categorical(
        TREATMENT,
        vec!["0".into(), "1".into()],
        arm.iter().map(|&a| Some(a)).collect(),
    ));
    let roles = Roles {
        outcome: OUTCOME.into(),
        treatment: TREATMENT.into(),
        covariates: (0..p).map(covariate_name).collect(),
    };
    Ok(GeneratedTrial {
        dataset: Dataset::new(columns, roles)?,
        tau_true: tau,
        y0,
        y1,
        mu0,
    })
}

/// Write the trial CSV and the ground-truth sidecar (`row, tau_true, y0, y1`).
pub fn write_trial(trial: &GeneratedTrial, data_path: &Path, truth_path: &Path) -> Result<()> {
    write_csv(&trial.dataset, data_path)?;
    let file = std::fs::File::create(truth_path).map_err(|e| WatchError::io(truth_path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(["row", "tau_true", "y0", "y1"])?;
    for i in 0..trial.tau_true.len() {
        w.write_record([
            i.to_string(),
            trial.tau_true[i].to_string(),
            trial.y0[i].to_string(),
            trial.y1[i].to_string(),
        ])?;
    }
    w.flush().map_err(|e| WatchError::io(truth_path, e))?;
    Ok(())
}

//! DR-learner: treatment-stratified cross-fitting, nuisance estimation and
//! doubly-robust pseudo-outcomes.

use std::io::Write;
use std::path::Path;
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ResultExt, WatchError};
use crate::learners::{self, LearnerSpec, Model, Task};
use crate::rng::{self, Domain};
use crate::tabular::{Dataset, FeatureMatrix, Propensity};

pub const DEFAULT_CLIP: f64 = 0.025;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossFitPlan {
    pub fold_of: Vec<usize>,
    pub k: usize,
    pub seed: u64,
}

impl CrossFitPlan {
    /// Rows outside and inside fold `k`.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.fold_of.len()).partition(|&i| self.fold_of[i] != fold)
    }
}

/// Random K-fold partition stratified by treatment arm.
///
/// Each arm is shuffled on its own stream and dealt round-robin; the treated
/// arm starts where the control arm stopped so overall fold sizes differ by
/// at most one.
pub fn assign_folds(ds: &Dataset, k: usize, seed: u64) -> Result<CrossFitPlan> {
    let a = ds.treatment();
    let mut fold_of = vec![0; a.len()];
    let mut offset = 0;
    for arm in 0..2u8 {
        let mut rows: Vec<usize> = (0..a.len()).filter(|&i| a[i] == arm).collect();
        if k < 2 || k > rows.len() {
            return Err(WatchError::Data(format!(
                "cannot make {k} folds: treatment arm {arm} has {} rows",
                rows.len()
            )));
        }
        rows.shuffle(&mut rng::stream(seed, Domain::Folds, &[u64::from(arm)]));
        for (pos, &i) in rows.iter().enumerate() {
            fold_of[i] = (offset + pos) % k;
        }
        offset = (offset + rows.len()) % k;
    }
    Ok(CrossFitPlan { fold_of, k, seed })
}

/// Learner configuration for the nuisance regressions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NuisanceConfig {
    pub outcome: LearnerSpec,
    /// Used only when the plan's propensity is `Estimated`.
    pub propensity: LearnerSpec,
    pub clip_epsilon: f64,
}

impl Default for NuisanceConfig {
    fn default() -> Self {
        NuisanceConfig {
            outcome: LearnerSpec::default(),
            propensity: LearnerSpec::default(),
            clip_epsilon: DEFAULT_CLIP,
        }
    }
}

/// Inputs shared by every fold.
#[derive(Debug, Clone)]
pub struct NuisanceData {
    pub x: FeatureMatrix,
    pub y: Vec<f64>,
    pub a: Vec<u8>,
}

impl NuisanceData {
    pub fn from_dataset(ds: &Dataset) -> Result<Self> {
        Ok(NuisanceData {
            x: ds.features()?,
            y: ds.outcome(),
            a: ds.treatment(),
        })
    }
}

/// Nuisance predictions on the held-out rows of one fold, in the order of
/// the `test` rows passed in.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldPredictions {
    pub mu0: Vec<f64>,
    pub mu1: Vec<f64>,
    pub pi: Vec<f64>,
}

/// Source of nuisance predictions for a cross-fitting fold.
pub trait NuisanceEstimator: Sync {
    fn fit_predict(&self, data: &NuisanceData, fold: usize, train: &[usize], test: &[usize]) -> Result<FoldPredictions>;
}

#[derive(Debug, Clone, PartialEq)]
pub enum PropensityModel {
    Known(f64),
    Fitted(Model),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedNuisances {
    pub mu0: Model,
    pub mu1: Model,
    pub pi: PropensityModel,
}

impl FittedNuisances {
    pub fn predict(&self, x: &FeatureMatrix) -> FoldPredictions {
        FoldPredictions {
            mu0: self.mu0.predict(x),
            mu1: self.mu1.predict(x),
            pi: match &self.pi {
                PropensityModel::Known(p) => vec![*p; x.n_rows()],
                PropensityModel::Fitted(m) => m.predict(x),
            },
        }
    }
}

/// Fit outcome regressions per arm and the propensity on the rows outside
/// `fold`.
pub fn fit_nuisances(
    data: &NuisanceData,
    plan: &CrossFitPlan,
    fold: usize,
    config: &NuisanceConfig,
    propensity: Propensity,
) -> Result<FittedNuisances> {
    let (train, _) = plan.split(fold);
    fit_on_rows(data, &train, fold, config, propensity, plan.seed)
}

fn fit_on_rows(
    data: &NuisanceData,
    train: &[usize],
    fold: usize,
    config: &NuisanceConfig,
    propensity: Propensity,
    seed: u64,
) -> Result<FittedNuisances> {
    let arm_fit = |arm: u8| -> Result<Model> {
        let rows: Vec<usize> = train.iter().copied().filter(|&i| data.a[i] == arm).collect();
        if rows.is_empty() {
            return Err(WatchError::Data(format!("fold {fold}: treatment arm {arm} absent from training rows")));
        }
        let y: Vec<f64> = rows.iter().map(|&i| data.y[i]).collect();
        let s = rng::derive_seed(seed, Domain::Folds, &[fold as u64, u64::from(arm)]);
        learners::fit(&config.outcome, &data.x.select_rows(&rows), &y, Task::Regression, s)
            .context(format!("fitting outcome model for arm {arm} in fold {fold}"))
    };
    let mu0 = arm_fit(0)?;
    let mu1 = arm_fit(1)?;
    let pi = match propensity {
        Propensity::Known(p) => PropensityModel::Known(p),
        Propensity::Estimated => {
            let a: Vec<f64> = train.iter().map(|&i| f64::from(data.a[i])).collect();
            let s = rng::derive_seed(seed, Domain::Folds, &[fold as u64, 2]);
            PropensityModel::Fitted(
                learners::fit(&config.propensity, &data.x.select_rows(train), &a, Task::Probability, s)
                    .context(format!("fitting propensity model in fold {fold}"))?,
            )
        }
    };
    Ok(FittedNuisances { mu0, mu1, pi })
}

/// Nuisances fitted with the configured learners.
#[derive(Debug, Clone)]
pub struct LearnerNuisances {
    pub config: NuisanceConfig,
    pub propensity: Propensity,
    pub seed: u64,
}

impl NuisanceEstimator for LearnerNuisances {
    fn fit_predict(&self, data: &NuisanceData, fold: usize, train: &[usize], test: &[usize]) -> Result<FoldPredictions> {
        let fitted = fit_on_rows(data, train, fold, &self.config, self.propensity, self.seed)?;
        Ok(fitted.predict(&data.x.select_rows(test)))
    }
}

/// Known nuisance functions supplied per row, bypassing estimation.
#[derive(Debug, Clone)]
pub struct InjectedNuisances {
    pub mu0: Vec<f64>,
    pub mu1: Vec<f64>,
    pub pi: Vec<f64>,
}

impl NuisanceEstimator for InjectedNuisances {
    fn fit_predict(&self, _: &NuisanceData, _: usize, _: &[usize], test: &[usize]) -> Result<FoldPredictions> {
        Ok(FoldPredictions {
            mu0: test.iter().map(|&i| self.mu0[i]).collect(),
            mu1: test.iter().map(|&i| self.mu1[i]).collect(),
            pi: test.iter().map(|&i| self.pi[i]).collect(),
        })
    }
}

/// `(fold, train rows, test rows)` for one nuisance fit.
pub type FoldCall = (usize, Vec<usize>, Vec<usize>);

/// Wraps an estimator and records which rows each fold trained and
/// predicted on.
pub struct RecordingNuisances<E> {
    pub inner: E,
    log: Mutex<Vec<FoldCall>>,
}

impl<E> RecordingNuisances<E> {
    pub fn new(inner: E) -> Self {
        RecordingNuisances {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    /// `(fold, train rows, test rows)` per call, sorted by fold.
    pub fn calls(&self) -> Vec<FoldCall> {
        let mut v = self.log.lock().expect("log lock").clone();
        v.sort_by_key(|c| c.0);
        v
    }
}

impl<E: NuisanceEstimator> NuisanceEstimator for RecordingNuisances<E> {
    fn fit_predict(&self, data: &NuisanceData, fold: usize, train: &[usize], test: &[usize]) -> Result<FoldPredictions> {
        self.log
            .lock()
            .expect("log lock")
            .push((fold, train.to_vec(), test.to_vec()));
        self.inner.fit_predict(data, fold, train, test)
    }
}

/// The doubly-robust pseudo-outcome for one row; `pi` is clipped to
/// `[eps, 1 - eps]` first.
#[inline]
pub fn dr_pseudo_outcome(a: u8, y: f64, pi: f64, mu0: f64, mu1: f64, eps: f64) -> f64 {
    let pi = pi.clamp(eps, 1.0 - eps);
    let af = f64::from(a);
    let mu_a = if a == 1 { mu1 } else { mu0 };
    (af - pi) / (pi * (1.0 - pi)) * (y - mu_a) + mu1 - mu0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoOutcomes {
    pub phi: Vec<f64>,
    pub pi_hat: Vec<f64>,
    pub mu0_hat: Vec<f64>,
    pub mu1_hat: Vec<f64>,
    pub fold: Vec<usize>,
    pub clip_epsilon: f64,
}

impl PseudoOutcomes {
    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn write_csv_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["row", "phi", "pi_hat", "mu0_hat", "mu1_hat", "fold"])?;
        for i in 0..self.len() {
            w.write_record([
                i.to_string(),
                self.phi[i].to_string(),
                self.pi_hat[i].to_string(),
                self.mu0_hat[i].to_string(),
                self.mu1_hat[i].to_string(),
                self.fold[i].to_string(),
            ])?;
        }
        w.flush().map_err(|e| WatchError::io("<pseudo-outcomes>", e))?;
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| WatchError::io(path, e))?;
        self.write_csv_to(std::io::BufWriter::new(f))
    }
}

/// Cross-fitted pseudo-outcomes: every row's nuisances come from a call
/// whose training rows exclude that row's fold.
pub fn pseudo_outcomes(
    ds: &Dataset,
    plan: &CrossFitPlan,
    estimator: &dyn NuisanceEstimator,
    clip_epsilon: f64,
) -> Result<PseudoOutcomes> {
    let data = NuisanceData::from_dataset(ds)?;
    pseudo_outcomes_from(&data, plan, estimator, clip_epsilon)
}

pub fn pseudo_outcomes_from(
    data: &NuisanceData,
    plan: &CrossFitPlan,
    estimator: &dyn NuisanceEstimator,
    clip_epsilon: f64,
) -> Result<PseudoOutcomes> {
    if !(0.0..0.5).contains(&clip_epsilon) {
        return Err(WatchError::Config(format!("clip epsilon {clip_epsilon} outside [0, 0.5)")));
    }
    let n = data.y.len();
    let per_fold: Vec<(Vec<usize>, FoldPredictions)> = (0..plan.k)
        .into_par_iter()
        .map(|f| {
            let (train, test) = plan.split(f);
            let pred = estimator.fit_predict(data, f, &train, &test)?;
            Ok((test, pred))
        })
        .collect::<Result<_>>()?;

    let mut po = PseudoOutcomes {
        phi: vec![0.0; n],
        pi_hat: vec![0.0; n],
        mu0_hat: vec![0.0; n],
        mu1_hat: vec![0.0; n],
        fold: plan.fold_of.clone(),
        clip_epsilon,
    };
    for (test, pred) in per_fold {
        for (k, &i) in test.iter().enumerate() {
            let pi = pred.pi[k].clamp(clip_epsilon, 1.0 - clip_epsilon);
            po.pi_hat[i] = pi;
            po.mu0_hat[i] = pred.mu0[k];
            po.mu1_hat[i] = pred.mu1[k];
            po.phi[i] = dr_pseudo_outcome(data.a[i], data.y[i], pi, pred.mu0[k], pred.mu1[k], clip_epsilon);
        }
    }
    if po.phi.iter().any(|v| !v.is_finite()) {
        return Err(WatchError::Numerical("non-finite pseudo-outcome".into()));
    }
    Ok(po)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AteSummary {
    pub estimate: f64,
    pub se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

/// Mean pseudo-outcome with a normal-approximation 95% interval.
pub fn ate_summary(phi: &[f64]) -> Result<AteSummary> {
    if phi.len() < 2 {
        return Err(WatchError::Data("ATE summary needs at least two rows".into()));
    }
    let estimate = crate::stats::mean(phi);
    let se = crate::stats::sd(phi) / (phi.len() as f64).sqrt();
    Ok(AteSummary {
        estimate,
        se,
        ci_lower: estimate - 1.96 * se,
        ci_upper: estimate + 1.96 * se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{Column, Roles};

    fn trial(a: &[u32]) -> Dataset {
        let n = a.len();
        let cols = vec![
            Column::from_f64("y", &vec![1.0; n]),
            Column::categorical("a", vec!["0".into(), "1".into()], a.iter().map(|&v| Some(v)).collect()),
            Column::from_f64("x", &(0..n).map(|i| i as f64).collect::<Vec<_>>()),
        ];
        Dataset::new(
            cols,
            Roles {
                outcome: "y".into(),
                treatment: "a".into(),
                covariates: vec!["x".into()],
            },
        )
        .unwrap()
    }

    #[test]
    fn folds_balanced_by_arm() {
        let a: Vec<u32> = (0..500).map(|i| (i % 2) as u32).collect();
        let ds = trial(&a);
        let plan = assign_folds(&ds, 5, 9).unwrap();
        for f in 0..5 {
            let rows: Vec<usize> = (0..500).filter(|&i| plan.fold_of[i] == f).collect();
            assert_eq!(rows.len(), 100);
            assert_eq!(rows.iter().filter(|&&i| a[i] == 1).count(), 50);
        }
        assert_eq!(plan, assign_folds(&ds, 5, 9).unwrap());
    }

    #[test]
    fn too_many_folds_for_arm() {
        let a: Vec<u32> = (0..20).map(|i| u32::from(i < 5)).collect();
        assert!(assign_folds(&trial(&a), 6, 0).is_err());
    }

    #[test]
    fn formula_examples() {
        assert_eq!(dr_pseudo_outcome(1, 2.0, 0.5, 0.0, 1.0, DEFAULT_CLIP), 3.0);
        assert_eq!(dr_pseudo_outcome(0, 2.0, 0.5, 1.0, 0.0, DEFAULT_CLIP), -3.0);
        assert_eq!(dr_pseudo_outcome(1, 1.7, 0.5, 0.2, 1.7, DEFAULT_CLIP), 1.5);
    }

    #[test]
    fn propensity_is_clipped() {
        let raw = dr_pseudo_outcome(1, 1.0, 0.0, 0.0, 0.0, 0.025);
        assert!((raw - 1.0 / 0.025).abs() < 1e-12);
    }

    #[test]
    fn ate_examples() {
        let s = ate_summary(&[1.0, -1.0]).unwrap();
        assert_eq!(s.estimate, 0.0);
        assert!((s.se - 1.0).abs() < 1e-12);
        let c = ate_summary(&[2.5; 7]).unwrap();
        assert_eq!((c.estimate, c.se), (2.5, 0.0));
    }
}

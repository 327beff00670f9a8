//! Supervised base learners and stacking, used for the nuisance regressions.

pub mod boosting;
pub mod forest;
pub mod lasso;
pub mod stacking;
pub mod tree;

use serde::{Deserialize, Serialize};

pub use boosting::{fit_boosting, BoostedTrees, BoostingParams};
pub use forest::{default_mtry, fit_forest, Forest, ForestParams};
pub use lasso::{fit_lasso, fit_lasso_fixed, LassoFit, LassoModel, LassoParams};
pub use stacking::{fit_stacked, project_simplex, simplex_least_squares, StackedModel};
pub use tree::{fit_cart, CartParams, Tree};

use crate::error::Result;
use crate::tabular::FeatureMatrix;

pub const PROBABILITY_FLOOR: f64 = 0.01;
pub const PROBABILITY_CEIL: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    /// Squared-error working fit with predictions clipped to `[0.01, 0.99]`.
    Probability,
}

/// Learner choice plus hyperparameters, as written in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LearnerSpec {
    Lasso(LassoParams),
    Tree(CartParams),
    Forest(ForestParams),
    Boosting(BoostingParams),
    Stacked {
        learners: Vec<LearnerSpec>,
        #[serde(default = "default_cv_folds")]
        cv_folds: usize,
    },
}

fn default_cv_folds() -> usize {
    5
}

impl Default for LearnerSpec {
    /// Lasso, random forest and boosting stacked with 5-fold CV.
    fn default() -> Self {
        LearnerSpec::Stacked {
            learners: vec![
                LearnerSpec::Lasso(LassoParams::default()),
                LearnerSpec::Forest(ForestParams::default()),
                LearnerSpec::Boosting(BoostingParams::default()),
            ],
            cv_folds: default_cv_folds(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "state", rename_all = "lowercase")]
pub enum ModelBody {
    Lasso(LassoModel),
    Tree(Tree),
    Forest(Forest),
    Boosting(BoostedTrees),
    Stacked(StackedModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub task: Task,
    pub body: ModelBody,
}

impl Model {
    pub fn predict(&self, x: &FeatureMatrix) -> Vec<f64> {
        let mut out = match &self.body {
            ModelBody::Lasso(m) => m.predict(&x.design()),
            ModelBody::Tree(t) => t.predict(x),
            ModelBody::Forest(f) => f.predict(x),
            ModelBody::Boosting(b) => b.predict(x),
            ModelBody::Stacked(s) => s.predict(x),
        };
        if self.task == Task::Probability {
            for v in &mut out {
                *v = v.clamp(PROBABILITY_FLOOR, PROBABILITY_CEIL);
            }
        }
        out
    }
}

/// Fit the learner described by `spec`.
pub fn fit(spec: &LearnerSpec, x: &FeatureMatrix, y: &[f64], task: Task, seed: u64) -> Result<Model> {
    if y.len() != x.n_rows() {
        return Err(crate::error::WatchError::Data("response length does not match features".into()));
    }
    let body = match spec {
        LearnerSpec::Lasso(p) => ModelBody::Lasso(fit_lasso(&x.design(), y, p, seed)?.model),
        LearnerSpec::Tree(p) => ModelBody::Tree(fit_cart(x, y, p, seed)),
        LearnerSpec::Forest(p) => ModelBody::Forest(fit_forest(x, y, p, seed)),
        LearnerSpec::Boosting(p) => ModelBody::Boosting(fit_boosting(x, y, p, seed)),
        LearnerSpec::Stacked { learners, cv_folds } => {
            ModelBody::Stacked(fit_stacked(learners, x, y, task, *cv_folds, seed)?)
        }
    };
    Ok(Model { task, body })
}

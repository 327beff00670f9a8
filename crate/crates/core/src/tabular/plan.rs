use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WatchError};

/// A-priori strength of external evidence that a covariate modifies the
/// treatment effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Evidence {
    None,
    Low,
    Moderate,
    High,
}

/// Expected direction of effect modification: `Positive` means a larger
/// treatment effect for larger covariate values (or for the non-reference
/// level of a binary covariate).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Positive,
    Negative,
    #[default]
    Unspecified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSpec {
    pub name: String,
    pub evidence: Evidence,
    #[serde(default)]
    pub expected_direction: Direction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl CovariateSpec {
    pub fn new(name: impl Into<String>, evidence: Evidence) -> Self {
        CovariateSpec {
            name: name.into(),
            evidence,
            expected_direction: Direction::Unspecified,
            source: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Propensity {
    /// Randomization probability of the treated arm.
    Known(f64),
    Estimated,
}

impl Default for Propensity {
    fn default() -> Self {
        Propensity::Known(0.5)
    }
}

/// Pre-declared analysis plan. JSON keys mirror the field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisPlan {
    pub outcome: String,
    pub treatment: String,
    pub covariates: Vec<CovariateSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_k_folds")]
    pub k_folds: usize,
    #[serde(default = "default_n_permutations")]
    pub n_permutations: usize,
    #[serde(default = "default_n_trees")]
    pub n_trees: usize,
    #[serde(default)]
    pub propensity: Propensity,
    #[serde(default = "default_bootstrap_reps")]
    pub bootstrap_reps: usize,
}

fn default_k_folds() -> usize {
    5
}
fn default_n_permutations() -> usize {
    9999
}
fn default_n_trees() -> usize {
    500
}
fn default_bootstrap_reps() -> usize {
    100
}

impl AnalysisPlan {
    /// Plan with default counts and `Low` evidence for every covariate.
    pub fn new(outcome: &str, treatment: &str, covariates: &[&str]) -> Self {
        AnalysisPlan {
            outcome: outcome.into(),
            treatment: treatment.into(),
            covariates: covariates.iter().map(|c| CovariateSpec::new(*c, Evidence::Low)).collect(),
            seed: 0,
            k_folds: default_k_folds(),
            n_permutations: default_n_permutations(),
            n_trees: default_n_trees(),
            propensity: Propensity::default(),
            bootstrap_reps: default_bootstrap_reps(),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let plan: AnalysisPlan = serde_json::from_str(s).map_err(|e| WatchError::Config(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| WatchError::io(path, e))?;
        Self::from_json_str(&s)
    }

    pub fn covariate_names(&self) -> Vec<&str> {
        self.covariates.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn covariate(&self, name: &str) -> Option<&CovariateSpec> {
        self.covariates.iter().find(|c| c.name == name)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(WatchError::Config(m));
        if self.k_folds < 2 {
            return bad(format!("k_folds must be >= 2, got {}", self.k_folds));
        }
        if self.n_permutations < 99 {
            return bad(format!("n_permutations must be >= 99, got {}", self.n_permutations));
        }
        if self.n_trees == 0 {
            return bad("n_trees must be positive".into());
        }
        if let Propensity::Known(p) = self.propensity {
            if !(p > 0.0 && p < 1.0) {
                return bad(format!("known propensity must lie in (0, 1), got {p}"));
            }
        }
        if self.outcome == self.treatment {
            return bad("outcome and treatment must be different columns".into());
        }
        let mut seen = std::collections::HashSet::new();
        for c in &self.covariates {
            if c.name == self.outcome || c.name == self.treatment {
                return bad(format!("covariate `{}` is also bound as outcome or treatment", c.name));
            }
            if !seen.insert(c.name.as_str()) {
                return bad(format!("covariate `{}` listed twice", c.name));
            }
            if matches!(c.evidence, Evidence::Moderate | Evidence::High)
                && c.source.as_deref().is_none_or(|s| s.trim().is_empty())
            {
                return bad(format!(
                    "covariate `{}` has {:?} evidence but no source reference",
                    c.name, c.evidence
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_defaults() {
        let plan = AnalysisPlan::from_json_str(
            r#"{"outcome":"Y","treatment":"A","covariates":[{"name":"X1","evidence":"low"}]}"#,
        )
        .unwrap();
        assert_eq!(plan.k_folds, 5);
        assert_eq!(plan.n_permutations, 9999);
        assert_eq!(plan.n_trees, 500);
        assert_eq!(plan.bootstrap_reps, 100);
        assert_eq!(plan.propensity, Propensity::Known(0.5));
        assert_eq!(plan.covariates[0].expected_direction, Direction::Unspecified);
    }

    #[test]
    fn propensity_forms() {
        let p: Propensity = serde_json::from_str(r#"{"known":0.6}"#).unwrap();
        assert_eq!(p, Propensity::Known(0.6));
        let p: Propensity = serde_json::from_str(r#""estimated""#).unwrap();
        assert_eq!(p, Propensity::Estimated);
    }

    #[test]
    fn moderate_evidence_needs_source() {
        let err = AnalysisPlan::from_json_str(
            r#"{"outcome":"Y","treatment":"A","covariates":[{"name":"X1","evidence":"moderate"}]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("source"));
        AnalysisPlan::from_json_str(
            r#"{"outcome":"Y","treatment":"A","covariates":[{"name":"X1","evidence":"high","source":"prior trial"}]}"#,
        )
        .unwrap();
    }

    #[test]
    fn rejects_small_counts() {
        let mut plan = AnalysisPlan::new("Y", "A", &["X1"]);
        plan.k_folds = 1;
        assert!(plan.validate().is_err());
        plan.k_folds = 2;
        plan.n_permutations = 98;
        assert!(plan.validate().is_err());
        plan.n_permutations = 99;
        assert!(plan.validate().is_ok());
    }
}

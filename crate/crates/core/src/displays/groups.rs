use serde::{Deserialize, Serialize};

use super::curves::Z95;
use crate::error::{Result, WatchError};
use crate::stats::{mean, variance};
use crate::tabular::{ColumnData, Dataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub n: usize,
    pub mean: Option<f64>,
    /// Normal-approximation 95% interval; absent below two rows.
    pub ci: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupEffect {
    /// One label per grouping covariate.
    pub labels: Vec<String>,
    pub control: ArmSummary,
    pub treated: ArmSummary,
    /// Treated minus control mean; absent when an arm is empty.
    pub effect: Option<f64>,
    pub effect_se: Option<f64>,
    pub effect_ci: Option<[f64; 2]>,
    /// Mean pseudo-outcome over the group's rows.
    pub pseudo_mean: f64,
    pub effect_defined: bool,
}

fn arm_summary(v: &[f64]) -> ArmSummary {
    let m = (!v.is_empty()).then(|| mean(v));
    let ci = (v.len() >= 2).then(|| {
        let half = Z95 * (variance(v) / v.len() as f64).sqrt();
        let c = mean(v);
        [c - half, c + half]
    });
    ArmSummary { n: v.len(), mean: m, ci }
}

/// Unadjusted and pseudo-outcome summaries within the groups defined by
/// one or two categorical covariates. Empty cells are skipped; cells with a
/// single arm are kept but flagged as having no effect estimate.
pub fn group_effects(ds: &Dataset, phi: &[f64], covariate: &str, second: Option<&str>) -> Result<Vec<GroupEffect>> {
    if phi.len() != ds.n_rows() {
        return Err(WatchError::Data("pseudo-outcomes and dataset differ in length".into()));
    }
    let factor = |name: &str| -> Result<(Vec<String>, Vec<u32>)> {
        let col = ds.column(name)?;
        match &col.data {
            ColumnData::Categorical { levels, .. } => Ok((levels.clone(), col.dense_codes()?)),
            ColumnData::Continuous(_) => Err(WatchError::InvalidColumn {
                column: name.to_string(),
                reason: "group effects need a categorical covariate".into(),
            }),
        }
    };
    let (la, ca) = factor(covariate)?;
    let (lb, cb) = match second {
        Some(s) => factor(s)?,
        None => (vec![String::new()], vec![0; ds.n_rows()]),
    };
    let y = ds.outcome();
    let a = ds.treatment();
    let mut out = Vec::new();
    for (ia, name_a) in la.iter().enumerate() {
        for (ib, name_b) in lb.iter().enumerate() {
            let rows: Vec<usize> = (0..ds.n_rows())
                .filter(|&i| ca[i] as usize == ia && cb[i] as usize == ib)
                .collect();
            if rows.is_empty() {
                continue;
            }
            let arm = |g: u8| -> Vec<f64> { rows.iter().filter(|&&i| a[i] == g).map(|&i| y[i]).collect() };
            let (y0, y1) = (arm(0), arm(1));
            let defined = !y0.is_empty() && !y1.is_empty();
            let effect = defined.then(|| mean(&y1) - mean(&y0));
            let se = (y0.len() >= 2 && y1.len() >= 2)
                .then(|| (variance(&y1) / y1.len() as f64 + variance(&y0) / y0.len() as f64).sqrt());
            let mut labels = vec![name_a.clone()];
            if second.is_some() {
                labels.push(name_b.clone());
            }
            out.push(GroupEffect {
                labels,
                control: arm_summary(&y0),
                treated: arm_summary(&y1),
                effect,
                effect_se: se,
                effect_ci: effect.zip(se).map(|(e, s)| [e - Z95 * s, e + Z95 * s]),
                pseudo_mean: mean(&rows.iter().map(|&i| phi[i]).collect::<Vec<_>>()),
                effect_defined: defined,
            });
        }
    }
    Ok(out)
}

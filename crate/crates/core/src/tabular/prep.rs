//! Analysis-dataset creation. Every step reads covariates only; the outcome
//! and treatment columns pass through untouched.

use super::{Column, ColumnData, Dataset, DesignMatrix};
use crate::error::{Result, WatchError};
use crate::stats;

/// Label of the level that collects sparse categories.
pub const OTHER_LEVEL: &str = "OTHER";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ImputeOptions {
    /// Append a `<name>_missing` 0/1 covariate for every covariate that had
    /// missing cells.
    pub add_indicators: bool,
}

pub fn impute_baseline(ds: &Dataset) -> Result<Dataset> {
    impute_baseline_with(ds, ImputeOptions::default())
}

/// Single deterministic imputation: pooled median for continuous
/// covariates, pooled mode (first level wins ties) for categorical ones.
pub fn impute_baseline_with(ds: &Dataset, opts: ImputeOptions) -> Result<Dataset> {
    let mut out = ds.clone();
    let mut indicators = Vec::new();
    for name in ds.roles.covariates.clone() {
        let col = out.column_mut(&name)?;
        let n_missing = col.n_missing();
        if n_missing == 0 {
            continue;
        }
        if n_missing == col.len() {
            return Err(WatchError::InvalidColumn {
                column: name,
                reason: "covariate is entirely missing; cannot impute".into(),
            });
        }
        if opts.add_indicators {
            let codes = (0..col.len()).map(|i| Some(u32::from(col.is_missing(i)))).collect();
            indicators.push(Column::categorical(
                format!("{name}_missing"),
                vec!["0".into(), "1".into()],
                codes,
            ));
        }
        match &mut col.data {
            ColumnData::Continuous(values) => {
                let observed: Vec<f64> = values.iter().flatten().copied().collect();
                let fill = stats::median(&observed);
                values.iter_mut().filter(|v| v.is_none()).for_each(|v| *v = Some(fill));
            }
            ColumnData::Categorical { levels, codes } => {
                let mut counts = vec![0usize; levels.len()];
                codes.iter().flatten().for_each(|&c| counts[c as usize] += 1);
                // max_by_key keeps the last maximum; scan in reverse so the
                // first level wins ties.
                let mode = (0..levels.len()).rev().max_by_key(|&k| counts[k]).expect("non-empty") as u32;
                codes.iter_mut().filter(|c| c.is_none()).for_each(|c| *c = Some(mode));
            }
        }
    }
    for ind in indicators {
        out.roles.covariates.push(ind.name.clone());
        out.push_column(ind);
    }
    Ok(out)
}

/// Merge categorical covariate levels observed in fewer than
/// `min_frac * n` rows into a single `OTHER` level, placed where the first
/// merged level stood. Empty levels are dropped.
pub fn merge_sparse_levels(ds: &Dataset, min_frac: f64) -> Result<Dataset> {
    if !(min_frac > 0.0 && min_frac < 0.5) {
        return Err(WatchError::Config(format!("min_frac must lie in (0, 0.5), got {min_frac}")));
    }
    let threshold = min_frac * ds.n_rows() as f64;
    let mut out = ds.clone();
    for name in ds.roles.covariates.clone() {
        let col = out.column_mut(&name)?;
        let ColumnData::Categorical { levels, codes } = &mut col.data else {
            continue;
        };
        let mut counts = vec![0usize; levels.len()];
        codes.iter().flatten().for_each(|&c| counts[c as usize] += 1);
        let is_sparse = |k: usize| counts[k] > 0 && (counts[k] as f64) < threshold;
        let any_empty = counts.contains(&0);
        let n_sparse = (0..levels.len()).filter(|&k| is_sparse(k)).count();
        let already_merged = n_sparse == 1
            && (0..levels.len()).any(|k| is_sparse(k) && levels[k] == OTHER_LEVEL);
        if (n_sparse == 0 || already_merged) && !any_empty {
            continue;
        }
        let mut new_levels: Vec<String> = Vec::new();
        let mut remap = vec![0u32; levels.len()];
        let mut other_slot: Option<u32> = None;
        for k in 0..levels.len() {
            if counts[k] == 0 {
                continue;
            }
            let sparse = is_sparse(k) || (levels[k] == OTHER_LEVEL && n_sparse > 0);
            if sparse {
                let slot = *other_slot.get_or_insert_with(|| {
                    new_levels.push(OTHER_LEVEL.to_string());
                    (new_levels.len() - 1) as u32
                });
                remap[k] = slot;
            } else {
                new_levels.push(levels[k].clone());
                remap[k] = (new_levels.len() - 1) as u32;
            }
        }
        for c in codes.iter_mut().flatten() {
            *c = remap[*c as usize];
        }
        *levels = new_levels;
    }
    Ok(out)
}

/// Remove covariates whose most frequent value covers more than
/// `max_dominance` of the observed rows. Returns the reduced dataset and the
/// dropped names.
pub fn drop_noninformative(ds: &Dataset, max_dominance: f64) -> Result<(Dataset, Vec<String>)> {
    let mut dropped = Vec::new();
    for col in ds.covariates() {
        let observed = col.len() - col.n_missing();
        if observed == 0 {
            dropped.push(col.name.clone());
            continue;
        }
        let top = match &col.data {
            ColumnData::Continuous(v) => {
                let mut xs: Vec<f64> = v.iter().flatten().copied().collect();
                xs.sort_by(f64::total_cmp);
                let mut best = 0usize;
                let mut run = 0usize;
                for i in 0..xs.len() {
                    run = if i > 0 && xs[i] == xs[i - 1] { run + 1 } else { 1 };
                    best = best.max(run);
                }
                best
            }
            ColumnData::Categorical { levels, codes } => {
                let mut counts = vec![0usize; levels.len()];
                codes.iter().flatten().for_each(|&c| counts[c as usize] += 1);
                counts.into_iter().max().unwrap_or(0)
            }
        };
        if top as f64 / observed as f64 > max_dominance {
            dropped.push(col.name.clone());
        }
    }
    let mut out = ds.clone();
    out.roles.covariates.retain(|c| !dropped.contains(c));
    for name in &dropped {
        out.remove_column(name);
    }
    Ok((out, dropped))
}

/// Dummy-coded numeric design for the named columns. Missing cells become
/// NaN.
pub fn one_hot(ds: &Dataset, names: &[&str]) -> Result<DesignMatrix> {
    let n = ds.n_rows();
    let mut columns = Vec::new();
    let mut labels = Vec::new();
    for &name in names {
        let col = ds.column(name)?;
        match &col.data {
            ColumnData::Continuous(v) => {
                columns.push(v.iter().map(|x| x.unwrap_or(f64::NAN)).collect());
                labels.push(name.to_string());
            }
            ColumnData::Categorical { levels, codes } => {
                for (k, level) in levels.iter().enumerate().skip(1) {
                    columns.push(
                        codes
                            .iter()
                            .map(|c| c.map_or(f64::NAN, |c| f64::from(c as usize == k)))
                            .collect(),
                    );
                    labels.push(format!("{name}={level}"));
                }
            }
        }
    }
    Ok(DesignMatrix {
        columns,
        labels,
        n_rows: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::Roles;
    use proptest::prelude::*;

    fn dataset(covs: Vec<Column>) -> Dataset {
        let n = covs[0].len();
        let y: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let a: Vec<Option<u32>> = (0..n).map(|i| Some((i % 2) as u32)).collect();
        let names = covs.iter().map(|c| c.name.clone()).collect();
        let mut cols = vec![
            Column::from_f64("y", &y),
            Column::categorical("a", vec!["0".into(), "1".into()], a),
        ];
        cols.extend(covs);
        Dataset::new(
            cols,
            Roles {
                outcome: "y".into(),
                treatment: "a".into(),
                covariates: names,
            },
        )
        .unwrap()
    }

    fn labels(n: &[(&str, usize)]) -> Vec<Option<String>> {
        n.iter()
            .flat_map(|(l, k)| std::iter::repeat_n(Some(l.to_string()), *k))
            .collect()
    }

    fn level_counts(ds: &Dataset, name: &str) -> Vec<(String, usize)> {
        let c = ds.column(name).unwrap();
        let levels = c.levels().unwrap();
        levels
            .iter()
            .map(|l| (l.clone(), (0..c.len()).filter(|&i| c.label(i) == Some(l)).count()))
            .collect()
    }

    #[test]
    fn median_imputation() {
        let ds = dataset(vec![Column::continuous("x", vec![Some(1.0), Some(2.0), None, Some(3.0)])]);
        let out = impute_baseline(&ds).unwrap();
        assert_eq!(out.column("x").unwrap().dense_values().unwrap(), vec![1.0, 2.0, 2.0, 3.0]);
    }

    #[test]
    fn mode_imputation() {
        let ds = dataset(vec![Column::from_labels("x", &[Some("A"), Some("A"), Some("B"), None])]);
        let out = impute_baseline(&ds).unwrap();
        let c = out.column("x").unwrap();
        assert_eq!(c.label(3), Some("A"));
    }

    #[test]
    fn mode_tie_goes_to_first_level() {
        let ds = dataset(vec![Column::from_labels("x", &[Some("B"), Some("A"), Some("A"), Some("B"), None, None])]);
        let out = impute_baseline(&ds).unwrap();
        assert_eq!(out.column("x").unwrap().label(4), Some("B"));
    }

    #[test]
    fn all_missing_covariate_errors() {
        let ds = dataset(vec![Column::continuous("x", vec![None, None])]);
        let err = impute_baseline(&ds).unwrap_err();
        assert!(err.to_string().contains('x'));
    }

    #[test]
    fn indicators_are_optional() {
        let ds = dataset(vec![Column::continuous("x", vec![Some(1.0), None])]);
        let plain = impute_baseline(&ds).unwrap();
        assert_eq!(plain.roles.covariates, vec!["x"]);
        let with = impute_baseline_with(&ds, ImputeOptions { add_indicators: true }).unwrap();
        assert_eq!(with.roles.covariates, vec!["x", "x_missing"]);
        assert_eq!(with.column("x_missing").unwrap().label(1), Some("1"));
    }

    #[test]
    fn merges_sparse_level() {
        let ds = dataset(vec![Column::from_labels("x", &labels(&[("A", 60), ("B", 37), ("C", 3)]))]);
        let out = merge_sparse_levels(&ds, 0.05).unwrap();
        assert_eq!(
            level_counts(&out, "x"),
            vec![("A".into(), 60), ("B".into(), 37), ("OTHER".into(), 3)]
        );
    }

    #[test]
    fn merges_two_sparse_levels() {
        let ds = dataset(vec![Column::from_labels("x", &labels(&[("A", 2), ("B", 2), ("C", 96)]))]);
        let out = merge_sparse_levels(&ds, 0.05).unwrap();
        assert_eq!(level_counts(&out, "x"), vec![("OTHER".into(), 4), ("C".into(), 96)]);
    }

    #[test]
    fn dense_levels_untouched() {
        let ds = dataset(vec![Column::from_labels("x", &labels(&[("A", 50), ("B", 50)]))]);
        assert_eq!(merge_sparse_levels(&ds, 0.05).unwrap(), ds);
    }

    #[test]
    fn drops_constant_and_dominated() {
        let mut lab = labels(&[("A", 995), ("B", 5)]);
        lab.rotate_left(3);
        let balanced: Vec<f64> = (0..1000).map(|i| (i % 7) as f64).collect();
        let ds = dataset(vec![
            Column::from_f64("const", &[1.5; 1000]),
            Column::from_labels("dom", &lab),
            Column::from_f64("bal", &balanced),
        ]);
        let (out, dropped) = drop_noninformative(&ds, 0.99).unwrap();
        assert_eq!(dropped, vec!["const", "dom"]);
        assert_eq!(out.roles.covariates, vec!["bal"]);
        assert!(out.column("const").is_err());
    }

    #[test]
    fn one_hot_coding() {
        let ds = dataset(vec![
            Column::from_labels("x", &[Some("N"), Some("Y"), Some("N")]),
            Column::from_f64("z", &[0.5, 1.5, 2.5]),
            Column::from_labels("w", &[Some("a"), Some("b"), Some("c")]),
        ]);
        let d = one_hot(&ds, &["x", "z", "w"]).unwrap();
        assert_eq!(d.labels, vec!["x=Y", "z", "w=b", "w=c"]);
        assert_eq!(d.columns[0], vec![0.0, 1.0, 0.0]);
        assert_eq!(d.columns[1], vec![0.5, 1.5, 2.5]);
        assert_eq!(d.columns[3], vec![0.0, 0.0, 1.0]);
    }

    fn arb_dataset() -> impl Strategy<Value = Dataset> {
        (4usize..40).prop_flat_map(|n| {
            (
                proptest::collection::vec(proptest::option::weighted(0.8, -5.0f64..5.0), n),
                proptest::collection::vec(proptest::option::weighted(0.8, 0u32..6), n),
                proptest::collection::vec(-3.0f64..3.0, n),
            )
        })
        .prop_filter_map("needs observed cells", |(cont, cat, y)| {
            if cont.iter().all(Option::is_none) || cat.iter().all(Option::is_none) {
                return None;
            }
            let labels: Vec<Option<String>> = cat.iter().map(|c| c.map(|k| format!("L{k}"))).collect();
            let mut ds = dataset(vec![Column::continuous("c", cont), Column::from_labels("k", &labels)]);
            ds = ds.with_outcome(&y).ok()?;
            Some(ds)
        })
    }

    proptest! {
        #[test]
        fn imputation_is_idempotent_and_outcome_blind(ds in arb_dataset(), shift in 0usize..5) {
            let once = impute_baseline(&ds).unwrap();
            prop_assert_eq!(impute_baseline(&once).unwrap(), once.clone());
            prop_assert_eq!(once.n_rows(), ds.n_rows());
            for c in once.covariates() {
                prop_assert_eq!(c.n_missing(), 0);
            }
            let mut y = ds.outcome();
            let len = y.len();
            y.rotate_left(shift % len);
            let permuted = impute_baseline(&ds.with_outcome(&y).unwrap()).unwrap();
            for name in ["c", "k"] {
                prop_assert_eq!(permuted.column(name).unwrap(), once.column(name).unwrap());
            }
        }

        #[test]
        fn merging_is_idempotent(ds in arb_dataset(), frac in 0.01f64..0.45) {
            let once = merge_sparse_levels(&ds, frac).unwrap();
            prop_assert_eq!(once.n_rows(), ds.n_rows());
            prop_assert_eq!(merge_sparse_levels(&once, frac).unwrap(), once);
        }
    }
}

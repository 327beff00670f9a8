//! Initial data analysis: univariate and stratified summaries, missingness
//! patterns, mixed-type association between covariates, and average-linkage
//! clustering of covariates. Nothing here looks at the treatment effect.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WatchError};
use crate::stats;
use crate::tabular::{Column, ColumnData, ColumnKind, Dataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelCount {
    pub level: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnSummary {
    Continuous {
        name: String,
        count: usize,
        missing: usize,
        mean: Option<f64>,
        sd: Option<f64>,
        min: Option<f64>,
        q1: Option<f64>,
        median: Option<f64>,
        q3: Option<f64>,
        max: Option<f64>,
        /// Histogram over `[min, max]` with equal-width bins.
        histogram: Vec<usize>,
    },
    Categorical {
        name: String,
        count: usize,
        missing: usize,
        frequencies: Vec<LevelCount>,
    },
}

impl ColumnSummary {
    pub fn name(&self) -> &str {
        match self {
            ColumnSummary::Continuous { name, .. } | ColumnSummary::Categorical { name, .. } => name,
        }
    }

    pub fn count(&self) -> usize {
        match self {
            ColumnSummary::Continuous { count, .. } | ColumnSummary::Categorical { count, .. } => *count,
        }
    }

    pub fn missing(&self) -> usize {
        match self {
            ColumnSummary::Continuous { missing, .. } | ColumnSummary::Categorical { missing, .. } => *missing,
        }
    }
}

const HIST_BINS: usize = 12;

fn summarize_column(col: &Column, rows: Option<&[usize]>) -> ColumnSummary {
    let idx: Vec<usize> = match rows {
        Some(r) => r.to_vec(),
        None => (0..col.len()).collect(),
    };
    let count = idx.len();
    let missing = idx.iter().filter(|&&i| col.is_missing(i)).count();
    match &col.data {
        ColumnData::Continuous(v) => {
            let xs: Vec<f64> = idx.iter().filter_map(|&i| v[i]).collect();
            let sorted = stats::sorted_copy(&xs);
            let q = |p: f64| (!sorted.is_empty()).then(|| stats::quantile_sorted(&sorted, p));
            let mut histogram = vec![0usize; HIST_BINS];
            if let (Some(&lo), Some(&hi)) = (sorted.first(), sorted.last()) {
                let width = (hi - lo) / HIST_BINS as f64;
                for &x in &sorted {
                    let b = if width > 0.0 { ((x - lo) / width) as usize } else { 0 };
                    histogram[b.min(HIST_BINS - 1)] += 1;
                }
            }
            ColumnSummary::Continuous {
                name: col.name.clone(),
                count,
                missing,
                mean: (!xs.is_empty()).then(|| stats::mean(&xs)),
                sd: (xs.len() >= 2).then(|| stats::sd(&xs)),
                min: q(0.0),
                q1: q(0.25),
                median: q(0.5),
                q3: q(0.75),
                max: q(1.0),
                histogram,
            }
        }
        ColumnData::Categorical { levels, codes } => {
            let mut counts = vec![0usize; levels.len()];
            idx.iter().filter_map(|&i| codes[i]).for_each(|c| counts[c as usize] += 1);
            ColumnSummary::Categorical {
                name: col.name.clone(),
                count,
                missing,
                frequencies: levels
                    .iter()
                    .zip(counts)
                    .map(|(l, c)| LevelCount {
                        level: l.clone(),
                        count: c,
                    })
                    .collect(),
            }
        }
    }
}

/// One summary record per column, in dataset column order.
pub fn univariate_summary(ds: &Dataset) -> Vec<ColumnSummary> {
    ds.columns().iter().map(|c| summarize_column(c, None)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumSummary {
    pub by: String,
    pub level: String,
    pub n: usize,
    pub summaries: Vec<ColumnSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedSummary {
    pub strata: Vec<StratumSummary>,
    pub warnings: Vec<String>,
}

/// Univariate summaries within each level of a categorical column. Empty
/// strata are omitted and reported as warnings.
pub fn stratified_summary(ds: &Dataset, by: &str) -> Result<StratifiedSummary> {
    let col = ds.column(by)?;
    let ColumnData::Categorical { levels, codes } = &col.data else {
        return Err(WatchError::InvalidColumn {
            column: by.into(),
            reason: "stratification column must be categorical".into(),
        });
    };
    let mut strata = Vec::new();
    let mut warnings = Vec::new();
    for (k, level) in levels.iter().enumerate() {
        let rows: Vec<usize> = (0..ds.n_rows()).filter(|&i| codes[i] == Some(k as u32)).collect();
        if rows.is_empty() {
            warnings.push(format!("stratum {by}={level} is empty and was omitted"));
            continue;
        }
        strata.push(StratumSummary {
            by: by.into(),
            level: level.clone(),
            n: rows.len(),
            summaries: ds.columns().iter().map(|c| summarize_column(c, Some(&rows))).collect(),
        });
    }
    Ok(StratifiedSummary { strata, warnings })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingPattern {
    /// Per-column missing flag, aligned with `MissingnessReport::columns`.
    pub missing: Vec<bool>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingnessReport {
    pub columns: Vec<String>,
    pub fractions: Vec<f64>,
    /// Distinct missing-mask rows, most frequent first (ties by mask order).
    pub patterns: Vec<MissingPattern>,
}

pub fn missingness_report(ds: &Dataset) -> MissingnessReport {
    let n = ds.n_rows();
    let columns: Vec<String> = ds.columns().iter().map(|c| c.name.clone()).collect();
    let fractions = ds
        .columns()
        .iter()
        .map(|c| if n == 0 { 0.0 } else { c.n_missing() as f64 / n as f64 })
        .collect();
    let mut counts: BTreeMap<Vec<bool>, usize> = BTreeMap::new();
    for i in 0..n {
        let mask: Vec<bool> = ds.columns().iter().map(|c| c.is_missing(i)).collect();
        *counts.entry(mask).or_default() += 1;
    }
    let mut patterns: Vec<MissingPattern> = counts
        .into_iter()
        .map(|(missing, count)| MissingPattern { missing, count })
        .collect();
    patterns.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.missing.cmp(&b.missing)));
    MissingnessReport {
        columns,
        fractions,
        patterns,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AssociationMethod {
    Pearson,
    Eta,
    CramersV,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Association {
    pub value: f64,
    pub method: AssociationMethod,
    /// Set when a zero-variance column forced the value to 0.
    pub degenerate: bool,
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mx, my) = (stats::mean(x), stats::mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    (sxx > 0.0 && syy > 0.0).then(|| (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Correlation ratio: sqrt(between-group SS / total SS).
fn correlation_ratio(values: &[f64], codes: &[u32], n_levels: usize) -> Option<f64> {
    let m = stats::mean(values);
    let mut sums = vec![0.0; n_levels];
    let mut counts = vec![0usize; n_levels];
    for (&v, &c) in values.iter().zip(codes) {
        sums[c as usize] += v;
        counts[c as usize] += 1;
    }
    let ss_total: f64 = values.iter().map(|v| (v - m).powi(2)).sum();
    let occupied = counts.iter().filter(|&&c| c > 0).count();
    if ss_total <= 0.0 || occupied < 2 {
        return None;
    }
    let ss_between: f64 = sums
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(s, &c)| c as f64 * (s / c as f64 - m).powi(2))
        .sum();
    Some((ss_between / ss_total).clamp(0.0, 1.0).sqrt())
}

/// Cramér's V from the uncorrected Pearson chi-square.
fn cramers_v(a: &[u32], la: usize, b: &[u32], lb: usize) -> Option<f64> {
    let n = a.len() as f64;
    let mut table = vec![vec![0.0f64; lb]; la];
    for (&i, &j) in a.iter().zip(b) {
        table[i as usize][j as usize] += 1.0;
    }
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..lb).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let r_eff = rows.iter().filter(|&&r| r > 0.0).count();
    let c_eff = cols.iter().filter(|&&c| c > 0.0).count();
    if r_eff < 2 || c_eff < 2 {
        return None;
    }
    let mut chi2 = 0.0;
    for i in 0..la {
        for j in 0..lb {
            let e = rows[i] * cols[j] / n;
            if e > 0.0 {
                chi2 += (table[i][j] - e).powi(2) / e;
            }
        }
    }
    let k = (r_eff.min(c_eff) - 1) as f64;
    Some((chi2 / (n * k)).sqrt().clamp(0.0, 1.0))
}

/// Absolute association between two fully observed covariates.
pub fn association(ds: &Dataset, a: &str, b: &str) -> Result<Association> {
    associate_columns(ds.column(a)?, ds.column(b)?)
}

pub fn associate_columns(ca: &Column, cb: &Column) -> Result<Association> {
    use ColumnKind::*;
    let (value, method) = match (ca.kind(), cb.kind()) {
        (Continuous, Continuous) => {
            let (x, y) = (ca.dense_values()?, cb.dense_values()?);
            (pearson(&x, &y).map(f64::abs), AssociationMethod::Pearson)
        }
        (Continuous, Categorical) | (Categorical, Continuous) => {
            let (cont, cat) = if ca.kind() == Continuous { (ca, cb) } else { (cb, ca) };
            let codes = cat.dense_codes()?;
            let n_levels = cat.levels().map_or(0, <[String]>::len);
            (
                correlation_ratio(&cont.dense_values()?, &codes, n_levels),
                AssociationMethod::Eta,
            )
        }
        (Categorical, Categorical) => {
            let la = ca.levels().map_or(0, <[String]>::len);
            let lb = cb.levels().map_or(0, <[String]>::len);
            (
                cramers_v(&ca.dense_codes()?, la, &cb.dense_codes()?, lb),
                AssociationMethod::CramersV,
            )
        }
    };
    Ok(Association {
        value: value.unwrap_or(0.0),
        method,
        degenerate: value.is_none(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub methods: Vec<Vec<AssociationMethod>>,
    pub warnings: Vec<String>,
}

/// Pairwise association over the covariate role. The diagonal is 1 by
/// definition.
pub fn association_matrix(ds: &Dataset) -> Result<AssociationMatrix> {
    let cols: Vec<&Column> = ds.covariates().collect();
    let p = cols.len();
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|i| (i + 1..p).map(move |j| (i, j))).collect();
    let results: Vec<Association> = pairs
        .par_iter()
        .map(|&(i, j)| associate_columns(cols[i], cols[j]))
        .collect::<Result<_>>()?;
    let mut values = vec![vec![1.0; p]; p];
    let mut methods = vec![vec![AssociationMethod::Pearson; p]; p];
    let mut warnings = Vec::new();
    for i in 0..p {
        methods[i][i] = match cols[i].kind() {
            ColumnKind::Continuous => AssociationMethod::Pearson,
            ColumnKind::Categorical => AssociationMethod::CramersV,
        };
    }
    for (&(i, j), r) in pairs.iter().zip(results) {
        values[i][j] = r.value;
        values[j][i] = r.value;
        methods[i][j] = r.method;
        methods[j][i] = r.method;
        if r.degenerate {
            warnings.push(format!(
                "association {}-{} set to 0: zero-variance column",
                cols[i].name, cols[j].name
            ));
        }
    }
    Ok(AssociationMatrix {
        names: cols.iter().map(|c| c.name.clone()).collect(),
        values,
        methods,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    /// Cluster ids: `0..p` are the original items, `p + k` is the cluster
    /// created by merge `k`.
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub names: Vec<String>,
    pub merges: Vec<Merge>,
    /// Leaf order for drawing.
    pub order: Vec<usize>,
}

/// Agglomerative average-linkage clustering on `1 - association`.
pub fn cluster_covariates(m: &AssociationMatrix) -> Result<Dendrogram> {
    let dist: Vec<Vec<f64>> = m.values.iter().map(|r| r.iter().map(|a| 1.0 - a).collect()).collect();
    cluster_distances(&m.names, &dist)
}

/// Average linkage on an explicit distance matrix. Ties go to the pair with
/// the lowest cluster ids.
pub fn cluster_distances(names: &[String], dist: &[Vec<f64>]) -> Result<Dendrogram> {
    let p = names.len();
    if p < 2 {
        return Err(WatchError::Data("clustering needs at least two covariates".into()));
    }
    // Active clusters: (id, member leaf indices).
    let mut active: Vec<(usize, Vec<usize>)> = (0..p).map(|i| (i, vec![i])).collect();
    let mut merges = Vec::with_capacity(p - 1);
    let avg = |a: &[usize], b: &[usize]| {
        let s: f64 = a.iter().flat_map(|&i| b.iter().map(move |&j| dist[i][j])).sum();
        s / (a.len() * b.len()) as f64
    };
    while active.len() > 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for x in 0..active.len() {
            for y in x + 1..active.len() {
                let d = avg(&active[x].1, &active[y].1);
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, x, y));
                }
            }
        }
        let (height, x, y) = best.expect("at least two clusters");
        let (id_y, mut mem_y) = active.remove(y);
        let (id_x, mut mem_x) = active.remove(x);
        mem_x.append(&mut mem_y);
        let new_id = p + merges.len();
        merges.push(Merge {
            left: id_x,
            right: id_y,
            height,
            members: mem_x.iter().map(|&i| names[i].clone()).collect(),
        });
        active.push((new_id, mem_x));
    }
    // Average linkage is monotone, so heights come out nondecreasing up to
    // rounding; enforce it exactly for downstream consumers.
    for k in 1..merges.len() {
        if merges[k].height < merges[k - 1].height {
            merges[k].height = merges[k - 1].height;
        }
    }
    let order = active.pop().map(|(_, m)| m).unwrap_or_default();
    Ok(Dendrogram {
        names: names.to_vec(),
        merges,
        order,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdaReport {
    pub n_rows: usize,
    pub univariate: Vec<ColumnSummary>,
    pub by_treatment: StratifiedSummary,
    pub missingness: MissingnessReport,
    pub association: AssociationMatrix,
    pub dendrogram: Option<Dendrogram>,
    pub preprocessing: PreprocessingLog,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PreprocessingLog {
    pub imputed: Vec<String>,
    pub merged_levels: Vec<String>,
    pub dropped: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::Roles;

    fn ds(covs: Vec<Column>) -> Dataset {
        let n = covs[0].len();
        let mut cols = vec![
            Column::from_f64("y", &vec![0.0; n]),
            Column::categorical("a", vec!["0".into(), "1".into()], (0..n).map(|i| Some((i % 2) as u32)).collect()),
        ];
        let names = covs.iter().map(|c| c.name.clone()).collect();
        cols.extend(covs);
        Dataset::new(cols, Roles { outcome: "y".into(), treatment: "a".into(), covariates: names }).unwrap()
    }

    #[test]
    fn continuous_summary() {
        let d = ds(vec![Column::from_f64("x", &[1.0, 2.0, 3.0])]);
        let s = univariate_summary(&d);
        match &s[2] {
            ColumnSummary::Continuous { mean, sd, median, .. } => {
                assert_eq!(*mean, Some(2.0));
                assert_eq!(*sd, Some(1.0));
                assert_eq!(*median, Some(2.0));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn categorical_summary() {
        let d = ds(vec![Column::from_labels("x", &[Some("A"), Some("A"), Some("B")])]);
        match &univariate_summary(&d)[2] {
            ColumnSummary::Categorical { frequencies, .. } => {
                assert_eq!(frequencies[0], LevelCount { level: "A".into(), count: 2 });
                assert_eq!(frequencies[1], LevelCount { level: "B".into(), count: 1 });
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_counts_and_fractions() {
        let mut v: Vec<Option<f64>> = (0..10).map(|i| Some(i as f64)).collect();
        v[3] = None;
        v[7] = None;
        let d = ds(vec![Column::continuous("x", v)]);
        assert_eq!(univariate_summary(&d)[2].missing(), 2);
        let m = missingness_report(&d);
        assert_eq!(m.fractions, vec![0.0, 0.0, 0.2]);
    }

    #[test]
    fn fully_observed_has_one_pattern() {
        let d = ds(vec![Column::from_f64("x", &[1.0, 2.0, 3.0, 4.0])]);
        let m = missingness_report(&d);
        assert!(m.fractions.iter().all(|&f| f == 0.0));
        assert_eq!(m.patterns.len(), 1);
        assert_eq!(m.patterns[0].count, 4);
    }

    #[test]
    fn joint_missingness_is_one_pattern() {
        let a = vec![Some(1.0), None, Some(2.0), None, Some(3.0)];
        let b = vec![Some(1.0), None, Some(5.0), None, Some(3.0)];
        let d = ds(vec![Column::continuous("p", a), Column::continuous("q", b)]);
        let m = missingness_report(&d);
        assert_eq!(m.patterns.len(), 2);
        let joint = m.patterns.iter().find(|p| p.missing[2] && p.missing[3]).unwrap();
        assert_eq!(joint.count, 2);
        assert!(m.patterns.iter().all(|p| p.missing[2] == p.missing[3]));
    }

    #[test]
    fn stratify_by_treatment_partitions_rows() {
        let d = ds(vec![Column::from_f64("x", &[1.0, 2.0, 3.0, 4.0, 5.0])]);
        let s = stratified_summary(&d, "a").unwrap();
        assert_eq!(s.strata.iter().map(|s| s.n).sum::<usize>(), 5);
        assert!(stratified_summary(&d, "x").is_err());
        assert!(stratified_summary(&d, "nope").is_err());
    }

    #[test]
    fn empty_stratum_is_omitted_with_warning() {
        let g = Column::categorical("g", vec!["u".into(), "v".into()], vec![Some(0); 4]);
        let d = ds(vec![Column::from_f64("x", &[1.0, 2.0, 3.0, 4.0]), g]);
        let s = stratified_summary(&d, "g").unwrap();
        assert_eq!(s.strata.len(), 1);
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn self_association_is_one() {
        let d = ds(vec![Column::from_f64("x", &[1.0, 3.0, 2.0, 5.0])]);
        assert!((association(&d, "x", "x").unwrap().value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cramers_v_on_two_by_two() {
        // [[20,10],[10,20]]: chi2 = 60 * (400-100)^2 / 30^4 = 6.6667, V = sqrt(chi2/60).
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (i, j, k) in [(0, 0, 20), (0, 1, 10), (1, 0, 10), (1, 1, 20)] {
            for _ in 0..k {
                a.push(Some(format!("a{i}")));
                b.push(Some(format!("b{j}")));
            }
        }
        let d = ds(vec![Column::from_labels("p", &a), Column::from_labels("q", &b)]);
        let r = association(&d, "p", "q").unwrap();
        assert_eq!(r.method, AssociationMethod::CramersV);
        let chi2: f64 = 60.0 * (20.0f64 * 20.0 - 10.0 * 10.0).powi(2) / 30f64.powi(4);
        assert!((chi2 - 6.666_666_666_7).abs() < 1e-9);
        assert!((r.value - (chi2 / 60.0).sqrt()).abs() < 1e-12);
        assert!((r.value - 1.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn eta_zero_for_equal_group_means() {
        let x = Column::from_f64("x", &[1.0, 3.0, 1.0, 3.0]);
        let g = Column::from_labels("g", &[Some("u"), Some("u"), Some("v"), Some("v")]);
        let d = ds(vec![x, g]);
        let r = association(&d, "x", "g").unwrap();
        assert_eq!(r.method, AssociationMethod::Eta);
        assert!(r.value.abs() < 1e-12);
        assert_eq!(association(&d, "g", "x").unwrap().value, r.value);
    }

    #[test]
    fn zero_variance_gives_zero() {
        let d = ds(vec![Column::from_f64("x", &[1.0, 1.0, 1.0]), Column::from_f64("z", &[1.0, 2.0, 3.0])]);
        let r = association(&d, "x", "z").unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.degenerate);
    }

    #[test]
    fn pearson_affine_invariant() {
        let x = [1.0, 4.0, 2.0, 8.0, 5.0];
        let z = [2.0, 1.0, 7.0, 3.0, 3.5];
        let tx: Vec<f64> = x.iter().map(|v| -3.0 * v + 11.0).collect();
        let d = ds(vec![Column::from_f64("x", &x), Column::from_f64("z", &z), Column::from_f64("tx", &tx)]);
        let a = association(&d, "x", "z").unwrap().value;
        let b = association(&d, "tx", "z").unwrap().value;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn relabeling_levels_keeps_association() {
        let x = Column::from_f64("x", &[1.0, 2.0, 5.0, 6.0, 2.0]);
        let g = Column::from_labels("g", &[Some("u"), Some("v"), Some("w"), Some("w"), Some("u")]);
        let h = Column::from_labels("h", &[Some("w"), Some("u"), Some("v"), Some("v"), Some("w")]);
        let d = ds(vec![x, g, h]);
        let a = association(&d, "x", "g").unwrap().value;
        let b = association(&d, "x", "h").unwrap().value;
        assert!((a - b).abs() < 1e-12);
    }

    fn names(k: usize) -> Vec<String> {
        (1..=k).map(|i| format!("v{i}")).collect()
    }

    #[test]
    fn three_item_average_linkage() {
        let d = vec![vec![0.0, 0.1, 0.5], vec![0.1, 0.0, 0.5], vec![0.5, 0.5, 0.0]];
        let t = cluster_distances(&names(3), &d).unwrap();
        assert_eq!((t.merges[0].left, t.merges[0].right), (0, 1));
        assert!((t.merges[0].height - 0.1).abs() < 1e-12);
        assert_eq!((t.merges[1].left, t.merges[1].right), (2, 3));
        assert!((t.merges[1].height - 0.5).abs() < 1e-12);
    }

    #[test]
    fn duplicate_pair_merges_at_zero() {
        let x = [1.0, 2.0, 4.0, 3.0];
        let d = ds(vec![Column::from_f64("x", &x), Column::from_f64("x2", &x), Column::from_f64("z", &[0.0, 1.0, 0.0, 1.0])]);
        let m = association_matrix(&d).unwrap();
        let t = cluster_covariates(&m).unwrap();
        assert!(t.merges[0].height.abs() < 1e-12);
    }

    #[test]
    fn unassociated_items_merge_at_one() {
        let p = 4;
        let m = AssociationMatrix {
            names: names(p),
            values: (0..p).map(|i| (0..p).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect(),
            methods: vec![vec![AssociationMethod::Pearson; p]; p],
            warnings: vec![],
        };
        let t = cluster_covariates(&m).unwrap();
        assert!(t.merges.iter().all(|mg| (mg.height - 1.0).abs() < 1e-12));
        assert_eq!(t.order.len(), p);
    }

    #[test]
    fn single_item_errors() {
        assert!(cluster_distances(&names(1), &[vec![0.0]]).is_err());
    }

    #[test]
    fn matrix_is_symmetric_in_unit_interval() {
        let d = ds(vec![
            Column::from_f64("x", &[1.0, 2.0, 3.0, 4.0, 2.0, 7.0]),
            Column::from_labels("g", &[Some("u"), Some("v"), Some("u"), Some("w"), Some("v"), Some("w")]),
            Column::from_f64("z", &[3.0, 1.0, 2.0, 0.0, 9.0, 1.0]),
        ]);
        let m = association_matrix(&d).unwrap();
        for i in 0..3 {
            assert_eq!(m.values[i][i], 1.0);
            for j in 0..3 {
                assert_eq!(m.values[i][j], m.values[j][i]);
                assert!((0.0..=1.0).contains(&m.values[i][j]));
            }
        }
    }
}

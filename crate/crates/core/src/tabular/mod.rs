//! Tabular trial data: typed columns with missingness, role bindings, the
//! pre-declared analysis plan, and the numeric views consumed by learners.

mod csv_io;
mod plan;
mod prep;

pub use csv_io::{load_csv, read_csv, write_csv, write_csv_to};
pub use plan::{AnalysisPlan, CovariateSpec, Direction, Evidence, Propensity};
pub use prep::{
    drop_noninformative, impute_baseline, impute_baseline_with, merge_sparse_levels, one_hot,
    ImputeOptions, OTHER_LEVEL,
};

use serde::{Deserialize, Serialize};

use crate::error::{Result, WatchError};

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Continuous(Vec<Option<f64>>),
    Categorical {
        levels: Vec<String>,
        codes: Vec<Option<u32>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

impl Column {
    pub fn continuous(name: impl Into<String>, values: Vec<Option<f64>>) -> Self {
        Column {
            name: name.into(),
            data: ColumnData::Continuous(values),
        }
    }

    /// Fully observed continuous column.
    pub fn from_f64(name: impl Into<String>, values: &[f64]) -> Self {
        Self::continuous(name, values.iter().map(|&v| Some(v)).collect())
    }

    pub fn categorical(name: impl Into<String>, levels: Vec<String>, codes: Vec<Option<u32>>) -> Self {
        Column {
            name: name.into(),
            data: ColumnData::Categorical { levels, codes },
        }
    }

    /// Categorical column from labels, levels in first-appearance order.
    /// `None` marks a missing cell.
    pub fn from_labels<S: AsRef<str>>(name: impl Into<String>, labels: &[Option<S>]) -> Self {
        let mut levels: Vec<String> = Vec::new();
        let codes = labels
            .iter()
            .map(|l| {
                l.as_ref().map(|s| {
                    let s = s.as_ref();
                    match levels.iter().position(|x| x == s) {
                        Some(k) => k as u32,
                        None => {
                            levels.push(s.to_string());
                            (levels.len() - 1) as u32
                        }
                    }
                })
            })
            .collect();
        Self::categorical(name, levels, codes)
    }

    pub fn kind(&self) -> ColumnKind {
        match self.data {
            ColumnData::Continuous(_) => ColumnKind::Continuous,
            ColumnData::Categorical { .. } => ColumnKind::Categorical,
        }
    }

    pub fn len(&self) -> usize {
        match &self.data {
            ColumnData::Continuous(v) => v.len(),
            ColumnData::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_missing(&self, i: usize) -> bool {
        match &self.data {
            ColumnData::Continuous(v) => v[i].is_none(),
            ColumnData::Categorical { codes, .. } => codes[i].is_none(),
        }
    }

    pub fn n_missing(&self) -> usize {
        (0..self.len()).filter(|&i| self.is_missing(i)).count()
    }

    pub fn levels(&self) -> Option<&[String]> {
        match &self.data {
            ColumnData::Categorical { levels, .. } => Some(levels),
            ColumnData::Continuous(_) => None,
        }
    }

    /// Numeric view of cell `i`: the value for continuous columns, the level
    /// index for categorical ones.
    pub fn numeric(&self, i: usize) -> Option<f64> {
        match &self.data {
            ColumnData::Continuous(v) => v[i],
            ColumnData::Categorical { codes, .. } => codes[i].map(f64::from),
        }
    }

    /// Level label of cell `i` for categorical columns.
    pub fn label(&self, i: usize) -> Option<&str> {
        match &self.data {
            ColumnData::Categorical { levels, codes } => codes[i].map(|c| levels[c as usize].as_str()),
            ColumnData::Continuous(_) => None,
        }
    }

    /// Fully observed continuous values; errors on missing cells or a
    /// categorical column.
    pub fn dense_values(&self) -> Result<Vec<f64>> {
        match &self.data {
            ColumnData::Continuous(v) => v
                .iter()
                .map(|x| {
                    x.ok_or_else(|| WatchError::InvalidColumn {
                        column: self.name.clone(),
                        reason: "contains missing values".into(),
                    })
                })
                .collect(),
            ColumnData::Categorical { .. } => Err(WatchError::InvalidColumn {
                column: self.name.clone(),
                reason: "expected a continuous column".into(),
            }),
        }
    }

    /// Fully observed level codes of a categorical column.
    pub fn dense_codes(&self) -> Result<Vec<u32>> {
        match &self.data {
            ColumnData::Categorical { codes, .. } => codes
                .iter()
                .map(|x| {
                    x.ok_or_else(|| WatchError::InvalidColumn {
                        column: self.name.clone(),
                        reason: "contains missing values".into(),
                    })
                })
                .collect(),
            ColumnData::Continuous(_) => Err(WatchError::InvalidColumn {
                column: self.name.clone(),
                reason: "expected a categorical column".into(),
            }),
        }
    }

    /// Two-level categorical view of a continuous column split at
    /// `threshold` (levels `<=t`, `>t`).
    pub fn binarize(&self, threshold: f64) -> Result<Column> {
        let values = match &self.data {
            ColumnData::Continuous(v) => v,
            ColumnData::Categorical { .. } => {
                return Err(WatchError::InvalidColumn {
                    column: self.name.clone(),
                    reason: "only continuous columns can be binarized".into(),
                })
            }
        };
        let t = crate::stats::fmt_sig(threshold, 4);
        let levels = vec![format!("<={t}"), format!(">{t}")];
        let codes = values.iter().map(|v| v.map(|x| u32::from(x > threshold))).collect();
        Ok(Column::categorical(self.name.clone(), levels, codes))
    }

    pub(crate) fn select_rows(&self, rows: &[usize]) -> Column {
        let data = match &self.data {
            ColumnData::Continuous(v) => ColumnData::Continuous(rows.iter().map(|&i| v[i]).collect()),
            ColumnData::Categorical { levels, codes } => ColumnData::Categorical {
                levels: levels.clone(),
                codes: rows.iter().map(|&i| codes[i]).collect(),
            },
        };
        Column {
            name: self.name.clone(),
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roles {
    pub outcome: String,
    pub treatment: String,
    pub covariates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<Column>,
    n_rows: usize,
    pub roles: Roles,
}

impl Dataset {
    /// Assemble a dataset and validate the role contract.
    ///
    /// The treatment column must be categorical with levels `["0", "1"]`
    /// and no missing cells; the outcome must be continuous. Outcome
    /// missingness is rejected here because no step of the workflow imputes
    /// outcomes.
    pub fn new(columns: Vec<Column>, roles: Roles) -> Result<Self> {
        let n_rows = columns.first().map_or(0, Column::len);
        for c in &columns {
            if c.len() != n_rows {
                return Err(WatchError::InvalidColumn {
                    column: c.name.clone(),
                    reason: format!("has {} rows, expected {n_rows}", c.len()),
                });
            }
            if let ColumnData::Continuous(v) = &c.data {
                if v.iter().flatten().any(|x| !x.is_finite()) {
                    return Err(WatchError::InvalidColumn {
                        column: c.name.clone(),
                        reason: "contains non-finite values".into(),
                    });
                }
            }
            if let ColumnData::Categorical { levels, codes } = &c.data {
                if codes.iter().flatten().any(|&k| k as usize >= levels.len()) {
                    return Err(WatchError::InvalidColumn {
                        column: c.name.clone(),
                        reason: "level index out of range".into(),
                    });
                }
            }
        }
        let ds = Dataset { columns, n_rows, roles };
        ds.validate_roles()?;
        Ok(ds)
    }

    fn validate_roles(&self) -> Result<()> {
        let r = &self.roles;
        let mut seen = std::collections::HashSet::new();
        for name in std::iter::once(&r.outcome).chain(std::iter::once(&r.treatment)).chain(&r.covariates) {
            if !seen.insert(name.as_str()) {
                return Err(WatchError::Config(format!("role column `{name}` bound more than once")));
            }
            self.column(name)?;
        }
        let y = self.column(&r.outcome)?;
        if y.kind() != ColumnKind::Continuous {
            return Err(WatchError::InvalidColumn {
                column: y.name.clone(),
                reason: "outcome must be numeric".into(),
            });
        }
        if y.n_missing() > 0 {
            return Err(WatchError::InvalidColumn {
                column: y.name.clone(),
                reason: format!("outcome has {} missing values", y.n_missing()),
            });
        }
        let a = self.column(&r.treatment)?;
        match &a.data {
            ColumnData::Categorical { levels, codes } => {
                if levels.len() != 2 || levels[0] != "0" || levels[1] != "1" {
                    return Err(WatchError::TreatmentNotBinary {
                        column: a.name.clone(),
                        n_levels: levels.len(),
                    });
                }
                if codes.iter().any(Option::is_none) {
                    return Err(WatchError::InvalidColumn {
                        column: a.name.clone(),
                        reason: "treatment has missing values".into(),
                    });
                }
            }
            ColumnData::Continuous(_) => {
                return Err(WatchError::InvalidColumn {
                    column: a.name.clone(),
                    reason: "treatment must be categorical with levels 0/1".into(),
                })
            }
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| WatchError::MissingColumn(name.to_string()))
    }

    pub(crate) fn column_mut(&mut self, name: &str) -> Result<&mut Column> {
        self.columns
            .iter_mut()
            .find(|c| c.name == name)
            .ok_or_else(|| WatchError::MissingColumn(name.to_string()))
    }

    pub(crate) fn push_column(&mut self, column: Column) {
        self.columns.push(column);
    }

    pub(crate) fn remove_column(&mut self, name: &str) {
        self.columns.retain(|c| c.name != name);
    }

    pub fn covariates(&self) -> impl Iterator<Item = &Column> {
        self.roles.covariates.iter().filter_map(|n| self.column(n).ok())
    }

    pub fn outcome(&self) -> Vec<f64> {
        self.column(&self.roles.outcome)
            .and_then(Column::dense_values)
            .expect("outcome validated at construction")
    }

    /// Treatment arm per row (0 = control, 1 = treated).
    pub fn treatment(&self) -> Vec<u8> {
        self.column(&self.roles.treatment)
            .and_then(Column::dense_codes)
            .expect("treatment validated at construction")
            .into_iter()
            .map(|c| c as u8)
            .collect()
    }

    /// Replace the outcome vector (same length), keeping everything else.
    pub fn with_outcome(&self, y: &[f64]) -> Result<Dataset> {
        if y.len() != self.n_rows {
            return Err(WatchError::Data("outcome length mismatch".into()));
        }
        let mut out = self.clone();
        let name = out.roles.outcome.clone();
        *out.column_mut(&name)? = Column::from_f64(name.clone(), y);
        Ok(out)
    }

    /// Replace a column by name, keeping roles.
    pub fn with_column(&self, column: Column) -> Result<Dataset> {
        let mut out = self.clone();
        let slot = out.column_mut(&column.name)?;
        *slot = column;
        Dataset::new(out.columns, out.roles)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            columns: self.columns.iter().map(|c| c.select_rows(rows)).collect(),
            n_rows: rows.len(),
            roles: self.roles.clone(),
        }
    }

    /// Numeric feature view over the covariate role, for learners and
    /// forests. Fails if any covariate cell is missing.
    pub fn features(&self) -> Result<FeatureMatrix> {
        let names: Vec<&str> = self.roles.covariates.iter().map(String::as_str).collect();
        self.features_for(&names)
    }

    pub fn features_for(&self, names: &[&str]) -> Result<FeatureMatrix> {
        let mut features = Vec::with_capacity(names.len());
        for &n in names {
            let col = self.column(n)?;
            features.push(match &col.data {
                ColumnData::Continuous(_) => Feature::Continuous(col.dense_values()?),
                ColumnData::Categorical { levels, .. } => Feature::Categorical {
                    codes: col.dense_codes()?,
                    levels: levels.clone(),
                },
            });
        }
        Ok(FeatureMatrix {
            names: names.iter().map(|s| s.to_string()).collect(),
            features,
            n_rows: self.n_rows,
        })
    }
}

/// A fully observed covariate in learner form.
#[derive(Debug, Clone, PartialEq)]
pub enum Feature {
    Continuous(Vec<f64>),
    Categorical { codes: Vec<u32>, levels: Vec<String> },
}

impl Feature {
    pub fn value(&self, i: usize) -> f64 {
        match self {
            Feature::Continuous(v) => v[i],
            Feature::Categorical { codes, .. } => f64::from(codes[i]),
        }
    }

    pub fn n_levels(&self) -> Option<usize> {
        match self {
            Feature::Categorical { levels, .. } => Some(levels.len()),
            Feature::Continuous(_) => None,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Feature::Continuous(v) => v.len(),
            Feature::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select_rows(&self, rows: &[usize]) -> Feature {
        match self {
            Feature::Continuous(v) => Feature::Continuous(rows.iter().map(|&i| v[i]).collect()),
            Feature::Categorical { codes, levels } => Feature::Categorical {
                codes: rows.iter().map(|&i| codes[i]).collect(),
                levels: levels.clone(),
            },
        }
    }
}

/// Column-major covariate matrix with named features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub features: Vec<Feature>,
    n_rows: usize,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, features: Vec<Feature>) -> Result<Self> {
        if names.len() != features.len() {
            return Err(WatchError::Data("feature names and columns differ in length".into()));
        }
        let n_rows = features.first().map_or(0, Feature::len);
        if features.iter().any(|f| f.len() != n_rows) {
            return Err(WatchError::Data("feature columns differ in length".into()));
        }
        Ok(FeatureMatrix { names, features, n_rows })
    }

    /// All-continuous matrix from column vectors, named `x1..xp`.
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Self {
        let names = (1..=columns.len()).map(|j| format!("x{j}")).collect();
        let features: Vec<Feature> = columns.into_iter().map(Feature::Continuous).collect();
        Self::new(names, features).expect("equal-length columns")
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    #[inline]
    pub fn value(&self, feature: usize, row: usize) -> f64 {
        self.features[feature].value(row)
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            names: self.names.clone(),
            features: self.features.iter().map(|f| f.select_rows(rows)).collect(),
            n_rows: rows.len(),
        }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Dummy-coded design: categorical features expand to `L - 1`
    /// indicators against the first level.
    pub fn design(&self) -> DesignMatrix {
        let mut columns = Vec::new();
        let mut labels = Vec::new();
        for (name, f) in self.names.iter().zip(&self.features) {
            match f {
                Feature::Continuous(v) => {
                    columns.push(v.clone());
                    labels.push(name.clone());
                }
                Feature::Categorical { codes, levels } => {
                    for (k, level) in levels.iter().enumerate().skip(1) {
                        columns.push(codes.iter().map(|&c| f64::from(c as usize == k)).collect());
                        labels.push(format!("{name}={level}"));
                    }
                }
            }
        }
        DesignMatrix {
            columns,
            labels,
            n_rows: self.n_rows,
        }
    }
}

/// Dense column-major numeric design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub columns: Vec<Vec<f64>>,
    pub labels: Vec<String>,
    pub n_rows: usize,
}

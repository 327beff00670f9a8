use std::io::{Read, Write};
use std::path::Path;

use super::{AnalysisPlan, Column, ColumnData, Dataset, Roles};
use crate::error::{Result, WatchError};

fn is_missing(field: &str) -> bool {
    let f = field.trim();
    f.is_empty() || f == "NA"
}

/// Load a trial CSV and bind roles from the plan.
pub fn load_csv(path: &Path, plan: &AnalysisPlan) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| WatchError::io(path, e))?;
    read_csv(file, plan)
}

/// Parse CSV text: header row, comma separator, double-quote escaping.
/// Empty fields and `NA` are missing. Columns whose observed cells all parse
/// as finite numbers are continuous; everything else is categorical with
/// levels in first-appearance order.
pub fn read_csv<R: Read>(reader: R, plan: &AnalysisPlan) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut cells: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    for record in rdr.records() {
        let record = record?;
        for (j, field) in record.iter().enumerate() {
            cells[j].push(field.to_string());
        }
    }

    for name in std::iter::once(&plan.outcome)
        .chain(std::iter::once(&plan.treatment))
        .chain(plan.covariates.iter().map(|c| &c.name))
    {
        if !header.contains(name) {
            return Err(WatchError::MissingColumn(name.clone()));
        }
    }

    let mut columns = Vec::with_capacity(header.len());
    for (name, raw) in header.iter().zip(cells) {
        let column = if *name == plan.treatment {
            parse_treatment(name, &raw)?
        } else {
            infer_column(name, &raw)
        };
        columns.push(column);
    }

    let y = columns.iter().find(|c| c.name == plan.outcome).expect("checked above");
    if y.kind() != super::ColumnKind::Continuous {
        return Err(WatchError::InvalidColumn {
            column: plan.outcome.clone(),
            reason: "outcome must be numeric".into(),
        });
    }

    let roles = Roles {
        outcome: plan.outcome.clone(),
        treatment: plan.treatment.clone(),
        covariates: plan.covariates.iter().map(|c| c.name.clone()).collect(),
    };
    Dataset::new(columns, roles)
}

fn infer_column(name: &str, raw: &[String]) -> Column {
    let numeric: Option<Vec<Option<f64>>> = raw
        .iter()
        .map(|s| {
            if is_missing(s) {
                Some(None)
            } else {
                s.trim().parse::<f64>().ok().filter(|v| v.is_finite()).map(Some)
            }
        })
        .collect();
    match numeric {
        Some(values) => Column::continuous(name, values),
        None => {
            let labels: Vec<Option<&str>> = raw
                .iter()
                .map(|s| if is_missing(s) { None } else { Some(s.trim()) })
                .collect();
            Column::from_labels(name, &labels)
        }
    }
}

fn parse_treatment(name: &str, raw: &[String]) -> Result<Column> {
    let mut distinct: Vec<&str> = Vec::new();
    for s in raw {
        if is_missing(s) {
            return Err(WatchError::InvalidColumn {
                column: name.into(),
                reason: "treatment has missing values".into(),
            });
        }
        let s = s.trim();
        if !distinct.contains(&s) {
            distinct.push(s);
        }
    }
    let as_arm = |s: &str| match s.parse::<f64>() {
        Ok(0.0) => Some(0u32),
        Ok(1.0) => Some(1u32),
        _ => None,
    };
    let arms: Vec<Option<u32>> = distinct.iter().map(|s| as_arm(s)).collect();
    let mut present: Vec<u32> = arms.iter().flatten().copied().collect();
    present.sort_unstable();
    present.dedup();
    if present.len() != 2 || arms.iter().any(Option::is_none) {
        return Err(WatchError::TreatmentNotBinary {
            column: name.into(),
            n_levels: distinct.len(),
        });
    }
    let codes = raw.iter().map(|s| as_arm(s.trim())).collect();
    Ok(Column::categorical(name, vec!["0".into(), "1".into()], codes))
}

/// Write a dataset as CSV; missing cells become empty fields. Continuous
/// values use the shortest representation that parses back exactly.
pub fn write_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| WatchError::io(path, e))?;
    write_csv_to(ds, file)
}

pub fn write_csv_to<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ds.columns().iter().map(|c| c.name.as_str()))?;
    for i in 0..ds.n_rows() {
        let row: Vec<String> = ds
            .columns()
            .iter()
            .map(|c| match &c.data {
                ColumnData::Continuous(v) => v[i].map(|x| x.to_string()).unwrap_or_default(),
                ColumnData::Categorical { levels, codes } => {
                    codes[i].map(|k| levels[k as usize].clone()).unwrap_or_default()
                }
            })
            .collect();
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| WatchError::io("<csv writer>", e))?;
    Ok(())
}

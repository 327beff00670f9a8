//! Findings report: the global test, the importance ranking and the
//! displays, with every planned covariate annotated against its a-priori
//! evidence.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cate::AteSummary;
use crate::displays::FigureEntry;
use crate::hettest::{HetTestResult, Verbal};
use crate::importance::ImportanceReport;
use crate::ida::PreprocessingLog;
use crate::stats::{fmt_sig, mean};
use crate::tabular::{AnalysisPlan, ColumnData, Dataset, Direction, Evidence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionMatch {
    Match,
    Mismatch,
    Unspecified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CredibilityNote {
    HighCredibility,
    Notable,
    LowCredibility,
    Unsupported,
}

impl CredibilityNote {
    pub fn label(self) -> &'static str {
        match self {
            CredibilityNote::HighCredibility => "high credibility",
            CredibilityNote::Notable => "notable",
            CredibilityNote::LowCredibility => "low credibility",
            CredibilityNote::Unsupported => "unsupported",
        }
    }
}

/// The rule table, in the order the rules are tried.
pub const CREDIBILITY_RULES: [&str; 5] = [
    "In the top k, evidence moderate or high, direction matches, global evidence noteworthy or stronger: high credibility.",
    "In the top k, evidence moderate or high: notable.",
    "In the top k, evidence none or low, global evidence low or moderate: low credibility.",
    "Any other top-k covariate: unsupported.",
    "Outside the top k: no note; listed under consistency with the plan.",
];

/// Deterministic credibility rule table. Returns `None` outside the top k.
pub fn credibility_note(
    evidence: Evidence,
    rank: usize,
    top_k: usize,
    direction: DirectionMatch,
    verbal: Verbal,
) -> Option<CredibilityNote> {
    if rank == 0 || rank > top_k {
        return None;
    }
    let supported = matches!(evidence, Evidence::Moderate | Evidence::High);
    Some(if supported && direction == DirectionMatch::Match && verbal >= Verbal::Noteworthy {
        CredibilityNote::HighCredibility
    } else if supported {
        CredibilityNote::Notable
    } else if verbal <= Verbal::Moderate {
        CredibilityNote::LowCredibility
    } else {
        CredibilityNote::Unsupported
    })
}

/// Sign of the association between a covariate and the pseudo-outcomes:
/// the covariance for a continuous covariate, the mean difference
/// (second level minus reference) for a binary one. Undefined for more than
/// two levels.
pub fn observed_direction(ds: &Dataset, covariate: &str, phi: &[f64]) -> Direction {
    let Ok(col) = ds.column(covariate) else {
        return Direction::Unspecified;
    };
    let score = match &col.data {
        ColumnData::Continuous(_) => {
            let Ok(x) = col.dense_values() else {
                return Direction::Unspecified;
            };
            let (mx, mp) = (mean(&x), mean(phi));
            x.iter().zip(phi).map(|(a, b)| (a - mx) * (b - mp)).sum::<f64>()
        }
        ColumnData::Categorical { levels, .. } if levels.len() == 2 => {
            let Ok(codes) = col.dense_codes() else {
                return Direction::Unspecified;
            };
            let group = |l: u32| -> Vec<f64> { codes.iter().zip(phi).filter(|(c, _)| **c == l).map(|(_, p)| *p).collect() };
            let (g0, g1) = (group(0), group(1));
            if g0.is_empty() || g1.is_empty() {
                return Direction::Unspecified;
            }
            mean(&g1) - mean(&g0)
        }
        ColumnData::Categorical { .. } => return Direction::Unspecified,
    };
    if score > 0.0 {
        Direction::Positive
    } else if score < 0.0 {
        Direction::Negative
    } else {
        Direction::Unspecified
    }
}

pub fn direction_match(expected: Direction, observed: Direction) -> DirectionMatch {
    match (expected, observed) {
        (Direction::Unspecified, _) | (_, Direction::Unspecified) => DirectionMatch::Unspecified,
        (e, o) if e == o => DirectionMatch::Match,
        _ => DirectionMatch::Mismatch,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateFinding {
    pub name: String,
    pub evidence: Evidence,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    pub expected_direction: Direction,
    pub observed_direction: Direction,
    pub direction_match: DirectionMatch,
    /// 1-based importance rank; absent when dropped before analysis.
    pub rank: Option<usize>,
    pub in_top_k: bool,
    pub note: Option<CredibilityNote>,
    pub dropped: bool,
}

/// Placeholder for a user-run sensitivity analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRun {
    pub label: String,
    pub p_value: f64,
    pub verbal: Verbal,
    pub ranking: Vec<String>,
}

/// Field order is the reading order: global test, then importance, then
/// displays, then the per-covariate assessment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FindingsReport {
    pub n_rows: usize,
    pub seed: u64,
    pub het_test: HetTestResult,
    pub ate: AteSummary,
    pub importance: ImportanceReport,
    pub displays: Vec<FigureEntry>,
    pub covariates: Vec<CovariateFinding>,
    pub preprocessing: PreprocessingLog,
    pub sensitivity: Vec<SensitivityRun>,
    pub credibility_rules: Vec<String>,
}

/// Annotate every plan covariate, in plan order.
pub fn assess_covariates(
    plan: &AnalysisPlan,
    ds: &Dataset,
    phi: &[f64],
    importance: &ImportanceReport,
    verbal: Verbal,
    dropped: &[String],
) -> Vec<CovariateFinding> {
    plan.covariates
        .iter()
        .map(|c| {
            let is_dropped = dropped.contains(&c.name);
            let rank = importance.rank_of(&c.name);
            let observed = if is_dropped {
                Direction::Unspecified
            } else {
                observed_direction(ds, &c.name, phi)
            };
            let dm = direction_match(c.expected_direction, observed);
            let note = rank.and_then(|r| credibility_note(c.evidence, r, importance.top_k, dm, verbal));
            CovariateFinding {
                name: c.name.clone(),
                evidence: c.evidence,
                source: c.source.clone(),
                expected_direction: c.expected_direction,
                observed_direction: observed,
                direction_match: dm,
                rank,
                in_top_k: rank.is_some_and(|r| r <= importance.top_k),
                note,
                dropped: is_dropped,
            }
        })
        .collect()
}

fn evidence_label(e: Evidence) -> &'static str {
    match e {
        Evidence::None => "none",
        Evidence::Low => "low",
        Evidence::Moderate => "moderate",
        Evidence::High => "high",
    }
}

fn direction_label(d: Direction) -> &'static str {
    match d {
        Direction::Positive => "positive",
        Direction::Negative => "negative",
        Direction::Unspecified => "unspecified",
    }
}

const CAUTION: &str = "> **Caution.** The global test gives little evidence against a homogeneous \
treatment effect. The ranking below is driven by the data and may reflect noise. Covariates \
without a-priori external evidence are of low credibility as effect modifiers and need to be \
interpreted cautiously.";

/// Markdown rendering. The global p-value and its verbal category come
/// before any ranking.
pub fn render_markdown(r: &FindingsReport) -> String {
    let t = &r.het_test;
    let mut s = String::new();
    let _ = writeln!(s, "# Treatment-effect heterogeneity findings\n");
    let _ = writeln!(s, "Rows analysed: {}. Seed: {}.\n", r.n_rows, r.seed);
    let _ = writeln!(s, "## Evidence against homogeneity\n");
    let _ = writeln!(
        s,
        "Global p-value: **{}**, {} evidence against a homogeneous treatment effect \
         (surprise value {} bits, {} permutations).\n",
        fmt_sig(t.p_value, 3),
        t.verbal,
        fmt_sig(t.surprise, 3),
        t.n_permutations
    );
    let _ = writeln!(
        s,
        "The p-value is read on a continuum; the verbal category is a summary of where it falls.\n"
    );
    if t.verbal <= Verbal::Moderate {
        let _ = writeln!(s, "{CAUTION}\n");
    }
    let _ = writeln!(
        s,
        "Average treatment effect (mean pseudo-outcome): {} (95% interval {} to {}).\n",
        fmt_sig(r.ate.estimate, 4),
        fmt_sig(r.ate.ci_lower, 4),
        fmt_sig(r.ate.ci_upper, 4)
    );

    let _ = writeln!(s, "## Covariate importance\n");
    let _ = writeln!(s, "| rank | covariate | importance | a-priori evidence | direction (expected / observed) | note |");
    let _ = writeln!(s, "|---:|---|---:|---|---|---|");
    let imp = &r.importance;
    for (k, name) in imp.ranking.iter().take(imp.top_k).enumerate() {
        let j = imp.covariates.iter().position(|c| c == name).unwrap_or(0);
        let f = r.covariates.iter().find(|c| &c.name == name);
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} / {} | {} |",
            k + 1,
            name,
            fmt_sig(imp.vimp[j], 3),
            f.map_or("not in plan", |f| evidence_label(f.evidence)),
            f.map_or("-", |f| direction_label(f.expected_direction)),
            f.map_or("-", |f| direction_label(f.observed_direction)),
            f.and_then(|f| f.note).map_or("-", |n| n.label())
        );
    }
    s.push('\n');
    match imp.stability {
        Some(v) => {
            let _ = writeln!(
                s,
                "Top-{} selection stability over {} bootstrap runs: {}.\n",
                imp.top_k,
                imp.bootstrap_vimp.len(),
                fmt_sig(v, 3)
            );
        }
        None => {
            let _ = writeln!(s, "Selection stability: not available.\n");
        }
    }

    let _ = writeln!(s, "## Displays\n");
    if r.displays.is_empty() {
        let _ = writeln!(s, "No figures were produced.\n");
    }
    for d in &r.displays {
        let _ = writeln!(s, "- [{}]({}) (data: `{}`)", d.title, d.svg, d.data);
    }
    if !r.displays.is_empty() {
        s.push('\n');
    }

    let _ = writeln!(s, "## Consistency with the analysis plan\n");
    let outside: Vec<&CovariateFinding> = r.covariates.iter().filter(|c| !c.in_top_k && !c.dropped).collect();
    let supported_outside: Vec<&str> = outside
        .iter()
        .filter(|c| matches!(c.evidence, Evidence::Moderate | Evidence::High))
        .map(|c| c.name.as_str())
        .collect();
    let any_supported = r
        .covariates
        .iter()
        .any(|c| matches!(c.evidence, Evidence::Moderate | Evidence::High));
    if !any_supported {
        let _ = writeln!(s, "No covariate was declared with moderate or high a-priori evidence.\n");
    } else if supported_outside.is_empty() {
        let _ = writeln!(s, "Every covariate with moderate or high a-priori evidence is in the top {}.\n", imp.top_k);
    } else {
        let _ = writeln!(
            s,
            "Covariates with moderate or high a-priori evidence outside the top {}: {}.\n",
            imp.top_k,
            supported_outside.join(", ")
        );
    }
    if !outside.is_empty() {
        let names: Vec<String> = outside
            .iter()
            .map(|c| format!("{} (rank {})", c.name, c.rank.map_or("-".to_string(), |r| r.to_string())))
            .collect();
        let _ = writeln!(s, "Not among the findings: {}.\n", names.join(", "));
    }
    let dropped: Vec<&str> = r.covariates.iter().filter(|c| c.dropped).map(|c| c.name.as_str()).collect();
    if !dropped.is_empty() {
        let _ = writeln!(s, "Dropped as non-informative before analysis: {}.\n", dropped.join(", "));
    }
    let pp = &r.preprocessing;
    if !pp.imputed.is_empty() {
        let _ = writeln!(s, "Imputed (pooled median or mode): {}.\n", pp.imputed.join(", "));
    }
    if !pp.merged_levels.is_empty() {
        let _ = writeln!(s, "Sparse levels merged: {}.\n", pp.merged_levels.join(", "));
    }

    let _ = writeln!(s, "## Sensitivity analyses\n");
    if r.sensitivity.is_empty() {
        let _ = writeln!(s, "None recorded.\n");
    }
    for run in &r.sensitivity {
        let _ = writeln!(
            s,
            "- {}: p = {} ({}), top covariates {}",
            run.label,
            fmt_sig(run.p_value, 3),
            run.verbal,
            run.ranking.iter().take(3).cloned().collect::<Vec<_>>().join(", ")
        );
    }

    let _ = writeln!(s, "---\n");
    let _ = writeln!(s, "Credibility notes follow these rules, tried in order:\n");
    for (k, rule) in r.credibility_rules.iter().enumerate() {
        let _ = writeln!(s, "{}. {}", k + 1, rule);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_table_examples() {
        use CredibilityNote::*;
        assert_eq!(
            credibility_note(Evidence::High, 1, 10, DirectionMatch::Match, Verbal::Strong),
            Some(HighCredibility)
        );
        assert_eq!(
            credibility_note(Evidence::None, 2, 10, DirectionMatch::Unspecified, Verbal::Low),
            Some(LowCredibility)
        );
        assert_eq!(
            credibility_note(Evidence::Low, 3, 10, DirectionMatch::Unspecified, Verbal::Noteworthy),
            Some(Unsupported)
        );
        assert_eq!(
            credibility_note(Evidence::Moderate, 3, 10, DirectionMatch::Mismatch, Verbal::VeryStrong),
            Some(Notable)
        );
        assert_eq!(credibility_note(Evidence::High, 11, 10, DirectionMatch::Match, Verbal::Strong), None);
    }

    #[test]
    fn direction_matching() {
        assert_eq!(direction_match(Direction::Positive, Direction::Positive), DirectionMatch::Match);
        assert_eq!(direction_match(Direction::Positive, Direction::Negative), DirectionMatch::Mismatch);
        assert_eq!(direction_match(Direction::Unspecified, Direction::Negative), DirectionMatch::Unspecified);
    }
}

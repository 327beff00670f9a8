//! Descriptive effect displays. Everything here summarizes observed data
//! (arm means, spline fits per arm, smooths of the pseudo-outcomes); the
//! forest is not used. Figures are plain data and render to SVG + JSON.

pub mod curves;
pub mod groups;
pub mod render;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use curves::{
    effect_curve, equispaced_grid, local_regression, spline_fit, ArmSplines, CurvePoint, EffectCurve, SplineBasis, SplineFit, Z95,
};
pub use groups::{group_effects, ArmSummary, GroupEffect};
pub use render::{render_svg, write_figure, Figure, Heatmap, Point, Series, Style};

use crate::error::{Result, WatchError};
use crate::ida::{ColumnSummary, Dendrogram, MissingnessReport};
use crate::ida::AssociationMatrix;
use crate::importance::{ImportanceReport, VintMatrix};
use crate::stats::{fmt_sig, quantile_sorted, sorted_copy};
use crate::tabular::{ColumnData, Dataset};

pub const DEFAULT_DF: usize = 4;
pub const DEFAULT_SPAN: f64 = 0.75;
pub const DEFAULT_GRID: usize = 50;

const BAND_NOTE: &str = "Pointwise 95% bands use the homoscedastic linear-model variance.";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DisplayConfig {
    pub spline_df: usize,
    pub span: f64,
    pub grid_size: usize,
    /// How many of the top-ranked covariates get their own displays.
    pub top_n: usize,
}

impl Default for DisplayConfig {
    fn default() -> Self {
        DisplayConfig {
            spline_df: DEFAULT_DF,
            span: DEFAULT_SPAN,
            grid_size: DEFAULT_GRID,
            top_n: 3,
        }
    }
}

/// Effect curves of one continuous covariate within strata of another.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BivariatePanel {
    pub covariate: String,
    pub by: String,
    pub strata: Vec<PanelStratum>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelStratum {
    pub label: String,
    pub n: usize,
    /// Absent when the stratum is too small for per-arm splines.
    pub curve: Option<EffectCurve>,
}

/// Stratify by the levels of a categorical `by`, or by tertiles of a
/// continuous one, and fit effect curves of `covariate` in each stratum.
pub fn bivariate_curves(ds: &Dataset, phi: &[f64], covariate: &str, by: &str, cfg: &DisplayConfig) -> Result<BivariatePanel> {
    if phi.len() != ds.n_rows() {
        return Err(WatchError::Data("pseudo-outcomes and dataset differ in length".into()));
    }
    let x = continuous_values(ds, covariate)?;
    let col = ds.column(by)?;
    let strata: Vec<(String, Vec<usize>)> = match &col.data {
        ColumnData::Categorical { levels, .. } => {
            let codes = col.dense_codes()?;
            levels
                .iter()
                .enumerate()
                .map(|(k, l)| (format!("{by}={l}"), (0..ds.n_rows()).filter(|&i| codes[i] as usize == k).collect()))
                .collect()
        }
        ColumnData::Continuous(_) => {
            let v = col.dense_values()?;
            let s = sorted_copy(&v);
            let (q1, q2) = (quantile_sorted(&s, 1.0 / 3.0), quantile_sorted(&s, 2.0 / 3.0));
            let (a, b) = (fmt_sig(q1, 4), fmt_sig(q2, 4));
            vec![
                (format!("{by} <= {a}"), (0..v.len()).filter(|&i| v[i] <= q1).collect()),
                (format!("{a} < {by} <= {b}"), (0..v.len()).filter(|&i| v[i] > q1 && v[i] <= q2).collect()),
                (format!("{by} > {b}"), (0..v.len()).filter(|&i| v[i] > q2).collect()),
            ]
        }
    };
    let y = ds.outcome();
    let a = ds.treatment();
    let mut out = Vec::new();
    for (label, rows) in strata {
        if rows.is_empty() {
            continue;
        }
        let pick = |v: &[f64]| rows.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        let arm: Vec<u8> = rows.iter().map(|&i| a[i]).collect();
        let curve = effect_curve(
            covariate,
            &pick(&x),
            &pick(&y),
            &arm,
            &pick(phi),
            cfg.spline_df,
            cfg.span,
            cfg.grid_size,
        )
        .ok();
        out.push(PanelStratum {
            label,
            n: rows.len(),
            curve,
        });
    }
    Ok(BivariatePanel {
        covariate: covariate.into(),
        by: by.into(),
        strata: out,
    })
}

fn continuous_values(ds: &Dataset, name: &str) -> Result<Vec<f64>> {
    let col = ds.column(name)?;
    match &col.data {
        ColumnData::Continuous(_) => col.dense_values(),
        ColumnData::Categorical { .. } => Err(WatchError::InvalidColumn {
            column: name.into(),
            reason: "effect curves need a continuous covariate".into(),
        }),
    }
}

/// Effect curve for a continuous covariate of the dataset.
pub fn covariate_curve(ds: &Dataset, phi: &[f64], covariate: &str, cfg: &DisplayConfig) -> Result<EffectCurve> {
    let x = continuous_values(ds, covariate)?;
    effect_curve(covariate, &x, &ds.outcome(), &ds.treatment(), phi, cfg.spline_df, cfg.span, cfg.grid_size)
}

/// Make a string safe for use in a file name.
pub fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn bars(name: &str, ys: impl IntoIterator<Item = f64>) -> Series {
    Series {
        name: name.into(),
        style: Style::Bars,
        points: ys.into_iter().enumerate().map(|(k, y)| Point::new(k as f64, y)).collect(),
    }
}

pub fn histogram_figure(summary: &ColumnSummary) -> Figure {
    let name = summary.name();
    let mut f = Figure::new(&format!("hist_{}", slug(name)), &format!("Distribution of {name}"), name, "count");
    match summary {
        ColumnSummary::Continuous {
            histogram, min, max, ..
        } => {
            if let (Some(lo), Some(hi)) = (*min, *max) {
                let w = (hi - lo) / histogram.len().max(1) as f64;
                f.x_categories = (0..histogram.len())
                    .map(|k| fmt_sig(lo + w * (k as f64 + 0.5), 3))
                    .collect();
                f.series.push(bars("count", histogram.iter().map(|&c| c as f64)));
            }
        }
        ColumnSummary::Categorical { frequencies, .. } => {
            f.x_categories = frequencies.iter().map(|l| l.level.clone()).collect();
            f.series.push(bars("count", frequencies.iter().map(|l| l.count as f64)));
        }
    }
    if summary.missing() > 0 {
        f.annotations.push(format!("{} missing", summary.missing()));
    }
    f
}

pub fn missingness_figure(m: &MissingnessReport) -> Figure {
    let mut f = Figure::new("missingness", "Fraction missing per column", "column", "fraction missing");
    f.x_categories = m.columns.clone();
    f.series.push(bars("missing", m.fractions.iter().copied()));
    f.annotations.push(format!("{} distinct missingness patterns", m.patterns.len()));
    f
}

pub fn association_figure(m: &AssociationMatrix) -> Figure {
    let mut f = Figure::new("association", "Pairwise covariate association", "", "");
    f.heatmap = Some(Heatmap {
        rows: m.names.clone(),
        cols: m.names.clone(),
        values: m.values.clone(),
    });
    f.annotations
        .push("Pearson |r| (continuous), correlation ratio (mixed), Cramer's V (categorical).".into());
    f
}

/// Dendrogram drawn as segments: leaves along x in drawing order, merge
/// height on y.
pub fn dendrogram_figure(d: &Dendrogram) -> Figure {
    let mut f = Figure::new("dendrogram", "Average-linkage clustering of covariates", "", "1 - association");
    f.x_categories = d.order.iter().map(|&i| d.names[i].clone()).collect();
    let p = d.names.len();
    // (x position, height) per cluster id.
    let mut pos: Vec<(f64, f64)> = vec![(0.0, 0.0); p + d.merges.len()];
    for (k, &leaf) in d.order.iter().enumerate() {
        pos[leaf] = (k as f64, 0.0);
    }
    let mut seg = Vec::new();
    for (k, m) in d.merges.iter().enumerate() {
        let (l, r) = (pos[m.left], pos[m.right]);
        seg.extend([
            Point::new(l.0, l.1),
            Point::new(l.0, m.height),
            Point::new(r.0, r.1),
            Point::new(r.0, m.height),
            Point::new(l.0, m.height),
            Point::new(r.0, m.height),
        ]);
        pos[p + k] = ((l.0 + r.0) / 2.0, m.height);
    }
    f.series.push(Series {
        name: "merges".into(),
        style: Style::Segments,
        points: seg,
    });
    f
}

pub fn vimp_figure(r: &ImportanceReport) -> Figure {
    let mut f = Figure::new("vimp", "Permutation variable importance", "covariate", "increase in OOB error");
    f.x_categories = r.ranking.clone();
    f.series.push(bars(
        "vimp",
        r.ranking.iter().map(|n| {
            let j = r.covariates.iter().position(|c| c == n).unwrap_or(0);
            r.vimp[j]
        }),
    ));
    f
}

/// Bootstrap importance per covariate, covariates in ranking order.
pub fn bootstrap_figure(r: &ImportanceReport) -> Figure {
    let mut f = Figure::new("vimp_bootstrap", "Bootstrap permutation importance", "covariate", "importance");
    f.x_categories = r.ranking.clone();
    let mut pts = Vec::new();
    for (k, n) in r.ranking.iter().enumerate() {
        let j = r.covariates.iter().position(|c| c == n).unwrap_or(0);
        pts.extend(r.bootstrap_vimp.iter().map(|run| Point::new(k as f64, run[j])));
    }
    f.series.push(Series {
        name: "bootstrap runs".into(),
        style: Style::Points,
        points: pts,
    });
    if let Some(s) = r.stability {
        f.annotations.push(format!("Top-{} selection stability: {}", r.top_k, fmt_sig(s, 3)));
    }
    f
}

pub fn vint_figure(v: &VintMatrix) -> Figure {
    let mut f = Figure::new("vint", "Interaction importance (diagonal: permutation importance)", "", "");
    f.heatmap = Some(Heatmap {
        rows: v.names.clone(),
        cols: v.names.clone(),
        values: v.values.clone(),
    });
    f
}

/// Two figures per grouping: arm means with intervals, and unadjusted
/// effects with the pseudo-outcome averages as stars.
pub fn group_figures(name: &str, groups: &[GroupEffect]) -> [Figure; 2] {
    let id = slug(name);
    let cats: Vec<String> = groups.iter().map(|g| g.labels.join(" / ")).collect();
    let mut arms = Figure::new(&format!("groups_{id}_arms"), &format!("Outcome by arm within {name}"), name, "mean outcome");
    arms.x_categories = cats.clone();
    for (label, pick) in [("control", 0), ("treated", 1)] {
        let pts = groups
            .iter()
            .enumerate()
            .filter_map(|(k, g)| {
                let s = if pick == 0 { &g.control } else { &g.treated };
                let shift = if pick == 0 { -0.12 } else { 0.12 };
                s.mean.map(|m| match s.ci {
                    Some([lo, hi]) => Point::with_band(k as f64 + shift, m, lo, hi),
                    None => Point::new(k as f64 + shift, m),
                })
            })
            .collect();
        arms.series.push(Series {
            name: label.into(),
            style: Style::Intervals,
            points: pts,
        });
    }
    let mut eff = Figure::new(&format!("groups_{id}_effect"), &format!("Treatment effect within {name}"), name, "treated - control");
    eff.x_categories = cats;
    eff.series.push(Series {
        name: "unadjusted effect".into(),
        style: Style::Intervals,
        points: groups
            .iter()
            .enumerate()
            .filter_map(|(k, g)| {
                g.effect.map(|e| match g.effect_ci {
                    Some([lo, hi]) => Point::with_band(k as f64, e, lo, hi),
                    None => Point::new(k as f64, e),
                })
            })
            .collect(),
    });
    eff.series.push(Series {
        name: "mean pseudo-outcome".into(),
        style: Style::Stars,
        points: groups.iter().enumerate().map(|(k, g)| Point::new(k as f64, g.pseudo_mean)).collect(),
    });
    let undefined: Vec<&str> = groups
        .iter()
        .zip(&eff.x_categories)
        .filter(|(g, _)| !g.effect_defined)
        .map(|(_, c)| c.as_str())
        .collect();
    if !undefined.is_empty() {
        eff.annotations.push(format!("No effect estimate (one arm empty): {}", undefined.join(", ")));
    }
    eff.annotations.push("Intervals: difference in means +/- 1.96 unpooled SE.".into());
    [arms, eff]
}

fn band_series(name: &str, pts: &[CurvePoint]) -> Series {
    Series {
        name: name.into(),
        style: Style::Line,
        points: pts.iter().map(|c| Point::with_band(c.x, c.fit, c.lower, c.upper)).collect(),
    }
}

fn smooth_series(c: &EffectCurve, name: &str) -> Series {
    Series {
        name: name.into(),
        style: Style::Line,
        points: c.pseudo_smooth.iter().map(|&[x, y]| Point::new(x, y)).collect(),
    }
}

/// Per-arm spline fits, and their difference next to the pseudo-outcome
/// smooth.
pub fn curve_figures(c: &EffectCurve) -> [Figure; 2] {
    let id = slug(&c.covariate);
    let mut arms = Figure::new(&format!("curve_{id}_arms"), &format!("Outcome vs {} by arm", c.covariate), &c.covariate, "fitted mean outcome");
    arms.series.push(band_series("control", &c.control));
    arms.series.push(band_series("treated", &c.treated));
    arms.annotations.push(BAND_NOTE.into());
    let mut eff = Figure::new(&format!("curve_{id}_effect"), &format!("Treatment effect vs {}", c.covariate), &c.covariate, "treated - control");
    eff.series.push(band_series("spline difference", &c.effect));
    eff.series.push(smooth_series(c, "pseudo-outcome smooth"));
    eff.annotations.push(BAND_NOTE.into());
    [arms, eff]
}

pub fn bivariate_figure(panel: &BivariatePanel) -> Figure {
    let mut f = Figure::new(
        &format!("panel_{}_by_{}", slug(&panel.covariate), slug(&panel.by)),
        &format!("Treatment effect vs {} within strata of {}", panel.covariate, panel.by),
        &panel.covariate,
        "treated - control",
    );
    for s in &panel.strata {
        match &s.curve {
            Some(c) => f.series.push(band_series(&s.label, &c.effect)),
            None => f.annotations.push(format!("{} (n={}): too few rows per arm for a spline", s.label, s.n)),
        }
    }
    f
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureEntry {
    pub id: String,
    pub title: String,
    pub svg: String,
    pub data: String,
}

/// Write every figure into `dir` and return a manifest with paths relative
/// to `dir`'s parent.
pub fn write_figures(figs: &[Figure], dir: &Path) -> Result<Vec<FigureEntry>> {
    let prefix = dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    figs.iter()
        .map(|f| {
            let (svg, data) = write_figure(f, dir)?;
            Ok(FigureEntry {
                id: f.id.clone(),
                title: f.title.clone(),
                svg: format!("{prefix}/{svg}"),
                data: format!("{prefix}/{data}"),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ida::cluster_distances;

    #[test]
    fn slug_is_file_safe() {
        assert_eq!(slug("X1 a/b"), "X1_a_b");
    }

    #[test]
    fn empty_groups_render_placeholder() {
        let [a, e] = group_figures("X1", &[]);
        assert!(render_svg(&a).contains("no data"));
        assert!(render_svg(&e).contains("no data"));
    }

    #[test]
    fn dendrogram_segments_per_merge() {
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let d = cluster_distances(&names, &[vec![0.0, 0.1, 0.5], vec![0.1, 0.0, 0.5], vec![0.5, 0.5, 0.0]]).unwrap();
        let f = dendrogram_figure(&d);
        assert_eq!(f.series[0].points.len(), 6 * 2);
        let top = f.series[0].points.iter().map(|p| p.y).fold(0.0, f64::max);
        assert!((top - 0.5).abs() < 1e-12);
    }
}

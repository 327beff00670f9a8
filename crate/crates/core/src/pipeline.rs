//! End-to-end runs behind the `watch` subcommands.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::benchgen::{self, ScenarioSpec};
use crate::cate::{self, AteSummary, LearnerNuisances, NuisanceConfig, PseudoOutcomes};
use crate::displays::{self, DisplayConfig, Figure, FigureEntry};
use crate::error::{Result, ResultExt, WatchError};
use crate::hettest::{self, HetTestResult};
use crate::ida::{self, IdaReport, PreprocessingLog};
use crate::importance::{self, CiForestParams, ImportanceConfig, ImportanceReport};
use crate::report::{self, FindingsReport};
use crate::tabular::{self, AnalysisPlan, ColumnData, ColumnKind, Dataset, ImputeOptions};

pub const IDA_REPORT: &str = "ida_report.json";
pub const FINDINGS_JSON: &str = "findings.json";
pub const FINDINGS_MD: &str = "findings.md";
pub const PSEUDO_OUTCOMES: &str = "pseudo_outcomes.csv";
pub const FIGURES_DIR: &str = "figures";
pub const TRIAL_CSV: &str = "trial.csv";
pub const TRUTH_CSV: &str = "truth.csv";
pub const ANALYSIS_CONFIG: &str = "analysis_config.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrepConfig {
    /// Categorical levels rarer than this fraction of rows are merged.
    pub min_level_frac: f64,
    /// Covariates whose most common value exceeds this fraction are dropped.
    pub max_dominance: f64,
    pub missing_indicators: bool,
}

impl Default for PrepConfig {
    fn default() -> Self {
        PrepConfig {
            min_level_frac: 0.05,
            max_dominance: 0.99,
            missing_indicators: false,
        }
    }
}

/// Importance settings not already fixed by the plan (tree count and
/// bootstrap runs come from the plan).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImportanceOptions {
    pub n_repeats: usize,
    pub top_k: usize,
    pub grid_size: usize,
    pub alpha: f64,
    pub min_leaf: usize,
    pub mtry: Option<usize>,
}

impl Default for ImportanceOptions {
    fn default() -> Self {
        let d = ImportanceConfig::default();
        ImportanceOptions {
            n_repeats: d.n_repeats,
            top_k: d.top_k,
            grid_size: d.grid_size,
            alpha: d.forest.alpha,
            min_leaf: d.forest.min_leaf,
            mtry: d.forest.mtry,
        }
    }
}

/// Configuration file for `ida` and `analyze`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Trial CSV; relative paths resolve against the config file's directory.
    pub data: PathBuf,
    pub plan: AnalysisPlan,
    #[serde(default)]
    pub preprocessing: PrepConfig,
    #[serde(default)]
    pub nuisance: NuisanceConfig,
    #[serde(default)]
    pub importance: ImportanceOptions,
    #[serde(default)]
    pub displays: DisplayConfig,
}

impl RunConfig {
    pub fn from_json_str(s: &str) -> Result<RunConfig> {
        let cfg: RunConfig = serde_json::from_str(s).map_err(|e| WatchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read a config file and resolve `data` relative to it.
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| WatchError::Config(format!("cannot read config `{}`: {e}", path.display())))?;
        let mut cfg = RunConfig::from_json_str(&s)?;
        if cfg.data.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.data = dir.join(&cfg.data);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.plan.validate()?;
        let p = &self.preprocessing;
        if !(p.min_level_frac > 0.0 && p.min_level_frac < 0.5) {
            return Err(WatchError::Config(format!("min_level_frac must lie in (0, 0.5), got {}", p.min_level_frac)));
        }
        if !(p.max_dominance > 0.0 && p.max_dominance <= 1.0) {
            return Err(WatchError::Config(format!("max_dominance must lie in (0, 1], got {}", p.max_dominance)));
        }
        let i = &self.importance;
        if i.top_k == 0 || i.n_repeats == 0 || i.grid_size < 2 {
            return Err(WatchError::Config("top_k and n_repeats must be positive, grid_size at least 2".into()));
        }
        if !(i.alpha > 0.0 && i.alpha <= 1.0) {
            return Err(WatchError::Config(format!("alpha must lie in (0, 1], got {}", i.alpha)));
        }
        let d = &self.displays;
        if !(d.span > 0.0 && d.span <= 1.0) || d.spline_df < 1 || d.grid_size < 2 {
            return Err(WatchError::Config("display span must lie in (0, 1], spline_df >= 1, grid_size >= 2".into()));
        }
        Ok(())
    }

    pub fn importance_config(&self) -> ImportanceConfig {
        let i = &self.importance;
        ImportanceConfig {
            forest: CiForestParams {
                n_trees: self.plan.n_trees,
                mtry: i.mtry,
                alpha: i.alpha,
                min_leaf: i.min_leaf,
            },
            n_repeats: i.n_repeats,
            top_k: i.top_k,
            grid_size: i.grid_size,
            bootstrap_reps: self.plan.bootstrap_reps,
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| WatchError::io(dir, e))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let s = serde_json::to_string_pretty(value)?;
    std::fs::write(path, s + "\n").map_err(|e| WatchError::io(path, e))
}

/// Load the CSV named in the config. A missing file is a data problem.
pub fn load_data(cfg: &RunConfig) -> Result<Dataset> {
    if !cfg.data.exists() {
        return Err(WatchError::Data(format!("data file `{}` not found", cfg.data.display())));
    }
    tabular::load_csv(&cfg.data, &cfg.plan).context(format!("loading `{}`", cfg.data.display()))
}

/// Analysis dataset: impute, merge sparse levels, drop non-informative
/// covariates, in that order.
pub fn prepare(raw: &Dataset, cfg: &PrepConfig) -> Result<(Dataset, PreprocessingLog)> {
    let imputed: Vec<String> = raw.covariates().filter(|c| c.n_missing() > 0).map(|c| c.name.clone()).collect();
    let ds = tabular::impute_baseline_with(
        raw,
        ImputeOptions {
            add_indicators: cfg.missing_indicators,
        },
    )?;
    let merged_ds = tabular::merge_sparse_levels(&ds, cfg.min_level_frac)?;
    let mut merged_levels = Vec::new();
    for col in ds.covariates() {
        if let (Some(before), Ok(after)) = (col.levels(), merged_ds.column(&col.name)) {
            let after = after.levels().unwrap_or(&[]);
            for l in before.iter().filter(|l| !after.contains(l)) {
                merged_levels.push(format!("{}:{}", col.name, l));
            }
        }
    }
    let (out, dropped) = tabular::drop_noninformative(&merged_ds, cfg.max_dominance)?;
    if out.roles.covariates.is_empty() {
        return Err(WatchError::Data("no informative covariates left after preprocessing".into()));
    }
    Ok((
        out,
        PreprocessingLog {
            imputed,
            merged_levels,
            dropped,
        },
    ))
}

/// Outputs of an IDA run, also written to disk by [`run_ida`].
pub fn ida_report(raw: &Dataset, cfg: &RunConfig) -> Result<(IdaReport, Vec<Figure>)> {
    let missingness = ida::missingness_report(raw);
    let univariate = ida::univariate_summary(raw);
    let by_treatment = ida::stratified_summary(raw, &raw.roles.treatment)?;
    let (ds, preprocessing) = prepare(raw, &cfg.preprocessing)?;
    let association = ida::association_matrix(&ds)?;
    let dendrogram = (association.names.len() >= 2)
        .then(|| ida::cluster_covariates(&association))
        .transpose()?;
    let mut figs: Vec<Figure> = univariate.iter().map(displays::histogram_figure).collect();
    figs.push(displays::missingness_figure(&missingness));
    figs.push(displays::association_figure(&association));
    if let Some(d) = &dendrogram {
        figs.push(displays::dendrogram_figure(d));
    }
    let report = IdaReport {
        n_rows: raw.n_rows(),
        univariate,
        by_treatment,
        missingness,
        association,
        dendrogram,
        preprocessing,
    };
    Ok((report, figs))
}

/// `watch ida`: writes `ida_report.json` and `figures/`.
pub fn run_ida(cfg: &RunConfig, out: &Path) -> Result<IdaReport> {
    let raw = load_data(cfg)?;
    let (report, figs) = ida_report(&raw, cfg).context("initial data analysis")?;
    create_dir(out)?;
    displays::write_figures(&figs, &out.join(FIGURES_DIR))?;
    write_json(&report, &out.join(IDA_REPORT))?;
    Ok(report)
}

/// In-memory result of an analysis.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub dataset: Dataset,
    pub pseudo: PseudoOutcomes,
    pub ate: AteSummary,
    pub het_test: HetTestResult,
    pub importance: ImportanceReport,
    pub figures: Vec<Figure>,
    pub preprocessing: PreprocessingLog,
}

/// Pseudo-outcomes, global test, importance and displays for a prepared
/// dataset. Every random step is seeded from `cfg.plan.seed`.
pub fn analyze_dataset(ds: Dataset, preprocessing: PreprocessingLog, cfg: &RunConfig) -> Result<Analysis> {
    let plan = &cfg.plan;
    let folds = cate::assign_folds(&ds, plan.k_folds, plan.seed).context("cross-fitting")?;
    let est = LearnerNuisances {
        config: cfg.nuisance.clone(),
        propensity: plan.propensity,
        seed: plan.seed,
    };
    let pseudo = cate::pseudo_outcomes(&ds, &folds, &est, cfg.nuisance.clip_epsilon).context("pseudo-outcomes")?;
    let ate = cate::ate_summary(&pseudo.phi)?;
    let x = ds.features()?;
    let het_test = hettest::global_test(&x, &pseudo.phi, plan.n_permutations, plan.seed).context("global test")?;
    let importance =
        importance::analyze_importance(&x, &pseudo.phi, &cfg.importance_config(), plan.seed).context("importance")?;
    let figures = analysis_figures(&ds, &pseudo.phi, &importance, &cfg.displays);
    Ok(Analysis {
        dataset: ds,
        pseudo,
        ate,
        het_test,
        importance,
        figures,
        preprocessing,
    })
}

fn placeholder(id: &str, title: &str, reason: String) -> Figure {
    let mut f = Figure::new(id, title, "", "");
    f.annotations.push(reason);
    f
}

/// Importance figures, then displays for the top-ranked covariates and for
/// the top pair.
pub fn analysis_figures(ds: &Dataset, phi: &[f64], imp: &ImportanceReport, cfg: &DisplayConfig) -> Vec<Figure> {
    let mut figs = vec![displays::vimp_figure(imp), displays::vint_figure(&imp.vint)];
    if !imp.bootstrap_vimp.is_empty() {
        figs.push(displays::bootstrap_figure(imp));
    }
    let top: Vec<&str> = imp.ranking.iter().take(cfg.top_n).map(String::as_str).collect();
    let kind = |name: &str| ds.column(name).map(|c| c.kind()).ok();
    for &name in &top {
        match kind(name) {
            Some(ColumnKind::Categorical) => match displays::group_effects(ds, phi, name, None) {
                Ok(g) => figs.extend(displays::group_figures(name, &g)),
                Err(e) => figs.push(placeholder(&format!("groups_{}", displays::slug(name)), name, e.to_string())),
            },
            Some(ColumnKind::Continuous) => match displays::covariate_curve(ds, phi, name, cfg) {
                Ok(c) => figs.extend(displays::curve_figures(&c)),
                Err(e) => figs.push(placeholder(&format!("curve_{}", displays::slug(name)), name, e.to_string())),
            },
            None => {}
        }
    }
    if let [a, b, ..] = top[..] {
        let categorical = |n: &str| matches!(ds.column(n).map(|c| &c.data), Ok(ColumnData::Categorical { .. }));
        match (categorical(a), categorical(b)) {
            (true, true) => {
                if let Ok(g) = displays::group_effects(ds, phi, a, Some(b)) {
                    let [arms, eff] = displays::group_figures(&format!("{a} x {b}"), &g);
                    figs.push(arms);
                    figs.push(eff);
                }
            }
            (false, _) => {
                if let Ok(p) = displays::bivariate_curves(ds, phi, a, b, cfg) {
                    figs.push(displays::bivariate_figure(&p));
                }
            }
            (true, false) => {
                if let Ok(p) = displays::bivariate_curves(ds, phi, b, a, cfg) {
                    figs.push(displays::bivariate_figure(&p));
                }
            }
        }
    }
    figs
}

pub fn findings_report(cfg: &RunConfig, a: &Analysis, manifest: Vec<FigureEntry>) -> FindingsReport {
    let covariates = report::assess_covariates(
        &cfg.plan,
        &a.dataset,
        &a.pseudo.phi,
        &a.importance,
        a.het_test.verbal,
        &a.preprocessing.dropped,
    );
    FindingsReport {
        n_rows: a.dataset.n_rows(),
        seed: cfg.plan.seed,
        het_test: a.het_test.clone(),
        ate: a.ate,
        importance: a.importance.clone(),
        displays: manifest,
        covariates,
        preprocessing: a.preprocessing.clone(),
        sensitivity: Vec::new(),
        credibility_rules: report::CREDIBILITY_RULES.iter().map(|s| s.to_string()).collect(),
    }
}

/// `watch analyze`: writes `findings.json`, `findings.md`,
/// `pseudo_outcomes.csv` and `figures/`.
pub fn run_analyze(cfg: &RunConfig, out: &Path) -> Result<FindingsReport> {
    let raw = load_data(cfg)?;
    let (ds, log) = prepare(&raw, &cfg.preprocessing).context("preparing the analysis dataset")?;
    let analysis = analyze_dataset(ds, log, cfg)?;
    create_dir(out)?;
    analysis.pseudo.write_csv(&out.join(PSEUDO_OUTCOMES))?;
    let manifest = displays::write_figures(&analysis.figures, &out.join(FIGURES_DIR))?;
    let findings = findings_report(cfg, &analysis, manifest);
    write_json(&findings, &out.join(FINDINGS_JSON))?;
    let md = report::render_markdown(&findings);
    std::fs::write(out.join(FINDINGS_MD), md).map_err(|e| WatchError::io(out.join(FINDINGS_MD), e))?;
    Ok(findings)
}

pub fn read_scenario(path: &Path) -> Result<ScenarioSpec> {
    let s = std::fs::read_to_string(path)
        .map_err(|e| WatchError::Config(format!("cannot read scenario `{}`: {e}", path.display())))?;
    serde_json::from_str(&s).map_err(|e| WatchError::Config(e.to_string()))
}

/// `watch simulate`: writes `trial.csv`, `truth.csv`, and an
/// `analysis_config.json` that points `analyze` at the generated trial.
pub fn run_simulate(spec: &ScenarioSpec, out: &Path) -> Result<()> {
    let trial = benchgen::generate(spec)?;
    create_dir(out)?;
    benchgen::write_trial(&trial, &out.join(TRIAL_CSV), &out.join(TRUTH_CSV))?;
    let names: Vec<String> = (0..spec.p).map(benchgen::covariate_name).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut plan = AnalysisPlan::new(benchgen::OUTCOME, benchgen::TREATMENT, &refs);
    plan.seed = spec.seed;
    let cfg = RunConfig {
        data: PathBuf::from(TRIAL_CSV),
        plan,
        preprocessing: PrepConfig::default(),
        nuisance: NuisanceConfig::default(),
        importance: ImportanceOptions::default(),
        displays: DisplayConfig::default(),
    };
    write_json(&cfg, &out.join(ANALYSIS_CONFIG))
}

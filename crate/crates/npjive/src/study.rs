//! Replication studies: per-dataset estimation pipeline, the Monte Carlo
//! harness, and the summary metrics (absolute bias, standard error, RMSE,
//! coverage, interval width).
//!
//! Replication r draws everything (data, folds, cross-validation splits)
//! from seeds mixed out of `(base_seed, r)`, so results are identical across
//! runs and worker counts; aggregation is an ordered reduction by rep index.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{gram_matrix, make_basis, BasisKind, FeatureBasis, GramMatrix};
use crate::dgp::{simulate_discrete, simulate_surrogate, simulate_weak_linear_iv, SimulatedData, SurrogateDgpConfig, WeakIvConfig};
use crate::error::{Error, Result};
use crate::estimators::{
    estimate_crossfold, estimate_ipw, estimate_modified, estimate_plugin, estimate_single_split,
    EstimateReport, EstimatorKind,
};
use crate::grouped::{FoldScheme, GroupedSample};
use crate::moments::CellMoments;
use crate::oracle::OracleModel;
use crate::rng::{mix_seed, SplitMix64};
use crate::solver::{
    crossfit_training_half, cv_select_lambda, default_lambda_grid_for, fit_alpha, fit_beta, fit_h,
    fit_proj_alpha, fit_rho, CvObjective, FitMode, FunctionalSpec, NuisanceFit,
};

const TAG_REP: u64 = 0x5EED_0001;
const TAG_FOLD: u64 = 0x5EED_0002;
const TAG_TARGET_DRAW: u64 = 0x5EED_0004;

/// Basis family and size used by the pipeline.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BasisSpec {
    pub kind: BasisKind,
    /// Bins (histogram), interior knots (spline) or degree (polynomial).
    pub count: usize,
}

/// Ridge-level policy shared by all nuisance targets.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum LambdaPolicy {
    Fixed {
        lambda: f64,
    },
    Cv {
        #[serde(default = "default_cv_folds")]
        folds: usize,
        /// Optional explicit grid; defaults to 20 log-spaced points scaled by
        /// trace(M)/p.
        #[serde(default)]
        grid: Option<Vec<f64>>,
    },
}

fn default_cv_folds() -> usize {
    5
}

/// One estimator arm: the point estimator plus the nuisance/debias mode.
/// `jive` uses cross-fold moments and opposite-fold debias means; `plugin` is
/// the 2SLS-style baseline with full-cell means.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    #[serde(default = "default_mode")]
    pub mode: FitMode,
}

fn default_mode() -> FitMode {
    FitMode::Jive
}

impl EstimatorSpec {
    pub fn jive(kind: EstimatorKind) -> Self {
        EstimatorSpec { kind, mode: FitMode::Jive }
    }

    pub fn plugin(kind: EstimatorKind) -> Self {
        EstimatorSpec { kind, mode: FitMode::Plugin }
    }

    pub fn label(&self) -> String {
        match self.mode {
            FitMode::Jive => self.kind.as_str().to_string(),
            FitMode::Plugin => format!("{}_2sls", self.kind.as_str()),
        }
    }
}

/// Data-generating process of a study.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "dgp", rename_all = "snake_case")]
pub enum DgpSpec {
    Surrogate(SurrogateDgpConfig),
    WeakLinearIv(WeakIvConfig),
    Discrete {
        model: OracleModel,
        n_per_cell: Vec<usize>,
        #[serde(default = "default_discrete_n_new")]
        n_new: usize,
    },
}

fn default_discrete_n_new() -> usize {
    1000
}

impl DgpSpec {
    /// (K, typical per-cell n) for summary rows.
    pub fn shape(&self) -> (usize, usize) {
        match self {
            DgpSpec::Surrogate(c) => (c.k, c.n),
            DgpSpec::WeakLinearIv(c) => (c.k, c.n),
            DgpSpec::Discrete { model, n_per_cell, .. } => {
                let total: usize = n_per_cell.iter().sum();
                (model.k(), total / model.k().max(1))
            }
        }
    }

    /// Same design at a different (K, n); used by figure sweeps.
    pub fn resized(&self, k: usize, n: usize) -> Result<DgpSpec> {
        match self {
            DgpSpec::Surrogate(c) => {
                let mut c = c.clone();
                c.k = k;
                c.n = n;
                Ok(DgpSpec::Surrogate(c))
            }
            DgpSpec::WeakLinearIv(c) => {
                let mut c = c.clone();
                c.k = k;
                c.n = n;
                Ok(DgpSpec::WeakLinearIv(c))
            }
            DgpSpec::Discrete { .. } => {
                Err(Error::InvalidConfig("discrete designs have a fixed cell structure".into()))
            }
        }
    }

    /// Generate one replication with every stream keyed by `seed`. For the
    /// discrete design, the target sample is drawn from the model's pstar and
    /// the truth is the approximating functional psi_K.
    pub fn generate(&self, seed: u64) -> Result<SimulatedData> {
        match self {
            DgpSpec::Surrogate(c) => {
                let mut c = c.clone();
                c.seed = seed;
                c.unit_seed = None;
                simulate_surrogate(&c)
            }
            DgpSpec::WeakLinearIv(c) => {
                let mut c = c.clone();
                c.seed = seed;
                simulate_weak_linear_iv(&c)
            }
            DgpSpec::Discrete { model, n_per_cell, n_new } => {
                let sample = simulate_discrete(model, n_per_cell, seed)?;
                let sol = model.solve()?;
                let mut rng = SplitMix64::stream(seed, &[TAG_TARGET_DRAW]);
                let mut cdf = Vec::with_capacity(model.m());
                let mut acc = 0.0;
                for &p in &model.pstar {
                    acc += p;
                    cdf.push(acc);
                }
                let target_x: Vec<f64> = (0..*n_new)
                    .map(|_| {
                        let u = rng.uniform() * acc;
                        let j = cdf.partition_point(|&c| c <= u).min(model.m() - 1);
                        model.xs[j]
                    })
                    .collect();
                let mut meta = BTreeMap::new();
                meta.insert("psi_k".into(), sol.psi_k);
                Ok(SimulatedData { sample, target_x, d: 1, psi_true: sol.psi_k, meta })
            }
        }
    }
}

/// Per-dataset estimation configuration, shared by the study harness and the
/// `estimate` command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateConfig {
    pub basis: BasisSpec,
    pub lambda: LambdaPolicy,
    pub estimators: Vec<EstimatorSpec>,
    #[serde(default = "default_scheme")]
    pub scheme: FoldScheme,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_level")]
    pub level: f64,
    /// Train nuisances on a unit-level half split independent of the fold
    /// labels (the estimator still evaluates on the full sample).
    #[serde(default)]
    pub nuisance_crossfit: bool,
}

fn default_scheme() -> FoldScheme {
    FoldScheme::TwoFold
}

fn default_level() -> f64 {
    0.95
}

/// Fits produced for one mode.
struct ModeFits {
    h: NuisanceFit,
    beta: NuisanceFit,
}

struct ModifiedFits {
    alpha: NuisanceFit,
    proj_alpha: NuisanceFit,
    rho: NuisanceFit,
}

const TAG_CV_H: u64 = 0xCA01;
const TAG_CV_BETA: u64 = 0xCA02;
const TAG_CV_ALPHA: u64 = 0xCA03;
const TAG_CV_PROJ: u64 = 0xCA04;
const TAG_CV_RHO: u64 = 0xCA05;

fn resolve_lambda(
    train: &GroupedSample,
    basis: &FeatureBasis,
    moments: &CellMoments,
    gram: &GramMatrix,
    objective: CvObjective<'_>,
    mode: FitMode,
    policy: &LambdaPolicy,
    seed: u64,
    tag: u64,
) -> Result<f64> {
    match policy {
        LambdaPolicy::Fixed { lambda } => Ok(*lambda),
        LambdaPolicy::Cv { folds, grid } => {
            let grid = match grid {
                Some(g) => g.clone(),
                None => {
                    let forms = match mode {
                        FitMode::Jive => moments.cross_forms(),
                        FitMode::Plugin => moments.plugin_forms(),
                    };
                    default_lambda_grid_for(&forms, gram)
                }
            };
            let sel = cv_select_lambda(
                train,
                basis,
                objective,
                mode,
                &grid,
                *folds,
                mix_seed(&[seed, tag]),
            )?;
            Ok(sel.lambda)
        }
    }
}

fn fit_mode(
    train: &GroupedSample,
    basis: &FeatureBasis,
    gram: &GramMatrix,
    moments: &CellMoments,
    spec: &FunctionalSpec,
    cfg: &EstimateConfig,
    mode: FitMode,
) -> Result<ModeFits> {
    let lam_h =
        resolve_lambda(train, basis, moments, gram, CvObjective::H, mode, &cfg.lambda, cfg.seed, TAG_CV_H)?;
    let lam_b = resolve_lambda(
        train,
        basis,
        moments,
        gram,
        CvObjective::Beta { m: &spec.m },
        mode,
        &cfg.lambda,
        cfg.seed,
        TAG_CV_BETA,
    )?;
    let h = fit_h(moments, gram, lam_h, mode)?;
    let beta = fit_beta(moments, gram, &spec.m, lam_b.max(f64::MIN_POSITIVE), mode)?;
    Ok(ModeFits { h, beta })
}

fn fit_modified(
    train: &GroupedSample,
    basis: &FeatureBasis,
    gram: &GramMatrix,
    moments: &CellMoments,
    spec: &FunctionalSpec,
    cfg: &EstimateConfig,
    jive: &ModeFits,
) -> Result<ModifiedFits> {
    let lam_a = resolve_lambda(
        train,
        basis,
        moments,
        gram,
        CvObjective::Alpha { m: &spec.m },
        FitMode::Jive,
        &cfg.lambda,
        cfg.seed,
        TAG_CV_ALPHA,
    )?;
    let alpha = fit_alpha(gram, &spec.m, lam_a)?;
    let lam_p = resolve_lambda(
        train,
        basis,
        moments,
        gram,
        CvObjective::ProjAlpha { alpha_fit: &alpha },
        FitMode::Jive,
        &cfg.lambda,
        cfg.seed,
        TAG_CV_PROJ,
    )?;
    let proj_alpha = fit_proj_alpha(moments, gram, &alpha, lam_p)?;
    let lam_r = resolve_lambda(
        train,
        basis,
        moments,
        gram,
        CvObjective::Rho { h_fit: &jive.h },
        FitMode::Jive,
        &cfg.lambda,
        cfg.seed,
        TAG_CV_RHO,
    )?;
    let rho = fit_rho(moments, gram, &jive.h, lam_r)?;
    Ok(ModifiedFits { alpha, proj_alpha, rho })
}

/// Run every configured estimator on one dataset. Per-arm failures are
/// reported as string errors so a study can count them without aborting.
pub fn estimate_dataset(
    sample: GroupedSample,
    target_x: &[f64],
    d: usize,
    cfg: &EstimateConfig,
) -> Result<Vec<(EstimatorSpec, std::result::Result<EstimateReport, String>)>> {
    if cfg.estimators.is_empty() {
        return Err(Error::InvalidConfig("estimator list is empty".into()));
    }
    // Fitting always uses a two-fold split; the leave-one-out scheme governs
    // the estimator's debias means only.
    let fold_seed = mix_seed(&[cfg.seed, TAG_FOLD]);
    let fitting_sample = sample.assign_folds(fold_seed, FoldScheme::TwoFold);
    let basis = make_basis(cfg.basis.kind, cfg.basis.count, &fitting_sample)?;
    let spec = FunctionalSpec::from_target(&basis, target_x.to_vec(), d)?;

    let train = if cfg.nuisance_crossfit {
        crossfit_training_half(&fitting_sample, cfg.seed)?
    } else {
        fitting_sample.clone()
    };
    let gram = gram_matrix(&basis, &train)?;
    let moments = crate::moments::compute_moments(&basis, &train)?;

    let need_jive = cfg.estimators.iter().any(|e| e.mode == FitMode::Jive);
    let need_plugin = cfg.estimators.iter().any(|e| e.mode == FitMode::Plugin);
    let need_modified = cfg.estimators.iter().any(|e| e.kind == EstimatorKind::Modified);

    let jive_fits = if need_jive {
        Some(fit_mode(&train, &basis, &gram, &moments, &spec, cfg, FitMode::Jive)?)
    } else {
        None
    };
    let plugin_fits = if need_plugin {
        Some(fit_mode(&train, &basis, &gram, &moments, &spec, cfg, FitMode::Plugin)?)
    } else {
        None
    };
    let modified_fits = match (&jive_fits, need_modified) {
        (Some(jive), true) => {
            Some(fit_modified(&train, &basis, &gram, &moments, &spec, cfg, jive)?)
        }
        _ => None,
    };

    // The leave-one-out scheme governs the debias means of the cross-fold
    // style estimators; the single-split estimator is inherently two-fold.
    let (eval_sample, two_fold_sample) = match cfg.scheme {
        FoldScheme::TwoFold => (fitting_sample.clone(), fitting_sample),
        FoldScheme::LeaveOneOut => {
            let loo = fitting_sample.clone().assign_folds(fold_seed, FoldScheme::LeaveOneOut);
            (loo, fitting_sample)
        }
    };

    let mut out = Vec::with_capacity(cfg.estimators.len());
    for est in &cfg.estimators {
        let fits = match est.mode {
            FitMode::Jive => jive_fits.as_ref(),
            FitMode::Plugin => plugin_fits.as_ref(),
        };
        let fits = match fits {
            Some(f) => f,
            None => continue,
        };
        let run = || -> Result<EstimateReport> {
            match est.kind {
                EstimatorKind::Crossfold => {
                    estimate_crossfold(&eval_sample, &basis, &fits.h, &fits.beta, &spec, cfg.level)
                }
                EstimatorKind::SingleSplit => estimate_single_split(
                    &two_fold_sample,
                    &basis,
                    &fits.h,
                    &fits.beta,
                    &spec,
                    cfg.level,
                ),
                EstimatorKind::Modified => {
                    let mf = modified_fits
                        .as_ref()
                        .ok_or(Error::MissingNuisance("modified estimator needs jive fits"))?;
                    estimate_modified(
                        &eval_sample,
                        &basis,
                        &fits.h,
                        &fits.beta,
                        &mf.alpha,
                        &mf.proj_alpha,
                        &mf.rho,
                        &spec,
                        cfg.level,
                    )
                }
                EstimatorKind::Plugin => estimate_plugin(&basis, &fits.h, &spec, cfg.level),
                EstimatorKind::Ipw => {
                    estimate_ipw(&eval_sample, &basis, &fits.h, &fits.beta, cfg.level)
                }
            }
        };
        out.push((*est, run().map_err(|e| e.to_string())));
    }
    Ok(out)
}

/// Full study configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyConfig {
    #[serde(flatten)]
    pub dgp: DgpSpec,
    pub estimators: Vec<EstimatorSpec>,
    pub basis: BasisSpec,
    pub lambda: LambdaPolicy,
    #[serde(default = "default_scheme")]
    pub scheme: FoldScheme,
    pub reps: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub nuisance_crossfit: bool,
}

fn default_workers() -> usize {
    1
}

/// One replication's outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepOutcome {
    pub rep: usize,
    pub seed: u64,
    pub psi_true: f64,
    pub results: Vec<(String, std::result::Result<EstimateReport, String>)>,
}

/// Per-estimator Monte Carlo metrics over the successful replications.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McSummaryRow {
    pub estimator: String,
    pub k: usize,
    pub n: usize,
    pub reps: usize,
    pub abs_bias: f64,
    /// Monte Carlo standard deviation of the estimation error.
    pub se: f64,
    pub rmse: f64,
    pub coverage: f64,
    pub mean_ci_width: f64,
    pub mean_reported_se: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McSummary {
    pub rows: Vec<McSummaryRow>,
}

impl McSummary {
    pub fn csv_header() -> &'static str {
        "estimator,K,n,reps,abs_bias,se,rmse,coverage,mean_ci_width,failures"
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::csv_header());
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.estimator,
                r.k,
                r.n,
                r.reps,
                r.abs_bias,
                r.se,
                r.rmse,
                r.coverage,
                r.mean_ci_width,
                r.failures
            ));
        }
        out
    }

    pub fn row(&self, label: &str) -> Option<&McSummaryRow> {
        self.rows.iter().find(|r| r.estimator == label)
    }
}

/// Study output: the summary plus the per-rep table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyOutput {
    pub summary: McSummary,
    pub reps: Vec<RepOutcome>,
}

impl StudyOutput {
    pub fn rep_table_csv(&self) -> String {
        let mut out =
            String::from("rep,estimator,psi_true,psi_hat,se,ci_lo,ci_hi,covered,error\n");
        for rep in &self.reps {
            for (label, res) in &rep.results {
                match res {
                    Ok(r) => {
                        let covered = (r.ci_lo <= rep.psi_true && rep.psi_true <= r.ci_hi) as u8;
                        out.push_str(&format!(
                            "{},{},{},{},{},{},{},{},\n",
                            rep.rep, label, rep.psi_true, r.psi_hat, r.se, r.ci_lo, r.ci_hi, covered
                        ));
                    }
                    Err(e) => {
                        out.push_str(&format!(
                            "{},{},{},,,,,,\"{}\"\n",
                            rep.rep,
                            label,
                            rep.psi_true,
                            e.replace('"', "'")
                        ));
                    }
                }
            }
        }
        out
    }
}

fn run_single_rep(cfg: &StudyConfig, rep: usize) -> RepOutcome {
    let seed = mix_seed(&[cfg.base_seed, TAG_REP, rep as u64 + 1]);
    let est_cfg = EstimateConfig {
        basis: cfg.basis,
        lambda: cfg.lambda.clone(),
        estimators: cfg.estimators.clone(),
        scheme: cfg.scheme,
        seed,
        level: cfg.level,
        nuisance_crossfit: cfg.nuisance_crossfit,
    };
    match cfg.dgp.generate(seed) {
        Ok(data) => {
            let psi_true = data.psi_true;
            match estimate_dataset(data.sample, &data.target_x, data.d, &est_cfg) {
                Ok(results) => RepOutcome {
                    rep,
                    seed,
                    psi_true,
                    results: results.into_iter().map(|(e, r)| (e.label(), r)).collect(),
                },
                Err(e) => RepOutcome {
                    rep,
                    seed,
                    psi_true,
                    results: cfg
                        .estimators
                        .iter()
                        .map(|est| (est.label(), Err(e.to_string())))
                        .collect(),
                },
            }
        }
        Err(e) => RepOutcome {
            rep,
            seed,
            psi_true: f64::NAN,
            results: cfg.estimators.iter().map(|est| (est.label(), Err(e.to_string()))).collect(),
        },
    }
}

/// Run the Monte Carlo study. Deterministic for a fixed config; the worker
/// count changes wall time only.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyOutput> {
    if cfg.reps == 0 {
        return Err(Error::InvalidConfig("reps must be at least 1".into()));
    }
    if cfg.estimators.is_empty() {
        return Err(Error::InvalidConfig("estimator list is empty".into()));
    }
    let reps: Vec<RepOutcome> = if cfg.workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
        pool.install(|| (0..cfg.reps).into_par_iter().map(|r| run_single_rep(cfg, r)).collect())
    } else {
        (0..cfg.reps).map(|r| run_single_rep(cfg, r)).collect()
    };

    let (k, n) = cfg.dgp.shape();
    let mut rows = Vec::new();
    let mut any_success = false;
    for est in &cfg.estimators {
        let label = est.label();
        let mut errs = Vec::new();
        let mut widths = Vec::new();
        let mut reported = Vec::new();
        let mut covered = 0usize;
        let mut failures = 0usize;
        for rep in &reps {
            match rep.results.iter().find(|(l, _)| *l == label) {
                Some((_, Ok(r))) if rep.psi_true.is_finite() => {
                    errs.push(r.psi_hat - rep.psi_true);
                    widths.push(r.ci_hi - r.ci_lo);
                    reported.push(r.se);
                    if r.ci_lo <= rep.psi_true && rep.psi_true <= r.ci_hi {
                        covered += 1;
                    }
                }
                _ => failures += 1,
            }
        }
        let m = errs.len();
        if m > 0 {
            any_success = true;
        }
        let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
        let bias = mean(&errs);
        let mse = mean(&errs.iter().map(|e| e * e).collect::<Vec<_>>());
        let var = (mse - bias * bias).max(0.0);
        rows.push(McSummaryRow {
            estimator: label,
            k,
            n,
            reps: m,
            abs_bias: bias.abs(),
            se: var.sqrt(),
            rmse: mse.sqrt(),
            coverage: if m > 0 { covered as f64 / m as f64 } else { f64::NAN },
            mean_ci_width: mean(&widths),
            mean_reported_se: mean(&reported),
            failures,
        });
    }
    if !any_success {
        let first = reps
            .first()
            .and_then(|r| r.results.first())
            .and_then(|(_, res)| res.as_ref().err().cloned())
            .unwrap_or_else(|| "all replications failed".into());
        return Err(Error::InsufficientData(format!("all replications failed: {first}")));
    }
    Ok(StudyOutput { summary: McSummary { rows }, reps })
}

/// Figure sweep: run the base study at every (K, n) pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FigureConfig {
    #[serde(flatten)]
    pub base: StudyConfig,
    pub k_list: Vec<usize>,
    pub n_list: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FigureOutput {
    pub cells: Vec<McSummary>,
}

impl FigureOutput {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(McSummary::csv_header());
        out.push('\n');
        for summary in &self.cells {
            for line in summary.to_csv().lines().skip(1) {
                out.push_str(line);
                out.push('\n');
            }
        }
        out
    }

    /// Chart data: metric vs K for one per-cell size n.
    pub fn chart_series(&self, metric: &str, n: usize) -> Vec<(String, Vec<(f64, f64)>)> {
        let mut by_estimator: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
        for summary in &self.cells {
            for row in &summary.rows {
                if row.n != n {
                    continue;
                }
                let value = match metric {
                    "abs_bias" => row.abs_bias,
                    "se" => row.se,
                    "rmse" => row.rmse,
                    "coverage" => row.coverage,
                    "mean_ci_width" => row.mean_ci_width,
                    _ => f64::NAN,
                };
                by_estimator.entry(row.estimator.clone()).or_default().push((row.k as f64, value));
            }
        }
        by_estimator.into_iter().collect()
    }
}

pub fn run_figure(cfg: &FigureConfig) -> Result<FigureOutput> {
    if cfg.k_list.is_empty() || cfg.n_list.is_empty() {
        return Err(Error::InvalidConfig("figure sweep needs k_list and n_list".into()));
    }
    let mut cells = Vec::new();
    for &n in &cfg.n_list {
        for &k in &cfg.k_list {
            let mut study = cfg.base.clone();
            study.dgp = cfg.base.dgp.resized(k, n)?;
            let out = run_study(&study)?;
            cells.push(out.summary);
        }
    }
    Ok(FigureOutput { cells })
}

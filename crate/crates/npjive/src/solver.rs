//! Tikhonov-regularized fits for the five nuisance functions.
//!
//! Every objective here is exactly quadratic in the basis coefficients, so a
//! fit is one regularized linear solve:
//!
//! * structural fit `h`:      (M + lambda G) theta = c
//! * dual fit `beta`:         (M + lambda G) theta = m
//! * Riesz fit `alpha`:       (G + lambda I) theta = m
//! * projection `proj_alpha`: (M + lambda G) theta = M theta_alpha
//! * dual-of-h fit `rho`:     (M + lambda G) theta = G theta_h
//!
//! where M, c come from the cross-fold forms (jive mode) or the full-cell
//! plug-in forms (plugin mode, the classical 2SLS-style risk), G is the
//! empirical Gram matrix and m is the target-sample mean feature vector.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{gram_matrix, FeatureBasis, GramMatrix};
use crate::error::{Error, Result};
use crate::grouped::GroupedSample;
use crate::linalg::{quad_form, solve_with_jitter, SolveReport};
use crate::moments::{compute_moments, CellMoments, CrossForms};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NuisanceTarget {
    H,
    Beta,
    Alpha,
    ProjAlpha,
    Rho,
}

/// Whether the quadratic form uses the cross-fold jackknife moments or the
/// full-cell plug-in moments (2SLS style).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    Jive,
    Plugin,
}

/// Basis coefficients for one fitted nuisance function.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NuisanceFit {
    pub target: NuisanceTarget,
    pub theta: Vec<f64>,
    pub lambda: f64,
    pub mode: FitMode,
    pub solver_report: SolveReport,
}

impl NuisanceFit {
    pub fn theta_vec(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.theta)
    }

    /// Evaluate the fitted function at a treatment point.
    pub fn predict(&self, basis: &FeatureBasis, x: &[f64]) -> Result<f64> {
        let feat = basis.evaluate(x)?;
        Ok(feat.iter().zip(&self.theta).map(|(a, b)| a * b).sum())
    }
}

/// The linear functional psi(f) = mean of f over the target sample, carried
/// as the mean feature vector m (its Riesz data in basis coordinates).
#[derive(Debug, Clone)]
pub struct FunctionalSpec {
    /// Target treatment points, row-major with stride `d`.
    pub target_x: Vec<f64>,
    pub d: usize,
    /// Mean feature vector over the target sample.
    pub m: DVector<f64>,
}

impl FunctionalSpec {
    pub fn from_target(basis: &FeatureBasis, target_x: Vec<f64>, d: usize) -> Result<Self> {
        if d != basis.d() {
            return Err(Error::DimensionMismatch("target dimension vs basis".into()));
        }
        if target_x.is_empty() || target_x.len() % d != 0 {
            return Err(Error::InvalidConfig("target sample must be nonempty".into()));
        }
        let n = target_x.len() / d;
        let mut m = DVector::zeros(basis.p);
        let mut feat = vec![0.0; basis.p];
        for i in 0..n {
            basis.evaluate_into(&target_x[i * d..(i + 1) * d], &mut feat)?;
            for (j, &f) in feat.iter().enumerate() {
                m[j] += f;
            }
        }
        m /= n as f64;
        Ok(FunctionalSpec { target_x, d, m })
    }

    pub fn n_target(&self) -> usize {
        self.target_x.len() / self.d
    }

    /// psi evaluated at a fitted function: m' theta.
    pub fn psi_of(&self, fit: &NuisanceFit) -> f64 {
        self.m.dot(&fit.theta_vec())
    }
}

/// Quadratic objective theta' Q theta - 2 lin' theta + lambda pen(theta) + const.
/// Exposed so tests can check first-order optimality by finite differences.
#[derive(Debug, Clone)]
pub struct QuadraticObjective {
    pub quad: DMatrix<f64>,
    pub lin: DVector<f64>,
    /// Penalty matrix (G for the empirical norm, I for coefficient ridge).
    pub pen: DMatrix<f64>,
    pub lambda: f64,
    pub constant: f64,
}

impl QuadraticObjective {
    pub fn value(&self, theta: &DVector<f64>) -> f64 {
        quad_form(&self.quad, theta) - 2.0 * self.lin.dot(theta)
            + self.lambda * quad_form(&self.pen, theta)
            + self.constant
    }

    pub fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        (&self.quad + self.quad.transpose()) * theta * 0.5 * 2.0
            - 2.0 * &self.lin
            + 2.0 * self.lambda * (&self.pen * theta)
    }

    fn system(&self) -> DMatrix<f64> {
        &self.quad + self.lambda * &self.pen
    }

    fn solve(&self) -> Result<(DVector<f64>, SolveReport)> {
        solve_with_jitter(&self.system(), &self.lin)
    }
}

fn forms_for(moments: &CellMoments, mode: FitMode) -> CrossForms {
    match mode {
        FitMode::Jive => moments.cross_forms(),
        FitMode::Plugin => moments.plugin_forms(),
    }
}

/// Objective for the structural fit; public for the risk-path diagnostics.
pub fn h_objective(
    moments: &CellMoments,
    gram: &GramMatrix,
    lambda: f64,
    mode: FitMode,
) -> QuadraticObjective {
    let forms = forms_for(moments, mode);
    QuadraticObjective {
        quad: forms.m,
        lin: forms.c,
        pen: gram.matrix.clone(),
        lambda,
        constant: forms.r0,
    }
}

/// Fit the structural function by Tikhonov-regularized risk minimization.
pub fn fit_h(
    moments: &CellMoments,
    gram: &GramMatrix,
    lambda: f64,
    mode: FitMode,
) -> Result<NuisanceFit> {
    if lambda < 0.0 {
        return Err(Error::InvalidConfig("lambda must be nonnegative".into()));
    }
    check_dims(moments, gram)?;
    let obj = h_objective(moments, gram, lambda, mode);
    let (theta, report) = obj.solve()?;
    Ok(NuisanceFit {
        target: NuisanceTarget::H,
        theta: theta.as_slice().to_vec(),
        lambda,
        mode,
        solver_report: report,
    })
}

pub fn beta_objective(
    moments: &CellMoments,
    gram: &GramMatrix,
    m: &DVector<f64>,
    lambda: f64,
    mode: FitMode,
) -> QuadraticObjective {
    let forms = forms_for(moments, mode);
    QuadraticObjective { quad: forms.m, lin: m.clone(), pen: gram.matrix.clone(), lambda, constant: 0.0 }
}

/// Fit the debiasing dual: minimizes the cross-fold quadratic form minus
/// twice the functional. The unregularized dual need not admit a minimizer,
/// so lambda must be strictly positive.
pub fn fit_beta(
    moments: &CellMoments,
    gram: &GramMatrix,
    m: &DVector<f64>,
    lambda: f64,
    mode: FitMode,
) -> Result<NuisanceFit> {
    if lambda <= 0.0 {
        return Err(Error::InvalidConfig("fit_beta requires lambda > 0".into()));
    }
    check_dims(moments, gram)?;
    if m.len() != moments.p() {
        return Err(Error::DimensionMismatch("riesz mean vector vs basis".into()));
    }
    let obj = beta_objective(moments, gram, m, lambda, mode);
    let (theta, report) = obj.solve()?;
    Ok(NuisanceFit {
        target: NuisanceTarget::Beta,
        theta: theta.as_slice().to_vec(),
        lambda,
        mode,
        solver_report: report,
    })
}

pub fn alpha_objective(gram: &GramMatrix, m: &DVector<f64>, lambda: f64) -> QuadraticObjective {
    let p = gram.matrix.nrows();
    QuadraticObjective {
        quad: gram.matrix.clone(),
        lin: m.clone(),
        pen: DMatrix::identity(p, p),
        lambda,
        constant: 0.0,
    }
}

/// Riesz regression for the representer alpha: (G + lambda I) theta = m.
pub fn fit_alpha(gram: &GramMatrix, m: &DVector<f64>, lambda: f64) -> Result<NuisanceFit> {
    if lambda < 0.0 {
        return Err(Error::InvalidConfig("lambda must be nonnegative".into()));
    }
    if m.len() != gram.matrix.nrows() {
        return Err(Error::DimensionMismatch("riesz mean vector vs basis".into()));
    }
    let obj = alpha_objective(gram, m, lambda);
    let (theta, report) = obj.solve()?;
    Ok(NuisanceFit {
        target: NuisanceTarget::Alpha,
        theta: theta.as_slice().to_vec(),
        lambda,
        mode: FitMode::Plugin,
        solver_report: report,
    })
}

pub fn proj_alpha_objective(
    moments: &CellMoments,
    gram: &GramMatrix,
    alpha_fit: &NuisanceFit,
    lambda: f64,
) -> QuadraticObjective {
    let forms = moments.cross_forms();
    let theta_a = alpha_fit.theta_vec();
    let lin = &forms.m * &theta_a;
    let constant = quad_form(&forms.m, &theta_a);
    QuadraticObjective { quad: forms.m, lin, pen: gram.matrix.clone(), lambda, constant }
}

/// Fit the projection of alpha onto the identified space by cross-fold risk
/// minimization: (M + lambda G) theta = M theta_alpha.
pub fn fit_proj_alpha(
    moments: &CellMoments,
    gram: &GramMatrix,
    alpha_fit: &NuisanceFit,
    lambda: f64,
) -> Result<NuisanceFit> {
    if lambda < 0.0 {
        return Err(Error::InvalidConfig("lambda must be nonnegative".into()));
    }
    check_dims(moments, gram)?;
    if alpha_fit.theta.len() != moments.p() {
        return Err(Error::DimensionMismatch("alpha fit vs basis".into()));
    }
    let obj = proj_alpha_objective(moments, gram, alpha_fit, lambda);
    let (theta, report) = obj.solve()?;
    Ok(NuisanceFit {
        target: NuisanceTarget::ProjAlpha,
        theta: theta.as_slice().to_vec(),
        lambda,
        mode: FitMode::Jive,
        solver_report: report,
    })
}

pub fn rho_objective(
    moments: &CellMoments,
    gram: &GramMatrix,
    h_fit: &NuisanceFit,
    lambda: f64,
) -> QuadraticObjective {
    let forms = moments.cross_forms();
    let lin = &gram.matrix * h_fit.theta_vec();
    QuadraticObjective { quad: forms.m, lin, pen: gram.matrix.clone(), lambda, constant: 0.0 }
}

/// Fit the dual of the structural solution: (M + lambda G) theta = G theta_h.
pub fn fit_rho(
    moments: &CellMoments,
    gram: &GramMatrix,
    h_fit: &NuisanceFit,
    lambda: f64,
) -> Result<NuisanceFit> {
    if lambda < 0.0 {
        return Err(Error::InvalidConfig("lambda must be nonnegative".into()));
    }
    check_dims(moments, gram)?;
    if h_fit.theta.len() != moments.p() {
        return Err(Error::DimensionMismatch("h fit vs basis".into()));
    }
    let obj = rho_objective(moments, gram, h_fit, lambda);
    let (theta, report) = obj.solve()?;
    Ok(NuisanceFit {
        target: NuisanceTarget::Rho,
        theta: theta.as_slice().to_vec(),
        lambda,
        mode: FitMode::Jive,
        solver_report: report,
    })
}

fn check_dims(moments: &CellMoments, gram: &GramMatrix) -> Result<()> {
    if gram.matrix.nrows() != moments.p() {
        return Err(Error::DimensionMismatch("gram matrix vs moments".into()));
    }
    Ok(())
}

/// Default ridge grid: 20 log-spaced points in [1e-8, 1e1] * trace(M)/p.
///
/// When the cross-fold form is indefinite, the objective only has a minimizer
/// for lambda above the convexity threshold (smallest lambda with
/// M + lambda G positive definite), so the span is widened to bracket that
/// threshold with several usable candidates on each side.
pub fn default_lambda_grid_for(forms: &CrossForms, gram: &GramMatrix) -> Vec<f64> {
    let p = forms.m.nrows().max(1) as f64;
    let scale = (forms.m.trace() / p).abs().max(1e-300);
    let (lo, hi) = match convexity_threshold(&forms.m, &gram.matrix) {
        // Indefinite cross-fold form: candidates below the threshold have no
        // minimizer, so concentrate the grid just below and well above it.
        Some(threshold) => (0.5 * threshold, (3e3 * threshold).max(1e1 * scale)),
        None => (1e-8 * scale, 1e1 * scale),
    };
    (0..20).map(|i| lo * (hi / lo).powf(i as f64 / 19.0)).collect()
}

/// Compatibility wrapper using an identity penalty for the threshold.
pub fn default_lambda_grid(forms: &CrossForms) -> Vec<f64> {
    let p = forms.m.nrows();
    let gram = GramMatrix { matrix: DMatrix::identity(p, p) };
    default_lambda_grid_for(forms, &gram)
}

/// Smallest lambda (log-bisection) with M + lambda G positive definite, or
/// None when M is already PD at 1e-12 scale.
pub fn convexity_threshold(m: &DMatrix<f64>, g: &DMatrix<f64>) -> Option<f64> {
    let scale = (m.trace().abs() / m.nrows().max(1) as f64).max(1e-300);
    let mut lo = 1e-12 * scale;
    if (m + lo * g).cholesky().is_some() {
        return None;
    }
    let mut hi = 1e6 * scale;
    if (m + hi * g).cholesky().is_none() {
        return Some(hi);
    }
    for _ in 0..60 {
        let mid = (lo.ln() * 0.5 + hi.ln() * 0.5).exp();
        if (m + mid * g).cholesky().is_some() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Which unregularized validation loss cross-validation minimizes.
pub enum CvObjective<'a> {
    /// Cross-fold jackknife risk of the structural fit.
    H,
    /// Dual objective theta' M theta - 2 m' theta.
    Beta { m: &'a DVector<f64> },
    /// Riesz loss theta' G theta - 2 m' theta.
    Alpha { m: &'a DVector<f64> },
    /// Cross-fold objective given a fixed first-stage structural fit.
    Rho { h_fit: &'a NuisanceFit },
    /// Cross-fold projection risk given a fixed Riesz fit.
    ProjAlpha { alpha_fit: &'a NuisanceFit },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvRow {
    pub lambda: f64,
    pub mean_loss: f64,
    pub fold_losses: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvSelection {
    pub lambda: f64,
    pub rows: Vec<CvRow>,
}

const CV_STREAM_TAG: u64 = 0xC0DE_CF01;

/// Unit-level V-fold labels within each cell, deterministic in (seed, k, n_k).
fn cv_fold_labels(sample: &GroupedSample, folds: usize, seed: u64) -> Vec<Vec<u8>> {
    sample
        .cells
        .iter()
        .map(|cell| {
            let mut labels: Vec<u8> = (0..cell.len()).map(|i| (i % folds) as u8).collect();
            let mut rng = SplitMix64::stream(seed, &[cell.index as u64, CV_STREAM_TAG]);
            rng.shuffle(&mut labels);
            labels
        })
        .collect()
}

/// Subsample keeping units where `keep(cell_index, unit_index)` holds. Cells
/// left empty are dropped; fold labels travel with the units.
fn subset_sample<F: Fn(usize, usize) -> bool>(sample: &GroupedSample, keep: F) -> Result<GroupedSample> {
    let mut cells = Vec::new();
    for (k, cell) in sample.cells.iter().enumerate() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut fold = Vec::new();
        for i in 0..cell.len() {
            if keep(k, i) {
                x.extend_from_slice(cell.x_row(i, sample.d));
                y.push(cell.y[i]);
                fold.push(cell.fold[i]);
            }
        }
        if !y.is_empty() {
            cells.push((x, y, fold));
        }
    }
    if cells.is_empty() {
        return Err(Error::InsufficientData("subsample is empty".into()));
    }
    GroupedSample::from_cells_with_folds(cells, sample.d)
}

/// The regularized objective has a minimizer iff its quadratic part is
/// positive semidefinite; a Cholesky attempt detects this cheaply.
fn has_minimizer(quad: &DMatrix<f64>, pen: &DMatrix<f64>, lambda: f64) -> bool {
    (quad + lambda * pen).cholesky().is_some()
}

/// Positive part of a symmetric matrix: negative eigenvalues clipped to zero.
/// The population cross-fold quadratic is PSD, so the clipped entries of a
/// validation estimate are pure sampling noise; clipping keeps boundary fits
/// with huge norms from receiving arbitrarily negative validation losses.
fn positive_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for (i, &val) in eig.eigenvalues.iter().enumerate() {
        if val > 0.0 {
            let v = eig.eigenvectors.column(i);
            out += val * &v * v.transpose();
        }
    }
    out
}

/// Select the ridge level by V-fold cross-validation on the unregularized
/// validation loss; ties resolve to the larger lambda.
///
/// Grid points where the trained objective is unbounded below (the cross-fold
/// quadratic form plus the ridge is indefinite, so no argmin exists) are
/// inadmissible and receive an infinite loss. Without this rule a saddle-point
/// "fit" with exploding norm can fool the (equally indefinite) validation
/// quadratic into an arbitrarily negative loss.
pub fn cv_select_lambda(
    sample: &GroupedSample,
    basis: &FeatureBasis,
    objective: CvObjective<'_>,
    mode: FitMode,
    grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<CvSelection> {
    if grid.is_empty() {
        return Err(Error::GridEmpty);
    }
    if folds < 2 {
        return Err(Error::InvalidConfig("cross-validation needs at least 2 folds".into()));
    }
    let mut grid: Vec<f64> = grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let labels = cv_fold_labels(sample, folds, seed);
    let mut fold_losses: Vec<Vec<f64>> = vec![Vec::with_capacity(folds); grid.len()];
    for v in 0..folds as u8 {
        let train = subset_sample(sample, |k, i| labels[k][i] != v)?;
        let val = subset_sample(sample, |k, i| labels[k][i] == v)?;
        let train_moments = compute_moments(basis, &train).map_err(insufficient)?;
        let train_gram = gram_matrix(basis, &train)?;
        let val_moments = compute_moments(basis, &val).map_err(insufficient)?;
        let mut val_forms = val_moments.cross_forms();
        val_forms.m = positive_part(&val_forms.m);
        let val_gram = match objective {
            CvObjective::Alpha { .. } | CvObjective::Rho { .. } => Some(gram_matrix(basis, &val)?),
            _ => None,
        };
        let train_forms = match (&objective, mode) {
            (CvObjective::Alpha { .. }, _) => None,
            (_, FitMode::Jive) => Some(train_moments.cross_forms()),
            (_, FitMode::Plugin) => Some(train_moments.plugin_forms()),
        };
        for (gi, &lambda) in grid.iter().enumerate() {
            let admissible = match &objective {
                CvObjective::Alpha { .. } => true,
                _ => has_minimizer(&train_forms.as_ref().unwrap().m, &train_gram.matrix, lambda),
            };
            if !admissible {
                fold_losses[gi].push(f64::INFINITY);
                continue;
            }
            let fit = match &objective {
                CvObjective::H => fit_h(&train_moments, &train_gram, lambda, mode),
                CvObjective::Beta { m } => fit_beta(&train_moments, &train_gram, m, lambda.max(f64::MIN_POSITIVE), mode),
                CvObjective::Alpha { m } => fit_alpha(&train_gram, m, lambda),
                CvObjective::Rho { h_fit } => fit_rho(&train_moments, &train_gram, h_fit, lambda),
                CvObjective::ProjAlpha { alpha_fit } => {
                    fit_proj_alpha(&train_moments, &train_gram, alpha_fit, lambda)
                }
            }?;
            let theta = fit.theta_vec();
            let loss = match &objective {
                CvObjective::H => {
                    val_forms.r0 - 2.0 * val_forms.c.dot(&theta) + quad_form(&val_forms.m, &theta)
                }
                CvObjective::Beta { m } => quad_form(&val_forms.m, &theta) - 2.0 * m.dot(&theta),
                CvObjective::Alpha { m } => {
                    quad_form(&val_gram.as_ref().unwrap().matrix, &theta) - 2.0 * m.dot(&theta)
                }
                CvObjective::Rho { h_fit } => {
                    quad_form(&val_forms.m, &theta)
                        - 2.0 * (val_gram.as_ref().unwrap().matrix.clone() * h_fit.theta_vec()).dot(&theta)
                }
                CvObjective::ProjAlpha { alpha_fit } => {
                    let diff = alpha_fit.theta_vec() - &theta;
                    quad_form(&val_forms.m, &diff)
                }
            };
            fold_losses[gi].push(loss);
        }
    }
    let mut rows = Vec::with_capacity(grid.len());
    let mut best_idx = None;
    let mut best = f64::INFINITY;
    for (gi, &lambda) in grid.iter().enumerate() {
        let mean = fold_losses[gi].iter().sum::<f64>() / fold_losses[gi].len() as f64;
        rows.push(CvRow { lambda, mean_loss: mean, fold_losses: fold_losses[gi].clone() });
        // <= : on ties the larger lambda (scanned later) wins.
        if mean.is_finite() && mean <= best {
            best = mean;
            best_idx = Some(gi);
        }
    }
    let best_idx = best_idx.ok_or_else(|| {
        Error::SingularSystem("no admissible lambda in the grid (objective unbounded below)".into())
    })?;
    Ok(CvSelection { lambda: grid[best_idx], rows })
}

fn insufficient(e: Error) -> Error {
    match e {
        Error::NoEstimableCells => {
            Error::InsufficientData("a cross-validation fold has no estimable cells".into())
        }
        other => other,
    }
}

/// Unit-level half split used by the optional nuisance cross-fitting regime:
/// returns the training half; the estimator still evaluates on the full
/// sample. Independent of both the two-fold labels and the CV folds.
pub fn crossfit_training_half(sample: &GroupedSample, seed: u64) -> Result<GroupedSample> {
    let labels = cv_fold_labels(sample, 2, mix_crossfit(seed));
    subset_sample(sample, |k, i| labels[k][i] == 0)
}

fn mix_crossfit(seed: u64) -> u64 {
    crate::rng::mix_seed(&[seed, 0xCF17])
}

//! Nonparametric jackknife instrumental-variable estimation with many weak
//! discrete instruments.
//!
//! This crate estimates linear functionals (for example, the mean outcome
//! under a new treatment distribution) of a structural function that is only
//! set-identified by finitely many conditional moment restrictions
//! `E[Y - h(X) | Z = k] = 0`. It targets the regime where the instrument has
//! many levels with few units each, where plug-in 2SLS-style estimators are
//! badly biased:
//!
//! * [`grouped`]: instrument-grouped samples, CSV ingestion, deterministic
//!   two-fold / leave-one-out splitting;
//! * [`basis`]: histogram, linear-spline and polynomial feature maps with
//!   the empirical Gram matrix;
//! * [`moments`]: fold-wise cell means and the cross-fold jackknife risk,
//!   whose opposite-fold products remove the many-instrument bias;
//! * [`solver`]: Tikhonov-regularized fits for the structural function, the
//!   debiasing dual, the Riesz representer, its projection, and the dual of
//!   the structural solution, plus cross-validated ridge selection;
//! * [`estimators`]: cross-fold, single-split and projection-corrected
//!   debiased estimators with influence-function Wald intervals, next to
//!   plug-in and IPW baselines;
//! * [`oracle`]: exact population quantities on discrete instances for
//!   verification: minimum-norm solutions, duals, identification gaps, score
//!   expansions and variance formulas;
//! * [`dgp`]: seeded synthetic designs (surrogate index, weak linear IV,
//!   discrete tables);
//! * [`study`]: a deterministic Monte Carlo harness reporting bias, SE,
//!   RMSE, coverage and interval width.
//!
//! Runnable walkthroughs live in `examples/`; the `npjive` binary exposes the
//! same functionality as `simulate`, `estimate`, `oracle`, `figure` and
//! `selfcheck` subcommands.
//!
//! ```
//! use npjive::basis::{make_basis, gram_matrix, BasisKind};
//! use npjive::dgp::{simulate_surrogate, SurrogateDgpConfig};
//! use npjive::estimators::estimate_crossfold;
//! use npjive::grouped::FoldScheme;
//! use npjive::moments::compute_moments;
//! use npjive::solver::{fit_beta, fit_h, FitMode, FunctionalSpec};
//!
//! let cfg = SurrogateDgpConfig::with_size(50, 10, 2.0, 3.5, 7);
//! let data = simulate_surrogate(&cfg).unwrap();
//! let sample = data.sample.assign_folds(7, FoldScheme::TwoFold);
//! let basis = make_basis(BasisKind::Histogram, 8, &sample).unwrap();
//! let moments = compute_moments(&basis, &sample).unwrap();
//! let gram = gram_matrix(&basis, &sample).unwrap();
//! let spec = FunctionalSpec::from_target(&basis, data.target_x, 1).unwrap();
//! let h = fit_h(&moments, &gram, 1e-4, FitMode::Jive).unwrap();
//! let beta = fit_beta(&moments, &gram, &spec.m, 1e-4, FitMode::Jive).unwrap();
//! let report = estimate_crossfold(&sample, &basis, &h, &beta, &spec, 0.95).unwrap();
//! assert!(report.ci_lo <= report.psi_hat && report.psi_hat <= report.ci_hi);
//! ```

pub mod basis;
pub mod dgp;
pub mod error;
pub mod estimators;
pub mod grouped;
pub mod linalg;
pub mod moments;
pub mod oracle;
pub mod rng;
pub mod selfcheck;
pub mod solver;
pub mod study;
pub mod svg;

pub use error::{Error, Result};

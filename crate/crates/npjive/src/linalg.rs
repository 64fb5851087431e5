//! Dense solves for the regularized normal equations.
//!
//! The cross-fold quadratic form can be indefinite, so the solver first tries
//! a Cholesky factorization and falls back to partially pivoted LU; if the
//! relative residual check fails, a recorded jitter `eps * trace(A)/p` is
//! escalated over three decades before reporting `SingularSystem`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerical record of one linear solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    /// Jitter added to the diagonal (0 when none was needed).
    pub jitter: f64,
    /// ||A theta - rhs|| / (||rhs|| + 1), for the jittered system.
    pub rel_residual: f64,
    /// Cheap condition estimate from the factorization diagonal.
    pub condition_estimate: f64,
}

const JITTER_STEPS: [f64; 4] = [0.0, 1e-12, 1e-10, 1e-8];

fn try_factor_solve(a: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<(DVector<f64>, f64)> {
    if let Some(chol) = a.clone().cholesky() {
        let diag: Vec<f64> = (0..a.nrows()).map(|i| chol.l_dirty()[(i, i)].abs()).collect();
        let cond = diag_cond(&diag).powi(2);
        return Some((chol.solve(rhs), cond));
    }
    let lu = a.clone().lu();
    let diag: Vec<f64> = (0..a.nrows()).map(|i| lu.u()[(i, i)].abs()).collect();
    let cond = diag_cond(&diag);
    lu.solve(rhs).map(|x| (x, cond))
}

fn diag_cond(diag: &[f64]) -> f64 {
    let max = diag.iter().cloned().fold(0.0f64, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Solve `(A + jitter I) theta = rhs` with escalating jitter. The accepted
/// solution satisfies `||(A + jitter I) theta - rhs|| <= 1e-8 (||rhs|| + 1)`.
pub fn solve_with_jitter(a: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<(DVector<f64>, SolveReport)> {
    let p = a.nrows();
    if p == 0 || a.ncols() != p || rhs.len() != p {
        return Err(Error::DimensionMismatch("square system required".into()));
    }
    let scale = (a.trace().abs() / p as f64).max(f64::MIN_POSITIVE);
    let tol = 1e-8 * (rhs.norm() + 1.0);
    let mut last = None;
    for &step in &JITTER_STEPS {
        let eps = step * scale;
        let sys = if eps == 0.0 {
            a.clone()
        } else {
            let mut sys = a.clone();
            for i in 0..p {
                sys[(i, i)] += eps;
            }
            sys
        };
        if let Some((theta, cond)) = try_factor_solve(&sys, rhs) {
            let resid = (&sys * &theta - rhs).norm();
            if resid <= tol && theta.iter().all(|v| v.is_finite()) {
                return Ok((
                    theta,
                    SolveReport { jitter: eps, rel_residual: resid / (rhs.norm() + 1.0), condition_estimate: cond },
                ));
            }
            last = Some(resid);
        }
    }
    Err(Error::SingularSystem(format!(
        "jitter escalation failed after 3 decades (last residual {:?}, tol {tol:.3e})",
        last
    )))
}

/// Convenience: `v' M v` for symmetric M.
pub fn quad_form(m: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    (v.transpose() * m * v)[(0, 0)]
}

//! Exact population computations on fully discrete instances.
//!
//! An [`OracleModel`] stores the joint tables P(X = x_j, Y = y_l | Z = k),
//! cell weights and a target treatment distribution. Everything the
//! estimators target: the minimum-norm structural solution, the dual
//! solutions, the Riesz representer and its projection, the identification
//! gap and the influence-function variances; is computed in closed form by
//! an SVD in weight-orthonormalized coordinates, which makes bit-level
//! verification of the expansion identities possible.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Relative singular-value threshold defining numerical rank.
const RANK_TOL: f64 = 1e-11;

/// Fully discrete joint distribution P(X, Y | Z = k) with cell weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleModel {
    /// Treatment support points (univariate).
    pub xs: Vec<f64>,
    /// Outcome support values.
    pub ys: Vec<f64>,
    /// `pxy[k][j][l]` = P(X = `xs[j]`, Y = `ys[l]` | Z = k); each `pxy[k]` sums to 1.
    pub pxy: Vec<Vec<Vec<f64>>>,
    /// Cell weights n_k / N, summing to 1.
    pub w: Vec<f64>,
    /// Target treatment distribution defining the functional psi.
    pub pstar: Vec<f64>,
    /// Optional per-cell unit counts, used only by the single-split variance.
    #[serde(default)]
    pub n_per_cell: Option<Vec<u64>>,
}

/// All population quantities of one model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleSolution {
    /// Minimum-norm structural solution on the treatment support.
    pub h_k: Vec<f64>,
    /// Dual solution q with T* q = proj_alpha.
    pub q_k: Vec<f64>,
    /// Dual coefficient function with T*T beta = proj_alpha.
    pub beta_k: Vec<f64>,
    /// r = T rho, the dual of the structural solution.
    pub r_k: Vec<f64>,
    /// Solution of T*T rho = h.
    pub rho_k: Vec<f64>,
    /// Riesz representer pstar / pi.
    pub alpha: Vec<f64>,
    /// Projection of alpha onto the identified space.
    pub proj_alpha: Vec<f64>,
    /// psi at the minimum-norm solution.
    pub psi_k: f64,
    /// Variance of the uncorrected score.
    pub sigma2: f64,
    /// Variance of the corrected (efficient) score.
    pub sigma2_star: f64,
    /// Single-split variance (needs per-cell counts; defaults to n_k = 1).
    pub sigma2_diamond: f64,
    /// Whether the conditional-mean operator has full row rank.
    pub surjective: bool,
    pub rank: usize,
    /// ||T h - mu|| in the instrument norm; nonzero when mu lies outside the
    /// range of T (the least-squares solution is reported instead of failing).
    pub consistency_residual: f64,
}

/// Identification-gap report; the inner-product form and the direct
/// difference are computed independently and must agree.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapReport {
    /// <alpha - proj alpha, proj h* - h*> in the treatment norm.
    pub gap: f64,
    /// psi_K(h*) - psi(h*), computed directly.
    pub direct: f64,
    /// |gap - direct|; the two agree to numerical precision.
    pub identity_residual: f64,
    pub psi_k_of_h_star: f64,
    pub psi_of_h_star: f64,
}

struct Geometry {
    t: DMatrix<f64>,
    mu: DVector<f64>,
    pi: DVector<f64>,
    sqrt_w: DVector<f64>,
    sqrt_pi: DVector<f64>,
    /// Left singular vectors, singular values, right singular vectors
    /// (columns), truncated to numerical rank.
    u: DMatrix<f64>,
    s: DVector<f64>,
    v: DMatrix<f64>,
    rank: usize,
}

impl OracleModel {
    pub fn k(&self) -> usize {
        self.w.len()
    }

    pub fn m(&self) -> usize {
        self.xs.len()
    }

    pub fn l(&self) -> usize {
        self.ys.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (k, m, l) = (self.k(), self.m(), self.l());
        if k == 0 || m == 0 || l == 0 {
            return Err(Error::InvalidConfig("empty support".into()));
        }
        if self.pxy.len() != k {
            return Err(Error::DimensionMismatch("pxy vs w".into()));
        }
        for (ki, table) in self.pxy.iter().enumerate() {
            if table.len() != m || table.iter().any(|row| row.len() != l) {
                return Err(Error::DimensionMismatch(format!("pxy[{ki}] shape")));
            }
            let mut total = 0.0;
            for row in table {
                for &p in row {
                    if !(p >= -1e-12) || !p.is_finite() {
                        return Err(Error::InvalidConfig(format!("negative mass in cell {ki}")));
                    }
                    total += p;
                }
            }
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidConfig(format!(
                    "cell {ki} mass sums to {total}, expected 1"
                )));
            }
        }
        if self.pstar.len() != m {
            return Err(Error::DimensionMismatch("pstar vs xs".into()));
        }
        if (self.pstar.iter().sum::<f64>() - 1.0).abs() > 1e-12
            || self.pstar.iter().any(|&p| p < -1e-12)
        {
            return Err(Error::InvalidConfig("pstar must be a distribution".into()));
        }
        if (self.w.iter().sum::<f64>() - 1.0).abs() > 1e-12 || self.w.iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidConfig("weights must be positive and sum to 1".into()));
        }
        if let Some(n) = &self.n_per_cell {
            if n.len() != k || n.iter().any(|&v| v == 0) {
                return Err(Error::InvalidConfig("n_per_cell must have one positive entry per cell".into()));
            }
        }
        for j in 0..m {
            let pi_j: f64 = (0..k)
                .map(|ki| self.w[ki] * self.pxy[ki][j].iter().sum::<f64>())
                .sum();
            if pi_j <= 0.0 {
                return Err(Error::UnreachableSupportPoint(j));
            }
        }
        Ok(())
    }

    /// Conditional-distribution matrix `T[k][j]` = P(X = x_j | Z = k).
    pub fn t_matrix(&self) -> DMatrix<f64> {
        let (k, m) = (self.k(), self.m());
        DMatrix::from_fn(k, m, |ki, j| self.pxy[ki][j].iter().sum())
    }

    /// Conditional outcome means `mu[k]` = E[Y | Z = k].
    pub fn mu(&self) -> DVector<f64> {
        DVector::from_fn(self.k(), |ki, _| {
            self.pxy[ki]
                .iter()
                .map(|row| row.iter().zip(&self.ys).map(|(p, y)| p * y).sum::<f64>())
                .sum()
        })
    }

    /// Marginal treatment distribution `pi[j]` = sum_k w_k P(X = x_j | Z = k).
    pub fn marginal_x(&self) -> DVector<f64> {
        let t = self.t_matrix();
        DVector::from_fn(self.m(), |j, _| (0..self.k()).map(|ki| self.w[ki] * t[(ki, j)]).sum())
    }

    fn geometry(&self) -> Result<Geometry> {
        self.validate()?;
        let t = self.t_matrix();
        let mu = self.mu();
        let pi = self.marginal_x();
        let sqrt_w = DVector::from_fn(self.k(), |k, _| self.w[k].sqrt());
        let sqrt_pi = DVector::from_fn(self.m(), |j, _| pi[j].sqrt());
        let tt = DMatrix::from_fn(self.k(), self.m(), |k, j| sqrt_w[k] * t[(k, j)] / sqrt_pi[j]);
        let svd = tt.svd(true, true);
        let u_full = svd.u.ok_or_else(|| Error::SingularSystem("svd failed".into()))?;
        let vt_full = svd.v_t.ok_or_else(|| Error::SingularSystem("svd failed".into()))?;
        let sv = svd.singular_values;
        let smax = sv.iter().cloned().fold(0.0f64, f64::max);
        let tol = RANK_TOL * smax;
        let mut order: Vec<usize> = (0..sv.len()).collect();
        order.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).unwrap());
        let kept: Vec<usize> = order.into_iter().filter(|&i| sv[i] > tol).collect();
        let rank = kept.len();
        let mut u = DMatrix::zeros(self.k(), rank);
        let mut v = DMatrix::zeros(self.m(), rank);
        let mut s = DVector::zeros(rank);
        for (col, &i) in kept.iter().enumerate() {
            u.set_column(col, &u_full.column(i));
            v.set_column(col, &vt_full.row(i).transpose());
            s[col] = sv[i];
        }
        Ok(Geometry { t, mu, pi, sqrt_w, sqrt_pi, u, s, v, rank })
    }

    /// Inner product in the weighted treatment space.
    pub fn inner_x(&self, f: &[f64], g: &[f64]) -> f64 {
        let pi = self.marginal_x();
        (0..self.m()).map(|j| pi[j] * f[j] * g[j]).sum()
    }

    /// Inner product in the weighted instrument space.
    pub fn inner_z(&self, f: &[f64], g: &[f64]) -> f64 {
        (0..self.k()).map(|k| self.w[k] * f[k] * g[k]).sum()
    }

    /// Adjoint applied to an instrument-space function.
    pub fn t_star(&self, q: &[f64]) -> Vec<f64> {
        let t = self.t_matrix();
        let pi = self.marginal_x();
        (0..self.m())
            .map(|j| (0..self.k()).map(|k| self.w[k] * q[k] * t[(k, j)]).sum::<f64>() / pi[j])
            .collect()
    }

    /// Apply T to a treatment-space function.
    pub fn t_apply(&self, h: &[f64]) -> Vec<f64> {
        let t = self.t_matrix();
        (0..self.k()).map(|k| (0..self.m()).map(|j| t[(k, j)] * h[j]).sum()).collect()
    }

    /// psi(f) = sum_j pstar_j f_j.
    pub fn psi(&self, f: &[f64]) -> f64 {
        self.pstar.iter().zip(f).map(|(p, v)| p * v).sum()
    }

    /// Orthogonal projection of a function onto the identified space (the
    /// range of the adjoint) in the weighted treatment geometry. Applying it
    /// to the Riesz representer gives proj_alpha; the complement `f - Pf`
    /// lies in the null space of T, so `h_K + (f - Pf)` still solves the
    /// moment restrictions.
    pub fn project_onto_identified(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.m() {
            return Err(Error::DimensionMismatch("function vs treatment support".into()));
        }
        let geo = self.geometry()?;
        let f_t = DVector::from_fn(self.m(), |j, _| geo.sqrt_pi[j] * f[j]);
        let proj = &geo.v * (geo.v.transpose() * &f_t);
        Ok((0..self.m()).map(|j| proj[j] / geo.sqrt_pi[j]).collect())
    }

    /// Population jackknife risk of a candidate structural function given by
    /// its values on the support.
    pub fn population_risk_of(&self, h_values: &[f64]) -> f64 {
        let mu = self.mu();
        let th = self.t_apply(h_values);
        (0..self.k()).map(|k| self.w[k] * (mu[k] - th[k]) * (mu[k] - th[k])).sum()
    }

    /// Exact solve of every population quantity.
    pub fn solve(&self) -> Result<OracleSolution> {
        let geo = self.geometry()?;
        let m = self.m();
        let k = self.k();
        // Tilde coordinates: h~ = sqrt(pi) h, q~ = sqrt(w) q.
        let mu_t = DVector::from_fn(k, |ki, _| geo.sqrt_w[ki] * geo.mu[ki]);
        let ut_mu = geo.u.transpose() * &mu_t;
        let h_t = &geo.v * DVector::from_fn(geo.rank, |i, _| ut_mu[i] / geo.s[i]);
        let h_k: Vec<f64> = (0..m).map(|j| h_t[j] / geo.sqrt_pi[j]).collect();
        let th = self.t_apply(&h_k);
        let consistency_residual = (0..k)
            .map(|ki| self.w[ki] * (th[ki] - geo.mu[ki]).powi(2))
            .sum::<f64>()
            .sqrt();

        let alpha: Vec<f64> = (0..m).map(|j| self.pstar[j] / geo.pi[j]).collect();
        let alpha_t = DVector::from_fn(m, |j, _| geo.sqrt_pi[j] * alpha[j]);
        let v_alpha = geo.v.transpose() * &alpha_t;
        let proj_t = &geo.v * &v_alpha;
        let proj_alpha: Vec<f64> = (0..m).map(|j| proj_t[j] / geo.sqrt_pi[j]).collect();
        let q_t = &geo.u * DVector::from_fn(geo.rank, |i, _| v_alpha[i] / geo.s[i]);
        let q_k: Vec<f64> = (0..k).map(|ki| q_t[ki] / geo.sqrt_w[ki]).collect();
        let beta_t = &geo.v * DVector::from_fn(geo.rank, |i, _| v_alpha[i] / (geo.s[i] * geo.s[i]));
        let beta_k: Vec<f64> = (0..m).map(|j| beta_t[j] / geo.sqrt_pi[j]).collect();

        let v_h = geo.v.transpose() * &h_t;
        let rho_t = &geo.v * DVector::from_fn(geo.rank, |i, _| v_h[i] / (geo.s[i] * geo.s[i]));
        let rho_k: Vec<f64> = (0..m).map(|j| rho_t[j] / geo.sqrt_pi[j]).collect();
        let r_k = self.t_apply(&rho_k);

        let psi_k = self.psi(&h_k);

        // Per-cell conditional variances from the joint tables.
        let mut sigma2 = 0.0;
        let mut sigma2_star = 0.0;
        let mut var_eps = vec![0.0; k];
        let mut var_beta = vec![0.0; k];
        for ki in 0..k {
            let mut e1 = 0.0;
            let mut e2 = 0.0;
            let mut phi2 = 0.0;
            let mut b1 = 0.0;
            let mut b2 = 0.0;
            for j in 0..m {
                let aperp = alpha[j] - proj_alpha[j];
                for l in 0..self.l() {
                    let p = self.pxy[ki][j][l];
                    if p == 0.0 {
                        continue;
                    }
                    let resid = self.ys[l] - h_k[j];
                    e1 += p * resid;
                    e2 += p * resid * resid;
                    let phi = q_k[ki] * resid + aperp * (r_k[ki] - h_k[j]);
                    phi2 += p * phi * phi;
                }
                let pj: f64 = self.pxy[ki][j].iter().sum();
                b1 += pj * beta_k[j];
                b2 += pj * beta_k[j] * beta_k[j];
            }
            var_eps[ki] = e2 - e1 * e1;
            var_beta[ki] = b2 - b1 * b1;
            sigma2 += self.w[ki] * q_k[ki] * q_k[ki] * var_eps[ki];
            sigma2_star += self.w[ki] * phi2;
        }
        let ones = vec![1u64; k];
        let counts = self.n_per_cell.as_ref().unwrap_or(&ones);
        let n_total: u64 = counts.iter().sum();
        let extra: f64 = (0..k).map(|ki| var_beta[ki] * var_eps[ki]).sum();
        let sigma2_diamond = sigma2 + 2.0 * extra / n_total as f64;

        Ok(OracleSolution {
            h_k,
            q_k,
            beta_k,
            r_k,
            rho_k,
            alpha,
            proj_alpha,
            psi_k,
            sigma2,
            sigma2_star,
            sigma2_diamond,
            surjective: geo.rank == k,
            rank: geo.rank,
            consistency_residual,
        })
    }

    /// Identification gap at a true structural function h*. Errors with
    /// `ModelMismatch` when T h* differs from mu.
    pub fn gap(&self, h_star: &[f64]) -> Result<GapReport> {
        if h_star.len() != self.m() {
            return Err(Error::DimensionMismatch("h_star vs treatment support".into()));
        }
        let geo = self.geometry()?;
        let th = self.t_apply(h_star);
        let resid = (0..self.k())
            .map(|k| self.w[k] * (th[k] - geo.mu[k]).powi(2))
            .sum::<f64>()
            .sqrt();
        let mu_norm = self.inner_z(geo.mu.as_slice(), geo.mu.as_slice()).sqrt();
        if resid > 1e-8 * (mu_norm + 1.0) {
            return Err(Error::ModelMismatch(format!(
                "T h* != mu (residual {resid:.3e}); h* is not a solution of this model"
            )));
        }
        let sol = self.solve()?;
        let h_t = DVector::from_fn(self.m(), |j, _| geo.sqrt_pi[j] * h_star[j]);
        let proj = &geo.v * (geo.v.transpose() * &h_t);
        let proj_h: Vec<f64> = (0..self.m()).map(|j| proj[j] / geo.sqrt_pi[j]).collect();
        let aperp: Vec<f64> =
            (0..self.m()).map(|j| sol.alpha[j] - sol.proj_alpha[j]).collect();
        let diff: Vec<f64> = (0..self.m()).map(|j| proj_h[j] - h_star[j]).collect();
        let gap = self.inner_x(&aperp, &diff);
        let psi_k_of_h_star = self.psi(&proj_h);
        let psi_of_h_star = self.psi(h_star);
        let direct = psi_k_of_h_star - psi_of_h_star;
        Ok(GapReport {
            gap,
            direct,
            identity_residual: (gap - direct).abs(),
            psi_k_of_h_star,
            psi_of_h_star,
        })
    }
}

fn check_shared_supports(model: &OracleModel, other: &OracleModel) -> Result<()> {
    let close = |a: &[f64], b: &[f64]| {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12)
    };
    if !close(&model.xs, &other.xs) || !close(&model.ys, &other.ys) {
        return Err(Error::SupportMismatch("treatment/outcome supports differ".into()));
    }
    if !close(&model.w, &other.w) {
        return Err(Error::SupportMismatch("cell weights differ".into()));
    }
    if !close(&model.pstar, &other.pstar) {
        return Err(Error::SupportMismatch("target distributions differ".into()));
    }
    Ok(())
}

/// Both sides of the functional bias expansion: the first-order error of the
/// corrected score evaluated under `model`, with nuisances from `model_bar`.
/// The two returned values agree to numerical precision.
pub fn von_mises_residual(model: &OracleModel, model_bar: &OracleModel) -> Result<(f64, f64)> {
    check_shared_supports(model, model_bar)?;
    let sol = model.solve()?;
    let sol_bar = model_bar.solve()?;
    let t = model.t_matrix();
    let mu = model.mu();
    let (k, m) = (model.k(), model.m());

    let aperp_bar: Vec<f64> = (0..m).map(|j| sol_bar.alpha[j] - sol_bar.proj_alpha[j]).collect();
    let aperp: Vec<f64> = (0..m).map(|j| sol.alpha[j] - sol.proj_alpha[j]).collect();

    // lhs: Psi(Pbar) - Psi(P) + sum_k w_k E_P[phi*_bar(O_k)].
    let t_hbar = model.t_apply(&sol_bar.h_k);
    let mut mean_score = 0.0;
    for ki in 0..k {
        let e1 = sol_bar.q_k[ki] * (mu[ki] - t_hbar[ki]);
        let mut e2 = 0.0;
        for j in 0..m {
            e2 += t[(ki, j)] * aperp_bar[j] * (sol_bar.r_k[ki] - sol_bar.h_k[j]);
        }
        mean_score += model.w[ki] * (e1 + e2);
    }
    let lhs = sol_bar.psi_k - sol.psi_k + mean_score;

    // rhs: -<qbar - q, T(hbar - h)> + <aperp_bar - aperp, T*(rbar - r) - (hbar - h)>.
    let dh: Vec<f64> = (0..m).map(|j| sol_bar.h_k[j] - sol.h_k[j]).collect();
    let dq: Vec<f64> = (0..k).map(|ki| sol_bar.q_k[ki] - sol.q_k[ki]).collect();
    let dr: Vec<f64> = (0..k).map(|ki| sol_bar.r_k[ki] - sol.r_k[ki]).collect();
    let t_dh = model.t_apply(&dh);
    let tstar_dr = model.t_star(&dr);
    let da: Vec<f64> = (0..m).map(|j| aperp_bar[j] - aperp[j]).collect();
    let second: Vec<f64> = (0..m).map(|j| tstar_dr[j] - dh[j]).collect();
    let rhs = -model.inner_z(&dq, &t_dh) + model.inner_x(&da, &second);
    Ok((lhs, rhs))
}

/// Both sides of the expansion for the uncorrected score
/// phi(o) = q(z) (y - h(x)).
pub fn uncorrected_score_residual(model: &OracleModel, model_bar: &OracleModel) -> Result<(f64, f64)> {
    check_shared_supports(model, model_bar)?;
    let sol = model.solve()?;
    let sol_bar = model_bar.solve()?;
    let mu = model.mu();
    let (k, m) = (model.k(), model.m());
    let t_hbar = model.t_apply(&sol_bar.h_k);
    let mut mean_score = 0.0;
    for ki in 0..k {
        mean_score += model.w[ki] * sol_bar.q_k[ki] * (mu[ki] - t_hbar[ki]);
    }
    let lhs = sol_bar.psi_k - sol.psi_k + mean_score;

    let dh: Vec<f64> = (0..m).map(|j| sol_bar.h_k[j] - sol.h_k[j]).collect();
    let dq: Vec<f64> = (0..k).map(|ki| sol_bar.q_k[ki] - sol.q_k[ki]).collect();
    let t_dh = model.t_apply(&dh);
    let aperp: Vec<f64> = (0..m).map(|j| sol.alpha[j] - sol.proj_alpha[j]).collect();
    let rhs = -model.inner_z(&dq, &t_dh) + model.inner_x(&aperp, &dh);
    Ok((lhs, rhs))
}

/// Dual-solution norm for the linear-Gaussian weak-instrument design:
/// ||q|| = 1 / |pi|, used to label DGP difficulty.
pub fn weak_iv_oracle(pi: f64) -> Result<f64> {
    if pi == 0.0 || !pi.is_finite() {
        return Err(Error::ZeroPi);
    }
    Ok(1.0 / pi.abs())
}

/// Residuals of the structural identities of one model; all entries are
/// zero up to numerical precision for a valid implementation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityReport {
    pub adjointness: f64,
    pub pinv_primary: f64,
    pub pinv_secondary: f64,
    pub dual_representation: f64,
    pub riesz_representation: f64,
    pub eif_mean: f64,
    pub min_norm_orthogonality: f64,
    pub rank: usize,
    pub surjective: bool,
    /// SVD rank agrees with the column-space projection route.
    pub rank_routes_agree: bool,
    pub consistency_residual: f64,
}

impl IdentityReport {
    pub fn max_residual(&self) -> f64 {
        [
            self.adjointness,
            self.pinv_primary,
            self.pinv_secondary,
            self.dual_representation,
            self.riesz_representation,
            self.eif_mean,
            self.min_norm_orthogonality,
        ]
        .into_iter()
        .fold(0.0f64, f64::max)
    }
}

/// Check the operator identities of a model: adjointness, pseudoinverse
/// identities, the dual representation of psi, mean-zero of the corrected
/// score, minimum-norm orthogonality and the two-route surjectivity test.
pub fn identity_report(model: &OracleModel) -> Result<IdentityReport> {
    let sol = model.solve()?;
    let geo = model.geometry()?;
    let (k, m) = (model.k(), model.m());
    let t = &geo.t;

    // Adjointness: <T e_j, e_k>_Z == <e_j, T* e_k>_X entrywise.
    let mut adjointness = 0.0f64;
    for ki in 0..k {
        let mut e = vec![0.0; k];
        e[ki] = 1.0;
        let ts = model.t_star(&e);
        for j in 0..m {
            let lhs = model.w[ki] * t[(ki, j)];
            let rhs = geo.pi[j] * ts[j];
            adjointness = adjointness.max((lhs - rhs).abs());
        }
    }

    // Pseudoinverse identities in orthonormal coordinates.
    let tt = DMatrix::from_fn(k, m, |ki, j| geo.sqrt_w[ki] * t[(ki, j)] / geo.sqrt_pi[j]);
    let sinv = DMatrix::from_fn(geo.rank, geo.rank, |a, b| {
        if a == b {
            1.0 / geo.s[a]
        } else {
            0.0
        }
    });
    let pinv = &geo.v * sinv * geo.u.transpose();
    let pinv_primary = (&tt * &pinv * &tt - &tt).abs().max();
    let pinv_secondary = (&pinv * &tt * &pinv - &pinv).abs().max();

    // psi_K = <q, mu>_Z and psi_K = <proj alpha, h_K>_X.
    let mu: Vec<f64> = geo.mu.as_slice().to_vec();
    let dual_representation = (sol.psi_k - model.inner_z(&sol.q_k, &mu)).abs();
    let riesz_representation = (sol.psi_k - model.inner_x(&sol.proj_alpha, &sol.h_k)).abs();

    // Mean-zero corrected score at the model's own solution.
    let t_h = model.t_apply(&sol.h_k);
    let aperp: Vec<f64> = (0..m).map(|j| sol.alpha[j] - sol.proj_alpha[j]).collect();
    let mut eif_mean = 0.0;
    for ki in 0..k {
        let mut e2 = 0.0;
        for j in 0..m {
            e2 += t[(ki, j)] * aperp[j] * (sol.r_k[ki] - sol.h_k[j]);
        }
        eif_mean += model.w[ki] * (sol.q_k[ki] * (geo.mu[ki] - t_h[ki]) + e2);
    }

    // Minimum-norm solution is orthogonal to the null space of T.
    let h_t = DVector::from_fn(m, |j, _| geo.sqrt_pi[j] * sol.h_k[j]);
    let in_row_space = &geo.v * (geo.v.transpose() * &h_t);
    let min_norm_orthogonality = (&h_t - in_row_space).norm();

    // Second rank route: project instrument basis vectors onto the column
    // space obtained from a column-pivoted QR of the weighted operator.
    let qr = tt.clone().col_piv_qr();
    let r_mat = qr.r();
    let diag_max = (0..r_mat.nrows().min(r_mat.ncols()))
        .map(|i| r_mat[(i, i)].abs())
        .fold(0.0f64, f64::max);
    let qr_rank = (0..r_mat.nrows().min(r_mat.ncols()))
        .filter(|&i| r_mat[(i, i)].abs() > RANK_TOL.sqrt() * diag_max.max(f64::MIN_POSITIVE))
        .count();
    let rank_routes_agree = qr_rank == geo.rank;

    Ok(IdentityReport {
        adjointness,
        pinv_primary,
        pinv_secondary,
        dual_representation,
        riesz_representation,
        eif_mean: eif_mean.abs(),
        min_norm_orthogonality,
        rank: geo.rank,
        surjective: sol.surjective,
        rank_routes_agree,
        consistency_residual: sol.consistency_residual,
    })
}

/// Two-cell binary-treatment instance with exactly solvable values:
/// T = [[.5,.5],[.2,.8]], mu = (1, 1.6), structural values (0, 2).
pub fn orc_a() -> OracleModel {
    // Outcome support {-1, 1, 3}: at x=0, Y is +-1; at x=1, Y is 2 +- 1.
    let spread = |px0: f64, px1: f64| {
        vec![vec![px0 / 2.0, px0 / 2.0, 0.0], vec![0.0, px1 / 2.0, px1 / 2.0]]
    };
    OracleModel {
        xs: vec![0.0, 1.0],
        ys: vec![-1.0, 1.0, 3.0],
        pxy: vec![spread(0.5, 0.5), spread(0.2, 0.8)],
        w: vec![0.5, 0.5],
        pstar: vec![0.5, 0.5],
        n_per_cell: None,
    }
}

/// Single-instrument instance with a rank-deficient functional:
/// T = [.5, .5], mu = 2, psi(h) = h(1); h* = (1, 3) solves it with gap -1.
pub fn orc_b() -> OracleModel {
    OracleModel {
        xs: vec![0.0, 1.0],
        ys: vec![1.0, 3.0],
        pxy: vec![vec![vec![0.5, 0.0], vec![0.0, 0.5]]],
        w: vec![1.0],
        pstar: vec![0.0, 1.0],
        n_per_cell: None,
    }
}

/// Identity-operator instance: cell k observes x_k with certainty and
/// Y in {k, k+1} equally, so h_K = mu = (0.5, 1.5, ...).
pub fn identity_instance(k: usize) -> OracleModel {
    let l = k + 1;
    let mut pxy = Vec::with_capacity(k);
    for ki in 0..k {
        let mut table = vec![vec![0.0; l]; k];
        table[ki][ki] = 0.5;
        table[ki][ki + 1] = 0.5;
        pxy.push(table);
    }
    OracleModel {
        xs: (0..k).map(|j| j as f64).collect(),
        ys: (0..l).map(|v| v as f64).collect(),
        pxy,
        w: vec![1.0 / k as f64; k],
        pstar: vec![1.0 / k as f64; k],
        n_per_cell: None,
    }
}

/// Seeded random model with K <= 6 cells, K <= m <= 8 support points and
/// 2..=4 outcome values; always surjective up to numerical rank.
pub fn random_model(seed: u64) -> OracleModel {
    let mut rng = SplitMix64::stream(seed, &[0x0AC1E]);
    let k = 1 + rng.below(6);
    let m = k + rng.below(8 - k + 1).min(8 - k);
    let m = m.max(k).min(8);
    let l = 2 + rng.below(3);
    let xs: Vec<f64> = (0..m).map(|j| j as f64 + 0.3 * rng.uniform()).collect();
    let ys: Vec<f64> = (0..l).map(|_| rng.normal(0.0, 2.0)).collect();
    let mut pxy = Vec::with_capacity(k);
    for _ in 0..k {
        let mut table = vec![vec![0.0; l]; m];
        let mut total = 0.0;
        for row in table.iter_mut() {
            for p in row.iter_mut() {
                *p = rng.uniform() + 0.05;
                total += *p;
            }
        }
        for row in table.iter_mut() {
            for p in row.iter_mut() {
                *p /= total;
            }
        }
        pxy.push(table);
    }
    let mut w: Vec<f64> = (0..k).map(|_| rng.uniform() + 0.2).collect();
    let wsum: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= wsum);
    let mut pstar: Vec<f64> = (0..m).map(|_| rng.uniform() + 0.05).collect();
    let psum: f64 = pstar.iter().sum();
    pstar.iter_mut().for_each(|v| *v /= psum);
    normalize_tables(OracleModel { xs, ys, pxy, w, pstar, n_per_cell: None })
}

/// Smooth mixture perturbation (1 - eps) P + eps Q sharing all supports.
pub fn perturb_model(model: &OracleModel, seed: u64, eps: f64) -> OracleModel {
    let mut rng = SplitMix64::stream(seed, &[0xBA5E]);
    let mut out = model.clone();
    for table in out.pxy.iter_mut() {
        let mut q = vec![vec![0.0; model.l()]; model.m()];
        let mut total = 0.0;
        for row in q.iter_mut() {
            for p in row.iter_mut() {
                *p = rng.uniform() + 0.05;
                total += *p;
            }
        }
        for (j, row) in table.iter_mut().enumerate() {
            for (l, p) in row.iter_mut().enumerate() {
                *p = (1.0 - eps) * *p + eps * q[j][l] / total;
            }
        }
    }
    normalize_tables(out)
}

/// Renormalize each cell table exactly so the validator's 1e-12 mass check
/// passes despite floating accumulation.
fn normalize_tables(mut model: OracleModel) -> OracleModel {
    for table in model.pxy.iter_mut() {
        let total: f64 = table.iter().flat_map(|r| r.iter()).sum();
        for row in table.iter_mut() {
            for p in row.iter_mut() {
                *p /= total;
            }
        }
    }
    let wsum: f64 = model.w.iter().sum();
    model.w.iter_mut().for_each(|v| *v /= wsum);
    let psum: f64 = model.pstar.iter().sum();
    model.pstar.iter_mut().for_each(|v| *v /= psum);
    model
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orc_a_ground_truth() {
        let model = orc_a();
        let sol = model.solve().unwrap();
        assert!((sol.h_k[0] - 0.0).abs() < 1e-10);
        assert!((sol.h_k[1] - 2.0).abs() < 1e-10);
        assert!((sol.psi_k - 1.0).abs() < 1e-10);
        assert!(sol.surjective);
        assert_eq!(sol.rank, 2);
        // Full rank with m = K: projection is the identity, gap is zero.
        let gap = model.gap(&sol.h_k).unwrap();
        assert!(gap.gap.abs() < 1e-10);
        for j in 0..2 {
            assert!((sol.proj_alpha[j] - sol.alpha[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn orc_b_ground_truth() {
        let model = orc_b();
        let sol = model.solve().unwrap();
        assert!((sol.h_k[0] - 2.0).abs() < 1e-10);
        assert!((sol.h_k[1] - 2.0).abs() < 1e-10);
        assert!((sol.alpha[0] - 0.0).abs() < 1e-10);
        assert!((sol.alpha[1] - 2.0).abs() < 1e-10);
        assert!((sol.proj_alpha[0] - 1.0).abs() < 1e-10);
        assert!((sol.proj_alpha[1] - 1.0).abs() < 1e-10);
        assert!(!sol.surjective || model.k() == sol.rank);
        let gap = model.gap(&[1.0, 3.0]).unwrap();
        assert!((gap.gap + 1.0).abs() < 1e-10, "gap = {}", gap.gap);
        assert!((gap.psi_k_of_h_star - 2.0).abs() < 1e-10);
        assert!((gap.psi_of_h_star - 3.0).abs() < 1e-10);
        assert!(gap.identity_residual < 1e-10);
    }

    #[test]
    fn identity_instance_solves_to_mu() {
        let model = identity_instance(4);
        let sol = model.solve().unwrap();
        let mu = model.mu();
        for k in 0..4 {
            assert!((sol.h_k[k] - mu[k]).abs() < 1e-12);
            assert!((sol.q_k[k] - sol.alpha[k]).abs() < 1e-10);
        }
        let gap = model.gap(&sol.h_k).unwrap();
        assert!(gap.gap.abs() < 1e-12);
        assert!(sol.surjective);
    }

    #[test]
    fn gap_zero_when_h_star_is_min_norm() {
        for seed in 0..10 {
            let model = random_model(seed);
            let sol = model.solve().unwrap();
            let gap = model.gap(&sol.h_k).unwrap();
            assert!(gap.gap.abs() < 1e-9, "seed {seed}: {}", gap.gap);
        }
    }

    #[test]
    fn gap_rejects_non_solutions() {
        let model = orc_b();
        assert!(matches!(model.gap(&[5.0, 5.0]), Err(Error::ModelMismatch(_))));
    }

    #[test]
    fn identities_on_random_models() {
        for seed in 0..25 {
            let model = random_model(seed);
            let report = identity_report(&model).unwrap();
            assert!(report.adjointness < 1e-12, "seed {seed}: adjointness {}", report.adjointness);
            assert!(report.pinv_primary < 1e-10, "seed {seed}");
            assert!(report.pinv_secondary < 1e-10, "seed {seed}");
            assert!(report.dual_representation < 1e-10, "seed {seed}");
            assert!(report.riesz_representation < 1e-10, "seed {seed}");
            assert!(report.eif_mean < 1e-12, "seed {seed}: eif mean {}", report.eif_mean);
            assert!(report.min_norm_orthogonality < 1e-10, "seed {seed}");
            assert!(report.rank_routes_agree, "seed {seed}");
        }
    }

    #[test]
    fn von_mises_zero_at_truth() {
        let model = orc_a();
        let (lhs, rhs) = von_mises_residual(&model, &model).unwrap();
        assert!(lhs.abs() < 1e-12);
        assert!(rhs.abs() < 1e-12);
    }

    #[test]
    fn von_mises_identity_under_perturbation() {
        for seed in 0..20 {
            let model = random_model(seed);
            let bar = perturb_model(&model, seed ^ 0xF00, 0.1);
            let (lhs, rhs) = von_mises_residual(&model, &bar).unwrap();
            assert!((lhs - rhs).abs() <= 1e-10, "seed {seed}: lhs {lhs} rhs {rhs}");
            let (lhs, rhs) = uncorrected_score_residual(&model, &bar).unwrap();
            assert!((lhs - rhs).abs() <= 1e-10, "seed {seed}: cor1 lhs {lhs} rhs {rhs}");
        }
    }

    #[test]
    fn support_mismatch_detected() {
        let a = orc_a();
        let b = orc_b();
        assert!(matches!(von_mises_residual(&a, &b), Err(Error::SupportMismatch(_))));
    }

    #[test]
    fn weak_iv_norms() {
        assert!((weak_iv_oracle(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((weak_iv_oracle(0.1).unwrap() - 10.0).abs() < 1e-12);
        assert!((weak_iv_oracle(-0.5).unwrap() - 2.0).abs() < 1e-15);
        assert!(matches!(weak_iv_oracle(0.0), Err(Error::ZeroPi)));
    }

    #[test]
    fn json_round_trip() {
        let model = orc_a();
        let json = serde_json::to_string(&model).unwrap();
        let back: OracleModel = serde_json::from_str(&json).unwrap();
        let s1 = model.solve().unwrap();
        let s2 = back.solve().unwrap();
        assert_eq!(s1.h_k, s2.h_k);
        let sol_json = serde_json::to_string(&s1).unwrap();
        assert!(sol_json.contains("psi_k"));
    }

    #[test]
    fn unreachable_support_point_rejected() {
        let mut model = orc_a();
        // Remove all mass from x = 0.
        for table in model.pxy.iter_mut() {
            let moved: f64 = table[0].iter().sum();
            table[0].iter_mut().for_each(|p| *p = 0.0);
            let l = table[1].len();
            table[1].iter_mut().for_each(|p| *p += moved / l as f64);
        }
        assert!(matches!(model.validate(), Err(Error::UnreachableSupportPoint(0))));
    }
}

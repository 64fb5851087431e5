//! Runtime invariant battery behind the `selfcheck` CLI command.
//!
//! Re-runs the core identities on the frozen instances and on seeded random
//! models. Meant as a quick post-install sanity gate, not a replacement for
//! the test suite.

use nalgebra::DVector;

use crate::basis::{gram_matrix, make_basis, BasisKind};
use crate::dgp::{reflect_into, simulate_surrogate, SurrogateDgpConfig};
use crate::estimators::{estimate_crossfold, estimate_single_split_folded};
use crate::grouped::{FoldScheme, GroupedSample};
use crate::moments::{compute_moments, npjive_risk};
use crate::oracle::{
    uncorrected_score_residual, identity_report, orc_a, orc_b, perturb_model, random_model,
    von_mises_residual,
};
use crate::rng::{normal_inv_cdf, SplitMix64};
use crate::solver::{fit_beta, fit_h, FitMode, FunctionalSpec};

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(results: &mut Vec<CheckResult>, name: &str, passed: bool, detail: String) {
    results.push(CheckResult { name: name.into(), passed, detail });
}

/// Run the battery; every entry should pass on a healthy build.
pub fn selfcheck() -> Vec<CheckResult> {
    let mut out = Vec::new();

    match orc_a().solve() {
        Ok(sol) => {
            let ok = (sol.h_k[0]).abs() < 1e-10
                && (sol.h_k[1] - 2.0).abs() < 1e-10
                && (sol.psi_k - 1.0).abs() < 1e-10
                && sol.surjective;
            check(&mut out, "two_cell_instance", ok, format!("h = {:?}, psi = {}", sol.h_k, sol.psi_k));
        }
        Err(e) => check(&mut out, "two_cell_instance", false, e.to_string()),
    }

    match orc_b().gap(&[1.0, 3.0]) {
        Ok(gap) => {
            let ok = (gap.gap + 1.0).abs() < 1e-10
                && (gap.psi_k_of_h_star - 2.0).abs() < 1e-10
                && (gap.psi_of_h_star - 3.0).abs() < 1e-10
                && gap.identity_residual < 1e-10;
            check(&mut out, "single_cell_gap", ok, format!("gap = {}, residual = {}", gap.gap, gap.identity_residual));
        }
        Err(e) => check(&mut out, "single_cell_gap", false, e.to_string()),
    }

    {
        let mut worst = 0.0f64;
        let mut failed = None;
        for seed in 0..20u64 {
            let model = random_model(seed);
            match identity_report(&model) {
                Ok(rep) => {
                    worst = worst.max(rep.max_residual());
                    if !rep.rank_routes_agree {
                        failed = Some(format!("rank routes disagree at seed {seed}"));
                    }
                }
                Err(e) => failed = Some(format!("seed {seed}: {e}")),
            }
            let bar = perturb_model(&model, seed ^ 0xF0, 0.1);
            if let Ok((lhs, rhs)) = von_mises_residual(&model, &bar) {
                worst = worst.max((lhs - rhs).abs());
            }
            if let Ok((lhs, rhs)) = uncorrected_score_residual(&model, &bar) {
                worst = worst.max((lhs - rhs).abs());
            }
        }
        let pass = failed.is_none() && worst < 1e-8;
        check(
            &mut out,
            "oracle_identities",
            pass,
            failed.unwrap_or(format!("max residual {worst:.3e}")),
        );
    }

    {
        // Cross-fold quadratic form identity on random data.
        let mut rng = SplitMix64::new(101);
        let cells: Vec<(Vec<f64>, Vec<f64>)> = (0..8)
            .map(|_| {
                let n = 4 + rng.below(4);
                ((0..n).map(|_| rng.uniform()).collect(), (0..n).map(|_| rng.normal(0.0, 1.0)).collect())
            })
            .collect();
        let sample = GroupedSample::from_cells(cells, 1)
            .unwrap()
            .assign_folds(7, FoldScheme::TwoFold);
        let basis = make_basis(BasisKind::LinearSpline, 2, &sample).unwrap();
        let moments = compute_moments(&basis, &sample).unwrap();
        let forms = moments.cross_forms();
        let mut worst = 0.0f64;
        for _ in 0..50 {
            let theta = DVector::from_iterator(basis.p, (0..basis.p).map(|_| rng.normal(0.0, 1.0)));
            let direct = npjive_risk(&moments, &theta).unwrap();
            let quad = forms.r0 - 2.0 * forms.c.dot(&theta)
                + (theta.transpose() * &forms.m * &theta)[(0, 0)];
            worst = worst.max((direct - quad).abs() / (1.0 + direct.abs()));
        }
        check(&mut out, "cross_forms_identity", worst < 1e-10, format!("max rel residual {worst:.3e}"));
    }

    {
        // Fold assignment determinism and balance.
        let cells = vec![(vec![0.0; 7], vec![0.0; 7]), (vec![0.0; 4], vec![0.0; 4])];
        let a = GroupedSample::from_cells(cells.clone(), 1).unwrap().assign_folds(3, FoldScheme::TwoFold);
        let b = GroupedSample::from_cells(cells, 1).unwrap().assign_folds(3, FoldScheme::TwoFold);
        let same = a.cells.iter().zip(&b.cells).all(|(x, y)| x.fold == y.fold);
        let balanced = a.cells.iter().all(|c| {
            let (n0, n1) = c.fold_counts();
            n0.abs_diff(n1) <= 1
        });
        check(&mut out, "fold_assignment", same && balanced, format!("deterministic {same}, balanced {balanced}"));
    }

    {
        // Averaging identity on simulated data.
        let mut cfg = SurrogateDgpConfig::with_size(20, 7, 2.0, 3.5, 13);
        cfg.n_new = 300;
        match simulate_surrogate(&cfg) {
            Ok(data) => {
                let sample = data.sample.assign_folds(21, FoldScheme::TwoFold);
                let basis = make_basis(BasisKind::Histogram, 6, &sample).unwrap();
                let moments = compute_moments(&basis, &sample).unwrap();
                let gram = gram_matrix(&basis, &sample).unwrap();
                let spec = FunctionalSpec::from_target(&basis, data.target_x, 1).unwrap();
                let h = fit_h(&moments, &gram, 1e-4, FitMode::Jive).unwrap();
                let beta = fit_beta(&moments, &gram, &spec.m, 1e-4, FitMode::Jive).unwrap();
                let cf = estimate_crossfold(&sample, &basis, &h, &beta, &spec, 0.95).unwrap();
                let s0 = estimate_single_split_folded(&sample, &basis, &h, &beta, &spec, 0.95, 0).unwrap();
                let s1 = estimate_single_split_folded(&sample, &basis, &h, &beta, &spec, 0.95, 1).unwrap();
                let resid = (cf.psi_hat - 0.5 * (s0.psi_hat + s1.psi_hat)).abs();
                check(&mut out, "averaging_identity", resid <= 1e-12, format!("residual {resid:.3e}"));
            }
            Err(e) => check(&mut out, "averaging_identity", false, e.to_string()),
        }
    }

    {
        let mut rng = SplitMix64::new(5);
        let mut ok = true;
        for _ in 0..10_000 {
            let r = reflect_into(rng.normal(4.0, 20.0), 1.0, 8.0);
            if !(1.0..=8.0).contains(&r) {
                ok = false;
                break;
            }
        }
        check(&mut out, "reflection_bounds", ok, "walk stays in [1, 8]".into());
    }

    {
        let e = (normal_inv_cdf(0.975) - 1.959_963_984_540_054).abs();
        check(&mut out, "normal_quantile", e < 1e-9, format!("|error at 0.975| = {e:.3e}"));
    }

    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_passes() {
        let results = selfcheck();
        for r in &results {
            assert!(r.passed, "{} failed: {}", r.name, r.detail);
        }
        assert!(results.len() >= 7);
    }
}

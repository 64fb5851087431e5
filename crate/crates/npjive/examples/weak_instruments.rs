//! Weak-instrument difficulty in the linear-Gaussian design.
//!
//! The dual-solution norm is 1/|pi|, so small first-stage coefficients mean
//! weak identification; the study shows the estimator's dispersion growing as
//! pi shrinks while the intervals keep (approximate) coverage.
//!
//! Run with: cargo run --example weak_instruments

use npjive::basis::BasisKind;
use npjive::dgp::WeakIvConfig;
use npjive::estimators::EstimatorKind;
use npjive::grouped::FoldScheme;
use npjive::oracle::weak_iv_oracle;
use npjive::study::{run_study, BasisSpec, DgpSpec, EstimatorSpec, LambdaPolicy, StudyConfig};

fn main() {
    println!("{:>6} {:>10} {:>10} {:>10} {:>10}", "pi", "||q||", "sd", "width", "coverage");
    for pi in [2.0, 1.0, 0.5, 0.2] {
        let cfg = StudyConfig {
            dgp: DgpSpec::WeakLinearIv(WeakIvConfig {
                k: 60,
                n: 20,
                pi,
                sigma_v: 1.0,
                b: 1.5,
                n_new: 2000,
                seed: 0,
            }),
            estimators: vec![EstimatorSpec::jive(EstimatorKind::Crossfold)],
            basis: BasisSpec { kind: BasisKind::LinearSpline, count: 2 },
            lambda: LambdaPolicy::Cv { folds: 5, grid: None },
            scheme: FoldScheme::LeaveOneOut,
            reps: 40,
            base_seed: 31,
            level: 0.95,
            workers: 4,
            nuisance_crossfit: false,
        };
        let out = run_study(&cfg).unwrap();
        let row = out.summary.row("crossfold").unwrap();
        println!(
            "{pi:>6.2} {:>10.2} {:>10.4} {:>10.4} {:>10.2}",
            weak_iv_oracle(pi).unwrap(),
            row.se,
            row.mean_ci_width,
            row.coverage
        );
    }
}

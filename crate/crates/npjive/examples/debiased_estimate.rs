//! The full estimation pipeline on one dataset: every point estimator with
//! its influence-function confidence interval.
//!
//! Run with: cargo run --example debiased_estimate

use npjive::basis::BasisKind;
use npjive::dgp::{simulate_surrogate, SurrogateDgpConfig};
use npjive::estimators::EstimatorKind;
use npjive::grouped::FoldScheme;
use npjive::study::{estimate_dataset, BasisSpec, EstimateConfig, EstimatorSpec, LambdaPolicy};

fn main() {
    let mut config = SurrogateDgpConfig::with_size(200, 30, 2.0, 3.5, 4);
    config.n_new = 5000;
    let data = simulate_surrogate(&config).unwrap();
    println!("target value psi(h*) on this draw: {:.4}", data.psi_true);

    let cfg = EstimateConfig {
        basis: BasisSpec { kind: BasisKind::Histogram, count: 16 },
        lambda: LambdaPolicy::Cv { folds: 5, grid: None },
        estimators: vec![
            EstimatorSpec::jive(EstimatorKind::Crossfold),
            EstimatorSpec::jive(EstimatorKind::SingleSplit),
            EstimatorSpec::jive(EstimatorKind::Modified),
            EstimatorSpec::plugin(EstimatorKind::Crossfold),
            EstimatorSpec::jive(EstimatorKind::Plugin),
            EstimatorSpec::jive(EstimatorKind::Ipw),
        ],
        scheme: FoldScheme::LeaveOneOut,
        seed: 4,
        level: 0.95,
        nuisance_crossfit: false,
    };
    let results = estimate_dataset(data.sample, &data.target_x, data.d, &cfg).unwrap();
    println!("{:<18} {:>9} {:>9} {:>9} {:>9}", "estimator", "psi_hat", "se", "ci_lo", "ci_hi");
    for (est, res) in &results {
        match res {
            Ok(r) => println!(
                "{:<18} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
                est.label(),
                r.psi_hat,
                r.se,
                r.ci_lo,
                r.ci_hi
            ),
            Err(e) => println!("{:<18} failed: {e}", est.label()),
        }
    }
}

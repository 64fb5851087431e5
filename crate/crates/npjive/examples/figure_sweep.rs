//! Sweep the number of instruments, emit the combined metrics table and SVG
//! line charts (one series per estimator, metric vs K).
//!
//! Run with: cargo run --example figure_sweep

use npjive::basis::BasisKind;
use npjive::dgp::SurrogateDgpConfig;
use npjive::estimators::EstimatorKind;
use npjive::grouped::FoldScheme;
use npjive::study::{
    run_figure, BasisSpec, DgpSpec, EstimatorSpec, FigureConfig, LambdaPolicy, StudyConfig,
};
use npjive::svg::line_chart;

fn main() {
    let base = StudyConfig {
        dgp: DgpSpec::Surrogate({
            let mut c = SurrogateDgpConfig::with_size(50, 20, 2.0, 3.5, 0);
            c.n_new = 1500;
            c
        }),
        estimators: vec![
            EstimatorSpec::jive(EstimatorKind::Crossfold),
            EstimatorSpec::plugin(EstimatorKind::Crossfold),
        ],
        basis: BasisSpec { kind: BasisKind::Histogram, count: 10 },
        lambda: LambdaPolicy::Cv { folds: 5, grid: None },
        scheme: FoldScheme::LeaveOneOut,
        reps: 25,
        base_seed: 7,
        level: 0.95,
        workers: 4,
        nuisance_crossfit: false,
    };
    let fig = FigureConfig { base, k_list: vec![50, 100, 200], n_list: vec![20] };
    let out = run_figure(&fig).unwrap();
    print!("{}", out.to_csv());

    let dir = std::env::temp_dir().join("npjive_figure_sweep");
    std::fs::create_dir_all(&dir).unwrap();
    for metric in ["abs_bias", "coverage", "rmse"] {
        let series = out.chart_series(metric, 20);
        let svg = line_chart(&format!("{metric} vs K (n = 20)"), "K", metric, &series);
        let path = dir.join(format!("{metric}.svg"));
        std::fs::write(&path, svg).unwrap();
        println!("wrote {}", path.display());
    }
}

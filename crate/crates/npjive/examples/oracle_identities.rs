//! Exact population quantities on discrete instances.
//!
//! Solves three reference models plus a random one, prints the minimum-norm
//! structural solution, the dual functions, the identification gap, and the
//! residuals of the operator identities (adjointness, pseudoinverse, the dual
//! representation of the functional, and the two score expansions).
//!
//! Run with: cargo run --example oracle_identities

use npjive::oracle::{
    uncorrected_score_residual, identity_instance, identity_report, orc_a, orc_b, perturb_model,
    random_model, von_mises_residual,
};

fn main() {
    // Two-cell binary-treatment instance with closed-form values.
    let model = orc_a();
    let sol = model.solve().unwrap();
    println!("two-cell instance:");
    println!("  h_K        = {:?}", sol.h_k);
    println!("  psi_K      = {}", sol.psi_k);
    println!("  q_K        = {:?}", sol.q_k);
    println!("  surjective = {} (rank {})", sol.surjective, sol.rank);

    // Single-instrument instance where the functional h(1) is not identified:
    // the projection of the Riesz representer is constant and the gap is -1.
    let model = orc_b();
    let sol = model.solve().unwrap();
    let gap = model.gap(&[1.0, 3.0]).unwrap();
    println!("\nsingle-cell instance with h* = (1, 3):");
    println!("  h_K          = {:?} (minimum-norm)", sol.h_k);
    println!("  alpha        = {:?}", sol.alpha);
    println!("  proj alpha   = {:?}", sol.proj_alpha);
    println!("  psi_K(h*)    = {}", gap.psi_k_of_h_star);
    println!("  psi(h*)      = {}", gap.psi_of_h_star);
    println!("  gap          = {} (identity residual {:.2e})", gap.gap, gap.identity_residual);

    // Identity-operator instance: h_K equals the conditional outcome means.
    let model = identity_instance(4);
    let sol = model.solve().unwrap();
    println!("\nidentity instance (K = 4): h_K = {:?}", sol.h_k);

    // Operator identities on a random model, and the score expansion checked
    // against a perturbed model sharing the same supports.
    let model = random_model(42);
    let report = identity_report(&model).unwrap();
    println!("\nrandom model (K = {}, m = {}):", model.k(), model.m());
    println!("  adjointness residual      = {:.2e}", report.adjointness);
    println!("  pseudoinverse residuals   = {:.2e}, {:.2e}", report.pinv_primary, report.pinv_secondary);
    println!("  dual representation       = {:.2e}", report.dual_representation);
    println!("  corrected-score mean      = {:.2e}", report.eif_mean);
    println!("  rank routes agree         = {}", report.rank_routes_agree);
    let bar = perturb_model(&model, 7, 0.1);
    let (lhs, rhs) = von_mises_residual(&model, &bar).unwrap();
    println!("  corrected expansion       : lhs {lhs:.6}, rhs {rhs:.6}, |diff| {:.2e}", (lhs - rhs).abs());
    let (lhs, rhs) = uncorrected_score_residual(&model, &bar).unwrap();
    println!("  uncorrected expansion     : lhs {lhs:.6}, rhs {rhs:.6}, |diff| {:.2e}", (lhs - rhs).abs());
}

//! The weighted metrics on a worked instance: claim weights 4/3/2, verdicts
//! TRUE/TRUE/FALSE, golden mass 11 — and why an error in a core fact costs
//! more than the same error in an auxiliary one.
//!
//! ```bash
//! cargo run -p madfact --example weighted_scoring
//! ```

use madfact::pyramid::{weighted_f1, weighted_precision, weighted_recall, WeightedScores};
use madfact::types::Verdict;

fn main() {
    use Verdict::{False, True};

    let weights = [4.0, 3.0, 2.0];
    let verdicts = [True, True, False];
    let golden_mass = 11.0;

    let prec = weighted_precision(&weights, &verdicts).unwrap();
    let recall = weighted_recall(&weights, &verdicts, golden_mass, 1.0).unwrap();
    let f1 = weighted_f1(prec, recall, 2);
    println!("weights {weights:?}, verdicts [T, T, F], golden mass {golden_mass}");
    println!("  Prec_w      = {prec:.5}   (7/9)");
    println!("  R_w@1.0     = {recall:.5}   (7/11)");
    println!("  F1@1.0      = {f1:.5}   (exactly 0.7)");

    // gamma discounts the golden set's distance from a perfect answer
    for gamma in [1.0, 0.8] {
        let scores = WeightedScores::compute(&weights, &verdicts, golden_mass, gamma).unwrap();
        println!(
            "  gamma={gamma}: recall={:.5} f1={:.5}",
            scores.recall_w, scores.f1
        );
    }

    // core-error dominance: flip one claim of an all-TRUE response
    let all_true = [True, True, True];
    let baseline = weighted_precision(&weights, &all_true).unwrap();
    let flip_core = weighted_precision(&weights, &[False, True, True]).unwrap();
    let flip_aux = weighted_precision(&weights, &[True, True, False]).unwrap();
    println!("\ncore-error dominance (all-TRUE baseline {baseline:.3}):");
    println!("  flip the weight-4 core claim      -> Prec_w {flip_core:.5}");
    println!("  flip the weight-2 auxiliary claim -> Prec_w {flip_aux:.5}");
}

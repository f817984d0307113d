//! Majority-vote adjudication, including the even-jury tie-break where the
//! last-speaking juror decides.
//!
//! ```bash
//! cargo run -p madfact --example majority_vote
//! ```

use madfact::judge::adjudicate;
use madfact::types::{Verdict, VerdictRecord};

fn jury(verdicts: &[Verdict]) -> Vec<VerdictRecord> {
    verdicts
        .iter()
        .enumerate()
        .map(|(agent, &verdict)| {
            VerdictRecord::new(verdict, format!("agent {agent}'s reasoning"), agent, 2)
        })
        .collect()
}

fn show(name: &str, verdicts: &[Verdict]) {
    let decision = adjudicate("claim-1", &jury(verdicts)).unwrap();
    println!(
        "{name:12} votes={:?} -> {} ({} true / {} false{})",
        verdicts.iter().map(Verdict::to_string).collect::<Vec<_>>(),
        decision.final_verdict,
        decision.vote_counts.true_votes,
        decision.vote_counts.false_votes,
        if decision.tie_broken { ", tie broken by the last speaker" } else { "" },
    );
}

fn main() {
    use Verdict::{False, True};
    show("majority", &[True, True, False]);
    show("unanimous", &[False, False, False]);
    show("even tie", &[True, False, True, False]);
    show("single", &[True]);
}

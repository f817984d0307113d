//! Run the pipeline as a binary classifier over a small labeled dataset,
//! then resume the run directory to show that finished claims are skipped.
//!
//! ```bash
//! cargo run -p madfact --example classification_benchmark
//! ```

use std::sync::Arc;

use madfact::config::{default_roles, AblationVariant, DebateRule, SystemConfig};
use madfact::harness::{run_benchmark, BenchmarkOptions, LabeledClaim};
use madfact::providers::mock::{MockChatProvider, MockSearchProvider};
use madfact::providers::{Clock, ProviderSet};
use madfact::types::{AtomicClaim, Verdict};

fn dataset() -> Vec<LabeledClaim> {
    [
        ("The Tang dynasty began in 618.", true),
        ("The Tang dynasty began in 718.", false),
        ("Li Bai wrote Quiet Night Thought.", true),
        ("Du Fu wrote Quiet Night Thought.", false),
    ]
    .iter()
    .enumerate()
    .map(|(i, (text, label))| LabeledClaim {
        claim: AtomicClaim::new(format!("demo-{i:03}"), *text, "demo"),
        gold_label: Verdict::from_bool(*label),
        dataset_id: "demo".into(),
    })
    .collect()
}

fn providers(replies: &[&str]) -> (ProviderSet, Arc<MockChatProvider>) {
    let chat = Arc::new(MockChatProvider::new());
    chat.script("evaluator", replies.to_vec());
    let providers = ProviderSet::new()
        .register_chat("evaluator", Arc::clone(&chat) as Arc<MockChatProvider>)
        .with_search(Arc::new(MockSearchProvider::new(Clock::frozen_epoch())));
    (providers, chat)
}

fn main() {
    let config = SystemConfig {
        jury_size: 1,
        rounds: 1,
        rule: DebateRule::FreeDebate,
        theta: 0.8,
        roles: default_roles(1),
        evaluator_backends: vec!["evaluator".into()],
        clerk_backend: "clerk".into(),
        judge_backend: "judge".into(),
        gamma: 1.0,
        ablation: AblationVariant::None,
    };
    let run_dir = tempfile::tempdir().unwrap();
    let options = BenchmarkOptions::new(run_dir.path());
    let claims = dataset();

    // scripted to match the gold labels exactly
    let (set, chat) = providers(&[
        "CONF:0.95|TRUE|Standard chronology.",
        "CONF:0.95|FALSE|A century off.",
        "CONF:0.95|TRUE|Canonical attribution.",
        "CONF:0.95|FALSE|Wrong poet.",
    ]);
    let report = run_benchmark(&claims, &config, &set, &options).unwrap();
    println!(
        "first run:  evaluated {} claims with {} provider calls",
        report.newly_evaluated,
        chat.call_count()
    );
    println!(
        "  positive class: P={:.2} R={:.2} F1={:.2}",
        report.classification.positive.precision,
        report.classification.positive.recall,
        report.classification.positive.f1
    );
    println!(
        "  negative class: P={:.2} R={:.2} F1={:.2}",
        report.classification.negative.precision,
        report.classification.negative.recall,
        report.classification.negative.f1
    );
    println!(
        "  confusion: tp={} fp={} fn={} tn={}",
        report.classification.confusion.true_positives,
        report.classification.confusion.false_positives,
        report.classification.confusion.false_negatives,
        report.classification.confusion.true_negatives
    );

    // resuming the completed run touches no provider at all
    let (set, chat) = providers(&[]);
    let report = run_benchmark(&claims, &config, &set, &options).unwrap();
    println!(
        "second run: resumed {} claims, {} new debates, {} provider calls",
        report.resumed,
        report.newly_evaluated,
        chat.call_count()
    );
}

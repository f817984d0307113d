//! Run the same claim under all three debate rules and compare the
//! transcripts: search traffic, rounds executed, and final verdicts.
//!
//! ```bash
//! cargo run -p madfact --example debate_rules
//! ```

use std::sync::Arc;

use madfact::config::{default_roles, AblationVariant, DebateRule, SystemConfig};
use madfact::jury::DebateEngine;
use madfact::providers::mock::{MockChatProvider, MockSearchProvider};
use madfact::providers::{Clock, ProviderSet, Snippet};
use madfact::types::AtomicClaim;

fn config(rule: DebateRule) -> SystemConfig {
    SystemConfig {
        jury_size: 3,
        rounds: 2,
        rule,
        theta: 0.8,
        roles: default_roles(3),
        evaluator_backends: vec!["evaluator".into(); 3],
        clerk_backend: "clerk".into(),
        judge_backend: "judge".into(),
        gamma: 1.0,
        ablation: AblationVariant::None,
    }
}

fn rig(replies: &[&str]) -> ProviderSet {
    let chat = Arc::new(MockChatProvider::new());
    chat.script("evaluator", replies.to_vec());
    let search = MockSearchProvider::new(Clock::frozen_epoch());
    search.fixture(
        "zhuang population census",
        vec![Snippet {
            title: "Census".into(),
            url: "https://example.org/census".into(),
            snippet: "The Zhuang are the most populous ethnic minority in China.".into(),
        }],
    );
    ProviderSet::new()
        .register_chat("evaluator", chat)
        .with_search(Arc::new(search))
}

fn main() {
    let claim = AtomicClaim::new(
        "c1",
        "The Zhuang are the largest ethnic minority in China.",
        "demo",
    );

    // Rule 1: everyone is confident, so nobody searches.
    let free = rig(&[
        "CONF:0.90|TRUE|Well known demographic fact.",
        "CONF:0.85|TRUE|Census data agrees.",
        "CONF:0.95|TRUE|No doubt here.",
        "TRUE|Holding my view after the discussion.",
        "TRUE|Same.",
        "TRUE|Same.",
    ]);

    // Rule 2: retrieval is mandatory before the first statement.
    let mandatory = rig(&[
        "zhuang population census",
        "TRUE|The snippet confirms it.",
        "largest minority china statistics",
        "TRUE|Consistent with the retrieved figures.",
        "china ethnic minority ranking",
        "TRUE|Ranking matches.",
        "TRUE|Evidence-grounded consensus.",
        "TRUE|Agreed.",
        "TRUE|Agreed.",
    ]);

    // Rule 3: a confident unanimous first round stops the debate early.
    let adaptive = rig(&[
        "CONF:0.90|TRUE|Clear-cut.",
        "CONF:0.90|TRUE|Clear-cut.",
        "CONF:0.90|TRUE|Clear-cut.",
    ]);

    for (name, rule, providers) in [
        ("free-debate", DebateRule::FreeDebate, free),
        ("mandatory-search", DebateRule::MandatorySearch, mandatory),
        ("adaptive", DebateRule::Adaptive, adaptive),
    ] {
        let config = config(rule);
        let engine = DebateEngine::new(&config, &providers);
        let transcript = engine.run_debate(&claim).unwrap();
        println!(
            "{name:17} rounds={} statements={} searches={} final={:?}",
            transcript.rounds_executed,
            transcript.pool.len(),
            transcript.search_events.len(),
            transcript
                .final_round_verdicts
                .iter()
                .map(|r| r.verdict.to_string())
                .collect::<Vec<_>>(),
        );
    }
}

//! What each ablation variant removes, shown on one debated claim: role
//! diversity, the extra debate round, or the retrieval tool.
//!
//! ```bash
//! cargo run -p madfact --example ablation_study
//! ```

use std::sync::Arc;

use madfact::config::{apply_ablation, default_roles, AblationVariant, DebateRule, SystemConfig};
use madfact::jury::DebateEngine;
use madfact::providers::mock::{MockChatProvider, MockSearchProvider};
use madfact::providers::{Clock, ProviderSet};
use madfact::types::AtomicClaim;

fn base_config() -> SystemConfig {
    SystemConfig {
        jury_size: 2,
        rounds: 2,
        rule: DebateRule::FreeDebate,
        theta: 0.8,
        roles: default_roles(2),
        evaluator_backends: vec!["evaluator".into(); 2],
        clerk_backend: "clerk".into(),
        judge_backend: "judge".into(),
        gamma: 1.0,
        ablation: AblationVariant::None,
    }
}

fn rig(replies: &[&str]) -> ProviderSet {
    let chat = Arc::new(MockChatProvider::new());
    chat.script("evaluator", replies.to_vec());
    ProviderSet::new()
        .register_chat("evaluator", chat)
        .with_search(Arc::new(MockSearchProvider::new(Clock::frozen_epoch())))
}

fn main() {
    let claim = AtomicClaim::new("c1", "The Li River flows through Guilin.", "demo");

    for variant in [
        AblationVariant::None,
        AblationVariant::NoRolePlay,
        AblationVariant::NoDebate,
        AblationVariant::NoSearch,
    ] {
        let config = apply_ablation(base_config(), variant);
        // generous script: covers conditional and direct turns alike
        let providers = rig(&[
            "CONF:0.9|TRUE|a",
            "CONF:0.9|TRUE|b",
            "TRUE|c",
            "TRUE|d",
            "TRUE|e",
            "TRUE|f",
        ]);
        let providers = if variant == AblationVariant::NoSearch {
            // direct turns expect plain verdict lines from the first call on
            rig(&["TRUE|a", "TRUE|b", "TRUE|c", "TRUE|d"])
        } else {
            providers
        };

        let engine = DebateEngine::new(&config, &providers);
        let transcript = engine.run_debate(&claim).unwrap();
        println!(
            "{:13} rounds={} roles={:?} searches={} statements={}",
            variant.to_string(),
            transcript.rounds_executed,
            config.roles.iter().map(|r| r.name.as_str()).collect::<Vec<_>>(),
            transcript.search_events.len(),
            transcript.pool.len(),
        );
    }
}

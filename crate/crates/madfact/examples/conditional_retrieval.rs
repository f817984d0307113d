//! How the confidence threshold theta gates retrieval, and how duplicate
//! queries are regenerated and eventually fall back to a direct response.
//!
//! ```bash
//! cargo run -p madfact --example conditional_retrieval
//! ```

use std::sync::Arc;

use madfact::config::{default_roles, AblationVariant, DebateRule, SystemConfig};
use madfact::jury::{DebateEngine, KnowledgeBase, MessagePool};
use madfact::providers::mock::{MockChatProvider, MockSearchProvider};
use madfact::providers::{Clock, ProviderSet, SearchResult};
use madfact::types::AtomicClaim;

fn setup(replies: &[&str]) -> (SystemConfig, ProviderSet, Arc<MockSearchProvider>) {
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
    let chat = Arc::new(MockChatProvider::new());
    chat.script("evaluator", replies.to_vec());
    let search = Arc::new(MockSearchProvider::new(Clock::frozen_epoch()));
    let providers = ProviderSet::new()
        .register_chat("evaluator", chat)
        .with_search(Arc::clone(&search) as Arc<MockSearchProvider>);
    (config, providers, search)
}

fn main() {
    let claim = AtomicClaim::new("c1", "Zhuang brocade weaving began centuries ago.", "demo");

    // confidence 0.90 >= theta 0.8: direct answer, no search
    let (config, providers, search) = setup(&["CONF:0.90|TRUE|I know this one."]);
    let engine = DebateEngine::new(&config, &providers);
    let (mut pool, mut kb) = (MessagePool::new(), KnowledgeBase::new());
    let outcome = engine
        .conditional_response(0, &claim, &mut pool, &mut kb, 1)
        .unwrap();
    println!(
        "confident juror:   confidence={:?} searches={} verdict={}",
        outcome.record.confidence,
        search.call_count(),
        outcome.record.verdict
    );

    // confidence 0.40 < theta: the juror formulates a query first
    let (config, providers, search) = setup(&[
        "CONF:0.40|TRUE|Better check.",
        "history of zhuang brocade",
        "TRUE|The retrieved snippets back the claim.",
    ]);
    let engine = DebateEngine::new(&config, &providers);
    let (mut pool, mut kb) = (MessagePool::new(), KnowledgeBase::new());
    let outcome = engine
        .conditional_response(0, &claim, &mut pool, &mut kb, 1)
        .unwrap();
    println!(
        "unconfident juror: confidence={:?} searches={} query={:?}",
        outcome.record.confidence,
        search.call_count(),
        outcome.search_event.map(|e| e.query)
    );

    // every regenerated query duplicates an issued one: fall back to direct
    let (config, providers, search) = setup(&[
        "history of zhuang brocade",
        "History Of Zhuang Brocade",
        "history  of  zhuang  brocade",
        "HISTORY OF ZHUANG BROCADE",
        "TRUE|Answering from the shared knowledge instead.",
    ]);
    let engine = DebateEngine::new(&config, &providers);
    let mut pool = MessagePool::new();
    let mut kb = KnowledgeBase::new();
    kb.push(SearchResult::cleaned(
        "history of zhuang brocade",
        vec![],
        5,
        Clock::frozen_epoch().now(),
    ));
    let outcome = engine
        .retrieval_response(0, &claim, &mut pool, &mut kb, 1)
        .unwrap();
    println!(
        "dedup exhaustion:  searches={} flags={:?} kb_queries={:?}",
        search.call_count(),
        outcome.flags,
        kb.issued_queries()
    );
}

//! The full pipeline on one response, offline: clerk decomposition, one
//! debate per claim, majority adjudication, and pyramid-weighted scoring.
//!
//! ```bash
//! cargo run -p madfact --example end_to_end_verify
//! ```

use std::sync::Arc;

use madfact::clerk::Clerk;
use madfact::config::{default_roles, AblationVariant, DebateRule, SystemConfig};
use madfact::judge::{adjudicate, score_response};
use madfact::jury::DebateEngine;
use madfact::providers::mock::{MockChatProvider, MockSearchProvider};
use madfact::providers::{Clock, ProviderSet, Snippet};
use madfact::pyramid::{build_pyramid, ExactNormalizedMatcher, GoldenEntry, GoldenSet, WeightRule};
use madfact::types::{LongFormResponse, Question};

fn main() {
    let config = SystemConfig {
        jury_size: 3,
        rounds: 2,
        rule: DebateRule::FreeDebate,
        theta: 0.8,
        roles: default_roles(3),
        evaluator_backends: vec!["evaluator".into(); 3],
        clerk_backend: "clerk".into(),
        judge_backend: "judge".into(),
        gamma: 0.8,
        ablation: AblationVariant::None,
    };

    let chat = Arc::new(MockChatProvider::new());
    chat.script(
        "clerk",
        ["CLAIM: The Zhuang are the largest ethnic minority in China.\n\
          CLAIM: Zhuang brocade was first woven in 1958.\n\
          SKIP:suggestion: Go see a brocade workshop."],
    );
    chat.script(
        "evaluator",
        [
            // claim 1: all jurors confident, two debate rounds
            "CONF:0.90|TRUE|Census data is unambiguous.",
            "CONF:0.85|TRUE|Widely documented.",
            "CONF:0.95|TRUE|Agreed.",
            "TRUE|No change after discussion.",
            "TRUE|Same.",
            "TRUE|Same.",
            // claim 2: one juror retrieves, the jury converges on FALSE
            "CONF:0.82|FALSE|The craft is centuries older than 1958.",
            "CONF:0.45|TRUE|I vaguely recall 1958.",
            "zhuang brocade history",
            "FALSE|The snippets describe a centuries-old tradition.",
            "CONF:0.88|FALSE|1958 was a factory founding, not the craft's origin.",
            "FALSE|Holding: the claim confuses the factory with the craft.",
            "FALSE|Agreed after the evidence.",
            "FALSE|Agreed.",
        ],
    );
    let search = MockSearchProvider::new(Clock::frozen_epoch());
    search.fixture(
        "zhuang brocade history",
        vec![Snippet {
            title: "Zhuang brocade".into(),
            url: "https://example.org/brocade".into(),
            snippet: "Zhuang brocade is a traditional textile craft with a history of roughly a thousand years.".into(),
        }],
    );
    let providers = ProviderSet::new()
        .register_chat("clerk", Arc::clone(&chat) as Arc<MockChatProvider>)
        .register_chat("evaluator", Arc::clone(&chat) as Arc<MockChatProvider>)
        .with_search(Arc::new(search));

    let question = Question::new(
        "q-zhuang",
        "What unique cultural features are associated with the Zhuang ethnic group?",
    );
    let response = LongFormResponse::new(
        "q-zhuang",
        "The Zhuang are the largest ethnic minority in China. Zhuang brocade was first woven \
         in 1958. Go see a brocade workshop.",
        "demo-model",
    );

    // 1. decompose
    let clerk = Clerk::new(&providers, &config.clerk_backend);
    let decomposition = clerk.decompose(&question, &response).unwrap();
    println!("claims: {}", decomposition.claims.len());

    // 2. debate + 3. adjudicate
    let engine = DebateEngine::new(&config, &providers);
    let mut decisions = Vec::new();
    for claim in &decomposition.claims {
        let transcript = engine.run_debate(claim).unwrap();
        let decision = adjudicate(&claim.id, &transcript.final_round_verdicts).unwrap();
        println!(
            "  {} -> {} ({} searches, {} rounds)",
            claim.text,
            decision.final_verdict,
            transcript.search_events.len(),
            transcript.rounds_executed
        );
        decisions.push(decision);
    }

    // 4. score against a pyramid of expert reference claims
    let golden = GoldenSet {
        entries: vec![
            GoldenEntry {
                text: "The Zhuang are the largest ethnic minority in China.".into(),
                frequency: 3,
                member_texts: vec!["The Zhuang are the largest ethnic minority in China.".into()],
            },
            GoldenEntry {
                text: "The Zhuang population is concentrated in Guangxi.".into(),
                frequency: 2,
                member_texts: vec!["The Zhuang population is concentrated in Guangxi.".into()],
            },
            GoldenEntry {
                text: "Zhuang brocade is a renowned traditional textile.".into(),
                frequency: 1,
                member_texts: vec!["Zhuang brocade is a renowned traditional textile.".into()],
            },
        ],
    };
    let pyramid = build_pyramid(
        &question.id,
        &golden,
        3,
        &WeightRule::default(),
        "exact-normalized",
        vec!["expert-a".into(), "expert-b".into(), "expert-c".into()],
    )
    .unwrap();

    for gamma in [1.0, 0.8] {
        let score = score_response(
            &response.response_id(),
            &question.id,
            &decomposition.claims,
            &decisions,
            &pyramid,
            &ExactNormalizedMatcher,
            gamma,
        )
        .unwrap();
        println!(
            "gamma={gamma}: Prec_w={:.4} R_w={:.4} F1={:.4}",
            score.scores.prec_w, score.scores.recall_w, score.scores.f1
        );
    }
}

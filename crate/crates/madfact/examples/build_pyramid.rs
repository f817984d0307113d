//! Build a fact-importance pyramid from three scripted expert models:
//! reference answers -> clerk decomposition -> golden-set merge -> layered
//! pyramid with strictly decreasing weights.
//!
//! ```bash
//! cargo run -p madfact --example build_pyramid
//! ```

use std::sync::Arc;

use madfact::providers::mock::MockChatProvider;
use madfact::providers::ProviderSet;
use madfact::pyramid::{
    build_pyramid, generate_references, merge_golden_set, ExactNormalizedMatcher, WeightRule,
};
use madfact::types::Question;

fn main() {
    let mock = Arc::new(MockChatProvider::new());
    mock.script("expert-a", ["The Zhuang are the largest ethnic minority in China and live mainly in Guangxi."]);
    mock.script("expert-b", ["China's largest minority, the Zhuang, are concentrated in Guangxi and speak a Tai language."]);
    mock.script("expert-c", ["The Zhuang are the largest ethnic minority in China, famous for brocade."]);
    mock.script(
        "clerk",
        [
            "CLAIM: The Zhuang are the largest ethnic minority in China.\n\
             CLAIM: The Zhuang population is concentrated in Guangxi.",
            "CLAIM: The Zhuang are the largest ethnic minority in China.\n\
             CLAIM: The Zhuang population is concentrated in Guangxi.\n\
             CLAIM: The Zhuang language belongs to the Tai language family.",
            "CLAIM: The Zhuang are the largest ethnic minority in China.\n\
             CLAIM: Zhuang brocade is a renowned traditional textile.",
        ],
    );
    let mut providers =
        ProviderSet::new().register_chat("clerk", Arc::clone(&mock) as Arc<MockChatProvider>);
    for expert in ["expert-a", "expert-b", "expert-c"] {
        providers = providers.register_chat(expert, Arc::clone(&mock) as Arc<MockChatProvider>);
    }

    let question = Question::new(
        "q-zhuang",
        "What unique cultural features are associated with the Zhuang ethnic group?",
    );
    let experts: Vec<String> = ["expert-a", "expert-b", "expert-c"]
        .iter()
        .map(ToString::to_string)
        .collect();

    let references = generate_references(&question, &experts, &providers, "clerk").unwrap();
    for reference in &references {
        println!("{}: {} claims", reference.expert_id, reference.claims.len());
    }

    let claim_sets: Vec<_> = references.iter().map(|r| r.claims.clone()).collect();
    let golden = merge_golden_set(&claim_sets, &ExactNormalizedMatcher).unwrap();
    println!("golden set size: {}", golden.size());

    let pyramid = build_pyramid(
        &question.id,
        &golden,
        experts.len(),
        &WeightRule::default(),
        "exact-normalized",
        experts,
    )
    .unwrap();

    for layer in 1..=pyramid.levels {
        let weight = pyramid.layer_weights[&layer];
        println!("layer {layer} (weight {weight}):");
        for entry in pyramid.layer_entries(layer) {
            println!("  f={} {}", entry.frequency, entry.text);
        }
    }
    println!("golden weight mass: {}", pyramid.golden_weight_mass());
}

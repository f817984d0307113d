//! Decompose a long-form response into atomic claims with the clerk.
//!
//! Runs entirely offline: the clerk backend is a scripted mock.
//!
//! ```bash
//! cargo run -p madfact --example decompose_response
//! ```

use std::sync::Arc;

use madfact::clerk::Clerk;
use madfact::providers::mock::MockChatProvider;
use madfact::providers::ProviderSet;
use madfact::types::{LongFormResponse, Question};

fn main() {
    let mock = Arc::new(MockChatProvider::new());
    mock.script(
        "clerk",
        ["CLAIM: The Zhuang are the largest ethnic minority in China.\n\
          CLAIM: The Zhuang are known for brocade.\n\
          SKIP:suggestion: You should visit Guangxi to see the craft.\n\
          SKIP:subjective: Zhuang festivals are delightful."],
    );
    let providers = ProviderSet::new().register_chat("clerk", mock);

    let question = Question::new(
        "q-zhuang",
        "What unique cultural features are associated with the Zhuang ethnic group?",
    );
    let response = LongFormResponse::new(
        "q-zhuang",
        "The Zhuang are the largest ethnic minority in China and they are known for brocade. \
         You should visit Guangxi to see the craft. Zhuang festivals are delightful.",
        "demo-model",
    );

    let clerk = Clerk::new(&providers, "clerk");
    let result = clerk.decompose(&question, &response).unwrap();

    println!("fact-checkable claims ({}):", result.claims.len());
    for claim in &result.claims {
        println!("  [{}] {}", claim.id, claim.text);
    }
    println!("discarded ({}):", result.discarded.len());
    for item in &result.discarded {
        println!("  ({}) {}", item.reason, item.text);
    }
}

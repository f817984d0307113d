//! The content-addressed response cache: identical requests hit upstream
//! once, canonicalization makes whitespace variants share a key, and
//! enabling the cache never changes an output.
//!
//! ```bash
//! cargo run -p madfact --example response_cache
//! ```

use std::sync::Arc;

use madfact::providers::cache::{cache_key, CachingChatProvider, FileCache};
use madfact::providers::mock::MockChatProvider;
use madfact::providers::{ChatRequest, ProviderSet};

fn main() {
    let cache_dir = tempfile::tempdir().unwrap();
    let upstream = Arc::new(MockChatProvider::new());
    upstream.script("model", ["the only upstream reply"]);

    let caching = CachingChatProvider::new(
        Arc::clone(&upstream),
        FileCache::new(cache_dir.path()).unwrap(),
    );
    let providers = ProviderSet::new().register_chat("model", Arc::new(caching));

    let request = ChatRequest::from_system("model", "You answer briefly.")
        .with_user("Where does the Li River flow?");

    let first = providers.chat(&request).unwrap();
    let second = providers.chat(&request).unwrap();
    let third = providers.chat(&request).unwrap();
    println!("replies identical: {}", first == second && second == third);
    println!("upstream calls for three requests: {}", upstream.call_count());

    // canonicalization: whitespace runs inside content do not change the key
    let spaced = ChatRequest::from_system("model", "You answer briefly.")
        .with_user("Where   does the Li River   flow?");
    println!(
        "whitespace-normalized request shares the cache key: {}",
        cache_key(&request) == cache_key(&spaced)
    );
    let different = ChatRequest::from_system("model", "You answer briefly.")
        .with_user("Where does the Yangtze flow?");
    println!(
        "different question gets a different key: {}",
        cache_key(&request) != cache_key(&different)
    );
}

//! Deterministic mock backends driven by scripts and fixtures.
//!
//! Given a fixed script and fixture set, any pipeline run produces a
//! byte-identical transcript. Mocks also count and record calls so tests can
//! assert on upstream traffic (cache transparency, resume safety).

use serde::Deserialize;
use std::collections::{HashMap, VecDeque};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use thiserror::Error;

use super::{
    ChatProvider, ChatRequest, Clock, ProviderError, SearchProvider, SearchResult, Snippet,
    DEFAULT_MAX_SNIPPETS,
};
use crate::text::normalize_key;

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("cannot read fixture {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse fixture {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

fn read_fixture<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, FixtureError> {
    let text = std::fs::read_to_string(path).map_err(|source| FixtureError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| FixtureError::Parse {
        path: path.display().to_string(),
        source,
    })
}

/// Chat backend replaying an ordered list of scripted replies per key.
///
/// The key is the request's `backend_id`. Running out of replies raises
/// [`ProviderError::ScriptExhausted`].
#[derive(Default)]
pub struct MockChatProvider {
    scripts: Mutex<HashMap<String, VecDeque<String>>>,
    calls: AtomicUsize,
    recorded: Mutex<Vec<ChatRequest>>,
}

impl MockChatProvider {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends replies to the script for `key`.
    pub fn script<I, S>(&self, key: impl Into<String>, replies: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut scripts = self.scripts.lock().unwrap();
        scripts
            .entry(key.into())
            .or_default()
            .extend(replies.into_iter().map(Into::into));
    }

    /// Loads a script file: a JSON object mapping keys to ordered reply
    /// lists.
    pub fn from_script_file(path: impl AsRef<Path>) -> Result<Self, FixtureError> {
        let map: HashMap<String, Vec<String>> = read_fixture(path.as_ref())?;
        let provider = Self::new();
        for (key, replies) in map {
            provider.script(key, replies);
        }
        Ok(provider)
    }

    /// Total number of chat calls served (or attempted) so far.
    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Replies still queued for `key`.
    pub fn remaining(&self, key: &str) -> usize {
        self.scripts
            .lock()
            .unwrap()
            .get(key)
            .map_or(0, VecDeque::len)
    }

    /// Every request received so far, in call order.
    pub fn recorded_requests(&self) -> Vec<ChatRequest> {
        self.recorded.lock().unwrap().clone()
    }

    /// Keys that have at least one scripted reply queued or had one at load
    /// time.
    pub fn script_keys(&self) -> Vec<String> {
        let mut keys: Vec<String> = self.scripts.lock().unwrap().keys().cloned().collect();
        keys.sort();
        keys
    }
}

impl ChatProvider for MockChatProvider {
    fn chat(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.recorded.lock().unwrap().push(request.clone());
        let mut scripts = self.scripts.lock().unwrap();
        scripts
            .get_mut(&request.backend_id)
            .and_then(VecDeque::pop_front)
            .ok_or_else(|| ProviderError::ScriptExhausted {
                key: request.backend_id.clone(),
            })
    }
}

/// Search backend serving fixture snippets keyed by normalized query.
///
/// Queries without a fixture entry succeed with zero snippets, keeping
/// protocol tests independent of snippet content.
pub struct MockSearchProvider {
    fixtures: Mutex<HashMap<String, Vec<Snippet>>>,
    clock: Clock,
    max_snippets: usize,
    calls: AtomicUsize,
    queries: Mutex<Vec<String>>,
}

impl MockSearchProvider {
    pub fn new(clock: Clock) -> Self {
        Self {
            fixtures: Mutex::new(HashMap::new()),
            clock,
            max_snippets: DEFAULT_MAX_SNIPPETS,
            calls: AtomicUsize::new(0),
            queries: Mutex::new(Vec::new()),
        }
    }

    /// Registers fixture snippets for a query (normalized before keying).
    pub fn fixture(&self, query: &str, snippets: Vec<Snippet>) {
        self.fixtures
            .lock()
            .unwrap()
            .insert(normalize_key(query), snippets);
    }

    /// Loads a fixture file: a JSON object mapping queries to snippet lists.
    pub fn from_fixture_file(path: impl AsRef<Path>, clock: Clock) -> Result<Self, FixtureError> {
        let map: HashMap<String, Vec<Snippet>> = read_fixture(path.as_ref())?;
        let provider = Self::new(clock);
        for (query, snippets) in map {
            provider.fixture(&query, snippets);
        }
        Ok(provider)
    }

    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Every query received so far, in call order.
    pub fn recorded_queries(&self) -> Vec<String> {
        self.queries.lock().unwrap().clone()
    }
}

impl SearchProvider for MockSearchProvider {
    fn search(&self, query: &str) -> Result<SearchResult, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.queries.lock().unwrap().push(query.to_string());
        let snippets = self
            .fixtures
            .lock()
            .unwrap()
            .get(&normalize_key(query))
            .cloned()
            .unwrap_or_default();
        Ok(SearchResult::cleaned(
            query,
            snippets,
            self.max_snippets,
            self.clock.now(),
        ))
    }
}

//! Pluggable chat-model and web-search backends behind uniform interfaces.
//!
//! Live backends speak HTTP (see [`http`]); the deterministic mocks in
//! [`mock`] replay scripted replies and fixture snippets so the whole
//! pipeline runs offline. [`cache`] adds a content-addressed response cache
//! that never changes outputs, only upstream call counts.

pub mod cache;
pub mod http;
pub mod mock;

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Arc;
use thiserror::Error;

use crate::text::normalize_ws;

/// Default cap on snippets kept per search result.
pub const DEFAULT_MAX_SNIPPETS: usize = 5;

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("backend '{backend_id}' unavailable: {reason}")]
    BackendUnavailable { backend_id: String, reason: String },
    /// A mock ran out of scripted replies. This is a test bug and is never
    /// silently recovered.
    #[error("mock script exhausted for key '{key}'")]
    ScriptExhausted { key: String },
    #[error("search unavailable: {0}")]
    SearchUnavailable(String),
    #[error("search query is empty")]
    EmptyQuery,
    #[error("cache I/O at {path}: {source}")]
    CacheIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid chat request: {0}")]
    InvalidRequest(String),
}

/// Message role in a chat conversation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: ChatRole::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: ChatRole::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: ChatRole::Assistant,
            content: content.into(),
        }
    }
}

/// Decoding parameters forwarded to the backend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for DecodeParams {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_tokens: 1024,
        }
    }
}

/// One chat-completion call addressed to a registered backend.
///
/// Invariants: the message list is non-empty and starts with a system
/// message. [`ChatRequest::from_system`] guarantees both by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub backend_id: String,
    pub messages: Vec<ChatMessage>,
    pub decode_params: DecodeParams,
}

impl ChatRequest {
    pub fn from_system(backend_id: impl Into<String>, system_content: impl Into<String>) -> Self {
        Self {
            backend_id: backend_id.into(),
            messages: vec![ChatMessage::system(system_content)],
            decode_params: DecodeParams::default(),
        }
    }

    pub fn with_user(mut self, content: impl Into<String>) -> Self {
        self.messages.push(ChatMessage::user(content));
        self
    }

    pub fn with_assistant(mut self, content: impl Into<String>) -> Self {
        self.messages.push(ChatMessage::assistant(content));
        self
    }

    pub fn with_params(mut self, params: DecodeParams) -> Self {
        self.decode_params = params;
        self
    }

    /// Checks the request invariants; used for requests that were not built
    /// through [`ChatRequest::from_system`] (e.g. deserialized ones).
    pub fn validate(&self) -> Result<(), ProviderError> {
        match self.messages.first() {
            None => Err(ProviderError::InvalidRequest(
                "message list is empty".into(),
            )),
            Some(first) if first.role != ChatRole::System => Err(ProviderError::InvalidRequest(
                "first message must have the system role".into(),
            )),
            Some(_) => Ok(()),
        }
    }
}

/// One retrieved snippet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snippet {
    pub title: String,
    pub url: String,
    pub snippet: String,
}

/// Result of one search call: the issued query plus cleaned, url-deduplicated
/// snippets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub query: String,
    pub snippets: Vec<Snippet>,
    pub retrieved_at: DateTime<Utc>,
}

impl SearchResult {
    /// Builds a cleaned result: whitespace-normalized fields, snippets
    /// deduplicated by url (first occurrence wins), at most `max_snippets`
    /// kept.
    pub fn cleaned(
        query: impl Into<String>,
        snippets: Vec<Snippet>,
        max_snippets: usize,
        retrieved_at: DateTime<Utc>,
    ) -> Self {
        let mut seen = std::collections::HashSet::new();
        let mut cleaned = Vec::new();
        for s in snippets {
            let url = normalize_ws(&s.url);
            if !seen.insert(url.clone()) {
                continue;
            }
            cleaned.push(Snippet {
                title: normalize_ws(&s.title),
                url,
                snippet: normalize_ws(&s.snippet),
            });
            if cleaned.len() == max_snippets {
                break;
            }
        }
        Self {
            query: query.into(),
            snippets: cleaned,
            retrieved_at,
        }
    }
}

/// Chat-model backend.
pub trait ChatProvider: Send + Sync {
    fn chat(&self, request: &ChatRequest) -> Result<String, ProviderError>;
}

impl<T: ChatProvider + ?Sized> ChatProvider for Arc<T> {
    fn chat(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        (**self).chat(request)
    }
}

/// Web-search backend.
pub trait SearchProvider: Send + Sync {
    fn search(&self, query: &str) -> Result<SearchResult, ProviderError>;
}

impl<T: SearchProvider + ?Sized> SearchProvider for Arc<T> {
    fn search(&self, query: &str) -> Result<SearchResult, ProviderError> {
        (**self).search(query)
    }
}

/// Time source; frozen for reproducible runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Clock {
    #[default]
    System,
    Frozen(DateTime<Utc>),
}

impl Clock {
    /// A clock frozen at the Unix epoch.
    pub fn frozen_epoch() -> Self {
        Clock::Frozen(Utc.timestamp_opt(0, 0).unwrap())
    }

    pub fn now(&self) -> DateTime<Utc> {
        match self {
            Clock::System => Utc::now(),
            Clock::Frozen(t) => *t,
        }
    }
}

/// Registry of chat backends by identifier plus an optional search backend.
#[derive(Default, Clone)]
pub struct ProviderSet {
    chat_backends: HashMap<String, Arc<dyn ChatProvider>>,
    search_backend: Option<Arc<dyn SearchProvider>>,
}

impl ProviderSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_chat(mut self, backend_id: impl Into<String>, provider: Arc<dyn ChatProvider>) -> Self {
        self.chat_backends.insert(backend_id.into(), provider);
        self
    }

    pub fn with_search(mut self, provider: Arc<dyn SearchProvider>) -> Self {
        self.search_backend = Some(provider);
        self
    }

    pub fn has_search(&self) -> bool {
        self.search_backend.is_some()
    }

    /// Sends a chat request to the backend it addresses.
    pub fn chat(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        request.validate()?;
        let provider = self.chat_backends.get(&request.backend_id).ok_or_else(|| {
            ProviderError::BackendUnavailable {
                backend_id: request.backend_id.clone(),
                reason: "backend not registered".into(),
            }
        })?;
        let text = provider.chat(request)?;
        if text.trim().is_empty() {
            return Err(ProviderError::BackendUnavailable {
                backend_id: request.backend_id.clone(),
                reason: "backend returned an empty reply".into(),
            });
        }
        Ok(text)
    }

    /// Runs a search query through the registered search backend.
    pub fn search(&self, query: &str) -> Result<SearchResult, ProviderError> {
        if query.trim().is_empty() {
            return Err(ProviderError::EmptyQuery);
        }
        let provider = self
            .search_backend
            .as_ref()
            .ok_or_else(|| ProviderError::SearchUnavailable("no search backend registered".into()))?;
        provider.search(query)
    }
}

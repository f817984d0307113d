//! Live HTTP backends: a chat-completions client and a Serper-style search
//! client, both with bounded retry.
//!
//! All provider calls are read-only, hence always retryable up to the bound.
//! Credentials come from environment variables only; nothing else is read
//! from the environment.

use serde::Deserialize;
use serde_json::json;
use std::time::Duration;

use super::{
    ChatProvider, ChatRequest, Clock, ProviderError, SearchProvider, SearchResult, Snippet,
    DEFAULT_MAX_SNIPPETS,
};

pub const ENV_LLM_API_KEY: &str = "MADFACT_LLM_API_KEY";
pub const ENV_LLM_BASE_URL: &str = "MADFACT_LLM_BASE_URL";
pub const ENV_SEARCH_API_KEY: &str = "MADFACT_SEARCH_API_KEY";
pub const ENV_CACHE_DIR: &str = "MADFACT_CACHE_DIR";

const DEFAULT_LLM_BASE_URL: &str = "https://api.openai.com/v1";
const DEFAULT_SEARCH_ENDPOINT: &str = "https://google.serper.dev/search";
const RETRY_ATTEMPTS: u32 = 3;
const RETRY_BASE_DELAY_MS: u64 = 200;

fn with_retry<T>(mut attempt: impl FnMut() -> Result<T, String>) -> Result<T, String> {
    let mut delay = Duration::from_millis(RETRY_BASE_DELAY_MS);
    let mut last_err = String::new();
    for i in 0..RETRY_ATTEMPTS {
        match attempt() {
            Ok(value) => return Ok(value),
            Err(e) => last_err = e,
        }
        if i + 1 < RETRY_ATTEMPTS {
            std::thread::sleep(delay);
            delay *= 2;
        }
    }
    Err(format!("{last_err} (after {RETRY_ATTEMPTS} attempts)"))
}

/// Chat backend speaking the chat-completions JSON protocol.
///
/// The request's `backend_id` is sent as the model name, so one client
/// serves every model behind the same endpoint.
pub struct HttpChatProvider {
    client: reqwest::blocking::Client,
    base_url: String,
    api_key: String,
}

impl HttpChatProvider {
    pub fn new(base_url: impl Into<String>, api_key: impl Into<String>) -> Self {
        Self {
            client: reqwest::blocking::Client::new(),
            base_url: base_url.into(),
            api_key: api_key.into(),
        }
    }

    /// Builds a client from `MADFACT_LLM_API_KEY` and (optionally)
    /// `MADFACT_LLM_BASE_URL`.
    pub fn from_env() -> Result<Self, ProviderError> {
        let api_key =
            std::env::var(ENV_LLM_API_KEY).map_err(|_| ProviderError::BackendUnavailable {
                backend_id: "http".into(),
                reason: format!("{ENV_LLM_API_KEY} is not set"),
            })?;
        let base_url =
            std::env::var(ENV_LLM_BASE_URL).unwrap_or_else(|_| DEFAULT_LLM_BASE_URL.to_string());
        Ok(Self::new(base_url, api_key))
    }
}

#[derive(Deserialize)]
struct ChatCompletionsResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: String,
}

impl ChatProvider for HttpChatProvider {
    fn chat(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        let url = format!("{}/chat/completions", self.base_url.trim_end_matches('/'));
        let body = json!({
            "model": request.backend_id,
            "messages": request.messages,
            "temperature": request.decode_params.temperature,
            "max_tokens": request.decode_params.max_tokens,
        });
        let content = with_retry(|| {
            let response = self
                .client
                .post(&url)
                .bearer_auth(&self.api_key)
                .json(&body)
                .send()
                .map_err(|e| format!("transport: {e}"))?;
            let status = response.status();
            if !status.is_success() {
                let text = response.text().unwrap_or_default();
                return Err(format!("HTTP {status}: {text}"));
            }
            let parsed: ChatCompletionsResponse =
                response.json().map_err(|e| format!("bad response body: {e}"))?;
            parsed
                .choices
                .into_iter()
                .next()
                .map(|c| c.message.content)
                .ok_or_else(|| "response had no choices".to_string())
        })
        .map_err(|reason| ProviderError::BackendUnavailable {
            backend_id: request.backend_id.clone(),
            reason,
        })?;
        Ok(content)
    }
}

/// Search backend speaking the Serper JSON protocol: POST `{"q": query}`,
/// organic results parsed into snippets.
pub struct SerperSearchProvider {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: String,
    max_snippets: usize,
    clock: Clock,
}

impl SerperSearchProvider {
    pub fn new(api_key: impl Into<String>, clock: Clock) -> Self {
        Self {
            client: reqwest::blocking::Client::new(),
            endpoint: DEFAULT_SEARCH_ENDPOINT.to_string(),
            api_key: api_key.into(),
            max_snippets: DEFAULT_MAX_SNIPPETS,
            clock,
        }
    }

    /// Builds a client from `MADFACT_SEARCH_API_KEY`.
    pub fn from_env(clock: Clock) -> Result<Self, ProviderError> {
        let api_key = std::env::var(ENV_SEARCH_API_KEY).map_err(|_| {
            ProviderError::SearchUnavailable(format!("{ENV_SEARCH_API_KEY} is not set"))
        })?;
        Ok(Self::new(api_key, clock))
    }

    pub fn with_endpoint(mut self, endpoint: impl Into<String>) -> Self {
        self.endpoint = endpoint.into();
        self
    }
}

#[derive(Deserialize)]
struct SerperResponse {
    #[serde(default)]
    organic: Vec<SerperOrganic>,
}

#[derive(Deserialize)]
struct SerperOrganic {
    #[serde(default)]
    title: String,
    #[serde(default)]
    link: String,
    #[serde(default)]
    snippet: String,
}

impl SearchProvider for SerperSearchProvider {
    fn search(&self, query: &str) -> Result<SearchResult, ProviderError> {
        let body = json!({ "q": query });
        let organic = with_retry(|| {
            let response = self
                .client
                .post(&self.endpoint)
                .header("X-API-KEY", &self.api_key)
                .json(&body)
                .send()
                .map_err(|e| format!("transport: {e}"))?;
            let status = response.status();
            if !status.is_success() {
                return Err(format!("HTTP {status}"));
            }
            let parsed: SerperResponse =
                response.json().map_err(|e| format!("bad response body: {e}"))?;
            Ok(parsed.organic)
        })
        .map_err(ProviderError::SearchUnavailable)?;

        let snippets = organic
            .into_iter()
            .map(|o| Snippet {
                title: o.title,
                url: o.link,
                snippet: o.snippet,
            })
            .collect();
        Ok(SearchResult::cleaned(
            query,
            snippets,
            self.max_snippets,
            self.clock.now(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serper_response_parses_organic_results() {
        let raw = r#"{"organic": [
            {"title": "T1", "link": "http://a", "snippet": "S1"},
            {"title": "T2", "link": "http://a", "snippet": "S2"}
        ], "searchParameters": {"q": "x"}}"#;
        let parsed: SerperResponse = serde_json::from_str(raw).unwrap();
        assert_eq!(parsed.organic.len(), 2);
        assert_eq!(parsed.organic[0].title, "T1");
    }

    #[test]
    fn chat_completions_response_parses_first_choice() {
        let raw = r#"{"choices": [{"message": {"role": "assistant", "content": "hi"}, "finish_reason": "stop"}]}"#;
        let parsed: ChatCompletionsResponse = serde_json::from_str(raw).unwrap();
        assert_eq!(parsed.choices[0].message.content, "hi");
    }

    #[test]
    fn retry_gives_up_after_bound() {
        let mut calls = 0;
        let result: Result<(), String> = with_retry(|| {
            calls += 1;
            Err("down".into())
        });
        assert!(result.unwrap_err().contains("after 3 attempts"));
        assert_eq!(calls, 3);
    }

    #[test]
    fn retry_returns_first_success() {
        let mut calls = 0;
        let result = with_retry(|| {
            calls += 1;
            if calls < 2 {
                Err("flaky".into())
            } else {
                Ok(calls)
            }
        });
        assert_eq!(result.unwrap(), 2);
    }
}

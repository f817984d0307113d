//! Clerk: decomposes a long-form response into fact-checkable atomic claims,
//! filtering unverifiable content.
//!
//! The clerk backend replies in a line-oriented grammar — one `CLAIM:` or
//! `SKIP:<reason>:` item per line — which is robust to free-text drift and
//! trivially parseable. Parsing is total over that grammar: a reply either
//! parses fully or the whole call fails after one repair attempt. The parser
//! is extraction-only and never fabricates a claim absent from the reply.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

use crate::providers::{ChatRequest, DecodeParams, ProviderError, ProviderSet};
use crate::text::normalize_key;
use crate::types::{AtomicClaim, LongFormResponse, Question};

/// Built-in prompt templates; external files under a template directory
/// override them (see [`ClerkTemplates::from_dir`]).
pub const CLERK_SYSTEM_TEMPLATE: &str = include_str!("../prompts/clerk_system.txt");
pub const CLERK_USER_TEMPLATE: &str = include_str!("../prompts/clerk_user.txt");
pub const CLERK_REPAIR_TEMPLATE: &str = include_str!("../prompts/clerk_repair.txt");

/// Decomposition runs at temperature zero so it is as deterministic as the
/// provider allows.
const CLERK_DECODE: DecodeParams = DecodeParams {
    temperature: 0.0,
    max_tokens: 2048,
};

/// Why a piece of text was excluded from the claim list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiscardReason {
    Instruction,
    Suggestion,
    Subjective,
    Duplicate,
}

impl FromStr for DiscardReason {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "instruction" => Ok(DiscardReason::Instruction),
            "suggestion" => Ok(DiscardReason::Suggestion),
            "subjective" => Ok(DiscardReason::Subjective),
            "duplicate" => Ok(DiscardReason::Duplicate),
            other => Err(format!("unknown skip reason '{other}'")),
        }
    }
}

impl fmt::Display for DiscardReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DiscardReason::Instruction => "instruction",
            DiscardReason::Suggestion => "suggestion",
            DiscardReason::Subjective => "subjective",
            DiscardReason::Duplicate => "duplicate",
        };
        write!(f, "{s}")
    }
}

/// One excluded item with its reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscardedItem {
    pub text: String,
    pub reason: DiscardReason,
}

/// Output of one decomposition: kept claims in source-text order plus the
/// discarded items. The two lists are disjoint by text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecompositionResult {
    pub claims: Vec<AtomicClaim>,
    pub discarded: Vec<DiscardedItem>,
}

impl DecompositionResult {
    fn empty() -> Self {
        Self {
            claims: Vec::new(),
            discarded: Vec::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ClerkError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    /// The backend reply was not parseable into the claim-list grammar, even
    /// after one repair attempt.
    #[error("clerk reply not parseable: {0}")]
    MalformedClerkOutput(String),
    #[error("cannot read template {path}: {source}")]
    TemplateIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// The three prompt texts driving the clerk.
#[derive(Debug, Clone)]
pub struct ClerkTemplates {
    pub system: String,
    pub user: String,
    pub repair: String,
}

impl Default for ClerkTemplates {
    fn default() -> Self {
        Self {
            system: CLERK_SYSTEM_TEMPLATE.to_string(),
            user: CLERK_USER_TEMPLATE.to_string(),
            repair: CLERK_REPAIR_TEMPLATE.to_string(),
        }
    }
}

impl ClerkTemplates {
    /// Loads `clerk_system.txt`, `clerk_user.txt`, and `clerk_repair.txt`
    /// from a directory, so prompts can be versioned without code changes.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self, ClerkError> {
        let dir = dir.as_ref();
        let read = |name: &str| -> Result<String, ClerkError> {
            let path = dir.join(name);
            std::fs::read_to_string(&path).map_err(|source| ClerkError::TemplateIo {
                path: path.display().to_string(),
                source,
            })
        };
        Ok(Self {
            system: read("clerk_system.txt")?,
            user: read("clerk_user.txt")?,
            repair: read("clerk_repair.txt")?,
        })
    }
}

/// Decomposer agent bound to one chat backend.
pub struct Clerk<'a> {
    providers: &'a ProviderSet,
    backend_id: String,
    templates: ClerkTemplates,
}

impl<'a> Clerk<'a> {
    pub fn new(providers: &'a ProviderSet, backend_id: impl Into<String>) -> Self {
        Self {
            providers,
            backend_id: backend_id.into(),
            templates: ClerkTemplates::default(),
        }
    }

    pub fn with_templates(mut self, templates: ClerkTemplates) -> Self {
        self.templates = templates;
        self
    }

    /// Decomposes a response into atomic claims.
    ///
    /// An empty response yields an empty result without a backend call. A
    /// malformed backend reply is retried once with a repair prompt before
    /// [`ClerkError::MalformedClerkOutput`] is raised.
    pub fn decompose(
        &self,
        question: &Question,
        response: &LongFormResponse,
    ) -> Result<DecompositionResult, ClerkError> {
        if response.text.trim().is_empty() {
            return Ok(DecompositionResult::empty());
        }

        let user = self
            .templates
            .user
            .replace("{question}", &question.text)
            .replace("{response}", &response.text);
        let request = ChatRequest::from_system(&self.backend_id, &self.templates.system)
            .with_user(&user)
            .with_params(CLERK_DECODE);

        let reply = self.providers.chat(&request)?;
        match parse_claim_list(&reply, response) {
            Ok(result) => Ok(result),
            Err(first_error) => {
                let repair = request
                    .clone()
                    .with_assistant(&reply)
                    .with_user(&self.templates.repair);
                let second = self.providers.chat(&repair)?;
                parse_claim_list(&second, response).map_err(|second_error| {
                    ClerkError::MalformedClerkOutput(format!(
                        "{first_error}; repair attempt also failed: {second_error}"
                    ))
                })
            }
        }
    }
}

/// Parses a clerk reply under the line grammar.
///
/// Blank lines are ignored. Every other line must be `CLAIM: <text>` or
/// `SKIP:<reason>: <text>`; anything else fails the whole parse. Items whose
/// normalized text repeats an earlier item are collapsed, keeping the first
/// occurrence, which keeps the claim and discard lists disjoint by text.
pub fn parse_claim_list(
    reply: &str,
    response: &LongFormResponse,
) -> Result<DecompositionResult, String> {
    let response_id = response.response_id();
    let mut claims = Vec::new();
    let mut discarded = Vec::new();
    let mut seen = std::collections::HashSet::new();

    for (line_no, raw_line) in reply.lines().enumerate() {
        let line = raw_line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("CLAIM:") {
            let text = rest.trim();
            if text.is_empty() {
                return Err(format!("line {}: empty claim text", line_no + 1));
            }
            if seen.insert(normalize_key(text)) {
                claims.push(text.to_string());
            }
        } else if let Some(rest) = line.strip_prefix("SKIP:") {
            let (reason_token, text) = rest
                .split_once(':')
                .ok_or_else(|| format!("line {}: SKIP item is missing its reason", line_no + 1))?;
            let reason = DiscardReason::from_str(reason_token.trim())
                .map_err(|e| format!("line {}: {e}", line_no + 1))?;
            let text = text.trim();
            if text.is_empty() {
                return Err(format!("line {}: empty SKIP text", line_no + 1));
            }
            if seen.insert(normalize_key(text)) {
                discarded.push(DiscardedItem {
                    text: text.to_string(),
                    reason,
                });
            }
        } else {
            return Err(format!(
                "line {}: expected 'CLAIM:' or 'SKIP:<reason>:', got '{line}'",
                line_no + 1
            ));
        }
    }

    let claims = claims
        .into_iter()
        .enumerate()
        .map(|(i, text)| {
            AtomicClaim::new(format!("{response_id}-c{:03}", i + 1), text, &response_id)
        })
        .collect();
    Ok(DecompositionResult { claims, discarded })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::mock::MockChatProvider;
    use std::sync::Arc;

    fn setup(replies: &[&str]) -> (ProviderSet, Arc<MockChatProvider>) {
        let mock = Arc::new(MockChatProvider::new());
        mock.script("clerk", replies.to_vec());
        let providers =
            ProviderSet::new().register_chat("clerk", Arc::clone(&mock) as Arc<MockChatProvider>);
        (providers, mock)
    }

    fn zhuang_question() -> Question {
        Question::new(
            "q1",
            "What unique cultural features are associated with the Zhuang ethnic group?",
        )
    }

    fn zhuang_response() -> LongFormResponse {
        LongFormResponse::new(
            "q1",
            "The Zhuang are China's largest ethnic minority and they are known for brocade. \
             You should visit Guangxi to see it.",
            "model-a",
        )
    }

    #[test]
    fn decomposes_scripted_zhuang_reply() {
        let (providers, _) = setup(&["CLAIM: The Zhuang are the largest ethnic minority in China.\n\
              CLAIM: The Zhuang are known for brocade.\n\
              SKIP:suggestion: You should visit Guangxi to see it."]);
        let clerk = Clerk::new(&providers, "clerk");
        let result = clerk
            .decompose(&zhuang_question(), &zhuang_response())
            .unwrap();
        assert_eq!(result.claims.len(), 2);
        assert_eq!(
            result.claims[0].text,
            "The Zhuang are the largest ethnic minority in China."
        );
        assert_eq!(result.claims[1].text, "The Zhuang are known for brocade.");
        assert_eq!(result.discarded.len(), 1);
        assert_eq!(result.discarded[0].reason, DiscardReason::Suggestion);
        assert_eq!(result.claims[0].id, "q1--model-a-c001");
    }

    #[test]
    fn empty_response_yields_empty_result_without_backend_call() {
        let (providers, mock) = setup(&[]);
        let clerk = Clerk::new(&providers, "clerk");
        let empty = LongFormResponse::new("q1", "   ", "model-a");
        let result = clerk.decompose(&zhuang_question(), &empty).unwrap();
        assert!(result.claims.is_empty());
        assert!(result.discarded.is_empty());
        assert_eq!(mock.call_count(), 0);
    }

    #[test]
    fn two_claims_one_subjective_discard() {
        let (providers, _) = setup(&["CLAIM: A.\nCLAIM: B.\nSKIP:subjective: It is beautiful."]);
        let clerk = Clerk::new(&providers, "clerk");
        let result = clerk
            .decompose(&zhuang_question(), &zhuang_response())
            .unwrap();
        assert_eq!(result.claims.len(), 2);
        assert_eq!(result.discarded.len(), 1);
        assert_eq!(result.discarded[0].reason, DiscardReason::Subjective);
    }

    #[test]
    fn malformed_reply_repaired_on_second_attempt() {
        let (providers, mock) = setup(&["Here are the claims I found:\nCLAIM: A.", "CLAIM: A."]);
        let clerk = Clerk::new(&providers, "clerk");
        let result = clerk
            .decompose(&zhuang_question(), &zhuang_response())
            .unwrap();
        assert_eq!(result.claims.len(), 1);
        assert_eq!(mock.call_count(), 2);
        // the repair request carries the malformed reply as an assistant turn
        let repair_req = &mock.recorded_requests()[1];
        assert!(repair_req
            .messages
            .iter()
            .any(|m| m.content.contains("Here are the claims I found:")));
    }

    #[test]
    fn malformed_reply_twice_raises() {
        let (providers, mock) = setup(&["not the grammar", "still not the grammar"]);
        let clerk = Clerk::new(&providers, "clerk");
        let err = clerk
            .decompose(&zhuang_question(), &zhuang_response())
            .unwrap_err();
        assert!(matches!(err, ClerkError::MalformedClerkOutput(_)), "{err}");
        assert_eq!(mock.call_count(), 2);
    }

    #[test]
    fn unknown_skip_reason_is_malformed() {
        let err = parse_claim_list("SKIP:boring: text", &zhuang_response()).unwrap_err();
        assert!(err.contains("unknown skip reason"), "{err}");
    }

    #[test]
    fn exact_duplicates_collapse_keeping_first() {
        let result = parse_claim_list(
            "CLAIM: The Zhuang are known for brocade.\nCLAIM: the zhuang are  known for brocade.",
            &zhuang_response(),
        )
        .unwrap();
        assert_eq!(result.claims.len(), 1);
        assert_eq!(result.claims[0].text, "The Zhuang are known for brocade.");
        assert!(result.discarded.is_empty());
    }

    #[test]
    fn claims_and_discards_stay_disjoint_by_text() {
        let result = parse_claim_list(
            "CLAIM: X is true.\nSKIP:duplicate: X is true.",
            &zhuang_response(),
        )
        .unwrap();
        assert_eq!(result.claims.len(), 1);
        assert!(result.discarded.is_empty());
    }

    #[test]
    fn prompt_carries_question_and_response_slots() {
        let (providers, mock) = setup(&["CLAIM: A."]);
        let clerk = Clerk::new(&providers, "clerk");
        clerk
            .decompose(&zhuang_question(), &zhuang_response())
            .unwrap();
        let req = &mock.recorded_requests()[0];
        let user = &req.messages[1].content;
        assert!(user.contains("Zhuang ethnic group"));
        assert!(user.contains("known for brocade"));
        assert_eq!(req.decode_params.temperature, 0.0);
    }

    #[test]
    fn all_blank_reply_parses_to_empty() {
        let result = parse_claim_list("\n  \n", &zhuang_response()).unwrap();
        assert!(result.claims.is_empty());
    }

    #[test]
    fn claim_ordering_follows_reply_order() {
        let result = parse_claim_list(
            "CLAIM: First.\nSKIP:subjective: Meh.\nCLAIM: Second.",
            &zhuang_response(),
        )
        .unwrap();
        let texts: Vec<&str> = result.claims.iter().map(|c| c.text.as_str()).collect();
        assert_eq!(texts, vec!["First.", "Second."]);
    }
}

//! Core domain types shared by every stage of the pipeline.
//!
//! All types here are immutable value objects once constructed and are safe
//! to share across concurrent tasks.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::text::sanitize_id;

/// A question posed to the evaluated model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub text: String,
}

impl Question {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
        }
    }
}

/// A long-form answer produced by the evaluated model.
///
/// The text may be empty; degenerate inputs are handled downstream (an empty
/// response decomposes into zero claims and scores zero).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LongFormResponse {
    pub question_id: String,
    pub text: String,
    /// Label of the model that produced the response.
    pub producer: String,
}

impl LongFormResponse {
    pub fn new(
        question_id: impl Into<String>,
        text: impl Into<String>,
        producer: impl Into<String>,
    ) -> Self {
        Self {
            question_id: question_id.into(),
            text: text.into(),
            producer: producer.into(),
        }
    }

    /// Stable identifier for this response, derived from question and producer.
    pub fn response_id(&self) -> String {
        format!(
            "{}--{}",
            sanitize_id(&self.question_id),
            sanitize_id(&self.producer)
        )
    }
}

/// One fact-checkable statement extracted from a long-form response; the unit
/// of verification and scoring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomicClaim {
    pub id: String,
    pub text: String,
    /// Identifier of the response this claim was extracted from.
    pub source_response: String,
}

impl AtomicClaim {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        source_response: impl Into<String>,
    ) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            source_response: source_response.into(),
        }
    }
}

/// Binary factuality verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "TRUE")]
    True,
    #[serde(rename = "FALSE")]
    False,
}

impl Verdict {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Verdict::True
        } else {
            Verdict::False
        }
    }

    pub fn is_true(self) -> bool {
        matches!(self, Verdict::True)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::True => write!(f, "TRUE"),
            Verdict::False => write!(f, "FALSE"),
        }
    }
}

/// One juror statement: a verdict with its explanation and its position in
/// the debate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub verdict: Verdict,
    pub explanation: String,
    /// 0-based index of the speaking agent; always `< N`.
    pub agent_index: usize,
    /// 1-based debate round.
    pub round: u32,
    /// Self-estimated confidence in `[0, 1]`, present only on turns where it
    /// was elicited.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub confidence: Option<f64>,
}

impl VerdictRecord {
    pub fn new(verdict: Verdict, explanation: impl Into<String>, agent_index: usize, round: u32) -> Self {
        Self {
            verdict,
            explanation: explanation.into(),
            agent_index,
            round,
            confidence: None,
        }
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = Some(confidence);
        self
    }
}

/// Persona assigned to one evaluator agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleProfile {
    pub name: String,
    /// Persona prompt text injected as the agent's system message.
    pub description: String,
}

impl RoleProfile {
    pub fn new(name: impl Into<String>, description: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
        }
    }
}

//! Jury: the multi-round, turn-ordered debate over one atomic claim.
//!
//! Evaluator agents speak in a fixed order, sharing two append-only states:
//! the message pool of prior statements and the knowledge base of retrieval
//! results. One debate is strictly sequential; debates over distinct claims
//! are independent and may run concurrently.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::io;
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::config::{AblationVariant, DebateRule, SystemConfig};
use crate::providers::{ChatRequest, DecodeParams, ProviderError, ProviderSet, SearchResult};
use crate::text::{normalize_key, sanitize_id};
use crate::types::{AtomicClaim, Verdict, VerdictRecord};

/// Appended to each role description while retrieval is enabled, nudging
/// agents to use the search tool instead of overtrusting prior knowledge.
pub const RETRIEVAL_INCENTIVE: &str = "When you are not fully certain, prefer consulting fresh \
                                       search results over relying on memory.";

const EVALUATOR_DECODE: DecodeParams = DecodeParams {
    temperature: 0.3,
    max_tokens: 1024,
};

/// Character budget for one evaluator prompt. When exceeded, the oldest
/// knowledge-base snippets are dropped first, then the oldest pool
/// statements, never the claim itself.
pub const DEFAULT_CONTEXT_BUDGET: usize = 60_000;

/// A duplicate query is regenerated at most this many times before the turn
/// falls back to a direct response.
const QUERY_REGENERATIONS: usize = 3;

/// Append-only, ordered log of juror statements within one debate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MessagePool {
    entries: Vec<VerdictRecord>,
}

impl MessagePool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: VerdictRecord) {
        debug_assert!(
            self.entries
                .last()
                .is_none_or(|last| (last.round, last.agent_index)
                    <= (record.round, record.agent_index)),
            "pool entries must follow speaking order"
        );
        self.entries.push(record);
    }

    pub fn entries(&self) -> &[VerdictRecord] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// All statements made in the given round, in speaking order.
    pub fn round_entries(&self, round: u32) -> Vec<&VerdictRecord> {
        self.entries.iter().filter(|r| r.round == round).collect()
    }
}

/// Append-only store of retrieval results and their normalized queries
/// within one debate. Never admits two normalized-equal queries.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeBase {
    entries: Vec<SearchResult>,
    issued_queries: BTreeSet<String>,
}

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains_query(&self, normalized_query: &str) -> bool {
        self.issued_queries.contains(normalized_query)
    }

    /// Appends a result unless its normalized query was already issued.
    /// Returns whether the result was admitted.
    pub fn push(&mut self, result: SearchResult) -> bool {
        let key = normalize_key(&result.query);
        if !self.issued_queries.insert(key) {
            return false;
        }
        self.entries.push(result);
        true
    }

    pub fn entries(&self) -> &[SearchResult] {
        &self.entries
    }

    pub fn issued_queries(&self) -> &BTreeSet<String> {
        &self.issued_queries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// One retrieval invocation recorded in the transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchEvent {
    pub round: u32,
    pub agent_index: usize,
    pub query: String,
}

/// Anomalies recorded in the transcript without aborting the debate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TranscriptFlag {
    /// The confidence prefix was unparseable; the turn was forced onto the
    /// retrieval path with confidence 0.
    MalformedConfidence { round: u32, agent_index: usize },
    /// Query regeneration kept producing duplicates; the turn fell back to a
    /// direct response.
    QueryDedupFallback { round: u32, agent_index: usize },
}

/// Ordered record of one claim's debate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebateTranscript {
    pub claim: AtomicClaim,
    pub rule: DebateRule,
    pub rounds_executed: u32,
    #[serde(rename = "turns")]
    pub pool: MessagePool,
    pub search_events: Vec<SearchEvent>,
    /// The statements of the last executed round, one per agent; what the
    /// judge adjudicates.
    pub final_round_verdicts: Vec<VerdictRecord>,
    #[serde(rename = "knowledge_base")]
    pub kb: KnowledgeBase,
    pub flags: Vec<TranscriptFlag>,
    /// Set when a turn raised; partial transcripts are never silently
    /// discarded.
    pub failure: Option<String>,
}

impl DebateTranscript {
    pub fn to_json_pretty(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    /// Writes `<dir>/<claim id>.json` and returns the path.
    pub fn write_to_dir(&self, dir: &Path) -> io::Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.json", sanitize_id(&self.claim.id)));
        let json = self
            .to_json_pretty()
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        std::fs::write(&path, json)?;
        Ok(path)
    }
}

#[derive(Debug, Error)]
pub enum JuryError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    /// The evaluator reply was not parseable, even after one repair attempt.
    #[error("evaluator reply not parseable: {0}")]
    MalformedEvaluatorOutput(String),
    /// Retrieval was invoked while disabled by the no-search ablation.
    #[error("retrieval invoked while search is disabled by ablation")]
    SearchDisabled,
}

/// A debate that aborted mid-turn, carrying the partial transcript.
#[derive(Debug)]
pub struct DebateFailure {
    pub error: JuryError,
    pub transcript: DebateTranscript,
}

impl fmt::Display for DebateFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "debate aborted: {}", self.error)
    }
}

impl std::error::Error for DebateFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// 0-based speaker index for the 1-based global turn counter. Within a
/// round, agents speak in fixed registration order.
pub fn next_speaker(turn: u32, jury_size: usize) -> usize {
    debug_assert!(turn >= 1, "turns are 1-based");
    debug_assert!(jury_size >= 1, "jury must not be empty");
    ((turn - 1) as usize) % jury_size
}

/// Everything a strategy call can produce beyond the pool/kb mutations.
#[derive(Debug)]
pub struct TurnOutcome {
    pub record: VerdictRecord,
    pub search_event: Option<SearchEvent>,
    pub flags: Vec<TranscriptFlag>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Strategy {
    Direct,
    Retrieval,
    Conditional,
}

#[derive(Debug, Clone, Copy)]
enum PromptMode {
    Verdict,
    Conditional,
    Query,
}

/// Runs debates for one validated configuration.
pub struct DebateEngine<'a> {
    config: &'a SystemConfig,
    providers: &'a ProviderSet,
    context_budget: usize,
}

impl<'a> DebateEngine<'a> {
    pub fn new(config: &'a SystemConfig, providers: &'a ProviderSet) -> Self {
        Self {
            config,
            providers,
            context_budget: DEFAULT_CONTEXT_BUDGET,
        }
    }

    pub fn with_context_budget(mut self, chars: usize) -> Self {
        self.context_budget = chars;
        self
    }

    /// Runs the full debate for one claim under the configured rule.
    ///
    /// On a provider or parse failure the error carries the partial
    /// transcript with its failure marker set.
    pub fn run_debate(&self, claim: &AtomicClaim) -> Result<DebateTranscript, Box<DebateFailure>> {
        let n = self.config.jury_size;
        let rounds = if self.config.ablation == AblationVariant::NoDebate {
            1
        } else {
            self.config.rounds
        };

        let mut pool = MessagePool::new();
        let mut kb = KnowledgeBase::new();
        let mut search_events = Vec::new();
        let mut flags = Vec::new();
        let mut rounds_executed = 0u32;
        let mut turn = 1u32;
        let mut adaptive_retrieved = false;
        let mut failure: Option<JuryError> = None;

        'rounds: for round in 1..=rounds {
            let strategy = self.round_strategy(round, &mut adaptive_retrieved);
            for _ in 0..n {
                let agent_index = next_speaker(turn, n);
                let result = match strategy {
                    Strategy::Direct => {
                        self.direct_response(agent_index, claim, &mut pool, &kb, round)
                    }
                    Strategy::Retrieval => {
                        self.retrieval_response(agent_index, claim, &mut pool, &mut kb, round)
                    }
                    Strategy::Conditional => {
                        self.conditional_response(agent_index, claim, &mut pool, &mut kb, round)
                    }
                };
                match result {
                    Ok(outcome) => {
                        search_events.extend(outcome.search_event);
                        flags.extend(outcome.flags);
                    }
                    Err(e) => {
                        failure = Some(e);
                        break 'rounds;
                    }
                }
                turn += 1;
            }
            rounds_executed = round;

            // Adaptive debate stops as soon as a round is unanimous.
            if self.config.rule == DebateRule::Adaptive && round < rounds {
                let round_verdicts = pool.round_entries(round);
                let unanimous = round_verdicts
                    .windows(2)
                    .all(|pair| pair[0].verdict == pair[1].verdict);
                if unanimous {
                    break;
                }
            }
        }

        let final_round_verdicts = pool
            .round_entries(rounds_executed)
            .into_iter()
            .cloned()
            .collect();
        let transcript = DebateTranscript {
            claim: claim.clone(),
            rule: self.config.rule,
            rounds_executed,
            pool,
            search_events,
            final_round_verdicts,
            kb,
            flags,
            failure: failure.as_ref().map(ToString::to_string),
        };
        match failure {
            None => Ok(transcript),
            Some(error) => Err(Box::new(DebateFailure { error, transcript })),
        }
    }

    fn round_strategy(&self, round: u32, adaptive_retrieved: &mut bool) -> Strategy {
        if self.config.ablation == AblationVariant::NoSearch {
            return Strategy::Direct;
        }
        match self.config.rule {
            DebateRule::FreeDebate => {
                if round == 1 {
                    Strategy::Conditional
                } else {
                    Strategy::Direct
                }
            }
            DebateRule::MandatorySearch => {
                if round == 1 {
                    Strategy::Retrieval
                } else {
                    Strategy::Direct
                }
            }
            DebateRule::Adaptive => {
                if round == 1 {
                    Strategy::Conditional
                } else if !*adaptive_retrieved {
                    // mandatory retrieval in the first post-disagreement round
                    *adaptive_retrieved = true;
                    Strategy::Retrieval
                } else {
                    Strategy::Direct
                }
            }
        }
    }

    /// Direct response: one chat call over the shared context; the knowledge
    /// base remains unchanged.
    pub fn direct_response(
        &self,
        agent_index: usize,
        claim: &AtomicClaim,
        pool: &mut MessagePool,
        kb: &KnowledgeBase,
        round: u32,
    ) -> Result<TurnOutcome, JuryError> {
        let record = self.verdict_turn(agent_index, claim, pool, kb, round, None)?;
        Ok(TurnOutcome {
            record,
            search_event: None,
            flags: Vec::new(),
        })
    }

    /// Retrieval-based response: formulate a fresh query, search, append the
    /// result to the knowledge base, then respond against the updated
    /// knowledge.
    ///
    /// A query duplicating an already-issued one is regenerated up to three
    /// times; if every attempt duplicates, the turn falls back to a direct
    /// response and the fallback is recorded in the transcript.
    pub fn retrieval_response(
        &self,
        agent_index: usize,
        claim: &AtomicClaim,
        pool: &mut MessagePool,
        kb: &mut KnowledgeBase,
        round: u32,
    ) -> Result<TurnOutcome, JuryError> {
        self.retrieval_turn(agent_index, claim, pool, kb, round, None)
    }

    /// Conditional retrieval response: elicit a confidence; at or above the
    /// threshold answer directly, below it retrieve first. The measured
    /// confidence is stored in the verdict record either way.
    pub fn conditional_response(
        &self,
        agent_index: usize,
        claim: &AtomicClaim,
        pool: &mut MessagePool,
        kb: &mut KnowledgeBase,
        round: u32,
    ) -> Result<TurnOutcome, JuryError> {
        let request = self.evaluator_request(agent_index, claim, pool, kb, PromptMode::Conditional, &[]);
        let reply = self.providers.chat(&request)?;

        match parse_conf_prefix(&reply) {
            Ok((confidence, rest)) => {
                if confidence >= self.config.theta {
                    let record = match parse_verdict_line(rest) {
                        Ok((verdict, explanation)) => {
                            let record = VerdictRecord::new(verdict, explanation, agent_index, round)
                                .with_confidence(confidence);
                            pool.push(record.clone());
                            record
                        }
                        Err(_) => self.repair_verdict(
                            request,
                            &reply,
                            agent_index,
                            pool,
                            round,
                            Some(confidence),
                        )?,
                    };
                    Ok(TurnOutcome {
                        record,
                        search_event: None,
                        flags: Vec::new(),
                    })
                } else {
                    self.retrieval_turn(agent_index, claim, pool, kb, round, Some(confidence))
                }
            }
            Err(_) => {
                // Unparseable confidence forces the retrieval path.
                let mut outcome =
                    self.retrieval_turn(agent_index, claim, pool, kb, round, Some(0.0))?;
                outcome.flags.insert(
                    0,
                    TranscriptFlag::MalformedConfidence { round, agent_index },
                );
                Ok(outcome)
            }
        }
    }

    fn retrieval_turn(
        &self,
        agent_index: usize,
        claim: &AtomicClaim,
        pool: &mut MessagePool,
        kb: &mut KnowledgeBase,
        round: u32,
        confidence: Option<f64>,
    ) -> Result<TurnOutcome, JuryError> {
        if self.config.ablation == AblationVariant::NoSearch {
            return Err(JuryError::SearchDisabled);
        }

        let mut avoid: Vec<String> = kb.issued_queries().iter().cloned().collect();
        for _ in 0..=QUERY_REGENERATIONS {
            let request =
                self.evaluator_request(agent_index, claim, pool, kb, PromptMode::Query, &avoid);
            let reply = self.providers.chat(&request)?;
            let query = extract_query(&reply);
            let normalized = normalize_key(&query);
            if query.is_empty() || kb.contains_query(&normalized) {
                if !normalized.is_empty() && !avoid.contains(&normalized) {
                    avoid.push(normalized);
                }
                continue;
            }

            let result = self.providers.search(&query)?;
            kb.push(result);
            let event = SearchEvent {
                round,
                agent_index,
                query,
            };
            let record = self.verdict_turn(agent_index, claim, pool, kb, round, confidence)?;
            return Ok(TurnOutcome {
                record,
                search_event: Some(event),
                flags: Vec::new(),
            });
        }

        // Every generated query duplicated an existing one: fall back.
        let record = self.verdict_turn(agent_index, claim, pool, kb, round, confidence)?;
        Ok(TurnOutcome {
            record,
            search_event: None,
            flags: vec![TranscriptFlag::QueryDedupFallback { round, agent_index }],
        })
    }

    /// One verdict-producing chat call (with a single repair retry); the
    /// parsed record is appended to the pool.
    fn verdict_turn(
        &self,
        agent_index: usize,
        claim: &AtomicClaim,
        pool: &mut MessagePool,
        kb: &KnowledgeBase,
        round: u32,
        confidence: Option<f64>,
    ) -> Result<VerdictRecord, JuryError> {
        let request =
            self.evaluator_request(agent_index, claim, pool, kb, PromptMode::Verdict, &[]);
        let reply = self.providers.chat(&request)?;
        match parse_verdict_line(&reply) {
            Ok((verdict, explanation)) => {
                let mut record = VerdictRecord::new(verdict, explanation, agent_index, round);
                record.confidence = confidence;
                pool.push(record.clone());
                Ok(record)
            }
            Err(_) => self.repair_verdict(request, &reply, agent_index, pool, round, confidence),
        }
    }

    fn repair_verdict(
        &self,
        original: ChatRequest,
        bad_reply: &str,
        agent_index: usize,
        pool: &mut MessagePool,
        round: u32,
        confidence: Option<f64>,
    ) -> Result<VerdictRecord, JuryError> {
        let repair = original.with_assistant(bad_reply).with_user(
            "Your reply did not match the required format. Reply with exactly one line: \
             TRUE|<explanation> or FALSE|<explanation>.",
        );
        let second = self.providers.chat(&repair)?;
        let (verdict, explanation) = parse_verdict_line(&second).map_err(|e| {
            JuryError::MalformedEvaluatorOutput(format!(
                "'{bad_reply}' and repair attempt '{second}': {e}"
            ))
        })?;
        let mut record = VerdictRecord::new(verdict, explanation, agent_index, round);
        record.confidence = confidence;
        pool.push(record.clone());
        Ok(record)
    }

    /// Builds the chat request for one turn: role system message plus the
    /// claim, retrieved evidence, prior statements, and the mode
    /// instruction. Oversized context is trimmed oldest-evidence-first, then
    /// oldest-statements, never the claim.
    fn evaluator_request(
        &self,
        agent_index: usize,
        claim: &AtomicClaim,
        pool: &MessagePool,
        kb: &KnowledgeBase,
        mode: PromptMode,
        avoid_queries: &[String],
    ) -> ChatRequest {
        let role = &self.config.roles[agent_index];
        let mut system = role.description.clone();
        if self.config.ablation != AblationVariant::NoSearch {
            system.push(' ');
            system.push_str(RETRIEVAL_INCENTIVE);
        }

        let claim_section = format!("Claim under review:\n{}", claim.text);
        let instruction = match mode {
            PromptMode::Verdict => "Based on the evidence and the discussion, judge the claim. \
                                    Reply with exactly one line: TRUE|<explanation> or \
                                    FALSE|<explanation>."
                .to_string(),
            PromptMode::Conditional => "First estimate your confidence (0.00-1.00) that you can \
                                        judge this claim correctly without further retrieval, \
                                        then give your verdict. Reply with exactly one line: \
                                        CONF:<confidence>|TRUE|<explanation> or \
                                        CONF:<confidence>|FALSE|<explanation>."
                .to_string(),
            PromptMode::Query => {
                let mut text = String::from(
                    "Formulate one new web search query that would help verify the claim.",
                );
                if !avoid_queries.is_empty() {
                    text.push_str("\nDo not repeat any of these already-issued queries:");
                    for q in avoid_queries {
                        text.push_str("\n- ");
                        text.push_str(q);
                    }
                }
                text.push_str("\nReply with the query text only.");
                text
            }
        };

        let mut evidence: Vec<String> = kb
            .entries()
            .iter()
            .enumerate()
            .map(|(i, result)| {
                let mut block = format!("[{}] query: {}", i + 1, result.query);
                for s in &result.snippets {
                    block.push_str(&format!("\n    {} ({}) — {}", s.title, s.url, s.snippet));
                }
                block
            })
            .collect();
        let mut statements: Vec<String> = pool
            .entries()
            .iter()
            .map(|r| {
                let role_name = self
                    .config
                    .roles
                    .get(r.agent_index)
                    .map_or("?", |role| role.name.as_str());
                format!(
                    "Round {}, {} (agent {}): {} — {}",
                    r.round, role_name, r.agent_index, r.verdict, r.explanation
                )
            })
            .collect();

        let fixed_len = claim_section.len() + instruction.len() + 64;
        let section_len = |items: &[String]| items.iter().map(|s| s.len() + 1).sum::<usize>();
        while fixed_len + section_len(&evidence) + section_len(&statements) > self.context_budget
            && !evidence.is_empty()
        {
            evidence.remove(0);
        }
        while fixed_len + section_len(&evidence) + section_len(&statements) > self.context_budget
            && !statements.is_empty()
        {
            statements.remove(0);
        }

        let evidence_section = if evidence.is_empty() {
            "Retrieved evidence:\n(none)".to_string()
        } else {
            format!("Retrieved evidence:\n{}", evidence.join("\n"))
        };
        let discussion_section = if statements.is_empty() {
            "Discussion so far:\n(no prior statements)".to_string()
        } else {
            format!("Discussion so far:\n{}", statements.join("\n"))
        };

        let user = format!("{claim_section}\n\n{evidence_section}\n\n{discussion_section}\n\n{instruction}");
        ChatRequest::from_system(&self.config.evaluator_backends[agent_index], &system)
            .with_user(user)
            .with_params(EVALUATOR_DECODE)
    }
}

/// Parses `VERDICT|explanation` (explanation optional).
pub fn parse_verdict_line(reply: &str) -> Result<(Verdict, String), String> {
    let trimmed = reply.trim();
    let (token, explanation) = match trimmed.split_once('|') {
        Some((t, e)) => (t.trim(), e.trim()),
        None => (trimmed, ""),
    };
    match token.to_ascii_uppercase().as_str() {
        "TRUE" => Ok((Verdict::True, explanation.to_string())),
        "FALSE" => Ok((Verdict::False, explanation.to_string())),
        other => Err(format!("expected TRUE or FALSE, got '{other}'")),
    }
}

/// Parses the leading `CONF:x.xx|` token, returning the confidence and the
/// remainder of the reply.
pub fn parse_conf_prefix(reply: &str) -> Result<(f64, &str), String> {
    let trimmed = reply.trim();
    let rest = trimmed
        .strip_prefix("CONF:")
        .ok_or_else(|| "missing CONF: prefix".to_string())?;
    let (number, remainder) = rest
        .split_once('|')
        .ok_or_else(|| "missing '|' after confidence".to_string())?;
    let confidence: f64 = number
        .trim()
        .parse()
        .map_err(|e| format!("bad confidence '{}': {e}", number.trim()))?;
    if !(0.0..=1.0).contains(&confidence) {
        return Err(format!("confidence {confidence} outside [0, 1]"));
    }
    Ok((confidence, remainder))
}

/// First non-empty line of a query-generation reply, unquoted.
fn extract_query(reply: &str) -> String {
    reply
        .lines()
        .map(str::trim)
        .find(|line| !line.is_empty())
        .map(|line| line.trim_matches(|c| c == '"' || c == '\'').to_string())
        .unwrap_or_default()
}

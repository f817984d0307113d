//! Fact-importance pyramid built from expert reference answers, and the
//! weighted evaluation metrics computed against it.
//!
//! `G` expert models each answer the question; their decomposed claims are
//! merged into a golden set by semantic equivalence. A claim mentioned by
//! `f` experts sits in pyramid layer `G - f + 1`, and layer weights decrease
//! strictly from top to bottom — errors in widely-agreed core facts cost
//! more than errors in auxiliary ones.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use thiserror::Error;

use crate::clerk::{Clerk, ClerkError};
use crate::providers::{ChatRequest, DecodeParams, ProviderError, ProviderSet};
use crate::text::normalize_key;
use crate::types::{AtomicClaim, LongFormResponse, Question, Verdict};

/// Claims an evaluated response may contain that match nothing in the golden
/// set get this weight: one step below the lowest pyramid layer.
pub const UNMATCHED_CLAIM_WEIGHT: f64 = 1.0;

const EXPERT_DECODE: DecodeParams = DecodeParams {
    temperature: 0.7,
    max_tokens: 2048,
};

const MATCHER_DECODE: DecodeParams = DecodeParams {
    temperature: 0.0,
    max_tokens: 16,
};

#[derive(Debug, Error)]
pub enum PyramidError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Clerk(#[from] ClerkError),
    #[error("matcher unavailable: {0}")]
    MatcherUnavailable(String),
    #[error("invalid weight rule: {0}")]
    InvalidWeightRule(String),
    #[error("invalid golden set: {0}")]
    InvalidGoldenSet(String),
    #[error("golden set weight mass must be positive")]
    EmptyGoldenSet,
    #[error("weights and verdicts differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("weights must be strictly positive, got {0}")]
    InvalidWeight(f64),
    #[error("gamma must lie in (0, 1], got {0}")]
    InvalidGamma(f64),
    #[error("pyramid I/O at {path}: {message}")]
    Io { path: String, message: String },
}

/// One expert model's reference answer, decomposed into claims.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceAnswer {
    pub question_id: String,
    pub expert_id: String,
    pub text: String,
    pub claims: Vec<AtomicClaim>,
}

/// One merged golden-set entry: a representative text, the number of
/// distinct experts that mentioned it, and every merged surface form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldenEntry {
    pub text: String,
    /// Count of distinct experts mentioning the claim; repeats within one
    /// expert count once.
    pub frequency: usize,
    pub member_texts: Vec<String>,
}

/// Deduplicated union of the expert claim sets, treated as exhaustive.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GoldenSet {
    pub entries: Vec<GoldenEntry>,
}

impl GoldenSet {
    /// `K_gold`: number of merged entries.
    pub fn size(&self) -> usize {
        self.entries.len()
    }
}

/// Decides whether two claim texts state the same fact.
pub trait ClaimMatcher {
    fn id(&self) -> &str;
    fn equivalent(&self, a: &str, b: &str) -> Result<bool, PyramidError>;
}

/// Deterministic matcher: equality after casefolding and whitespace
/// collapse. The default for tests and offline runs.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactNormalizedMatcher;

impl ClaimMatcher for ExactNormalizedMatcher {
    fn id(&self) -> &str {
        "exact-normalized"
    }

    fn equivalent(&self, a: &str, b: &str) -> Result<bool, PyramidError> {
        Ok(normalize_key(a) == normalize_key(b))
    }
}

/// Model-mediated matcher for live runs: asks a backend whether two claims
/// are semantically equivalent and expects a YES/NO reply.
pub struct BackendJudgedMatcher<'a> {
    providers: &'a ProviderSet,
    backend_id: String,
}

impl<'a> BackendJudgedMatcher<'a> {
    pub fn new(providers: &'a ProviderSet, backend_id: impl Into<String>) -> Self {
        Self {
            providers,
            backend_id: backend_id.into(),
        }
    }
}

impl ClaimMatcher for BackendJudgedMatcher<'_> {
    fn id(&self) -> &str {
        "backend-judged"
    }

    fn equivalent(&self, a: &str, b: &str) -> Result<bool, PyramidError> {
        let request = ChatRequest::from_system(
            &self.backend_id,
            "You decide whether two atomic claims state the same fact. Reply with exactly YES \
             or NO.",
        )
        .with_user(format!("Claim A: {a}\nClaim B: {b}\nSame fact?"))
        .with_params(MATCHER_DECODE);
        let reply = self
            .providers
            .chat(&request)
            .map_err(|e| PyramidError::MatcherUnavailable(e.to_string()))?;
        match reply.trim().to_ascii_uppercase().as_str() {
            s if s.starts_with("YES") => Ok(true),
            s if s.starts_with("NO") => Ok(false),
            other => Err(PyramidError::MatcherUnavailable(format!(
                "matcher replied '{other}', expected YES or NO"
            ))),
        }
    }
}

/// Layer weight assignment. Must be strictly decreasing and positive over
/// layers `1..=G`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WeightRule {
    /// `weight(k) = base - k`; the default base of 5 gives 4/3/2 for G = 3.
    Linear { base: f64 },
    /// Explicit per-layer weights, highest layer first.
    Custom(Vec<f64>),
}

impl Default for WeightRule {
    fn default() -> Self {
        WeightRule::Linear { base: 5.0 }
    }
}

impl WeightRule {
    /// Weights for layers `1..=levels`, validated.
    pub fn layer_weights(&self, levels: usize) -> Result<Vec<f64>, PyramidError> {
        let weights: Vec<f64> = match self {
            WeightRule::Linear { base } => (1..=levels).map(|k| base - k as f64).collect(),
            WeightRule::Custom(values) => {
                if values.len() != levels {
                    return Err(PyramidError::InvalidWeightRule(format!(
                        "expected {levels} weights, got {}",
                        values.len()
                    )));
                }
                values.clone()
            }
        };
        for pair in weights.windows(2) {
            if pair[0] <= pair[1] {
                return Err(PyramidError::InvalidWeightRule(format!(
                    "weights must strictly decrease with depth, got {weights:?}"
                )));
            }
        }
        if let Some(&w) = weights.iter().find(|&&w| w <= 0.0) {
            return Err(PyramidError::InvalidWeightRule(format!(
                "weights must be positive, got {w}"
            )));
        }
        Ok(weights)
    }
}

/// One golden entry placed in its pyramid layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PyramidEntry {
    pub text: String,
    pub frequency: usize,
    /// `G - frequency + 1`: layer 1 is the top.
    pub layer: usize,
    pub weight: f64,
    pub member_texts: Vec<String>,
}

/// Layered golden set with frequency-derived importance weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pyramid {
    pub question_id: String,
    /// Level count G (= number of expert models).
    pub levels: usize,
    pub matcher_id: String,
    pub expert_backends: Vec<String>,
    pub entries: Vec<PyramidEntry>,
    pub layer_weights: BTreeMap<usize, f64>,
}

impl Pyramid {
    /// Entries sitting in layer `k`.
    pub fn layer_entries(&self, layer: usize) -> Vec<&PyramidEntry> {
        self.entries.iter().filter(|e| e.layer == layer).collect()
    }

    /// Denominator of the weighted recall: the summed layer weights of every
    /// golden entry.
    pub fn golden_weight_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.weight).sum()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PyramidError> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).map_err(|e| PyramidError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        std::fs::write(path, json).map_err(|e| PyramidError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PyramidError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| PyramidError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| PyramidError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// Asks each expert backend for a reference answer and decomposes it with
/// the clerk. An expert returning empty text yields zero claims, which is
/// allowed and simply lowers the frequency ceiling.
pub fn generate_references(
    question: &Question,
    expert_backends: &[String],
    providers: &ProviderSet,
    clerk_backend: &str,
) -> Result<Vec<ReferenceAnswer>, PyramidError> {
    let clerk = Clerk::new(providers, clerk_backend);
    let mut answers = Vec::with_capacity(expert_backends.len());
    for expert in expert_backends {
        let request = ChatRequest::from_system(
            expert,
            "You are an expert assistant. Answer the question thoroughly and factually, \
             covering every key point a complete answer should mention.",
        )
        .with_user(&question.text)
        .with_params(EXPERT_DECODE);
        let text = providers.chat(&request)?;
        let response = LongFormResponse::new(&question.id, &text, expert);
        let claims = clerk.decompose(question, &response)?.claims;
        answers.push(ReferenceAnswer {
            question_id: question.id.clone(),
            expert_id: expert.clone(),
            text,
            claims,
        });
    }
    Ok(answers)
}

/// Merges the expert claim sets into equivalence classes under the matcher.
///
/// An entry's frequency counts distinct contributing experts, capped at `G`
/// by construction; repeats within one expert count once.
pub fn merge_golden_set(
    claim_sets: &[Vec<AtomicClaim>],
    matcher: &dyn ClaimMatcher,
) -> Result<GoldenSet, PyramidError> {
    struct Class {
        representative: String,
        member_texts: Vec<String>,
        experts: BTreeSet<usize>,
    }

    let mut classes: Vec<Class> = Vec::new();
    for (expert_index, claims) in claim_sets.iter().enumerate() {
        for claim in claims {
            let mut matched = false;
            for class in classes.iter_mut() {
                if matcher.equivalent(&class.representative, &claim.text)? {
                    class.experts.insert(expert_index);
                    if !class.member_texts.contains(&claim.text) {
                        class.member_texts.push(claim.text.clone());
                    }
                    matched = true;
                    break;
                }
            }
            if !matched {
                classes.push(Class {
                    representative: claim.text.clone(),
                    member_texts: vec![claim.text.clone()],
                    experts: BTreeSet::from([expert_index]),
                });
            }
        }
    }

    Ok(GoldenSet {
        entries: classes
            .into_iter()
            .map(|c| GoldenEntry {
                text: c.representative,
                frequency: c.experts.len(),
                member_texts: c.member_texts,
            })
            .collect(),
    })
}

/// Places each golden entry at layer `G - f + 1` and assigns the layer
/// weights from the rule.
pub fn build_pyramid(
    question_id: &str,
    golden: &GoldenSet,
    levels: usize,
    rule: &WeightRule,
    matcher_id: &str,
    expert_backends: Vec<String>,
) -> Result<Pyramid, PyramidError> {
    if levels == 0 {
        return Err(PyramidError::InvalidWeightRule(
            "level count must be at least 1".into(),
        ));
    }
    let weights = rule.layer_weights(levels)?;

    let mut entries = Vec::with_capacity(golden.entries.len());
    for entry in &golden.entries {
        if entry.frequency < 1 || entry.frequency > levels {
            return Err(PyramidError::InvalidGoldenSet(format!(
                "entry '{}' has frequency {} outside [1, {levels}]",
                entry.text, entry.frequency
            )));
        }
        let layer = levels - entry.frequency + 1;
        entries.push(PyramidEntry {
            text: entry.text.clone(),
            frequency: entry.frequency,
            layer,
            weight: weights[layer - 1],
            member_texts: entry.member_texts.clone(),
        });
    }

    Ok(Pyramid {
        question_id: question_id.to_string(),
        levels,
        matcher_id: matcher_id.to_string(),
        expert_backends,
        entries,
        layer_weights: weights
            .into_iter()
            .enumerate()
            .map(|(i, w)| (i + 1, w))
            .collect(),
    })
}

/// Weight of an evaluated claim: the matched golden entry's layer weight, or
/// [`UNMATCHED_CLAIM_WEIGHT`] when it matches nothing.
pub fn claim_weight(
    pyramid: &Pyramid,
    claim_text: &str,
    matcher: &dyn ClaimMatcher,
) -> Result<f64, PyramidError> {
    for entry in &pyramid.entries {
        if matcher.equivalent(&entry.text, claim_text)? {
            return Ok(entry.weight);
        }
        for member in &entry.member_texts {
            if matcher.equivalent(member, claim_text)? {
                return Ok(entry.weight);
            }
        }
    }
    Ok(UNMATCHED_CLAIM_WEIGHT)
}

fn check_weights(weights: &[f64], verdicts: &[Verdict]) -> Result<(), PyramidError> {
    if weights.len() != verdicts.len() {
        return Err(PyramidError::LengthMismatch(weights.len(), verdicts.len()));
    }
    if let Some(&w) = weights.iter().find(|&&w| w <= 0.0 || w.is_nan()) {
        return Err(PyramidError::InvalidWeight(w));
    }
    Ok(())
}

/// Weighted precision: the weight share of TRUE claims among all evaluated
/// claims. An empty claim list scores 0 by convention.
pub fn weighted_precision(weights: &[f64], verdicts: &[Verdict]) -> Result<f64, PyramidError> {
    check_weights(weights, verdicts)?;
    if weights.is_empty() {
        return Ok(0.0);
    }
    let true_mass: f64 = weights
        .iter()
        .zip(verdicts)
        .filter(|(_, v)| v.is_true())
        .map(|(w, _)| w)
        .sum();
    let total_mass: f64 = weights.iter().sum();
    Ok(true_mass / total_mass)
}

/// Weighted recall at `gamma`: TRUE weight over the golden mass, scaled by
/// `1/gamma` and clamped to 1.
pub fn weighted_recall(
    weights: &[f64],
    verdicts: &[Verdict],
    golden_weight_mass: f64,
    gamma: f64,
) -> Result<f64, PyramidError> {
    check_weights(weights, verdicts)?;
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(PyramidError::InvalidGamma(gamma));
    }
    if golden_weight_mass <= 0.0 {
        return Err(PyramidError::EmptyGoldenSet);
    }
    let true_mass: f64 = weights
        .iter()
        .zip(verdicts)
        .filter(|(_, v)| v.is_true())
        .map(|(w, _)| w)
        .sum();
    Ok((true_mass / (gamma * golden_weight_mass)).min(1.0))
}

/// Weighted F1: harmonic mean of precision and recall, zero when nothing was
/// verified TRUE.
pub fn weighted_f1(precision: f64, recall: f64, count_true: usize) -> f64 {
    if count_true == 0 || precision + recall == 0.0 {
        return 0.0;
    }
    2.0 * precision * recall / (precision + recall)
}

/// The three weighted metrics for one evaluated response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedScores {
    pub prec_w: f64,
    pub recall_w: f64,
    pub f1: f64,
    pub gamma: f64,
    /// Number of claims adjudicated TRUE.
    pub count_true: usize,
    /// Number of claims adjudicated FALSE.
    pub count_false: usize,
}

impl WeightedScores {
    /// Computes all three metrics for one response's weighted verdicts.
    pub fn compute(
        weights: &[f64],
        verdicts: &[Verdict],
        golden_weight_mass: f64,
        gamma: f64,
    ) -> Result<Self, PyramidError> {
        check_weights(weights, verdicts)?;
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(PyramidError::InvalidGamma(gamma));
        }
        if golden_weight_mass <= 0.0 {
            return Err(PyramidError::EmptyGoldenSet);
        }
        let count_true = verdicts.iter().filter(|v| v.is_true()).count();
        let count_false = verdicts.len() - count_true;
        let prec_w = weighted_precision(weights, verdicts)?;
        let recall_w = if verdicts.is_empty() {
            0.0
        } else {
            weighted_recall(weights, verdicts, golden_weight_mass, gamma)?
        };
        let f1 = weighted_f1(prec_w, recall_w, count_true);
        Ok(Self {
            prec_w,
            recall_w,
            f1,
            gamma,
            count_true,
            count_false,
        })
    }
}

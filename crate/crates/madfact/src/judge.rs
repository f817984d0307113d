//! Judge: aggregates final-round verdicts into per-claim decisions by
//! majority vote, then computes per-response and per-dataset scores.
//!
//! The judge consumes structured verdicts only; explanations are stored in
//! the report but never modulate the vote. All operations here are pure
//! functions over immutable inputs.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

use crate::config::SystemConfig;
use crate::pyramid::{claim_weight, ClaimMatcher, Pyramid, PyramidError, WeightedScores};
use crate::types::{AtomicClaim, Verdict, VerdictRecord};

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error("cannot adjudicate an empty jury")]
    EmptyJury,
    #[error("verdict records span rounds {0} and {1}; adjudication takes one round")]
    MixedRounds(u32, u32),
    #[error("two verdict records share agent index {0}")]
    DuplicateAgent(usize),
    #[error("pyramid is for question '{pyramid}' but the response answers '{response}'")]
    PyramidMismatch { pyramid: String, response: String },
    #[error("decisions do not cover the response claims exactly: {0}")]
    DecisionMismatch(String),
    #[error("cannot average an empty dataset")]
    EmptyDataset,
    #[error(transparent)]
    Metrics(#[from] PyramidError),
    #[error("report I/O at {path}: {message}")]
    Io { path: String, message: String },
}

/// Tally of a jury's final-round votes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteCounts {
    pub true_votes: usize,
    pub false_votes: usize,
}

/// The adjudicated outcome for one claim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimDecision {
    pub claim_id: String,
    pub final_verdict: Verdict,
    pub vote_counts: VoteCounts,
    /// Set only on an even-jury tie, where the last-speaking agent's verdict
    /// decides.
    pub tie_broken: bool,
}

/// Majority vote over the final-round verdicts of one claim's debate.
///
/// Strict majority wins. On an even-jury tie the verdict of the
/// highest-indexed (last-speaking) agent is chosen, since that agent saw the
/// complete deliberation.
pub fn adjudicate(
    claim_id: &str,
    final_round_verdicts: &[VerdictRecord],
) -> Result<ClaimDecision, JudgeError> {
    if final_round_verdicts.is_empty() {
        return Err(JudgeError::EmptyJury);
    }
    let round = final_round_verdicts[0].round;
    let mut seen_agents = std::collections::HashSet::new();
    for record in final_round_verdicts {
        if record.round != round {
            return Err(JudgeError::MixedRounds(round, record.round));
        }
        if !seen_agents.insert(record.agent_index) {
            return Err(JudgeError::DuplicateAgent(record.agent_index));
        }
    }

    let true_votes = final_round_verdicts
        .iter()
        .filter(|r| r.verdict.is_true())
        .count();
    let false_votes = final_round_verdicts.len() - true_votes;

    let (final_verdict, tie_broken) = match true_votes.cmp(&false_votes) {
        std::cmp::Ordering::Greater => (Verdict::True, false),
        std::cmp::Ordering::Less => (Verdict::False, false),
        std::cmp::Ordering::Equal => {
            let last = final_round_verdicts
                .iter()
                .max_by_key(|r| r.agent_index)
                .expect("non-empty");
            (last.verdict, true)
        }
    };

    Ok(ClaimDecision {
        claim_id: claim_id.to_string(),
        final_verdict,
        vote_counts: VoteCounts {
            true_votes,
            false_votes,
        },
        tie_broken,
    })
}

/// Per-response scoring result: the decisions plus the weighted metrics at
/// one gamma. The response score is the weighted F1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseScore {
    pub response_id: String,
    pub decisions: Vec<ClaimDecision>,
    pub scores: WeightedScores,
    /// True when the response decomposed into zero claims.
    pub degenerate_input: bool,
}

/// Scores one response's decisions against the question's pyramid.
///
/// `claims` and `decisions` must cover the response exactly once each, in
/// the same order.
pub fn score_response(
    response_id: &str,
    question_id: &str,
    claims: &[AtomicClaim],
    decisions: &[ClaimDecision],
    pyramid: &Pyramid,
    matcher: &dyn ClaimMatcher,
    gamma: f64,
) -> Result<ResponseScore, JudgeError> {
    if pyramid.question_id != question_id {
        return Err(JudgeError::PyramidMismatch {
            pyramid: pyramid.question_id.clone(),
            response: question_id.to_string(),
        });
    }
    if claims.len() != decisions.len() {
        return Err(JudgeError::DecisionMismatch(format!(
            "{} claims vs {} decisions",
            claims.len(),
            decisions.len()
        )));
    }
    for (claim, decision) in claims.iter().zip(decisions) {
        if claim.id != decision.claim_id {
            return Err(JudgeError::DecisionMismatch(format!(
                "claim '{}' paired with decision for '{}'",
                claim.id, decision.claim_id
            )));
        }
    }

    let mut weights = Vec::with_capacity(claims.len());
    for claim in claims {
        weights.push(claim_weight(pyramid, &claim.text, matcher)?);
    }
    let verdicts: Vec<Verdict> = decisions.iter().map(|d| d.final_verdict).collect();
    let scores =
        WeightedScores::compute(&weights, &verdicts, pyramid.golden_weight_mass(), gamma)?;

    Ok(ResponseScore {
        response_id: response_id.to_string(),
        decisions: decisions.to_vec(),
        scores,
        degenerate_input: claims.is_empty(),
    })
}

/// Dataset score: the arithmetic mean of the per-response scores.
pub fn score_dataset(response_scores: &[ResponseScore]) -> Result<f64, JudgeError> {
    if response_scores.is_empty() {
        return Err(JudgeError::EmptyDataset);
    }
    let sum: f64 = response_scores.iter().map(|s| s.scores.f1).sum();
    Ok(sum / response_scores.len() as f64)
}

/// Scores for one response across every requested gamma.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseReport {
    pub response_id: String,
    pub question_id: String,
    pub decisions: Vec<ClaimDecision>,
    pub degenerate_input: bool,
    /// One entry per requested gamma, in request order.
    pub per_gamma: Vec<WeightedScores>,
}

/// The JSON score report emitted per run: per-claim decisions, per-response
/// weighted scores, the dataset mean per gamma, and the config echo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub config: SystemConfig,
    pub gammas: Vec<f64>,
    pub responses: Vec<ResponseReport>,
    /// Mean weighted F1 per gamma, in `gammas` order.
    pub dataset_means: Vec<f64>,
}

impl ScoreReport {
    /// Assembles the report from per-gamma response scores, keyed as
    /// `per_response[response_index][gamma_index]`.
    pub fn assemble(
        config: SystemConfig,
        gammas: Vec<f64>,
        question_ids: Vec<String>,
        per_response: Vec<Vec<ResponseScore>>,
    ) -> Result<Self, JudgeError> {
        let mut responses = Vec::with_capacity(per_response.len());
        for (scores, question_id) in per_response.iter().zip(question_ids) {
            let first = scores.first().ok_or(JudgeError::EmptyDataset)?;
            responses.push(ResponseReport {
                response_id: first.response_id.clone(),
                question_id,
                decisions: first.decisions.clone(),
                degenerate_input: first.degenerate_input,
                per_gamma: scores.iter().map(|s| s.scores.clone()).collect(),
            });
        }
        let mut dataset_means = Vec::with_capacity(gammas.len());
        for gamma_index in 0..gammas.len() {
            let column: Vec<ResponseScore> = per_response
                .iter()
                .map(|scores| scores[gamma_index].clone())
                .collect();
            dataset_means.push(score_dataset(&column)?);
        }
        Ok(Self {
            config,
            gammas,
            responses,
            dataset_means,
        })
    }
}

fn csv_field(value: &str) -> String {
    if value.contains([',', '"', '\n']) {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_string()
    }
}

/// Writes the flat CSV companion of a [`ScoreReport`]: one row per response,
/// precision plus recall/F1 columns per gamma.
pub fn write_scores_csv(report: &ScoreReport, path: impl AsRef<Path>) -> Result<(), JudgeError> {
    let path = path.as_ref();
    let io_err = |e: std::io::Error| JudgeError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut file = std::fs::File::create(path).map_err(io_err)?;

    let mut header = String::from("response_id,prec_w");
    for gamma in &report.gammas {
        header.push_str(&format!(",recall_w@{gamma},f1@{gamma}"));
    }
    writeln!(file, "{header}").map_err(io_err)?;

    for response in &report.responses {
        let prec = response.per_gamma.first().map_or(0.0, |s| s.prec_w);
        let mut row = format!("{},{:.6}", csv_field(&response.response_id), prec);
        for scores in &response.per_gamma {
            row.push_str(&format!(",{:.6},{:.6}", scores.recall_w, scores.f1));
        }
        writeln!(file, "{row}").map_err(io_err)?;
    }

    let mut mean_row = String::from("DATASET_MEAN,");
    for (i, mean) in report.dataset_means.iter().enumerate() {
        if i > 0 {
            mean_row.push(',');
        }
        mean_row.push_str(&format!(",{mean:.6}"));
    }
    writeln!(file, "{mean_row}").map_err(io_err)?;
    Ok(())
}

/// Groups verdict-record lookups for report assembly: claim id -> records.
pub fn verdicts_by_claim(records: &[(String, VerdictRecord)]) -> HashMap<String, Vec<VerdictRecord>> {
    let mut map: HashMap<String, Vec<VerdictRecord>> = HashMap::new();
    for (claim_id, record) in records {
        map.entry(claim_id.clone()).or_default().push(record.clone());
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pyramid::{build_pyramid, ExactNormalizedMatcher, GoldenEntry, GoldenSet, WeightRule};

    fn records(verdicts: &[Verdict]) -> Vec<VerdictRecord> {
        verdicts
            .iter()
            .enumerate()
            .map(|(i, &v)| VerdictRecord::new(v, format!("e{i}"), i, 2))
            .collect()
    }

    /// Independent brute-force oracle: count, then break ties with the
    /// last-position verdict.
    fn majority_oracle(verdicts: &[Verdict]) -> (Verdict, bool) {
        let trues = verdicts.iter().filter(|v| v.is_true()).count();
        let falses = verdicts.len() - trues;
        if trues > falses {
            (Verdict::True, false)
        } else if falses > trues {
            (Verdict::False, false)
        } else {
            (*verdicts.last().unwrap(), true)
        }
    }

    #[test]
    fn strict_majority_wins() {
        let decision = adjudicate(
            "c1",
            &records(&[Verdict::True, Verdict::True, Verdict::False]),
        )
        .unwrap();
        assert_eq!(decision.final_verdict, Verdict::True);
        assert_eq!(decision.vote_counts.true_votes, 2);
        assert_eq!(decision.vote_counts.false_votes, 1);
        assert!(!decision.tie_broken);
    }

    #[test]
    fn unanimous_false() {
        let decision = adjudicate("c1", &records(&[Verdict::False; 3])).unwrap();
        assert_eq!(decision.final_verdict, Verdict::False);
        assert_eq!(decision.vote_counts, VoteCounts { true_votes: 0, false_votes: 3 });
    }

    #[test]
    fn even_tie_breaks_to_last_speaker() {
        let decision = adjudicate(
            "c1",
            &records(&[Verdict::True, Verdict::False, Verdict::True, Verdict::False]),
        )
        .unwrap();
        assert_eq!(decision.final_verdict, Verdict::False);
        assert!(decision.tie_broken);
    }

    #[test]
    fn empty_jury_rejected() {
        assert!(matches!(adjudicate("c1", &[]), Err(JudgeError::EmptyJury)));
    }

    #[test]
    fn mixed_rounds_rejected() {
        let mut recs = records(&[Verdict::True, Verdict::True]);
        recs[1].round = 1;
        assert!(matches!(
            adjudicate("c1", &recs),
            Err(JudgeError::MixedRounds(2, 1))
        ));
    }

    #[test]
    fn duplicate_agent_rejected() {
        let mut recs = records(&[Verdict::True, Verdict::True]);
        recs[1].agent_index = 0;
        assert!(matches!(
            adjudicate("c1", &recs),
            Err(JudgeError::DuplicateAgent(0))
        ));
    }

    #[test]
    fn matches_brute_force_oracle_for_all_vectors_up_to_five() {
        for n in 1..=5usize {
            for bits in 0..(1u32 << n) {
                let verdicts: Vec<Verdict> = (0..n)
                    .map(|i| Verdict::from_bool(bits & (1 << i) != 0))
                    .collect();
                let decision = adjudicate("c", &records(&verdicts)).unwrap();
                let (expected, tie) = majority_oracle(&verdicts);
                assert_eq!(decision.final_verdict, expected, "N={n} bits={bits:b}");
                assert_eq!(decision.tie_broken, tie, "N={n} bits={bits:b}");
            }
        }
    }

    #[test]
    fn non_tied_decisions_are_permutation_invariant() {
        let verdicts = [Verdict::True, Verdict::False, Verdict::True];
        let baseline = adjudicate("c", &records(&verdicts)).unwrap().final_verdict;
        // agent order permuted, votes identical
        let mut permuted = records(&verdicts);
        permuted.swap(0, 2);
        let decision = adjudicate("c", &permuted).unwrap();
        assert_eq!(decision.final_verdict, baseline);
    }

    fn test_pyramid() -> Pyramid {
        let golden = GoldenSet {
            entries: vec![
                GoldenEntry {
                    text: "core fact".into(),
                    frequency: 3,
                    member_texts: vec!["core fact".into()],
                },
                GoldenEntry {
                    text: "common fact".into(),
                    frequency: 2,
                    member_texts: vec!["common fact".into()],
                },
                GoldenEntry {
                    text: "rare fact".into(),
                    frequency: 1,
                    member_texts: vec!["rare fact".into()],
                },
            ],
        };
        // weights 4 + 3 + 2 = mass 9
        build_pyramid("q1", &golden, 3, &WeightRule::default(), "exact-normalized", vec![]).unwrap()
    }

    fn decision(claim_id: &str, verdict: Verdict) -> ClaimDecision {
        ClaimDecision {
            claim_id: claim_id.into(),
            final_verdict: verdict,
            vote_counts: VoteCounts { true_votes: 3, false_votes: 0 },
            tie_broken: false,
        }
    }

    #[test]
    fn perfect_response_scores_one() {
        let pyramid = test_pyramid();
        let claims = vec![
            AtomicClaim::new("c1", "core fact", "r1"),
            AtomicClaim::new("c2", "common fact", "r1"),
            AtomicClaim::new("c3", "rare fact", "r1"),
        ];
        let decisions = vec![
            decision("c1", Verdict::True),
            decision("c2", Verdict::True),
            decision("c3", Verdict::True),
        ];
        let score = score_response(
            "r1", "q1", &claims, &decisions, &pyramid, &ExactNormalizedMatcher, 1.0,
        )
        .unwrap();
        assert!((score.scores.f1 - 1.0).abs() < 1e-12);
        assert!(!score.degenerate_input);
    }

    #[test]
    fn zero_true_decisions_score_zero() {
        let pyramid = test_pyramid();
        let claims = vec![AtomicClaim::new("c1", "core fact", "r1")];
        let decisions = vec![decision("c1", Verdict::False)];
        let score = score_response(
            "r1", "q1", &claims, &decisions, &pyramid, &ExactNormalizedMatcher, 1.0,
        )
        .unwrap();
        assert_eq!(score.scores.f1, 0.0);
    }

    #[test]
    fn worked_example_yields_f1_point_seven() {
        // claims hit weights 4, 3 and an unmatched one would hit 1; here we
        // mirror the [4,3,2] / [T,T,F] instance with golden mass 9 + 2 = 11
        let golden = GoldenSet {
            entries: vec![
                GoldenEntry { text: "w4".into(), frequency: 3, member_texts: vec!["w4".into()] },
                GoldenEntry { text: "w3".into(), frequency: 2, member_texts: vec!["w3".into()] },
                GoldenEntry { text: "w2a".into(), frequency: 1, member_texts: vec!["w2a".into()] },
                GoldenEntry { text: "w2b".into(), frequency: 1, member_texts: vec!["w2b".into()] },
            ],
        };
        let pyramid =
            build_pyramid("q1", &golden, 3, &WeightRule::default(), "exact-normalized", vec![])
                .unwrap();
        assert_eq!(pyramid.golden_weight_mass(), 11.0);

        let claims = vec![
            AtomicClaim::new("c1", "w4", "r1"),
            AtomicClaim::new("c2", "w3", "r1"),
            AtomicClaim::new("c3", "w2a", "r1"),
        ];
        let decisions = vec![
            decision("c1", Verdict::True),
            decision("c2", Verdict::True),
            decision("c3", Verdict::False),
        ];
        let score = score_response(
            "r1", "q1", &claims, &decisions, &pyramid, &ExactNormalizedMatcher, 1.0,
        )
        .unwrap();
        assert!((score.scores.prec_w - 7.0 / 9.0).abs() < 1e-12);
        assert!((score.scores.recall_w - 7.0 / 11.0).abs() < 1e-12);
        assert!((score.scores.f1 - 0.7).abs() < 1e-12);
    }

    #[test]
    fn pyramid_question_mismatch_rejected() {
        let pyramid = test_pyramid();
        let err = score_response("r1", "q2", &[], &[], &pyramid, &ExactNormalizedMatcher, 1.0)
            .unwrap_err();
        assert!(matches!(err, JudgeError::PyramidMismatch { .. }), "{err}");
    }

    #[test]
    fn decision_claim_misalignment_rejected() {
        let pyramid = test_pyramid();
        let claims = vec![AtomicClaim::new("c1", "core fact", "r1")];
        let decisions = vec![decision("other", Verdict::True)];
        let err = score_response(
            "r1", "q1", &claims, &decisions, &pyramid, &ExactNormalizedMatcher, 1.0,
        )
        .unwrap_err();
        assert!(matches!(err, JudgeError::DecisionMismatch(_)), "{err}");
    }

    fn response_score(f1: f64) -> ResponseScore {
        ResponseScore {
            response_id: "r".into(),
            decisions: vec![],
            scores: WeightedScores {
                prec_w: f1,
                recall_w: f1,
                f1,
                gamma: 1.0,
                count_true: 1,
                count_false: 0,
            },
            degenerate_input: false,
        }
    }

    #[test]
    fn dataset_score_is_the_mean() {
        let scores = vec![response_score(1.0), response_score(0.5), response_score(0.0)];
        assert!((score_dataset(&scores).unwrap() - 0.5).abs() < 1e-12);
        assert!((score_dataset(&scores[..1]).unwrap() - 1.0).abs() < 1e-12);
        let single = vec![response_score(0.7)];
        assert!((score_dataset(&single).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn empty_dataset_rejected() {
        assert!(matches!(score_dataset(&[]), Err(JudgeError::EmptyDataset)));
    }

    #[test]
    fn dataset_mean_bounded_by_inputs() {
        let scores: Vec<ResponseScore> = [0.2, 0.9, 0.4].iter().map(|&f| response_score(f)).collect();
        let mean = score_dataset(&scores).unwrap();
        assert!((0.2..=0.9).contains(&mean));
        let equal: Vec<ResponseScore> = vec![response_score(0.6); 3];
        assert!((score_dataset(&equal).unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn csv_report_has_dual_gamma_columns() {
        let report = ScoreReport {
            config: SystemConfig::default(),
            gammas: vec![1.0, 0.8],
            responses: vec![ResponseReport {
                response_id: "r1".into(),
                question_id: "q1".into(),
                decisions: vec![],
                degenerate_input: false,
                per_gamma: vec![
                    WeightedScores {
                        prec_w: 0.9,
                        recall_w: 0.5,
                        f1: 0.6428,
                        gamma: 1.0,
                        count_true: 2,
                        count_false: 1,
                    },
                    WeightedScores {
                        prec_w: 0.9,
                        recall_w: 0.625,
                        f1: 0.7377,
                        gamma: 0.8,
                        count_true: 2,
                        count_false: 1,
                    },
                ],
            }],
            dataset_means: vec![0.6428, 0.7377],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        write_scores_csv(&report, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(header, "response_id,prec_w,recall_w@1,f1@1,recall_w@0.8,f1@0.8");
        assert!(text.lines().nth(1).unwrap().starts_with("r1,0.9"));
    }
}

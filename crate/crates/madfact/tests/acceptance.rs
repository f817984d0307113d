//! Acceptance suite: one test per criterion, each printing a pass line.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use madfact::config::{apply_ablation, default_roles, AblationVariant, DebateRule, SystemConfig};
use madfact::harness::{
    class_metrics, run_benchmark, stratified_sample, BenchmarkOptions, LabeledClaim,
};
use madfact::judge::adjudicate;
use madfact::jury::DebateEngine;
use madfact::providers::mock::{MockChatProvider, MockSearchProvider};
use madfact::providers::{Clock, ProviderSet};
use madfact::pyramid::{
    build_pyramid, weighted_f1, weighted_precision, weighted_recall, GoldenEntry, GoldenSet,
    WeightRule, WeightedScores,
};
use madfact::text::normalize_key;
use madfact::types::{AtomicClaim, Verdict, VerdictRecord};

fn pass(number: u32, name: &str, started: Instant, budget: Duration) {
    let elapsed = started.elapsed();
    assert!(
        elapsed <= budget,
        "criterion {number} exceeded its {budget:?} budget: {elapsed:?}"
    );
    println!("acceptance {number} ({name}): PASS in {elapsed:?}");
}

fn verdict_records(verdicts: &[Verdict]) -> Vec<VerdictRecord> {
    verdicts
        .iter()
        .enumerate()
        .map(|(i, &v)| VerdictRecord::new(v, format!("e{i}"), i, 1))
        .collect()
}

/// Criterion 1: adjudication agrees with an exhaustive brute-force majority
/// oracle (last-speaker tie-break) on all 2^N vectors for N = 1..5.
#[test]
fn acceptance_1_vote_oracle() {
    let started = Instant::now();
    for n in 1..=5usize {
        for bits in 0u32..(1 << n) {
            let verdicts: Vec<Verdict> = (0..n)
                .map(|i| Verdict::from_bool(bits & (1 << i) != 0))
                .collect();

            // independent oracle: enumerate, count, break ties on the last slot
            let trues = verdicts.iter().filter(|v| v.is_true()).count();
            let falses = n - trues;
            let (expected, expected_tie) = if trues > falses {
                (Verdict::True, false)
            } else if falses > trues {
                (Verdict::False, false)
            } else {
                (*verdicts.last().unwrap(), true)
            };

            let decision = adjudicate("claim", &verdict_records(&verdicts)).unwrap();
            assert_eq!(decision.final_verdict, expected, "N={n}, bits={bits:05b}");
            assert_eq!(decision.tie_broken, expected_tie, "N={n}, bits={bits:05b}");
            assert_eq!(decision.vote_counts.true_votes, trues);
            assert_eq!(decision.vote_counts.false_votes, falses);
        }
    }
    pass(1, "vote oracle", started, Duration::from_secs(1));
}

/// Criterion 2: the three weighted metrics agree with an independent
/// direct-summation oracle within 1e-12 over 1,000 random instances.
#[test]
fn acceptance_2_metric_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(42);

    for case in 0..1000 {
        let n = rng.gen_range(1..=10usize);
        let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=4u8) as f64).collect();
        let verdicts: Vec<Verdict> = (0..n).map(|_| Verdict::from_bool(rng.gen())).collect();
        let mass: f64 = rng.gen_range(1.0..50.0);
        let gamma = if rng.gen() { 0.8 } else { 1.0 };

        // direct-summation oracle, written independently of the library path
        let mut true_sum = 0.0f64;
        let mut total_sum = 0.0f64;
        let mut count_true = 0usize;
        for (w, v) in weights.iter().zip(&verdicts) {
            total_sum += w;
            if v.is_true() {
                true_sum += w;
                count_true += 1;
            }
        }
        let oracle_prec = true_sum / total_sum;
        let mut oracle_recall = true_sum / (gamma * mass);
        if oracle_recall > 1.0 {
            oracle_recall = 1.0;
        }
        let oracle_f1 = if count_true == 0 || oracle_prec + oracle_recall == 0.0 {
            0.0
        } else {
            2.0 * oracle_prec * oracle_recall / (oracle_prec + oracle_recall)
        };

        let prec = weighted_precision(&weights, &verdicts).unwrap();
        let recall = weighted_recall(&weights, &verdicts, mass, gamma).unwrap();
        let f1 = weighted_f1(prec, recall, count_true);
        assert!((prec - oracle_prec).abs() < 1e-12, "case {case}: precision");
        assert!((recall - oracle_recall).abs() < 1e-12, "case {case}: recall");
        assert!((f1 - oracle_f1).abs() < 1e-12, "case {case}: f1");

        let bundle = WeightedScores::compute(&weights, &verdicts, mass, gamma).unwrap();
        assert!((bundle.prec_w - oracle_prec).abs() < 1e-12);
        assert!((bundle.recall_w - oracle_recall).abs() < 1e-12);
        assert!((bundle.f1 - oracle_f1).abs() < 1e-12);
        assert_eq!(bundle.count_true, count_true);
    }
    pass(2, "metric oracle", started, Duration::from_secs(5));
}

/// Criterion 3: pyramid placement reproduces the published weight ladder for
/// three levels exactly: f=3 -> 4, f=2 -> 3, f=1 -> 2.
#[test]
fn acceptance_3_pyramid_constants() {
    let started = Instant::now();
    let golden = GoldenSet {
        entries: (1..=3)
            .map(|f| GoldenEntry {
                text: format!("claim with frequency {f}"),
                frequency: f,
                member_texts: vec![format!("claim with frequency {f}")],
            })
            .collect(),
    };
    let pyramid = build_pyramid("q", &golden, 3, &WeightRule::default(), "exact", vec![]).unwrap();
    for entry in &pyramid.entries {
        let expected_layer = 3 - entry.frequency + 1;
        assert_eq!(entry.layer, expected_layer);
        let expected_weight = match entry.frequency {
            3 => 4.0,
            2 => 3.0,
            1 => 2.0,
            _ => unreachable!(),
        };
        assert_eq!(entry.weight, expected_weight, "f={} exact", entry.frequency);
    }
    pass(3, "pyramid weight constants", started, Duration::from_secs(1));
}

/// Criterion 4: flipping the highest-weight TRUE claim always yields
/// strictly lower weighted precision than flipping the lowest-weight one.
#[test]
fn acceptance_4_core_error_dominance() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let ladder = [1.0f64, 2.0, 3.0, 4.0];

    for _ in 0..500 {
        let n = rng.gen_range(2..=4usize);
        let mut pool = ladder.to_vec();
        pool.shuffle(&mut rng);
        let weights: Vec<f64> = pool.into_iter().take(n).collect(); // distinct by construction

        let hi = weights
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let lo = weights
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;

        let flip = |index: usize| -> f64 {
            let verdicts: Vec<Verdict> = (0..n)
                .map(|i| Verdict::from_bool(i != index))
                .collect();
            weighted_precision(&weights, &verdicts).unwrap()
        };
        assert!(
            flip(hi) < flip(lo),
            "weights {weights:?}: core-claim error must dominate"
        );
    }
    pass(4, "core-error dominance", started, Duration::from_secs(1));
}

fn protocol_config(n: usize, rounds: u32, rule: DebateRule) -> SystemConfig {
    SystemConfig {
        jury_size: n,
        rounds,
        rule,
        theta: 0.8,
        roles: default_roles(n),
        evaluator_backends: vec!["eval".into(); n],
        clerk_backend: "clerk".into(),
        judge_backend: "judge".into(),
        gamma: 1.0,
        ablation: AblationVariant::None,
    }
}

fn protocol_rig(replies: &[&str]) -> (ProviderSet, Arc<MockChatProvider>, Arc<MockSearchProvider>) {
    let chat = Arc::new(MockChatProvider::new());
    chat.script("eval", replies.to_vec());
    let search = Arc::new(MockSearchProvider::new(Clock::frozen_epoch()));
    let providers = ProviderSet::new()
        .register_chat("eval", Arc::clone(&chat) as Arc<MockChatProvider>)
        .with_search(Arc::clone(&search) as Arc<MockSearchProvider>);
    (providers, chat, search)
}

fn test_claim() -> AtomicClaim {
    AtomicClaim::new("c1", "The Zhuang are the largest ethnic minority in China.", "r1")
}

/// Criterion 5: protocol conformance under scripted mocks for the three
/// debate rules, the no-debate ablation, and query deduplication.
#[test]
fn acceptance_5_protocol_conformance() {
    let started = Instant::now();

    // Rule 2 (mandatory search): exactly N search events, all in round 1.
    let config = protocol_config(3, 2, DebateRule::MandatorySearch);
    let (providers, _, search) = protocol_rig(&[
        "q one", "TRUE|a", "q two", "TRUE|b", "q three", "TRUE|c", "TRUE|d", "TRUE|e", "TRUE|f",
    ]);
    let transcript = DebateEngine::new(&config, &providers)
        .run_debate(&test_claim())
        .unwrap();
    assert_eq!(transcript.search_events.len(), 3);
    assert!(transcript.search_events.iter().all(|e| e.round == 1));
    assert_eq!(search.call_count(), 3);

    // Rule 3 (adaptive): terminates after round 1 iff round 1 is unanimous.
    let config = protocol_config(3, 2, DebateRule::Adaptive);
    let (providers, _, _) =
        protocol_rig(&["CONF:0.9|TRUE|a", "CONF:0.9|TRUE|b", "CONF:0.9|TRUE|c"]);
    let unanimous = DebateEngine::new(&config, &providers)
        .run_debate(&test_claim())
        .unwrap();
    assert_eq!(unanimous.rounds_executed, 1);

    let (providers, _, _) = protocol_rig(&[
        "CONF:0.9|TRUE|a",
        "CONF:0.9|FALSE|b",
        "CONF:0.9|TRUE|c",
        "q1",
        "TRUE|d",
        "q2",
        "TRUE|e",
        "q3",
        "TRUE|f",
    ]);
    let split = DebateEngine::new(&config, &providers)
        .run_debate(&test_claim())
        .unwrap();
    assert_eq!(split.rounds_executed, 2);

    // Rule 1 (free debate): all confidences at or above theta perform zero
    // searches.
    let config = protocol_config(3, 2, DebateRule::FreeDebate);
    let (providers, _, search) = protocol_rig(&[
        "CONF:0.80|TRUE|a",
        "CONF:0.95|TRUE|b",
        "CONF:0.99|FALSE|c",
        "TRUE|d",
        "TRUE|e",
        "FALSE|f",
    ]);
    let transcript = DebateEngine::new(&config, &providers)
        .run_debate(&test_claim())
        .unwrap();
    assert_eq!(transcript.search_events.len(), 0);
    assert_eq!(search.call_count(), 0);
    assert_eq!(transcript.pool.len(), 6);

    // NoDebate ablation forces a single executed round regardless of rule.
    for rule in [DebateRule::FreeDebate, DebateRule::MandatorySearch, DebateRule::Adaptive] {
        let config = apply_ablation(protocol_config(2, 2, rule), AblationVariant::NoDebate);
        let (providers, _, _) = protocol_rig(&[
            "CONF:0.9|TRUE|a",
            "CONF:0.9|TRUE|b",
            "TRUE|c",
            "TRUE|d",
            "TRUE|e",
            "TRUE|f",
        ]);
        if rule == DebateRule::MandatorySearch {
            // round 1 retrieval consumes a query before each verdict
            let (p2, _, _) = protocol_rig(&["q1", "TRUE|a", "q2", "TRUE|b"]);
            let transcript = DebateEngine::new(&config, &p2).run_debate(&test_claim()).unwrap();
            assert_eq!(transcript.rounds_executed, 1, "rule {rule:?}");
            continue;
        }
        let transcript = DebateEngine::new(&config, &providers)
            .run_debate(&test_claim())
            .unwrap();
        assert_eq!(transcript.rounds_executed, 1, "rule {rule:?}");
    }

    // Query dedup: a debate never admits two normalized-equal queries.
    let config = protocol_config(2, 1, DebateRule::MandatorySearch);
    let (providers, _, search) = protocol_rig(&[
        "Zhuang Population",
        "TRUE|a",
        "zhuang  population", // duplicate after normalization
        "zhuang brocade",
        "TRUE|b",
    ]);
    let transcript = DebateEngine::new(&config, &providers)
        .run_debate(&test_claim())
        .unwrap();
    assert_eq!(search.call_count(), 2);
    let normalized: Vec<String> = transcript
        .kb
        .entries()
        .iter()
        .map(|r| normalize_key(&r.query))
        .collect();
    let mut deduped = normalized.clone();
    deduped.sort();
    deduped.dedup();
    assert_eq!(normalized.len(), deduped.len());
    assert_eq!(transcript.kb.issued_queries().len(), transcript.kb.len());

    pass(5, "protocol conformance", started, Duration::from_secs(1));
}

/// Criterion 6: a scripted perfect predictor yields P = R = F1 = 1.0 for
/// both classes on a fixture shaped like a 177/56 corpus.
#[test]
fn acceptance_6_classification_harness() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();

    let claims: Vec<LabeledClaim> = (0..177)
        .map(|i| (format!("true claim {i}"), Verdict::True))
        .chain((0..56).map(|i| (format!("false claim {i}"), Verdict::False)))
        .enumerate()
        .map(|(index, (text, gold))| LabeledClaim {
            claim: AtomicClaim::new(format!("factoolqa-{index:05}"), text, "factoolqa"),
            gold_label: gold,
            dataset_id: "factoolqa".into(),
        })
        .collect();
    assert_eq!(claims.len(), 233);

    let replies: Vec<String> = claims
        .iter()
        .map(|c| format!("CONF:0.95|{}|as labeled", c.gold_label))
        .collect();
    let reply_refs: Vec<&str> = replies.iter().map(String::as_str).collect();
    let (providers, _, _) = protocol_rig(&reply_refs);

    let config = protocol_config(1, 1, DebateRule::FreeDebate);
    let report = run_benchmark(
        &claims,
        &config,
        &providers,
        &BenchmarkOptions::new(dir.path()),
    )
    .unwrap();

    assert_eq!(report.classification.confusion.total(), 233);
    for metrics in [report.classification.positive, report.classification.negative] {
        assert_eq!(metrics.precision, 1.0);
        assert_eq!(metrics.recall, 1.0);
        assert_eq!(metrics.f1, 1.0);
    }
    assert!(report.classification.zero_denominator.is_empty());

    // cross-check through the bare metric operation as well
    let gold: Vec<Verdict> = claims.iter().map(|c| c.gold_label).collect();
    let perfect = class_metrics(&gold, &gold).unwrap();
    assert_eq!(perfect.positive.f1, 1.0);
    assert_eq!(perfect.negative.f1, 1.0);

    pass(6, "classification harness", started, Duration::from_secs(5));
}

/// Criterion 7: stratified sampling of a 3,581/42 corpus at n_true = 100
/// yields exactly 142 claims, retains all 42 FALSE ones, and is
/// seed-deterministic.
#[test]
fn acceptance_7_stratified_sampling() {
    let started = Instant::now();
    let claims: Vec<LabeledClaim> = (0..3581)
        .map(|i| (format!("t{i}"), Verdict::True))
        .chain((0..42).map(|i| (format!("f{i}"), Verdict::False)))
        .enumerate()
        .map(|(index, (text, gold))| LabeledClaim {
            claim: AtomicClaim::new(format!("bingcheck-{index:05}"), text, "bingcheck"),
            gold_label: gold,
            dataset_id: "bingcheck".into(),
        })
        .collect();

    let sample = stratified_sample(&claims, 100, 2024).unwrap();
    assert_eq!(sample.len(), 142);
    let false_count = sample.iter().filter(|c| !c.gold_label.is_true()).count();
    assert_eq!(false_count, 42, "every FALSE claim retained");

    let again = stratified_sample(&claims, 100, 2024).unwrap();
    assert_eq!(sample, again, "same seed, same sample");

    pass(7, "stratified sampling", started, Duration::from_secs(1));
}

fn collect_files(root: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(dir: &Path, root: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        entries.sort();
        for path in entries {
            if path.is_dir() {
                walk(&path, root, out);
            } else {
                let relative = path.strip_prefix(root).unwrap().display().to_string();
                out.push((relative, std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out
}

/// Criterion 8: `madfact verify --mock` twice on the same fixtures produces
/// byte-identical transcripts and reports under a frozen clock.
#[test]
fn acceptance_8_end_to_end_determinism() {
    let started = Instant::now();
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/verify_demo");
    let work = tempfile::tempdir().unwrap();

    let run = |out: &Path| {
        let status = Command::new(env!("CARGO_BIN_EXE_madfact"))
            .args([
                "verify",
                "--response",
                fixtures.join("response.json").to_str().unwrap(),
                "--config",
                fixtures.join("config.json").to_str().unwrap(),
                "--mock",
                fixtures.to_str().unwrap(),
                "--frozen-clock",
                "--seed",
                "0",
                "--out",
                out.to_str().unwrap(),
            ])
            .status()
            .expect("madfact binary runs");
        assert!(status.success(), "verify must exit 0");
    };

    let out1 = work.path().join("first");
    let out2 = work.path().join("second");
    run(&out1);
    run(&out2);

    let files1 = collect_files(&out1);
    let files2 = collect_files(&out2);
    assert!(!files1.is_empty());
    let names1: Vec<&String> = files1.iter().map(|(n, _)| n).collect();
    let names2: Vec<&String> = files2.iter().map(|(n, _)| n).collect();
    assert_eq!(names1, names2, "identical file trees");
    for ((name, bytes1), (_, bytes2)) in files1.iter().zip(&files2) {
        assert_eq!(bytes1, bytes2, "file {name} must be byte-identical");
    }
    // the run actually debated the decomposed claims
    assert!(names1.iter().any(|n| n.contains("transcripts")));
    assert!(names1.iter().any(|n| n.ends_with("decisions.jsonl")));

    pass(8, "end-to-end determinism", started, Duration::from_secs(10));
}

/// Criterion 9: an interrupted mock benchmark resumed in the same run
/// directory re-executes only the unfinished claims, and a completed run
/// re-invoked performs zero provider calls.
#[test]
fn acceptance_9_resume_safety() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let claims: Vec<LabeledClaim> = [Verdict::True, Verdict::False, Verdict::True, Verdict::False]
        .iter()
        .enumerate()
        .map(|(i, &gold)| LabeledClaim {
            claim: AtomicClaim::new(format!("c{i}"), format!("claim {i}"), "src"),
            gold_label: gold,
            dataset_id: "resume".into(),
        })
        .collect();
    let config = protocol_config(1, 1, DebateRule::FreeDebate);

    // interruption: the first invocation only sees claims 1 and 2
    let (providers, chat, _) = protocol_rig(&["CONF:0.9|TRUE|a", "CONF:0.9|FALSE|b"]);
    run_benchmark(&claims[..2], &config, &providers, &BenchmarkOptions::new(dir.path())).unwrap();
    assert_eq!(chat.call_count(), 2);

    // resume: all four claims, but only the two unfinished ones run
    let (providers, chat, _) = protocol_rig(&["CONF:0.9|TRUE|c", "CONF:0.9|FALSE|d"]);
    let report =
        run_benchmark(&claims, &config, &providers, &BenchmarkOptions::new(dir.path())).unwrap();
    assert_eq!(report.resumed, 2);
    assert_eq!(report.newly_evaluated, 2);
    assert_eq!(chat.call_count(), 2, "exactly the 2 unfinished debates ran");
    assert_eq!(report.classification.confusion.total(), 4);
    assert_eq!(report.classification.positive.f1, 1.0);

    // completed run re-invoked: zero provider calls
    let (providers, chat, search) = protocol_rig(&[]);
    let report =
        run_benchmark(&claims, &config, &providers, &BenchmarkOptions::new(dir.path())).unwrap();
    assert_eq!(report.newly_evaluated, 0);
    assert_eq!(chat.call_count(), 0);
    assert_eq!(search.call_count(), 0);

    pass(9, "resume safety", started, Duration::from_secs(10));
}

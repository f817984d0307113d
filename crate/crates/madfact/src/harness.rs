//! Benchmark harness: labeled-claim corpora, stratified sampling, per-class
//! classification metrics, and resumable verification runs.
//!
//! A run directory holds `config.json`, `transcripts/`, the append-only
//! `predictions.jsonl` resume index, `failures.jsonl`, and `report.json`.
//! Claims already adjudicated (keyed by content hash) are skipped on
//! restart; a completed run re-invoked performs zero provider calls.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{HashMap, VecDeque};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use thiserror::Error;

use crate::config::{validate_config, ConfigError, SystemConfig};
use crate::judge::{adjudicate, JudgeError};
use crate::jury::DebateEngine;
use crate::providers::ProviderSet;
use crate::text::sanitize_id;
use crate::types::{AtomicClaim, Verdict};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("dataset file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("I/O at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    ParseError {
        path: String,
        line: usize,
        message: String,
    },
    #[error("requested {requested} TRUE claims but only {available} are available")]
    InsufficientTrue { requested: usize, available: usize },
    #[error("predictions and gold labels differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("cannot compute metrics over empty inputs")]
    EmptyInput,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Judge(#[from] JudgeError),
}

/// One gold-labeled atomic claim from a fact-checking corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledClaim {
    pub claim: AtomicClaim,
    pub gold_label: Verdict,
    pub dataset_id: String,
}

#[derive(Deserialize)]
struct RawRecord {
    #[allow(dead_code)]
    question: String,
    #[allow(dead_code)]
    response: String,
    claim: String,
    label: RawLabel,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawLabel {
    Bool(bool),
    Text(String),
}

impl RawLabel {
    fn parse(&self) -> Result<Verdict, String> {
        match self {
            RawLabel::Bool(b) => Ok(Verdict::from_bool(*b)),
            RawLabel::Text(s) => match s.to_ascii_lowercase().as_str() {
                "true" => Ok(Verdict::True),
                "false" => Ok(Verdict::False),
                other => Err(format!("label must be true or false, got '{other}'")),
            },
        }
    }
}

/// Loads a JSONL claim dataset: one `{question, response, claim, label}`
/// object per line. Malformed lines raise with their line number.
pub fn load_claim_dataset(path: impl AsRef<Path>) -> Result<Vec<LabeledClaim>, HarnessError> {
    let path = path.as_ref();
    let text = match std::fs::read_to_string(path) {
        Ok(text) => text,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(HarnessError::FileNotFound(path.to_path_buf()))
        }
        Err(source) => {
            return Err(HarnessError::Io {
                path: path.display().to_string(),
                source,
            })
        }
    };
    let dataset_id = path
        .file_stem()
        .map(|s| sanitize_id(&s.to_string_lossy()))
        .unwrap_or_else(|| "dataset".to_string());

    let mut claims = Vec::new();
    for (line_index, line) in text.lines().enumerate() {
        let line_no = line_index + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| HarnessError::ParseError {
            path: path.display().to_string(),
            line: line_no,
            message,
        };
        let record: RawRecord =
            serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        if record.claim.trim().is_empty() {
            return Err(parse_err("claim text is empty".into()));
        }
        let gold_label = record.label.parse().map_err(parse_err)?;
        claims.push(LabeledClaim {
            claim: AtomicClaim::new(
                format!("{dataset_id}-{line_no:05}"),
                record.claim,
                format!("{dataset_id}:{line_no}"),
            ),
            gold_label,
            dataset_id: dataset_id.clone(),
        });
    }
    Ok(claims)
}

/// Balances a skewed dataset: uniformly samples `n_true` TRUE claims with
/// the given seed and retains every FALSE claim. Deterministic for a fixed
/// seed; the relative dataset order is preserved.
pub fn stratified_sample(
    claims: &[LabeledClaim],
    n_true: usize,
    seed: u64,
) -> Result<Vec<LabeledClaim>, HarnessError> {
    use rand::SeedableRng;

    let true_positions: Vec<usize> = claims
        .iter()
        .enumerate()
        .filter(|(_, c)| c.gold_label.is_true())
        .map(|(i, _)| i)
        .collect();
    if n_true > true_positions.len() {
        return Err(HarnessError::InsufficientTrue {
            requested: n_true,
            available: true_positions.len(),
        });
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let chosen = rand::seq::index::sample(&mut rng, true_positions.len(), n_true);
    let mut keep = vec![false; claims.len()];
    for pick in chosen.iter() {
        keep[true_positions[pick]] = true;
    }

    Ok(claims
        .iter()
        .enumerate()
        .filter(|(i, c)| !c.gold_label.is_true() || keep[*i])
        .map(|(_, c)| c.clone())
        .collect())
}

/// Confusion counts with TRUE as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    #[serde(rename = "tp")]
    pub true_positives: usize,
    #[serde(rename = "fp")]
    pub false_positives: usize,
    #[serde(rename = "fn")]
    pub false_negatives: usize,
    #[serde(rename = "tn")]
    pub true_negatives: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.true_positives + self.false_positives + self.false_negatives + self.true_negatives
    }
}

/// Precision, recall, and F1 for one target class.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Per-class metrics plus the confusion counts. Zero-denominator metrics
/// are reported as 0 and named in `zero_denominator`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub positive: ClassMetrics,
    pub negative: ClassMetrics,
    pub confusion: ConfusionCounts,
    pub zero_denominator: Vec<String>,
}

fn ratio(num: usize, den: usize, name: &str, flags: &mut Vec<String>) -> f64 {
    if den == 0 {
        flags.push(name.to_string());
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1_of(precision: f64, recall: f64, name: &str, flags: &mut Vec<String>) -> f64 {
    if precision + recall == 0.0 {
        flags.push(name.to_string());
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Computes per-class precision/recall/F1 over aligned prediction and gold
/// label slices.
pub fn class_metrics(
    predictions: &[Verdict],
    gold_labels: &[Verdict],
) -> Result<ClassificationReport, HarnessError> {
    if predictions.len() != gold_labels.len() {
        return Err(HarnessError::LengthMismatch(
            predictions.len(),
            gold_labels.len(),
        ));
    }
    if predictions.is_empty() {
        return Err(HarnessError::EmptyInput);
    }

    let mut confusion = ConfusionCounts::default();
    for (pred, gold) in predictions.iter().zip(gold_labels) {
        match (pred.is_true(), gold.is_true()) {
            (true, true) => confusion.true_positives += 1,
            (true, false) => confusion.false_positives += 1,
            (false, true) => confusion.false_negatives += 1,
            (false, false) => confusion.true_negatives += 1,
        }
    }

    let (tp, fp, fn_, tn) = (
        confusion.true_positives,
        confusion.false_positives,
        confusion.false_negatives,
        confusion.true_negatives,
    );
    let mut flags = Vec::new();
    let pos_precision = ratio(tp, tp + fp, "positive.precision", &mut flags);
    let pos_recall = ratio(tp, tp + fn_, "positive.recall", &mut flags);
    let pos_f1 = f1_of(pos_precision, pos_recall, "positive.f1", &mut flags);
    // the negative class is defined analogously with FALSE as the target
    let neg_precision = ratio(tn, tn + fn_, "negative.precision", &mut flags);
    let neg_recall = ratio(tn, tn + fp, "negative.recall", &mut flags);
    let neg_f1 = f1_of(neg_precision, neg_recall, "negative.f1", &mut flags);

    Ok(ClassificationReport {
        positive: ClassMetrics {
            precision: pos_precision,
            recall: pos_recall,
            f1: pos_f1,
        },
        negative: ClassMetrics {
            precision: neg_precision,
            recall: neg_recall,
            f1: neg_f1,
        },
        confusion,
        zero_denominator: flags,
    })
}

/// Resume-index line: one adjudicated claim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub hash: String,
    pub dataset_id: String,
    pub claim_id: String,
    pub claim_text: String,
    pub gold: Verdict,
    pub predicted: Verdict,
    /// Transcript path relative to the run directory.
    pub transcript: String,
}

/// One claim whose debate raised; excluded from the confusion counts and
/// re-executed on the next run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub hash: String,
    pub claim_id: String,
    pub error: String,
}

/// Outcome of one benchmark invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub total_claims: usize,
    /// Claims found already adjudicated in the run directory.
    pub resumed: usize,
    /// Claims newly debated by this invocation.
    pub newly_evaluated: usize,
    pub failed: usize,
    pub classification: ClassificationReport,
    pub failures: Vec<FailureRecord>,
}

/// Knobs for one benchmark invocation.
#[derive(Debug, Clone)]
pub struct BenchmarkOptions {
    pub run_dir: PathBuf,
    /// Worker pool size. Keep at 1 for scripted mock runs: parallel workers
    /// would interleave consumption of shared reply scripts.
    pub jobs: usize,
}

impl BenchmarkOptions {
    pub fn new(run_dir: impl Into<PathBuf>) -> Self {
        Self {
            run_dir: run_dir.into(),
            jobs: 1,
        }
    }

    pub fn with_jobs(mut self, jobs: usize) -> Self {
        self.jobs = jobs.max(1);
        self
    }
}

/// Content hash identifying one labeled claim across runs.
pub fn claim_hash(claim: &LabeledClaim) -> String {
    let mut hasher = Sha256::new();
    hasher.update(claim.dataset_id.as_bytes());
    hasher.update([0]);
    hasher.update(claim.claim.id.as_bytes());
    hasher.update([0]);
    hasher.update(claim.claim.text.as_bytes());
    hasher.update([0]);
    hasher.update(claim.gold_label.to_string().as_bytes());
    hex::encode(hasher.finalize())
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Reads the resume index, dropping lines that fail to parse (for example a
/// line truncated by an interruption); their claims are simply re-executed.
fn load_resume_index(path: &Path) -> Result<Vec<PredictionRecord>, HarnessError> {
    let file = match std::fs::File::open(path) {
        Ok(file) => file,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(source) => {
            return Err(HarnessError::Io {
                path: path.display().to_string(),
                source,
            })
        }
    };
    let reader = std::io::BufReader::new(file);
    let mut records = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        if let Ok(record) = serde_json::from_str::<PredictionRecord>(&line) {
            records.push(record);
        }
    }
    Ok(records)
}

fn rewrite_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), HarnessError> {
    let tmp = path.with_extension("jsonl.tmp");
    {
        let mut file = std::fs::File::create(&tmp).map_err(io_err(&tmp))?;
        for record in records {
            let line = serde_json::to_string(record).expect("record serializes");
            writeln!(file, "{line}").map_err(io_err(&tmp))?;
        }
    }
    std::fs::rename(&tmp, path).map_err(io_err(path))?;
    Ok(())
}

/// Runs the verification pipeline as a binary classifier over labeled
/// claims: each claim is debated and adjudicated, predictions are compared
/// against gold labels, and per-class metrics are emitted.
///
/// Per-claim provider failures never abort the run; failed claims are
/// reported separately and excluded from the confusion counts.
pub fn run_benchmark(
    claims: &[LabeledClaim],
    config: &SystemConfig,
    providers: &ProviderSet,
    options: &BenchmarkOptions,
) -> Result<BenchmarkReport, HarnessError> {
    let config = validate_config(config.clone())?;
    let run_dir = &options.run_dir;
    let transcripts_dir = run_dir.join("transcripts");
    std::fs::create_dir_all(&transcripts_dir).map_err(io_err(&transcripts_dir))?;

    let config_path = run_dir.join("config.json");
    let config_json = serde_json::to_string_pretty(&config).expect("config serializes");
    std::fs::write(&config_path, config_json).map_err(io_err(&config_path))?;

    // Compact the resume index so junk from an interruption does not
    // accumulate, then key completed claims by content hash.
    let predictions_path = run_dir.join("predictions.jsonl");
    let existing = load_resume_index(&predictions_path)?;
    rewrite_jsonl(&predictions_path, &existing)?;
    let mut done: HashMap<String, PredictionRecord> = existing
        .into_iter()
        .map(|record| (record.hash.clone(), record))
        .collect();

    let pending: Vec<(usize, &LabeledClaim)> = claims
        .iter()
        .enumerate()
        .filter(|(_, claim)| !done.contains_key(&claim_hash(claim)))
        .collect();
    let resumed = claims.len() - pending.len();

    let predictions_file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&predictions_path)
        .map_err(io_err(&predictions_path))?;
    let writer = Mutex::new(predictions_file);

    let process = |claim: &LabeledClaim| -> Result<Result<PredictionRecord, FailureRecord>, HarnessError> {
        let hash = claim_hash(claim);
        let engine = DebateEngine::new(&config, providers);
        let transcript = match engine.run_debate(&claim.claim) {
            Ok(transcript) => transcript,
            Err(failure) => {
                failure
                    .transcript
                    .write_to_dir(&transcripts_dir)
                    .map_err(io_err(&transcripts_dir))?;
                return Ok(Err(FailureRecord {
                    hash,
                    claim_id: claim.claim.id.clone(),
                    error: failure.error.to_string(),
                }));
            }
        };
        let path = transcript
            .write_to_dir(&transcripts_dir)
            .map_err(io_err(&transcripts_dir))?;
        let decision = match adjudicate(&claim.claim.id, &transcript.final_round_verdicts) {
            Ok(decision) => decision,
            Err(e) => {
                return Ok(Err(FailureRecord {
                    hash,
                    claim_id: claim.claim.id.clone(),
                    error: e.to_string(),
                }))
            }
        };
        let record = PredictionRecord {
            hash,
            dataset_id: claim.dataset_id.clone(),
            claim_id: claim.claim.id.clone(),
            claim_text: claim.claim.text.clone(),
            gold: claim.gold_label,
            predicted: decision.final_verdict,
            transcript: format!(
                "transcripts/{}",
                path.file_name().unwrap_or_default().to_string_lossy()
            ),
        };
        {
            let mut file = writer.lock().unwrap();
            let line = serde_json::to_string(&record).expect("record serializes");
            writeln!(file, "{line}").map_err(io_err(&predictions_path))?;
            file.flush().map_err(io_err(&predictions_path))?;
        }
        Ok(Ok(record))
    };

    let mut failures: Vec<FailureRecord> = Vec::new();
    let mut newly_evaluated = 0usize;
    if options.jobs <= 1 {
        for (_, claim) in &pending {
            match process(claim)? {
                Ok(record) => {
                    newly_evaluated += 1;
                    done.insert(record.hash.clone(), record);
                }
                Err(failure) => failures.push(failure),
            }
        }
    } else {
        let queue: Mutex<VecDeque<&LabeledClaim>> =
            Mutex::new(pending.iter().map(|(_, c)| *c).collect());
        let outcomes: Mutex<Vec<Result<Result<PredictionRecord, FailureRecord>, HarnessError>>> =
            Mutex::new(Vec::new());
        std::thread::scope(|scope| {
            for _ in 0..options.jobs {
                scope.spawn(|| loop {
                    let claim = queue.lock().unwrap().pop_front();
                    let Some(claim) = claim else { break };
                    let outcome = process(claim);
                    let abort = outcome.is_err();
                    outcomes.lock().unwrap().push(outcome);
                    if abort {
                        queue.lock().unwrap().clear();
                        break;
                    }
                });
            }
        });
        for outcome in outcomes.into_inner().unwrap() {
            match outcome? {
                Ok(record) => {
                    newly_evaluated += 1;
                    done.insert(record.hash.clone(), record);
                }
                Err(failure) => failures.push(failure),
            }
        }
    }

    failures.sort_by(|a, b| a.claim_id.cmp(&b.claim_id));
    let failures_path = run_dir.join("failures.jsonl");
    rewrite_jsonl(&failures_path, &failures)?;

    // Assemble metrics over every scored claim, in dataset order.
    let mut predictions = Vec::new();
    let mut gold = Vec::new();
    for claim in claims {
        if let Some(record) = done.get(&claim_hash(claim)) {
            predictions.push(record.predicted);
            gold.push(record.gold);
        }
    }
    let classification = if predictions.is_empty() {
        ClassificationReport {
            zero_denominator: vec!["no scored claims".to_string()],
            ..ClassificationReport::default()
        }
    } else {
        class_metrics(&predictions, &gold)?
    };

    let report = BenchmarkReport {
        total_claims: claims.len(),
        resumed,
        newly_evaluated,
        failed: failures.len(),
        classification,
        failures,
    };
    let report_path = run_dir.join("report.json");
    let report_json = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&report_path, report_json).map_err(io_err(&report_path))?;
    Ok(report)
}

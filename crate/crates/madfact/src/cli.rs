//! Command-line entry point wiring configuration, providers, and pipelines
//! into reproducible runs.
//!
//! Every command is driven by flags rather than environment variables
//! (credentials excepted), so a run is reproducible from its manifest
//! alone. `--mock <dir>` loads scripted providers from a fixtures
//! directory, making the full pipeline executable offline; combined with
//! `--frozen-clock`, reruns are byte-identical.

use chrono::{DateTime, Utc};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use thiserror::Error;

use crate::clerk::{Clerk, ClerkError};
use crate::config::{apply_ablation, validate_config, AblationVariant, ConfigError, SystemConfig};
use crate::harness::{
    load_claim_dataset, run_benchmark, stratified_sample, BenchmarkOptions, HarnessError,
};
use crate::judge::{
    adjudicate, score_response, write_scores_csv, ClaimDecision, JudgeError, ResponseScore,
    ScoreReport,
};
use crate::jury::{DebateEngine, JuryError};
use crate::providers::cache::{cache_key_of_value, CachingChatProvider, FileCache};
use crate::providers::http::{HttpChatProvider, SerperSearchProvider, ENV_CACHE_DIR};
use crate::providers::mock::{FixtureError, MockChatProvider, MockSearchProvider};
use crate::providers::{Clock, ProviderError, ProviderSet};
use crate::pyramid::{
    build_pyramid, generate_references, merge_golden_set, BackendJudgedMatcher, ClaimMatcher,
    ExactNormalizedMatcher, Pyramid, PyramidError, WeightRule,
};
use crate::text::sanitize_id;
use crate::types::{AtomicClaim, LongFormResponse, Question};

/// Factuality verification through retrieval-augmented multi-agent debate.
#[derive(Debug, Parser)]
#[command(name = "madfact", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Path to the JSON system configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory (default: madfact-out; bench defaults to runs).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker pool size. Defaults to the processor count, or 1 under
    /// --mock (shared reply scripts must be consumed in order).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Load scripted providers from this fixtures directory instead of live
    /// backends.
    #[arg(long, global = true, value_name = "FIXTURES_DIR")]
    pub mock: Option<PathBuf>,

    /// Seed for any sampling the command performs.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Freeze all timestamps at the Unix epoch for byte-identical reruns.
    #[arg(long, global = true)]
    pub frozen_clock: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Debate claims (given directly or decomposed from a response) and
    /// write transcripts plus per-claim decisions.
    Verify {
        /// JSONL file of claims to verify.
        #[arg(long, conflicts_with = "response")]
        claims: Option<PathBuf>,
        /// JSON file holding a question and a long-form response to
        /// decompose first.
        #[arg(long)]
        response: Option<PathBuf>,
        /// Ablation variant applied to the config before the run.
        #[arg(long)]
        ablation: Option<String>,
    },
    /// Build one importance pyramid per question from expert reference
    /// answers.
    BuildPyramid {
        /// JSONL file of questions ({"id", "text"}).
        #[arg(long)]
        question_file: PathBuf,
        /// Comma-separated expert backend identifiers.
        #[arg(long, value_delimiter = ',')]
        experts: Vec<String>,
        /// Claim matcher: exact-normalized or backend-judged.
        #[arg(long, default_value = "exact-normalized")]
        matcher: String,
    },
    /// Score verified decisions against pyramids and emit weighted metrics.
    Score {
        /// Pyramid JSON file or a directory of them.
        #[arg(long)]
        pyramids: PathBuf,
        /// decisions.jsonl produced by `verify`.
        #[arg(long)]
        decisions: PathBuf,
        /// Recall calibration values; may be given multiple times.
        #[arg(long = "gamma")]
        gammas: Vec<f64>,
        /// Claim matcher: exact-normalized or backend-judged.
        #[arg(long, default_value = "exact-normalized")]
        matcher: String,
    },
    /// Run the pipeline as a binary classifier over a labeled claim
    /// dataset.
    Bench {
        /// JSONL dataset of labeled claims.
        #[arg(long)]
        dataset: PathBuf,
        /// Resume or name the run directory under --out.
        #[arg(long)]
        run_id: Option<String>,
        /// Stratified-sample this many TRUE claims (keeps every FALSE one).
        #[arg(long)]
        sample_true: Option<usize>,
        /// Ablation variant applied to the config before the run.
        #[arg(long)]
        ablation: Option<String>,
    },
    /// Run `bench` under several ablation variants and compare them.
    Ablate {
        /// JSONL dataset of labeled claims.
        #[arg(long)]
        dataset: PathBuf,
        /// Comma-separated variants (default: all four).
        #[arg(long, value_delimiter = ',')]
        variants: Option<Vec<String>>,
    },
}

/// Default worker-pool ceiling. Live backends rate-limit aggressively;
/// going wider than this by default only produces retries.
const MAX_DEFAULT_JOBS: usize = 8;

/// CLI failure classes; exit codes partition them disjointly.
#[derive(Debug, Error)]
pub enum CliError {
    /// Exit code 1.
    #[error("{0}")]
    Config(String),
    /// Exit code 2.
    #[error("{0}")]
    Io(String),
    /// Exit code 3.
    #[error("{0}")]
    Provider(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Io(_) => 2,
            CliError::Provider(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(error: ConfigError) -> Self {
        match error {
            ConfigError::Io { .. } => CliError::Io(error.to_string()),
            _ => CliError::Config(error.to_string()),
        }
    }
}

impl From<ProviderError> for CliError {
    fn from(error: ProviderError) -> Self {
        match error {
            ProviderError::CacheIo { .. } => CliError::Io(error.to_string()),
            _ => CliError::Provider(error.to_string()),
        }
    }
}

impl From<FixtureError> for CliError {
    fn from(error: FixtureError) -> Self {
        CliError::Io(error.to_string())
    }
}

impl From<ClerkError> for CliError {
    fn from(error: ClerkError) -> Self {
        match error {
            ClerkError::Provider(e) => e.into(),
            ClerkError::TemplateIo { .. } => CliError::Io(error.to_string()),
            ClerkError::MalformedClerkOutput(_) => CliError::Provider(error.to_string()),
        }
    }
}

impl From<JuryError> for CliError {
    fn from(error: JuryError) -> Self {
        match error {
            JuryError::Provider(e) => e.into(),
            _ => CliError::Provider(error.to_string()),
        }
    }
}

impl From<PyramidError> for CliError {
    fn from(error: PyramidError) -> Self {
        match error {
            PyramidError::Provider(e) => e.into(),
            PyramidError::Clerk(e) => e.into(),
            PyramidError::MatcherUnavailable(_) => CliError::Provider(error.to_string()),
            PyramidError::Io { .. } => CliError::Io(error.to_string()),
            _ => CliError::Config(error.to_string()),
        }
    }
}

impl From<JudgeError> for CliError {
    fn from(error: JudgeError) -> Self {
        match error {
            JudgeError::Metrics(e) => e.into(),
            JudgeError::Io { .. } => CliError::Io(error.to_string()),
            _ => CliError::Config(error.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(error: HarnessError) -> Self {
        match error {
            HarnessError::Config(e) => e.into(),
            HarnessError::Judge(e) => e.into(),
            HarnessError::FileNotFound(_) | HarnessError::Io { .. } | HarnessError::ParseError { .. } => {
                CliError::Io(error.to_string())
            }
            _ => CliError::Config(error.to_string()),
        }
    }
}

fn io_error(path: &Path, error: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {error}", path.display()))
}

/// Run metadata echoed next to every command's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub command: String,
    pub config_hash: String,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub input_paths: Vec<String>,
}

/// SHA-256 of the canonicalized config JSON.
pub fn config_hash(config: &SystemConfig) -> String {
    let value = serde_json::to_value(config).expect("config serializes");
    cache_key_of_value(&value)
}

/// One adjudicated claim as written to `decisions.jsonl` by `verify` and
/// consumed by `score`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub response_id: String,
    pub question_id: String,
    pub claim: AtomicClaim,
    pub decision: ClaimDecision,
}

/// Input file for `verify --response`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResponseFile {
    pub question: Question,
    pub response: LongFormResponse,
}

#[derive(Debug, Deserialize)]
struct ClaimLine {
    text: String,
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    question_id: Option<String>,
    #[serde(default)]
    response_id: Option<String>,
}

struct Ctx {
    config: SystemConfig,
    providers: ProviderSet,
    clock: Clock,
    out: PathBuf,
    jobs: usize,
    seed: u64,
    started_at: DateTime<Utc>,
    command_name: String,
    config_path: PathBuf,
}

impl Ctx {
    fn finish_manifest(&self, run_id: &str, inputs: &[&Path], dir: &Path) -> Result<(), CliError> {
        let manifest = RunManifest {
            run_id: run_id.to_string(),
            command: self.command_name.clone(),
            config_hash: config_hash(&self.config),
            started_at: self.started_at,
            finished_at: self.clock.now(),
            input_paths: inputs.iter().map(|p| p.display().to_string()).collect(),
        };
        let path = dir.join("manifest.json");
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(&path, json).map_err(|e| io_error(&path, e))
    }

    fn echo_config(&self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join("config.json");
        let json = serde_json::to_string_pretty(&self.config).expect("config serializes");
        std::fs::write(&path, json).map_err(|e| io_error(&path, e))
    }
}

fn parse_ablation(value: Option<&str>) -> Result<AblationVariant, CliError> {
    match value {
        None => Ok(AblationVariant::None),
        Some(s) => AblationVariant::from_str(s).map_err(CliError::Config),
    }
}

/// Builds the provider registry: scripted mocks from a fixtures directory,
/// or live HTTP backends (with the response cache) otherwise.
fn build_providers(
    mock_dir: Option<&Path>,
    backends: &[String],
    clock: Clock,
) -> Result<ProviderSet, CliError> {
    match mock_dir {
        Some(dir) => {
            let scripts = dir.join("chat_scripts.json");
            if !scripts.exists() {
                return Err(CliError::Io(format!(
                    "fixtures directory {} must contain chat_scripts.json",
                    dir.display()
                )));
            }
            let chat = Arc::new(MockChatProvider::from_script_file(&scripts)?);
            let mut providers = ProviderSet::new();
            let mut ids = chat.script_keys();
            ids.extend(backends.iter().cloned());
            ids.sort();
            ids.dedup();
            for id in ids {
                providers =
                    providers.register_chat(id, Arc::clone(&chat) as Arc<MockChatProvider>);
            }
            let fixtures = dir.join("search_fixtures.json");
            let search = if fixtures.exists() {
                MockSearchProvider::from_fixture_file(&fixtures, clock)?
            } else {
                MockSearchProvider::new(clock)
            };
            Ok(providers.with_search(Arc::new(search)))
        }
        None => {
            let http = HttpChatProvider::from_env()?;
            let cache_dir =
                std::env::var(ENV_CACHE_DIR).unwrap_or_else(|_| ".madfact-cache".to_string());
            let cached: Arc<dyn crate::providers::ChatProvider> =
                Arc::new(CachingChatProvider::new(http, FileCache::new(cache_dir)?));
            let mut providers = ProviderSet::new();
            for id in backends {
                providers = providers.register_chat(id.clone(), Arc::clone(&cached));
            }
            match SerperSearchProvider::from_env(clock) {
                Ok(search) => Ok(providers.with_search(Arc::new(search))),
                Err(_) => Ok(providers), // retrieval surfaces SearchUnavailable when used
            }
        }
    }
}

fn default_run_id(clock: Clock) -> String {
    match clock {
        Clock::Frozen(_) => "run-frozen".to_string(),
        Clock::System => format!("run-{}", Utc::now().format("%Y%m%dT%H%M%S%3fZ")),
    }
}

/// Executes a parsed command; errors map onto disjoint exit codes.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let clock = if cli.frozen_clock {
        Clock::frozen_epoch()
    } else {
        Clock::System
    };
    let config_path = cli
        .config
        .clone()
        .ok_or_else(|| CliError::Config("--config is required".to_string()))?;

    let (command_name, ablation_flag) = match &cli.command {
        Command::Verify { ablation, .. } => ("verify", ablation.clone()),
        Command::BuildPyramid { .. } => ("build-pyramid", None),
        Command::Score { .. } => ("score", None),
        Command::Bench { ablation, .. } => ("bench", ablation.clone()),
        Command::Ablate { .. } => ("ablate", None),
    };

    let base_config = SystemConfig::load(&config_path)?;
    let variant = parse_ablation(ablation_flag.as_deref())?;
    let config = validate_config(apply_ablation(base_config, variant))?;

    let mut extra_backends = config.all_backends();
    if let Command::BuildPyramid { experts, .. } = &cli.command {
        extra_backends.extend(experts.iter().cloned());
    }
    let providers = build_providers(cli.mock.as_deref(), &extra_backends, clock)?;

    let default_out = if matches!(cli.command, Command::Bench { .. }) {
        PathBuf::from("runs")
    } else {
        PathBuf::from("madfact-out")
    };
    let jobs = cli.jobs.unwrap_or_else(|| {
        if cli.mock.is_some() {
            1
        } else {
            std::thread::available_parallelism()
                .map_or(1, |n| n.get())
                .min(MAX_DEFAULT_JOBS)
        }
    });

    let ctx = Ctx {
        config,
        providers,
        clock,
        out: cli.out.clone().unwrap_or(default_out),
        jobs,
        seed: cli.seed.unwrap_or(0),
        started_at: clock.now(),
        command_name: command_name.to_string(),
        config_path,
    };

    match cli.command {
        Command::Verify {
            claims, response, ..
        } => cmd_verify(&ctx, claims.as_deref(), response.as_deref()),
        Command::BuildPyramid {
            question_file,
            experts,
            matcher,
        } => cmd_build_pyramid(&ctx, &question_file, &experts, &matcher),
        Command::Score {
            pyramids,
            decisions,
            gammas,
            matcher,
        } => cmd_score(&ctx, &pyramids, &decisions, &gammas, &matcher),
        Command::Bench {
            dataset,
            run_id,
            sample_true,
            ..
        } => cmd_bench(&ctx, &dataset, run_id.as_deref(), sample_true),
        Command::Ablate { dataset, variants } => cmd_ablate(&ctx, &dataset, variants.as_deref()),
    }
}

fn read_claims_file(path: &Path) -> Result<(String, String, Vec<AtomicClaim>), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let stem = path
        .file_stem()
        .map(|s| sanitize_id(&s.to_string_lossy()))
        .unwrap_or_else(|| "claims".to_string());
    let mut question_id = stem.clone();
    let mut response_id = stem.clone();
    let mut claims = Vec::new();
    for (index, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: ClaimLine = serde_json::from_str(line).map_err(|e| {
            CliError::Io(format!("{}:{}: {e}", path.display(), index + 1))
        })?;
        if parsed.text.trim().is_empty() {
            return Err(CliError::Io(format!(
                "{}:{}: claim text is empty",
                path.display(),
                index + 1
            )));
        }
        if let Some(qid) = parsed.question_id {
            question_id = qid;
        }
        if let Some(rid) = parsed.response_id {
            response_id = rid;
        }
        let id = parsed
            .id
            .unwrap_or_else(|| format!("{stem}-c{:03}", index + 1));
        claims.push(AtomicClaim::new(id, parsed.text, response_id.clone()));
    }
    Ok((question_id, response_id, claims))
}

fn cmd_verify(
    ctx: &Ctx,
    claims_path: Option<&Path>,
    response_path: Option<&Path>,
) -> Result<(), CliError> {
    std::fs::create_dir_all(&ctx.out).map_err(|e| io_error(&ctx.out, e))?;

    let mut inputs: Vec<&Path> = vec![&ctx.config_path];
    let (question_id, response_id, claims) = match (claims_path, response_path) {
        (Some(path), None) => {
            inputs.push(path);
            read_claims_file(path)?
        }
        (None, Some(path)) => {
            inputs.push(path);
            let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            let file: ResponseFile = serde_json::from_str(&text)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            if file.question.text.trim().is_empty() {
                return Err(CliError::Config("question text must not be empty".into()));
            }
            if file.response.question_id != file.question.id {
                return Err(CliError::Config(format!(
                    "response answers question '{}' but the file carries question '{}'",
                    file.response.question_id, file.question.id
                )));
            }
            let clerk = Clerk::new(&ctx.providers, &ctx.config.clerk_backend);
            let decomposition = clerk.decompose(&file.question, &file.response)?;
            let decomposition_path = ctx.out.join("decomposition.json");
            let json = serde_json::to_string_pretty(&decomposition).expect("serializes");
            std::fs::write(&decomposition_path, json)
                .map_err(|e| io_error(&decomposition_path, e))?;
            (
                file.question.id.clone(),
                file.response.response_id(),
                decomposition.claims,
            )
        }
        _ => {
            return Err(CliError::Config(
                "provide exactly one of --claims or --response".into(),
            ))
        }
    };

    let transcripts_dir = ctx.out.join("transcripts").join(sanitize_id(&response_id));
    let engine = DebateEngine::new(&ctx.config, &ctx.providers);
    let decisions_path = ctx.out.join("decisions.jsonl");
    let mut decisions_file =
        std::fs::File::create(&decisions_path).map_err(|e| io_error(&decisions_path, e))?;

    let mut decided = 0usize;
    for claim in &claims {
        let transcript = match engine.run_debate(claim) {
            Ok(transcript) => transcript,
            Err(failure) => {
                // keep the partial transcript with its failure marker
                failure
                    .transcript
                    .write_to_dir(&transcripts_dir)
                    .map_err(|e| io_error(&transcripts_dir, e))?;
                return Err(failure.error.into());
            }
        };
        transcript
            .write_to_dir(&transcripts_dir)
            .map_err(|e| io_error(&transcripts_dir, e))?;
        let decision = adjudicate(&claim.id, &transcript.final_round_verdicts)?;
        let record = DecisionRecord {
            response_id: response_id.clone(),
            question_id: question_id.clone(),
            claim: claim.clone(),
            decision,
        };
        let line = serde_json::to_string(&record).expect("record serializes");
        writeln!(decisions_file, "{line}").map_err(|e| io_error(&decisions_path, e))?;
        decided += 1;
    }

    ctx.echo_config(&ctx.out)?;
    let run_id = default_run_id(ctx.clock);
    ctx.finish_manifest(&run_id, &inputs, &ctx.out)?;
    println!(
        "verified {decided} claims for response '{response_id}' -> {}",
        ctx.out.display()
    );
    Ok(())
}

fn read_questions(path: &Path) -> Result<Vec<Question>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let mut questions = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (index, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let question: Question = serde_json::from_str(line)
            .map_err(|e| CliError::Io(format!("{}:{}: {e}", path.display(), index + 1)))?;
        if question.text.trim().is_empty() {
            return Err(CliError::Config(format!(
                "question '{}' has empty text",
                question.id
            )));
        }
        if !seen.insert(question.id.clone()) {
            return Err(CliError::Config(format!(
                "duplicate question id '{}'",
                question.id
            )));
        }
        questions.push(question);
    }
    Ok(questions)
}

fn cmd_build_pyramid(
    ctx: &Ctx,
    question_file: &Path,
    experts: &[String],
    matcher_name: &str,
) -> Result<(), CliError> {
    if experts.is_empty() {
        return Err(CliError::Config("at least one expert backend is required".into()));
    }
    let mut unique = experts.to_vec();
    unique.sort();
    unique.dedup();
    if unique.len() != experts.len() {
        return Err(CliError::Config("duplicate expert ids".into()));
    }

    let questions = read_questions(question_file)?;
    let pyramids_dir = ctx.out.join("pyramids");
    std::fs::create_dir_all(&pyramids_dir).map_err(|e| io_error(&pyramids_dir, e))?;

    let exact = ExactNormalizedMatcher;
    let backend_matcher;
    let matcher: &dyn ClaimMatcher = match matcher_name {
        "exact-normalized" => &exact,
        "backend-judged" => {
            backend_matcher = BackendJudgedMatcher::new(&ctx.providers, &ctx.config.judge_backend);
            &backend_matcher
        }
        other => return Err(CliError::Config(format!("unknown matcher '{other}'"))),
    };

    for question in &questions {
        let references =
            generate_references(question, experts, &ctx.providers, &ctx.config.clerk_backend)?;
        let claim_sets: Vec<Vec<AtomicClaim>> =
            references.iter().map(|r| r.claims.clone()).collect();
        let golden = merge_golden_set(&claim_sets, matcher)?;
        let pyramid = build_pyramid(
            &question.id,
            &golden,
            experts.len(),
            &WeightRule::default(),
            matcher.id(),
            experts.to_vec(),
        )?;
        let path = pyramids_dir.join(format!("{}.json", sanitize_id(&question.id)));
        pyramid.save(&path)?;
    }

    ctx.echo_config(&ctx.out)?;
    let run_id = default_run_id(ctx.clock);
    ctx.finish_manifest(&run_id, &[&ctx.config_path, question_file], &ctx.out)?;
    println!(
        "built {} pyramids with {} experts -> {}",
        questions.len(),
        experts.len(),
        pyramids_dir.display()
    );
    Ok(())
}

fn load_pyramids(path: &Path) -> Result<HashMap<String, Pyramid>, CliError> {
    let mut map = HashMap::new();
    let mut insert = |pyramid: Pyramid| {
        map.insert(pyramid.question_id.clone(), pyramid);
    };
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| io_error(path, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
            .collect();
        entries.sort();
        for entry in entries {
            insert(Pyramid::load(&entry)?);
        }
    } else {
        insert(Pyramid::load(path)?);
    }
    Ok(map)
}

fn cmd_score(
    ctx: &Ctx,
    pyramids_path: &Path,
    decisions_path: &Path,
    gammas: &[f64],
    matcher_name: &str,
) -> Result<(), CliError> {
    let gammas: Vec<f64> = if gammas.is_empty() {
        vec![ctx.config.gamma]
    } else {
        gammas.to_vec()
    };
    for &gamma in &gammas {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(CliError::Config(format!(
                "gamma must lie in (0, 1], got {gamma}"
            )));
        }
    }

    let text = std::fs::read_to_string(decisions_path).map_err(|e| io_error(decisions_path, e))?;
    let mut order: Vec<String> = Vec::new();
    let mut grouped: HashMap<String, (String, Vec<DecisionRecord>)> = HashMap::new();
    for (index, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: DecisionRecord = serde_json::from_str(line)
            .map_err(|e| CliError::Io(format!("{}:{}: {e}", decisions_path.display(), index + 1)))?;
        let entry = grouped
            .entry(record.response_id.clone())
            .or_insert_with(|| {
                order.push(record.response_id.clone());
                (record.question_id.clone(), Vec::new())
            });
        if entry.0 != record.question_id {
            return Err(CliError::Config(format!(
                "response '{}' mixes questions '{}' and '{}'",
                record.response_id, entry.0, record.question_id
            )));
        }
        entry.1.push(record);
    }
    if order.is_empty() {
        return Err(CliError::Config("decisions file holds no records".into()));
    }

    let pyramids = load_pyramids(pyramids_path)?;
    let exact = ExactNormalizedMatcher;
    let backend_matcher;
    let matcher: &dyn ClaimMatcher = match matcher_name {
        "exact-normalized" => &exact,
        "backend-judged" => {
            backend_matcher = BackendJudgedMatcher::new(&ctx.providers, &ctx.config.judge_backend);
            &backend_matcher
        }
        other => return Err(CliError::Config(format!("unknown matcher '{other}'"))),
    };

    let mut question_ids = Vec::new();
    let mut per_response: Vec<Vec<ResponseScore>> = Vec::new();
    for response_id in &order {
        let (question_id, records) = &grouped[response_id];
        let pyramid = pyramids.get(question_id).ok_or_else(|| {
            CliError::Config(format!(
                "no pyramid found for question '{question_id}' (response '{response_id}')"
            ))
        })?;
        let claims: Vec<AtomicClaim> = records.iter().map(|r| r.claim.clone()).collect();
        let decisions: Vec<ClaimDecision> = records.iter().map(|r| r.decision.clone()).collect();
        let mut scores = Vec::with_capacity(gammas.len());
        for &gamma in &gammas {
            scores.push(score_response(
                response_id,
                question_id,
                &claims,
                &decisions,
                pyramid,
                matcher,
                gamma,
            )?);
        }
        question_ids.push(question_id.clone());
        per_response.push(scores);
    }

    let report = ScoreReport::assemble(ctx.config.clone(), gammas, question_ids, per_response)?;
    std::fs::create_dir_all(&ctx.out).map_err(|e| io_error(&ctx.out, e))?;
    let report_path = ctx.out.join("report.json");
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&report_path, json).map_err(|e| io_error(&report_path, e))?;
    write_scores_csv(&report, ctx.out.join("scores.csv"))?;

    ctx.echo_config(&ctx.out)?;
    let run_id = default_run_id(ctx.clock);
    ctx.finish_manifest(&run_id, &[&ctx.config_path, decisions_path, pyramids_path], &ctx.out)?;
    for (gamma, mean) in report.gammas.iter().zip(&report.dataset_means) {
        println!("dataset mean F1@{gamma} = {mean:.4}");
    }
    Ok(())
}

fn cmd_bench(
    ctx: &Ctx,
    dataset_path: &Path,
    run_id: Option<&str>,
    sample_true: Option<usize>,
) -> Result<(), CliError> {
    let mut claims = load_claim_dataset(dataset_path)?;
    if let Some(n_true) = sample_true {
        claims = stratified_sample(&claims, n_true, ctx.seed)?;
    }

    let run_id = match run_id {
        Some(id) => id.to_string(),
        None => {
            // pick a fresh directory rather than silently resuming
            let base = default_run_id(ctx.clock);
            let mut candidate = base.clone();
            let mut suffix = 2;
            while ctx.out.join(&candidate).exists() {
                candidate = format!("{base}-{suffix}");
                suffix += 1;
            }
            candidate
        }
    };
    let run_dir = ctx.out.join(&run_id);
    std::fs::create_dir_all(&run_dir).map_err(|e| io_error(&run_dir, e))?;

    let options = BenchmarkOptions::new(&run_dir).with_jobs(ctx.jobs);
    let report = run_benchmark(&claims, &ctx.config, &ctx.providers, &options)?;

    ctx.finish_manifest(&run_id, &[&ctx.config_path, dataset_path], &run_dir)?;
    println!(
        "bench {run_id}: scored {} claims ({} resumed, {} failed); positive F1 {:.4}, negative F1 {:.4}",
        report.total_claims - report.failed,
        report.resumed,
        report.failed,
        report.classification.positive.f1,
        report.classification.negative.f1,
    );
    Ok(())
}

fn cmd_ablate(ctx: &Ctx, dataset_path: &Path, variants: Option<&[String]>) -> Result<(), CliError> {
    let variants: Vec<AblationVariant> = match variants {
        Some(names) => names
            .iter()
            .map(|name| AblationVariant::from_str(name).map_err(CliError::Config))
            .collect::<Result<_, _>>()?,
        None => vec![
            AblationVariant::None,
            AblationVariant::NoRolePlay,
            AblationVariant::NoDebate,
            AblationVariant::NoSearch,
        ],
    };

    // validate every variant before any work starts
    let mut configs = Vec::with_capacity(variants.len());
    for &variant in &variants {
        let ablated = apply_ablation(ctx.config.clone(), variant);
        let validated = validate_config(ablated).map_err(|e| {
            CliError::Config(format!("variant '{variant}' is invalid: {e}"))
        })?;
        configs.push(validated);
    }

    let claims = load_claim_dataset(dataset_path)?;
    let mut summary: Vec<serde_json::Value> = Vec::new();
    for (variant, config) in variants.iter().zip(configs) {
        let run_dir = ctx.out.join(variant.to_string());
        std::fs::create_dir_all(&run_dir).map_err(|e| io_error(&run_dir, e))?;
        let options = BenchmarkOptions::new(&run_dir).with_jobs(ctx.jobs);
        let report = run_benchmark(&claims, &config, &ctx.providers, &options)?;
        summary.push(serde_json::json!({
            "variant": variant.to_string(),
            "positive": report.classification.positive,
            "negative": report.classification.negative,
            "failed": report.failed,
        }));
        println!(
            "ablate {variant}: positive F1 {:.4}, negative F1 {:.4}",
            report.classification.positive.f1, report.classification.negative.f1
        );
    }

    let summary_path = ctx.out.join("summary.json");
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(&summary_path, json).map_err(|e| io_error(&summary_path, e))?;
    let run_id = default_run_id(ctx.clock);
    ctx.finish_manifest(&run_id, &[&ctx.config_path, dataset_path], &ctx.out)?;
    Ok(())
}

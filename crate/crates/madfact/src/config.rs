//! System configuration, its validation, and ablation variants.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

use crate::types::RoleProfile;

/// The six juror personas used for role-played evaluation.
///
/// When the jury is smaller than six, the first `N` personas are used in
/// table order; larger juries cycle through the table with numeric suffixes.
pub const ROLE_TABLE: [(&str, &str); 6] = [
    (
        "General Public",
        "You are now General Public, one of the referees in this task. As a member of the \
         general public, you are interested in the claim and eager to get updates on the \
         investigation. You can precisely capture the main meaning of the text rather than \
         fixating on every single word.",
    ),
    (
        "Critic",
        "You are Critic, one of the referees in this task. You are adept at questioning the \
         judgment of others by searching through chains of evidence. In addition, you pay \
         attention to the rigor of the data and are keen to pick up small differences in claims.",
    ),
    (
        "News Author",
        "You are News Author, one of the referees in this task. You focus on the factual basis \
         of the claim and the latest developments, verifying the accuracy of the claim through \
         extensive access to information. When information is insufficient, you tend to search \
         rather than jump to conclusions.",
    ),
    (
        "Scientist",
        "You are Scientist, one of the referees in this task. As a data science research \
         professional, you have a deep background in critical thinking and problem solving \
         skills and are sensitive to data. You are adept at verifying the accuracy of claims by \
         looking at references.",
    ),
    (
        "Psychologist",
        "You are Psychologist, one of the referees in this task. Your job is to study human \
         behavior and mental processes to understand and explain human behavior. Assist others \
         in determining which response is the better one among the available options.",
    ),
    (
        "Data Analyst",
        "You are now Data Analyst, one of the referees in this task. Specializing in dissecting \
         complex datasets, you approach the claim with a quantitative lens. You have a knack \
         for gathering relevant data from diverse sources, cleaning and organizing it to \
         extract meaningful insights.",
    ),
];

/// Uniform persona substituted for every juror under the no-role-play ablation.
pub const GENERIC_REFEREE: &str = "You are one of the referees in this task. Judge whether the \
                                   claim is factually correct based on the available evidence \
                                   and the discussion so far.";

/// Debate rule governing when jurors must, may, or may not retrieve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DebateRule {
    /// Round 1: each agent retrieves only when its own confidence is low.
    /// Later rounds: direct statements.
    #[serde(rename = "free-debate", alias = "FreeDebate")]
    FreeDebate,
    /// Round 1: retrieval is mandatory before speaking. Later rounds: direct.
    #[serde(rename = "mandatory-search", alias = "MandatorySearch")]
    MandatorySearch,
    /// Round 1: confidence-gated retrieval; stop early on consensus, else the
    /// next round retrieves before speaking.
    #[serde(rename = "adaptive", alias = "Adaptive")]
    Adaptive,
}

impl fmt::Display for DebateRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DebateRule::FreeDebate => "free-debate",
            DebateRule::MandatorySearch => "mandatory-search",
            DebateRule::Adaptive => "adaptive",
        };
        write!(f, "{s}")
    }
}

impl FromStr for DebateRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "free-debate" | "FreeDebate" | "rule1" => Ok(DebateRule::FreeDebate),
            "mandatory-search" | "MandatorySearch" | "rule2" => Ok(DebateRule::MandatorySearch),
            "adaptive" | "Adaptive" | "rule3" => Ok(DebateRule::Adaptive),
            other => Err(format!("unknown debate rule '{other}'")),
        }
    }
}

/// Component-removal variant used in ablation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AblationVariant {
    #[default]
    #[serde(rename = "none", alias = "None")]
    None,
    #[serde(rename = "no-role-play", alias = "NoRolePlay")]
    NoRolePlay,
    #[serde(rename = "no-debate", alias = "NoDebate")]
    NoDebate,
    #[serde(rename = "no-search", alias = "NoSearch")]
    NoSearch,
}

impl fmt::Display for AblationVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AblationVariant::None => "none",
            AblationVariant::NoRolePlay => "no-role-play",
            AblationVariant::NoDebate => "no-debate",
            AblationVariant::NoSearch => "no-search",
        };
        write!(f, "{s}")
    }
}

impl FromStr for AblationVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" | "None" => Ok(AblationVariant::None),
            "no-role-play" | "NoRolePlay" => Ok(AblationVariant::NoRolePlay),
            "no-debate" | "NoDebate" => Ok(AblationVariant::NoDebate),
            "no-search" | "NoSearch" => Ok(AblationVariant::NoSearch),
            other => Err(format!("unknown ablation variant '{other}'")),
        }
    }
}

/// Full system configuration for one verification run.
///
/// The JSON configuration file mirrors these field names exactly; unknown
/// keys are rejected. Backend credentials are never part of the file — they
/// come from environment variables (see [`crate::providers::http`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Number of evaluator agents in the jury (N).
    #[serde(default = "default_jury_size")]
    pub jury_size: usize,
    /// Number of debate rounds.
    #[serde(default = "default_rounds")]
    pub rounds: u32,
    #[serde(default = "default_rule")]
    pub rule: DebateRule,
    /// Confidence threshold below which a juror must retrieve before
    /// answering.
    #[serde(default = "default_theta")]
    pub theta: f64,
    /// One persona per juror; filled from [`ROLE_TABLE`] when omitted.
    #[serde(default)]
    pub roles: Vec<RoleProfile>,
    /// One backend identifier per juror.
    #[serde(default)]
    pub evaluator_backends: Vec<String>,
    #[serde(default = "default_backend")]
    pub clerk_backend: String,
    #[serde(default = "default_backend")]
    pub judge_backend: String,
    /// Recall calibration hyperparameter in `(0, 1]`.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub ablation: AblationVariant,
}

fn default_jury_size() -> usize {
    3
}

fn default_rounds() -> u32 {
    2
}

fn default_rule() -> DebateRule {
    DebateRule::FreeDebate
}

fn default_theta() -> f64 {
    0.8
}

fn default_gamma() -> f64 {
    1.0
}

fn default_backend() -> String {
    "default".to_string()
}

impl Default for SystemConfig {
    fn default() -> Self {
        let n = default_jury_size();
        Self {
            jury_size: n,
            rounds: default_rounds(),
            rule: default_rule(),
            theta: default_theta(),
            roles: default_roles(n),
            evaluator_backends: vec![default_backend(); n],
            clerk_backend: default_backend(),
            judge_backend: default_backend(),
            gamma: default_gamma(),
            ablation: AblationVariant::None,
        }
    }
}

/// The default jury personas for a jury of `n`.
pub fn default_roles(n: usize) -> Vec<RoleProfile> {
    (0..n)
        .map(|i| {
            let (name, description) = ROLE_TABLE[i % ROLE_TABLE.len()];
            let cycle = i / ROLE_TABLE.len();
            let name = if cycle == 0 {
                name.to_string()
            } else {
                format!("{} {}", name, cycle + 1)
            };
            RoleProfile::new(name, description)
        })
        .collect()
}

/// One violated configuration invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config file {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(Violation::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl SystemConfig {
    /// Loads a configuration from a JSON file, fills defaulted role/backend
    /// lists, and validates it.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let config: SystemConfig =
            serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
                path: path.display().to_string(),
                source,
            })?;
        validate_config(config.fill_defaults())
    }

    /// Fills the role and backend lists from defaults when they were omitted.
    pub fn fill_defaults(mut self) -> Self {
        if self.roles.is_empty() {
            self.roles = default_roles(self.jury_size);
        }
        if self.evaluator_backends.is_empty() {
            self.evaluator_backends = vec![default_backend(); self.jury_size];
        }
        self
    }

    /// All backend identifiers referenced by this configuration.
    pub fn all_backends(&self) -> Vec<String> {
        let mut ids = self.evaluator_backends.clone();
        ids.push(self.clerk_backend.clone());
        ids.push(self.judge_backend.clone());
        ids.sort();
        ids.dedup();
        ids
    }
}

/// Checks every configuration invariant, returning the config unchanged iff
/// all of them hold.
pub fn validate_config(config: SystemConfig) -> Result<SystemConfig, ConfigError> {
    let mut violations = Vec::new();

    if config.jury_size < 1 {
        violations.push(Violation {
            field: "jury_size",
            message: "must be at least 1".into(),
        });
    }
    if config.rounds < 1 {
        violations.push(Violation {
            field: "rounds",
            message: "must be at least 1".into(),
        });
    }
    if !(0.0..=1.0).contains(&config.theta) || config.theta.is_nan() {
        violations.push(Violation {
            field: "theta",
            message: format!("must lie in [0, 1], got {}", config.theta),
        });
    }
    if !(config.gamma > 0.0 && config.gamma <= 1.0) || config.gamma.is_nan() {
        violations.push(Violation {
            field: "gamma",
            message: format!("must lie in (0, 1], got {}", config.gamma),
        });
    }
    if config.roles.len() != config.jury_size {
        violations.push(Violation {
            field: "roles",
            message: format!(
                "expected {} role profiles, got {}",
                config.jury_size,
                config.roles.len()
            ),
        });
    }
    let mut seen = std::collections::HashSet::new();
    for role in &config.roles {
        if !seen.insert(role.name.as_str()) {
            violations.push(Violation {
                field: "roles",
                message: format!("duplicate role name '{}'", role.name),
            });
        }
        if role.description.trim().is_empty() {
            violations.push(Violation {
                field: "roles",
                message: format!("role '{}' has an empty description", role.name),
            });
        }
    }
    if config.evaluator_backends.len() != config.jury_size {
        violations.push(Violation {
            field: "evaluator_backends",
            message: format!(
                "expected {} backend ids, got {}",
                config.jury_size,
                config.evaluator_backends.len()
            ),
        });
    }
    if config.clerk_backend.trim().is_empty() {
        violations.push(Violation {
            field: "clerk_backend",
            message: "must not be empty".into(),
        });
    }
    if config.judge_backend.trim().is_empty() {
        violations.push(Violation {
            field: "judge_backend",
            message: "must not be empty".into(),
        });
    }
    if config.rule == DebateRule::MandatorySearch && config.ablation == AblationVariant::NoSearch {
        violations.push(Violation {
            field: "ablation",
            message: "the mandatory-search rule requires retrieval; no-search is contradictory"
                .into(),
        });
    }

    if violations.is_empty() {
        Ok(config)
    } else {
        Err(ConfigError::Invalid(violations))
    }
}

/// Applies an ablation variant to a validated configuration.
///
/// `None` is the identity. The result may need re-validation when the caller
/// combines it with further edits.
pub fn apply_ablation(config: SystemConfig, variant: AblationVariant) -> SystemConfig {
    let mut config = config;
    match variant {
        AblationVariant::None => config,
        AblationVariant::NoRolePlay => {
            config.roles = (1..=config.jury_size)
                .map(|i| RoleProfile::new(format!("Referee {i}"), GENERIC_REFEREE))
                .collect();
            config.ablation = AblationVariant::NoRolePlay;
            config
        }
        AblationVariant::NoDebate => {
            config.rounds = 1;
            config.ablation = AblationVariant::NoDebate;
            config
        }
        AblationVariant::NoSearch => {
            config.ablation = AblationVariant::NoSearch;
            config
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_config() -> SystemConfig {
        SystemConfig {
            jury_size: 3,
            rounds: 2,
            rule: DebateRule::FreeDebate,
            gamma: 0.8,
            ..SystemConfig::default()
        }
    }

    #[test]
    fn paper_setup_is_valid() {
        let config = paper_config();
        let validated = validate_config(config.clone()).unwrap();
        assert_eq!(validated, config);
    }

    #[test]
    fn validation_is_idempotent() {
        let once = validate_config(paper_config()).unwrap();
        let twice = validate_config(once.clone()).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn zero_jury_rejected_with_field_name() {
        let config = SystemConfig {
            jury_size: 0,
            roles: vec![],
            evaluator_backends: vec![],
            ..SystemConfig::default()
        };
        let err = validate_config(config).unwrap_err();
        assert!(err.to_string().contains("jury_size"), "{err}");
    }

    #[test]
    fn theta_out_of_range_rejected() {
        let config = SystemConfig {
            theta: 1.5,
            ..SystemConfig::default()
        };
        let err = validate_config(config).unwrap_err();
        assert!(err.to_string().contains("theta"), "{err}");
    }

    #[test]
    fn gamma_zero_rejected() {
        let config = SystemConfig {
            gamma: 0.0,
            ..SystemConfig::default()
        };
        let err = validate_config(config).unwrap_err();
        assert!(err.to_string().contains("gamma"), "{err}");
    }

    #[test]
    fn duplicate_role_names_rejected() {
        let mut config = SystemConfig::default();
        config.roles[1] = config.roles[0].clone();
        let err = validate_config(config).unwrap_err();
        assert!(err.to_string().contains("duplicate role name"), "{err}");
    }

    #[test]
    fn mandatory_search_with_no_search_ablation_rejected() {
        let config = apply_ablation(
            SystemConfig {
                rule: DebateRule::MandatorySearch,
                ..SystemConfig::default()
            },
            AblationVariant::NoSearch,
        );
        let err = validate_config(config).unwrap_err();
        assert!(err.to_string().contains("ablation"), "{err}");
    }

    #[test]
    fn ablation_none_is_identity() {
        let config = paper_config();
        assert_eq!(apply_ablation(config.clone(), AblationVariant::None), config);
    }

    #[test]
    fn ablation_no_debate_forces_single_round() {
        let ablated = apply_ablation(paper_config(), AblationVariant::NoDebate);
        assert_eq!(ablated.rounds, 1);
        assert_eq!(ablated.ablation, AblationVariant::NoDebate);
        validate_config(ablated).unwrap();
    }

    #[test]
    fn ablation_no_role_play_makes_descriptions_equal() {
        let ablated = apply_ablation(paper_config(), AblationVariant::NoRolePlay);
        assert_eq!(ablated.roles.len(), 3);
        assert!(ablated
            .roles
            .iter()
            .all(|r| r.description == ablated.roles[0].description));
        // names stay unique so the config still validates
        validate_config(ablated).unwrap();
    }

    #[test]
    fn ablation_is_deterministic() {
        let a = apply_ablation(paper_config(), AblationVariant::NoRolePlay);
        let b = apply_ablation(paper_config(), AblationVariant::NoRolePlay);
        assert_eq!(a, b);
    }

    #[test]
    fn default_roles_follow_table_order_and_cycle() {
        let three = default_roles(3);
        assert_eq!(three[0].name, "General Public");
        assert_eq!(three[1].name, "Critic");
        assert_eq!(three[2].name, "News Author");

        let eight = default_roles(8);
        assert_eq!(eight[6].name, "General Public 2");
        assert_eq!(eight[7].name, "Critic 2");
        let names: std::collections::HashSet<_> = eight.iter().map(|r| &r.name).collect();
        assert_eq!(names.len(), 8);
    }

    #[test]
    fn config_file_with_unknown_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(&path, r#"{"jury_size": 3, "bogus_field": 1}"#).unwrap();
        let err = SystemConfig::load(&path).unwrap_err();
        assert!(matches!(err, ConfigError::Parse { .. }), "{err}");
    }

    #[test]
    fn config_file_fills_roles_and_backends() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(
            &path,
            r#"{"jury_size": 2, "evaluator_backends": ["m1", "m2"], "clerk_backend": "m1", "judge_backend": "m1"}"#,
        )
        .unwrap();
        let config = SystemConfig::load(&path).unwrap();
        assert_eq!(config.roles.len(), 2);
        assert_eq!(config.roles[0].name, "General Public");
        assert_eq!(config.theta, 0.8);
        assert_eq!(config.rounds, 2);
    }

    #[test]
    fn missing_config_file_is_io_error_with_path() {
        let err = SystemConfig::load("/nonexistent/config.json").unwrap_err();
        match &err {
            ConfigError::Io { path, .. } => assert!(path.contains("nonexistent")),
            other => panic!("expected Io error, got {other}"),
        }
    }
}

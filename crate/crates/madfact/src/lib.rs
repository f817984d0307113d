//! madfact — long-form factuality verification through multi-agent debate.
//!
//! The pipeline decomposes a long-form answer into atomic claims (clerk),
//! debates each claim across a jury of role-played evaluator agents with
//! optional web retrieval (jury), majority-votes the final verdicts (judge),
//! and scores responses against a fact-importance pyramid built from expert
//! reference answers (pyramid).
//!
//! All model and search backends sit behind the [`providers`] traits; the
//! deterministic mock implementations make every pipeline stage runnable and
//! testable offline. The `examples/` directory holds one runnable example per
//! capability, and the `madfact` binary wires the same library into
//! reproducible batch runs.

pub mod cli;
pub mod clerk;
pub mod config;
pub mod harness;
pub mod judge;
pub mod jury;
pub mod providers;
pub mod pyramid;
pub mod text;
pub mod types;

pub use config::{AblationVariant, DebateRule, SystemConfig};
pub use types::{AtomicClaim, LongFormResponse, Question, RoleProfile, Verdict, VerdictRecord};

//! The decomposition-oracle port and its implementations.
//!
//! The planner asks an oracle for a primitive task sequence when no method
//! decomposes a compound task. [`LlmOracle`] realizes this with a two-stage
//! chat prompt; [`ScriptedOracle`], [`AdversarialOracle`] and
//! [`FailingOracle`] are deterministic stand-ins, and [`CachingOracle`]
//! records exchanges for replay.

mod cache;
mod llm;
mod mock;
mod parse;
mod prompt;

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::domain::{
    ground_literals, Domain, DomainError, GroundLiteral, GroundTask, State, TaskInstance,
};

pub use cache::{CacheRecord, CachingOracle, ExchangeCache};
pub use llm::{
    ChatTransport, HttpTransport, LlmConfig, LlmOracle, RetryingTransport, TransportError,
};
pub use mock::{AdversarialOracle, FailingOracle, FixtureError, ScriptedOracle};
pub use parse::{parse_predicates, ParseOutcome, ParsePolicy, ParseReport, RejectedLine};
pub use prompt::{
    build_prompt_stage1, build_prompt_stage2, render_axioms, render_operators, Prompt,
    PROMPT_VERSION, SYSTEM_PROMPT,
};

/// What the planner hands to an oracle: the task, its grounded semantics,
/// the current state, and the domain's action schemas and axioms.
#[derive(Clone, Debug)]
pub struct OracleRequest<'a> {
    pub task: TaskInstance,
    pub preconditions: Vec<GroundLiteral>,
    pub effects: Vec<GroundLiteral>,
    pub state: &'a State,
    pub domain: &'a Domain,
}

impl<'a> OracleRequest<'a> {
    pub fn new(
        domain: &'a Domain,
        state: &'a State,
        task: &TaskInstance,
    ) -> Result<Self, DomainError> {
        let schema = domain
            .compound_task(&task.name)
            .filter(|c| c.params.len() == task.args.len())
            .ok_or_else(|| DomainError::NotCompound(task.to_string()))?;
        Ok(OracleRequest {
            task: task.clone(),
            preconditions: ground_literals(&schema.preconditions, &schema.params, &task.args)?,
            effects: ground_literals(&schema.effects, &schema.params, &task.args)?,
            state,
            domain,
        })
    }

    /// Hex SHA-256 over the canonical task, semantics, state, schema set and
    /// prompt version.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(PROMPT_VERSION.as_bytes());
        h.update(b"\n");
        h.update(self.task.to_string().as_bytes());
        h.update(b"\n");
        h.update(join(&self.preconditions).as_bytes());
        h.update(b"\n");
        h.update(join(&self.effects).as_bytes());
        h.update(b"\n");
        h.update(self.state.canonical().as_bytes());
        h.update(b"\n");
        h.update(render_operators(self.domain.actions()).as_bytes());
        h.update(b"\n");
        h.update(render_axioms(self.domain.axioms()).as_bytes());
        hex::encode(h.finalize())
    }
}

pub(crate) fn join<T: fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResponseSource {
    Live,
    Cache,
    Mock,
}

impl fmt::Display for ResponseSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResponseSource::Live => "live",
            ResponseSource::Cache => "cache",
            ResponseSource::Mock => "mock",
        })
    }
}

/// A parsed, schema-valid primitive task sequence plus the text exchange
/// that produced it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleResponse {
    pub tasks: Vec<GroundTask>,
    /// `(stage-1 prompt, stage-2 prompt)`; empty for mocks.
    pub prompts: (String, String),
    /// `(stage-1 response, stage-2 response)`.
    pub raw: (String, String),
    pub source: ResponseSource,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum OracleFailure {
    #[error("oracle response could not be parsed: {0}")]
    Unparseable(ParseReport),
    #[error("oracle transport failed: {0}")]
    Transport(String),
    #[error("oracle budget exhausted")]
    BudgetExhausted,
    #[error("oracle had no answer: {0}")]
    NoAnswer(String),
}

impl OracleFailure {
    pub fn kind(&self) -> &'static str {
        match self {
            OracleFailure::Unparseable(_) => "unparseable",
            OracleFailure::Transport(_) => "transport",
            OracleFailure::BudgetExhausted => "budget-exhausted",
            OracleFailure::NoAnswer(_) => "no-answer",
        }
    }
}

/// Anything that can propose a primitive decomposition for a compound task.
///
/// Implementations are shared by concurrent searches, hence `Send + Sync`.
pub trait DecompositionOracle: Send + Sync {
    fn decompose(&self, request: &OracleRequest<'_>) -> Result<OracleResponse, OracleFailure>;

    /// Whether identical requests always get identical answers.
    fn is_deterministic(&self) -> bool {
        true
    }

    fn describe(&self) -> String;
}

impl<T: DecompositionOracle + ?Sized> DecompositionOracle for Box<T> {
    fn decompose(&self, request: &OracleRequest<'_>) -> Result<OracleResponse, OracleFailure> {
        (**self).decompose(request)
    }

    fn is_deterministic(&self) -> bool {
        (**self).is_deterministic()
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

impl<T: DecompositionOracle + ?Sized> DecompositionOracle for &T {
    fn decompose(&self, request: &OracleRequest<'_>) -> Result<OracleResponse, OracleFailure> {
        (**self).decompose(request)
    }

    fn is_deterministic(&self) -> bool {
        (**self).is_deterministic()
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

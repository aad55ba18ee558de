//! Elicitation protocols for language-model endpoints.
//!
//! * [`prompts`] — the prompt catalog and rendering with a strict output block.
//! * [`parse`] — reply parsing into raw numbers, verification, typed payloads.
//! * [`endpoint`] — the [`ChatEndpoint`] trait and an HTTP client.
//! * [`run`] — verify-retry loops, credal ensembles, candidate generation.
//! * [`scripted`] — queue-backed endpoints for tests.

pub mod endpoint;
pub mod parse;
pub mod prompts;
pub mod run;
pub mod scripted;

use ipelicit_core::coherence::VerdictReport;
use thiserror::Error;

pub use endpoint::{ChatEndpoint, ChatRequest, ChatResponse, HttpEndpoint, ModelEndpoint, TransportError, Usage};
pub use parse::{parse_structured_report, ParseError, Payload, RawReport};
pub use prompts::{render_prompt, PromptKind};
pub use run::{
    elicit_credal_ensemble, elicit_with_retry, generate_candidates, replay, AttemptLog, ElicitOptions, ElicitStatus,
    ElicitationResult, EnsembleMember, EnsembleOutcome, MemberOutcome, DEFAULT_MAX_ATTEMPTS,
};

#[derive(Debug, Error)]
pub enum ElicitError {
    #[error("question is empty")]
    EmptyQuestion,
    #[error("prompt kind {0} needs a candidate set")]
    MissingCandidates(PromptKind),
    #[error("unknown prompt kind `{0}`")]
    UnknownKind(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Parse(ParseError),
    #[error("report rejected by verifier: {0:?}")]
    Rejected(VerdictReport),
    #[error("transport: {0}")]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Core(#[from] ipelicit_core::Error),
    #[error("no coherent report after {} attempts", .0.attempts)]
    RetriesExhausted(Box<ElicitationResult>),
    #[error("only {succeeded} of the {required} required ensemble members succeeded")]
    MemberQuorumNotMet {
        succeeded: usize,
        required: usize,
        members: Vec<MemberOutcome>,
    },
}

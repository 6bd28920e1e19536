//! Detection ingestion, text normalization and the agent client.

mod agent;
mod combiner;
mod document;
mod text;

pub use agent::{
    content_hash, extract_content, fixture_path, request_body, AgentBackend, AgentClient,
    AgentError, AgentRequest, AgentRole, Exchange, LiveBackend, LiveConfig, MockBackend, PromptSet,
    PromptTemplate, RecorderBackend,
};
pub use combiner::{
    parse_combiner_response, parse_wire_reactions, reactions_to_wire, resolve_entity,
    resolve_reactions, RESOLVE_IOU,
};
pub use document::{
    document_to_json, load_document, ArrowDirection, Entity, EntityKind, LayoutClass, LoadWarning,
    LoadedDocument, Payload, ReactionDocument,
};
pub use text::{normalize_text, tokens_to_string, Lexicon, Token};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PerceptionError {
    #[error("schema error at '{pointer}': {message}")]
    Schema { pointer: String, message: String },
    #[error("entity {id}: SMILES not parsed: {message}")]
    Payload { id: String, message: String },
    #[error("lexicon line {line}: {message}")]
    Lexicon { line: usize, message: String },
    #[error("malformed response: {0}")]
    ResponseFormat(String),
    #[error("reaction {reaction}: {field} must not be empty")]
    Constraint {
        reaction: usize,
        field: &'static str,
    },
    #[error("no entity matches {pointer} (best IoU {best_iou:.3})")]
    Resolution { pointer: String, best_iou: f64 },
    #[error("unknown entity id '{id}'")]
    Reference { id: String },
    #[error(transparent)]
    Agent(#[from] AgentError),
}

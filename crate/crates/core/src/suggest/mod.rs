//! Prompt construction, suggestion backends and response parsing.

pub mod backend;
pub mod parse;
pub mod prompt;

pub use backend::{
    query, BackendConfig, BackendError, BackendKind, QueryCounter, RecordingBackend, RemoteBackend, RemoteSettings, WILDCARD,
    ReplayBackend, ScriptTable, ScriptedBackend, SuggestionBackend, TranscriptRecord,
};
pub use parse::{join_blocks, normalize_script, parse_response, segment_blocks, SuggestionResponse};
pub use prompt::{default_heuristics, promptify, AgentMode, HeuristicEntry, PromptBundle, PromptError};

//! Event-conditioned daily mobility generation with an LLM, plus the
//! evaluation metrics used to score generated trajectories.

pub mod alignment;
pub mod artifacts;
mod ask;
pub mod cli;
pub mod config;
pub mod event;
pub mod extract;
pub mod gist;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod provider;
pub mod template;

pub use alignment::{run_generation_loop, AuditVerdict, GenerationOutcome, LoopConfig, LoopError};
pub use ask::AskError;
pub use config::RunConfig;
pub use event::{EventContext, EventInput};
pub use gist::{ActionGist, EventGist, GistCache, Justification, PatternGist};
pub use model::{CheckIn, GeoPoint, Trajectory, UserHistory, Visit};
pub use provider::{ChatProvider, ChatRequest, ChatResponse, HttpProvider, ProviderError, ScriptedProvider};
pub use template::{Stage, TemplateSet};

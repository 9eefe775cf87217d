//! Chat-completion backends behind one blocking interface, with per-stage
//! call accounting.

mod http;
mod ledger;
mod scripted;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{HttpProvider, HttpProviderConfig};
pub use ledger::{CallLedger, LedgerSnapshot, TagUsage};
pub use scripted::{Script, ScriptedProvider};

pub const DEFAULT_TEMPERATURE: f64 = 0.1;
pub const DEFAULT_TOP_P: f64 = 1.0;
pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 2048;

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("script exhausted for tag {tag:?} after {served} responses")]
    ScriptExhausted { tag: String, served: usize },
    #[error("invalid script: {0}")]
    InvalidScript(String),
    #[error("provider request failed after {attempts} attempts (last status {status:?}): {message}")]
    Exhausted {
        attempts: u32,
        status: Option<u16>,
        message: String,
    },
    #[error("provider rejected request with status {status}: {message}")]
    Rejected { status: u16, message: String },
    #[error("malformed provider response: {0}")]
    MalformedResponse(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("provider configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_prompt: String,
    pub user_prompt: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_output_tokens: u32,
    /// Pipeline stage label used for accounting.
    pub tag: String,
    /// Set on corrective re-asks after an unusable response.
    #[serde(default)]
    pub repair: bool,
}

impl ChatRequest {
    pub fn new(tag: impl Into<String>, system_prompt: impl Into<String>, user_prompt: impl Into<String>) -> Self {
        Self {
            system_prompt: system_prompt.into(),
            user_prompt: user_prompt.into(),
            temperature: DEFAULT_TEMPERATURE,
            top_p: DEFAULT_TOP_P,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            tag: tag.into(),
            repair: false,
        }
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.system_prompt.trim().is_empty() || self.user_prompt.trim().is_empty() {
            return Err(ProviderError::InvalidRequest("prompts must be non-empty".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(ProviderError::InvalidRequest(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(ProviderError::InvalidRequest(format!("top_p {} outside (0, 1]", self.top_p)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatResponse {
    pub text: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub latency: Duration,
}

pub trait ChatProvider: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError>;

    fn ledger(&self) -> &CallLedger;
}

/// Rough token count: characters / 4, rounded up.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_estimate() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens("abcdefgh"), 2);
        assert_eq!(estimate_tokens("abcdefghi"), 3);
    }

    #[test]
    fn request_defaults_and_validation() {
        let r = ChatRequest::new("schema", "sys", "user");
        assert_eq!(r.temperature, 0.1);
        assert_eq!(r.top_p, 1.0);
        r.validate().unwrap();
        assert!(ChatRequest::new("t", "", "u").validate().is_err());
        assert!(ChatRequest { top_p: 0.0, ..r.clone() }.validate().is_err());
        assert!(ChatRequest { temperature: 2.5, ..r }.validate().is_err());
    }

    proptest::proptest! {
        #[test]
        fn token_estimate_monotone(a in ".{0,64}", b in ".{0,64}") {
            let joined = format!("{a}{b}");
            proptest::prop_assert!(estimate_tokens(&joined) >= estimate_tokens(&a));
        }
    }
}

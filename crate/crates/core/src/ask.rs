//! One prompt-and-parse exchange with a single corrective re-ask.

use thiserror::Error;

use crate::provider::{ChatProvider, ChatRequest, ProviderError};
use crate::template::{Stage, TemplateError, TemplateSet};

#[derive(Debug, Error)]
pub enum AskError {
    #[error("{stage}: {source}")]
    Provider {
        stage: &'static str,
        #[source]
        source: ProviderError,
    },
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("{stage}: unusable response after corrective re-ask: {second_reason} (first: {first_reason})")]
    Unusable {
        stage: &'static str,
        first_reason: String,
        second_reason: String,
        responses: [String; 2],
    },
}

pub(crate) fn repair_prompt(user_prompt: &str, reason: &str) -> String {
    format!(
        "{user_prompt}\n\nYour previous reply could not be used: {reason}\nReply again with only the corrected JSON object."
    )
}

/// Renders `stage`, calls the provider and parses the reply. On a parse
/// failure the prompt is re-sent once with the parser error appended.
pub(crate) fn ask<T>(
    provider: &dyn ChatProvider,
    templates: &TemplateSet,
    stage: Stage,
    values: &[(&str, &str)],
    parse: impl Fn(&str) -> Result<T, String>,
) -> Result<T, AskError> {
    let (system, user) = templates.render(stage, values)?;
    let request = ChatRequest::new(stage.name(), system, user);
    let call = |r: &ChatRequest| {
        provider.complete(r).map_err(|source| AskError::Provider {
            stage: stage.name(),
            source,
        })
    };
    let first = call(&request)?;
    let first_reason = match parse(&first.text) {
        Ok(v) => return Ok(v),
        Err(reason) => reason,
    };
    let retry = ChatRequest {
        user_prompt: repair_prompt(&request.user_prompt, &first_reason),
        repair: true,
        ..request
    };
    let second = call(&retry)?;
    parse(&second.text).map_err(|second_reason| AskError::Unusable {
        stage: stage.name(),
        first_reason,
        second_reason,
        responses: [first.text, second.text],
    })
}

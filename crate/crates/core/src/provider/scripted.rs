use std::collections::{BTreeMap, VecDeque};
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde_json::Value;

use super::{estimate_tokens, CallLedger, ChatProvider, ChatRequest, ChatResponse, ProviderError};

/// Tag used in tagged scripts for responses that serve any stage.
pub const FALLBACK_TAG: &str = "*";

/// Canned responses, either consumed in call order or per stage tag.
#[derive(Debug, Clone, PartialEq)]
pub enum Script {
    Sequence(VecDeque<String>),
    /// Per-tag queues; a `"*"` queue serves tags with no queue of their own.
    Tagged(BTreeMap<String, VecDeque<String>>),
}

fn response_text(v: Value) -> String {
    match v {
        Value::String(s) => s,
        other => other.to_string(),
    }
}

fn queue(v: Value, what: &str) -> Result<VecDeque<String>, ProviderError> {
    match v {
        Value::Array(items) => Ok(items.into_iter().map(response_text).collect()),
        _ => Err(ProviderError::InvalidScript(format!("{what} must be an array"))),
    }
}

impl Script {
    pub fn sequence<I, S>(items: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::Sequence(items.into_iter().map(Into::into).collect())
    }

    /// Parses a script document: an array of responses, or an object mapping
    /// tags to arrays. Non-string entries are used as their JSON text.
    pub fn from_json(text: &str) -> Result<Self, ProviderError> {
        let value: Value = serde_json::from_str(text).map_err(|e| ProviderError::InvalidScript(e.to_string()))?;
        match value {
            Value::Array(_) => Ok(Self::Sequence(queue(value, "script")?)),
            Value::Object(map) => map
                .into_iter()
                .map(|(tag, v)| queue(v, &format!("queue for tag {tag:?}")).map(|q| (tag, q)))
                .collect::<Result<_, _>>()
                .map(Self::Tagged),
            _ => Err(ProviderError::InvalidScript("expected an array or an object".into())),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::InvalidScript(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Deterministic provider replaying a [`Script`]. Every request is captured
/// for inspection.
#[derive(Debug)]
pub struct ScriptedProvider {
    script: Mutex<(Script, BTreeMap<String, usize>)>,
    captured: Mutex<Vec<ChatRequest>>,
    ledger: CallLedger,
}

impl ScriptedProvider {
    pub fn new(script: Script) -> Self {
        Self {
            script: Mutex::new((script, BTreeMap::new())),
            captured: Mutex::new(Vec::new()),
            ledger: CallLedger::new(),
        }
    }

    pub fn from_responses<I, S>(items: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(Script::sequence(items))
    }

    pub fn captured(&self) -> Vec<ChatRequest> {
        self.captured.lock().expect("capture lock").clone()
    }

    /// Responses not yet consumed, across all queues.
    pub fn remaining(&self) -> usize {
        let guard = self.script.lock().expect("script lock");
        match &guard.0 {
            Script::Sequence(q) => q.len(),
            Script::Tagged(m) => m.values().map(VecDeque::len).sum(),
        }
    }

    fn next(&self, tag: &str) -> Result<String, ProviderError> {
        let mut guard = self.script.lock().expect("script lock");
        let (script, served) = &mut *guard;
        let popped = match script {
            Script::Sequence(q) => q.pop_front(),
            Script::Tagged(m) => match m.get_mut(tag).and_then(VecDeque::pop_front) {
                Some(r) => Some(r),
                None => m.get_mut(FALLBACK_TAG).and_then(VecDeque::pop_front),
            },
        };
        let count = served.entry(tag.to_string()).or_default();
        match popped {
            Some(text) => {
                *count += 1;
                Ok(text)
            }
            None => Err(ProviderError::ScriptExhausted {
                tag: tag.to_string(),
                served: *count,
            }),
        }
    }
}

impl ChatProvider for ScriptedProvider {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        request.validate()?;
        self.captured.lock().expect("capture lock").push(request.clone());
        let text = self.next(&request.tag)?;
        let input_tokens = estimate_tokens(&request.system_prompt) + estimate_tokens(&request.user_prompt);
        let output_tokens = estimate_tokens(&text);
        self.ledger
            .record(&request.tag, request.repair, input_tokens, output_tokens, Duration::ZERO);
        Ok(ChatResponse {
            text,
            input_tokens,
            output_tokens,
            latency: Duration::ZERO,
        })
    }

    fn ledger(&self) -> &CallLedger {
        &self.ledger
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(tag: &str) -> ChatRequest {
        ChatRequest::new(tag, "system", "user")
    }

    #[test]
    fn replays_then_exhausts() {
        let p = ScriptedProvider::from_responses(["A"]);
        assert_eq!(p.complete(&req("generate")).unwrap().text, "A");
        assert_eq!(p.ledger().snapshot().calls("generate"), 1);
        let err = p.complete(&req("generate")).unwrap_err();
        assert!(matches!(err, ProviderError::ScriptExhausted { served: 1, .. }));
        assert_eq!(p.ledger().snapshot().total.calls, 1);
        assert_eq!(p.captured().len(), 2);
    }

    #[test]
    fn tagged_queues_with_fallback() {
        let script = Script::from_json(r#"{"audit":["ok"],"*":[{"x":1}]}"#).unwrap();
        let p = ScriptedProvider::new(script);
        assert_eq!(p.complete(&req("generate")).unwrap().text, r#"{"x":1}"#);
        assert_eq!(p.complete(&req("audit")).unwrap().text, "ok");
        assert!(p.complete(&req("audit")).is_err());
    }

    #[test]
    fn bad_scripts() {
        assert!(Script::from_json("3").is_err());
        assert!(Script::from_json(r#"{"a":"b"}"#).is_err());
        assert!(Script::from_json("[").is_err());
    }
}

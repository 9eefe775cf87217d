use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{estimate_tokens, CallLedger, ChatProvider, ChatRequest, ChatResponse, ProviderError};

#[derive(Debug, Clone)]
pub struct HttpProviderConfig {
    /// Either an API root (`.../v1`) or the full chat-completions URL.
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub max_in_flight: usize,
    pub max_attempts: u32,
    pub retry_base: Duration,
    pub timeout: Duration,
    pub seed: u64,
}

impl Default for HttpProviderConfig {
    fn default() -> Self {
        Self {
            base_url: "http://localhost:8000/v1".into(),
            model: "gpt-4o-mini".into(),
            api_key: None,
            max_in_flight: 4,
            max_attempts: 3,
            retry_base: Duration::from_millis(500),
            timeout: Duration::from_secs(120),
            seed: 0,
        }
    }
}

impl HttpProviderConfig {
    fn endpoint(&self) -> String {
        let base = self.base_url.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Slots {
    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().expect("slots lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("slots lock");
        }
        *free -= 1;
        SlotGuard(self)
    }
}

struct SlotGuard<'a>(&'a Slots);

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("slots lock") += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Deserialize)]
struct CompletionBody {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize, Serialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    #[serde(default)]
    prompt_tokens: Option<u64>,
    #[serde(default)]
    completion_tokens: Option<u64>,
}

enum Attempt {
    Done(ChatResponse),
    Retry(Option<u16>, String),
    Fatal(ProviderError),
}

/// Chat-completions client over HTTP with bearer auth, bounded concurrency
/// and jittered exponential backoff on transient failures.
pub struct HttpProvider {
    config: HttpProviderConfig,
    client: reqwest::blocking::Client,
    slots: Slots,
    jitter: Mutex<ChaCha8Rng>,
    ledger: CallLedger,
}

impl std::fmt::Debug for HttpProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpProvider")
            .field("endpoint", &self.config.endpoint())
            .field("model", &self.config.model)
            .finish_non_exhaustive()
    }
}

impl HttpProvider {
    pub fn new(config: HttpProviderConfig) -> Result<Self, ProviderError> {
        if config.max_attempts == 0 || config.max_in_flight == 0 {
            return Err(ProviderError::Config("max_attempts and max_in_flight must be at least 1".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| ProviderError::Config(e.to_string()))?;
        Ok(Self {
            slots: Slots {
                free: Mutex::new(config.max_in_flight),
                cv: Condvar::new(),
            },
            jitter: Mutex::new(ChaCha8Rng::seed_from_u64(config.seed)),
            client,
            config,
            ledger: CallLedger::new(),
        })
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let base = self.config.retry_base.mul_f64(2f64.powi(attempt as i32 - 1));
        let factor: f64 = self.jitter.lock().expect("rng lock").random_range(0.5..1.0);
        base.mul_f64(factor)
    }

    fn attempt(&self, request: &ChatRequest) -> Attempt {
        let body = json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_prompt},
            ],
            "temperature": request.temperature,
            "top_p": request.top_p,
            "max_tokens": request.max_output_tokens,
        });
        let mut builder = self.client.post(self.config.endpoint()).json(&body);
        if let Some(key) = &self.config.api_key {
            builder = builder.bearer_auth(key);
        }
        let started = Instant::now();
        let resp = match builder.send() {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(None, e.to_string()),
        };
        let status = resp.status();
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(Some(status.as_u16()), e.to_string()),
        };
        if status.as_u16() == 429 || status.is_server_error() {
            return Attempt::Retry(Some(status.as_u16()), text);
        }
        if !status.is_success() {
            return Attempt::Fatal(ProviderError::Rejected {
                status: status.as_u16(),
                message: text,
            });
        }
        let parsed: CompletionBody = match serde_json::from_str(&text) {
            Ok(b) => b,
            Err(e) => return Attempt::Fatal(ProviderError::MalformedResponse(e.to_string())),
        };
        let Some(content) = parsed.choices.into_iter().next().and_then(|c| c.message.content) else {
            return Attempt::Fatal(ProviderError::MalformedResponse("no message content".into()));
        };
        let usage = parsed.usage;
        let input_tokens = usage.as_ref().and_then(|u| u.prompt_tokens).unwrap_or_else(|| {
            estimate_tokens(&request.system_prompt) + estimate_tokens(&request.user_prompt)
        });
        let output_tokens = usage
            .as_ref()
            .and_then(|u| u.completion_tokens)
            .unwrap_or_else(|| estimate_tokens(&content));
        Attempt::Done(ChatResponse {
            text: content,
            input_tokens,
            output_tokens,
            latency: started.elapsed(),
        })
    }
}

impl ChatProvider for HttpProvider {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        request.validate()?;
        let _slot = self.slots.acquire();
        let mut last = (None, String::new());
        for attempt in 1..=self.config.max_attempts {
            if attempt > 1 {
                std::thread::sleep(self.backoff(attempt - 1));
            }
            match self.attempt(request) {
                Attempt::Done(resp) => {
                    self.ledger.record(
                        &request.tag,
                        request.repair,
                        resp.input_tokens,
                        resp.output_tokens,
                        resp.latency,
                    );
                    return Ok(resp);
                }
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(status, message) => last = (status, message),
            }
        }
        Err(ProviderError::Exhausted {
            attempts: self.config.max_attempts,
            status: last.0,
            message: last.1,
        })
    }

    fn ledger(&self) -> &CallLedger {
        &self.ledger
    }
}

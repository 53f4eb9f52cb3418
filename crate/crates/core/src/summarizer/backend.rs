//! Chat-completion backends.
//!
//! Everything goes through [`CompletionBackend::complete`]. Retry, rate
//! limiting, and request recording are wrappers around any backend.

use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::prompts::sha256_hex;
use crate::chunker::{estimate_tokens, TokenBudget};
use crate::readability::segment_sentences;

pub const API_KEY_ENV: &str = "OPINION_SIMPLIFY_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model_id: String,
    pub instruction: String,
    pub input_text: String,
    pub temperature: f64,
    pub max_output_tokens: usize,
}

impl CompletionRequest {
    /// Builds a temperature-0 request whose output allowance is the budget's
    /// reserved output. Returns `None` if the request would not fit the
    /// context window.
    pub fn new(
        model_id: &str,
        instruction: &str,
        input_text: &str,
        budget: &TokenBudget,
    ) -> Option<Self> {
        let req = CompletionRequest {
            model_id: model_id.to_string(),
            instruction: instruction.to_string(),
            input_text: input_text.to_string(),
            temperature: 0.0,
            max_output_tokens: budget.reserved_output,
        };
        req.fits(budget.context_limit).then_some(req)
    }

    pub fn estimated_input_tokens(&self) -> usize {
        estimate_tokens(&self.instruction) + estimate_tokens(&self.input_text)
    }

    pub fn fits(&self, context_limit: usize) -> bool {
        self.temperature == 0.0
            && self.estimated_input_tokens() + self.max_output_tokens <= context_limit
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("HTTP status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("request timed out")]
    Timeout,
    #[error("malformed response: {0}")]
    InvalidResponse(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("gave up after {attempts} attempts; last error: {last}")]
    Exhausted {
        attempts: usize,
        last: Box<BackendError>,
    },
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::Status { status, .. } => *status == 429 || *status >= 500,
            BackendError::Transport(_) | BackendError::Timeout => true,
            _ => false,
        }
    }
}

pub trait CompletionBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError>;
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for Arc<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for Box<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

/// Offline stand-in: echoes a tag derived from the instruction followed by
/// the first `sentences` sentences of the input.
#[derive(Debug, Clone)]
pub struct MockBackend {
    pub sentences: usize,
}

impl Default for MockBackend {
    fn default() -> Self {
        MockBackend { sentences: 2 }
    }
}

impl MockBackend {
    pub fn tag(instruction: &str) -> String {
        format!("[mock {}]", &sha256_hex(instruction)[..8])
    }
}

impl CompletionBackend for MockBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let head = segment_sentences(&request.input_text)
            .into_iter()
            .take(self.sentences)
            .collect::<Vec<_>>()
            .join(" ");
        let tag = Self::tag(&request.instruction);
        Ok(if head.is_empty() {
            tag
        } else {
            format!("{tag} {head}")
        })
    }
}

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub max_attempts: usize,
    /// Delay before the first retry; doubles for each further retry.
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    /// Backoff before retry number `retry` (1-based): 1s, 2s, 4s, ...
    pub fn delay(&self, retry: usize) -> Duration {
        self.base_delay * 2u32.saturating_pow(retry.saturating_sub(1) as u32)
    }
}

type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

/// Retries transient failures (429, 5xx, transport, timeout) with
/// exponential backoff.
pub struct Retrying<B> {
    inner: B,
    policy: RetryPolicy,
    sleep: Sleeper,
}

impl<B> Retrying<B> {
    pub fn new(inner: B, policy: RetryPolicy) -> Self {
        Retrying {
            inner,
            policy,
            sleep: Arc::new(std::thread::sleep),
        }
    }

    /// Replaces `thread::sleep`, e.g. to record delays in tests.
    pub fn with_sleeper(mut self, sleep: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleep = Arc::new(sleep);
        self
    }
}

impl<B: CompletionBackend> CompletionBackend for Retrying<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let attempts = self.policy.max_attempts.max(1);
        let mut last = None;
        for attempt in 1..=attempts {
            if attempt > 1 {
                (self.sleep)(self.policy.delay(attempt - 1));
            }
            match self.inner.complete(request) {
                Ok(out) => return Ok(out),
                Err(e) if e.is_retryable() => last = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(BackendError::Exhausted {
            attempts,
            last: Box::new(last.expect("at least one attempt")),
        })
    }
}

/// Enforces a minimum interval between requests across all threads sharing
/// the limiter.
#[derive(Clone)]
pub struct RateLimiter {
    interval: Duration,
    next_slot: Arc<Mutex<Option<Instant>>>,
}

impl RateLimiter {
    pub fn per_second(requests: f64) -> Self {
        let interval = if requests > 0.0 {
            Duration::from_secs_f64(1.0 / requests)
        } else {
            Duration::ZERO
        };
        RateLimiter {
            interval,
            next_slot: Arc::new(Mutex::new(None)),
        }
    }

    pub fn acquire(&self) {
        let wait = {
            let mut slot = self.next_slot.lock().unwrap();
            let now = Instant::now();
            let start = match *slot {
                Some(t) if t > now => t,
                _ => now,
            };
            *slot = Some(start + self.interval);
            start - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

pub struct RateLimited<B> {
    inner: B,
    limiter: RateLimiter,
}

impl<B> RateLimited<B> {
    pub fn new(inner: B, limiter: RateLimiter) -> Self {
        RateLimited { inner, limiter }
    }
}

impl<B: CompletionBackend> CompletionBackend for RateLimited<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        self.limiter.acquire();
        self.inner.complete(request)
    }
}

/// Keeps a copy of every request that reaches the wrapped backend.
pub struct Recording<B> {
    inner: B,
    log: Mutex<Vec<CompletionRequest>>,
}

impl<B> Recording<B> {
    pub fn new(inner: B) -> Self {
        Recording {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> usize {
        self.log.lock().unwrap().len()
    }

    pub fn requests(&self) -> Vec<CompletionRequest> {
        self.log.lock().unwrap().clone()
    }

    pub fn clear(&self) {
        self.log.lock().unwrap().clear();
    }
}

impl<B: CompletionBackend> CompletionBackend for Recording<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        self.log.lock().unwrap().push(request.clone());
        self.inner.complete(request)
    }
}

/// OpenAI-style `/chat/completions` client.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    endpoint: String,
    api_key: String,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpBackend {
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            agent,
        }
    }

    /// Reads the API key from `OPINION_SIMPLIFY_API_KEY`.
    pub fn from_env(endpoint: impl Into<String>) -> Result<Self, BackendError> {
        let key = std::env::var(API_KEY_ENV)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| BackendError::Config(format!("{API_KEY_ENV} is not set")))?;
        Ok(HttpBackend::new(endpoint, key, Self::DEFAULT_TIMEOUT))
    }

    pub fn request_body(request: &CompletionRequest) -> Value {
        json!({
            "model": request.model_id,
            "messages": [
                {"role": "system", "content": request.instruction},
                {"role": "user", "content": request.input_text},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        })
    }

    pub fn parse_response(body: &Value) -> Result<String, BackendError> {
        body.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| {
                BackendError::InvalidResponse("missing choices[0].message.content".into())
            })
    }
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let result = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(Self::request_body(request));
        let mut response = match result {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Err(BackendError::Timeout),
            Err(e) => return Err(BackendError::Transport(e.to_string())),
        };
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(BackendError::Status { status, body: text });
        }
        let body: Value = serde_json::from_str(&text)
            .map_err(|e| BackendError::InvalidResponse(e.to_string()))?;
        Self::parse_response(&body)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Scripted {
        failures: usize,
        status: u16,
        calls: AtomicUsize,
    }

    impl CompletionBackend for Scripted {
        fn complete(&self, _: &CompletionRequest) -> Result<String, BackendError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.failures {
                Err(BackendError::Status {
                    status: self.status,
                    body: "slow down".into(),
                })
            } else {
                Ok("ok".into())
            }
        }
    }

    fn req() -> CompletionRequest {
        CompletionRequest::new("m", "Summarize.", "One. Two. Three.", &TokenBudget::default())
            .unwrap()
    }

    fn recorded_sleeps() -> (Arc<Mutex<Vec<Duration>>>, impl Fn(Duration) + Send + Sync) {
        let log = Arc::new(Mutex::new(Vec::new()));
        let l2 = log.clone();
        (log, move |d| l2.lock().unwrap().push(d))
    }

    #[test]
    fn three_429s_exhaust_retries() {
        let (sleeps, sleeper) = recorded_sleeps();
        let b = Retrying::new(
            Scripted {
                failures: 3,
                status: 429,
                calls: AtomicUsize::new(0),
            },
            RetryPolicy::default(),
        )
        .with_sleeper(sleeper);
        let err = b.complete(&req()).unwrap_err();
        assert!(matches!(err, BackendError::Exhausted { attempts: 3, .. }));
        assert_eq!(b.inner.calls.load(Ordering::SeqCst), 3);
        assert_eq!(
            *sleeps.lock().unwrap(),
            [Duration::from_secs(1), Duration::from_secs(2)]
        );
    }

    #[test]
    fn transient_failure_recovers() {
        let (_, sleeper) = recorded_sleeps();
        let b = Retrying::new(
            Scripted {
                failures: 2,
                status: 503,
                calls: AtomicUsize::new(0),
            },
            RetryPolicy::default(),
        )
        .with_sleeper(sleeper);
        assert_eq!(b.complete(&req()).unwrap(), "ok");
    }

    #[test]
    fn client_errors_are_not_retried() {
        let b = Retrying::new(
            Scripted {
                failures: 1,
                status: 401,
                calls: AtomicUsize::new(0),
            },
            RetryPolicy::default(),
        )
        .with_sleeper(|_| {});
        assert!(matches!(
            b.complete(&req()),
            Err(BackendError::Status { status: 401, .. })
        ));
        assert_eq!(b.inner.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn backoff_schedule() {
        let p = RetryPolicy::default();
        assert_eq!(p.delay(1), Duration::from_secs(1));
        assert_eq!(p.delay(2), Duration::from_secs(2));
        assert_eq!(p.delay(3), Duration::from_secs(4));
    }

    #[test]
    fn mock_is_deterministic() {
        let m = MockBackend::default();
        let a = m.complete(&req()).unwrap();
        assert_eq!(a, m.complete(&req()).unwrap());
        assert!(a.ends_with("One. Two."));
        assert!(a.starts_with("[mock "));
    }

    #[test]
    fn request_budget_check() {
        let budget = TokenBudget::new(100, 50, 0).unwrap();
        let long = "word ".repeat(60);
        assert!(CompletionRequest::new("m", "x", &long, &budget).is_none());
        let r = CompletionRequest::new("m", "x", "a b c", &budget).unwrap();
        assert_eq!(r.temperature, 0.0);
        assert_eq!(r.max_output_tokens, 50);
    }

    #[test]
    fn wire_format() {
        let body = HttpBackend::request_body(&req());
        assert_eq!(body["model"], "m");
        assert_eq!(body["messages"][0]["role"], "system");
        assert_eq!(body["messages"][0]["content"], "Summarize.");
        assert_eq!(body["messages"][1]["role"], "user");
        assert_eq!(body["temperature"], 0.0);
        assert_eq!(body["max_tokens"], 4096);
        let resp = json!({"choices": [{"message": {"role": "assistant", "content": "hi"}}]});
        assert_eq!(HttpBackend::parse_response(&resp).unwrap(), "hi");
        assert!(HttpBackend::parse_response(&json!({})).is_err());
    }

    #[test]
    fn rate_limiter_spaces_requests() {
        let rl = RateLimiter::per_second(50.0);
        let t = Instant::now();
        for _ in 0..4 {
            rl.acquire();
        }
        assert!(t.elapsed() >= Duration::from_millis(55));
    }
}

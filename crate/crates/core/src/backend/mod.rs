//! HTTP+JSON client for an external abstractive generation backend.
//!
//! Protocol:
//!
//! * `GET  /v1/health`   → `{"name": string, "ready": bool}`
//! * `POST /v1/generate` with `{"id", "source", "max_tokens", "prefix"}`
//!   → `{"id": string, "summary": string}`

pub mod mock;

use std::io;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Environment variable naming the backend base URL.
pub const BACKEND_URL_ENV: &str = "PRSUM_BACKEND_URL";
pub const DEFAULT_PREFIX: &str = "summarize: ";
pub const DEFAULT_MAX_TOKENS: usize = 50;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("cannot connect to backend at {endpoint}: {message}")]
    Connection { endpoint: String, message: String },
    #[error("request to {endpoint} timed out")]
    Timeout { endpoint: String },
    #[error("backend returned HTTP {status}: {body}")]
    Server { status: u16, body: String },
    #[error("backend rejected the request with HTTP {status}: {body}")]
    Client { status: u16, body: String },
    #[error("protocol error in field `{field}`: {message}")]
    Protocol { field: String, message: String },
    #[error("invalid request: {0}")]
    InvalidRequest(&'static str),
}

impl BackendError {
    /// Timeouts, connection failures and 5xx responses may succeed on retry.
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            Self::Connection { .. } | Self::Timeout { .. } | Self::Server { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub id: String,
    pub source: String,
    pub max_tokens: usize,
    pub prefix: String,
}

impl GenerationRequest {
    pub fn new(id: impl Into<String>, source: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            source: source.into(),
            max_tokens: DEFAULT_MAX_TOKENS,
            prefix: DEFAULT_PREFIX.to_string(),
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.id.is_empty() {
            return Err(BackendError::InvalidRequest("id must be non-empty"));
        }
        if self.max_tokens == 0 {
            return Err(BackendError::InvalidRequest("max_tokens must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationResponse {
    pub id: String,
    pub summary: String,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HealthStatus {
    pub name: String,
    pub ready: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct BatchOptions {
    pub parallelism: usize,
    pub retries: usize,
    /// Sleep before retry `k` is `backoff * k`.
    pub backoff: Duration,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self {
            parallelism: 4,
            retries: 2,
            backoff: Duration::from_millis(200),
        }
    }
}

#[derive(Debug)]
pub struct BatchFailure {
    pub index: usize,
    pub id: String,
    pub attempts: usize,
    pub error: BackendError,
}

/// Successful responses in request order, plus per-request failures.
#[derive(Debug, Default)]
pub struct BatchOutcome {
    pub responses: Vec<GenerationResponse>,
    pub failures: Vec<BatchFailure>,
}

/// Blocking client; cheap to share across threads.
#[derive(Debug, Clone)]
pub struct BackendClient {
    endpoint: String,
    agent: ureq::Agent,
}

fn protocol(field: &str, message: impl Into<String>) -> BackendError {
    BackendError::Protocol {
        field: field.to_string(),
        message: message.into(),
    }
}

fn str_field<'a>(body: &'a Value, field: &str) -> Result<&'a str, BackendError> {
    match body.get(field) {
        Some(Value::String(s)) => Ok(s),
        Some(other) => Err(protocol(field, format!("expected a string, found {other}"))),
        None => Err(protocol(field, "missing")),
    }
}

impl BackendClient {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        let endpoint = endpoint.into().trim_end_matches('/').to_string();
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        Self { endpoint, agent }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn classify(&self, err: ureq::Error) -> BackendError {
        match err {
            ureq::Error::Status(status, resp) => {
                let body = resp.into_string().unwrap_or_default();
                if status >= 500 {
                    BackendError::Server { status, body }
                } else {
                    BackendError::Client { status, body }
                }
            }
            ureq::Error::Transport(t) => {
                let timed_out = std::error::Error::source(&t)
                    .and_then(|e| e.downcast_ref::<io::Error>())
                    .is_some_and(|e| matches!(e.kind(), io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock));
                if timed_out {
                    BackendError::Timeout {
                        endpoint: self.endpoint.clone(),
                    }
                } else {
                    BackendError::Connection {
                        endpoint: self.endpoint.clone(),
                        message: t.to_string(),
                    }
                }
            }
        }
    }

    fn read_json(&self, resp: ureq::Response) -> Result<Value, BackendError> {
        let text = resp.into_string().map_err(|e| {
            if matches!(e.kind(), io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock) {
                BackendError::Timeout {
                    endpoint: self.endpoint.clone(),
                }
            } else {
                protocol("<body>", e.to_string())
            }
        })?;
        let value: Value =
            serde_json::from_str(&text).map_err(|e| protocol("<body>", format!("not JSON: {e}")))?;
        if !value.is_object() {
            return Err(protocol("<body>", "expected a JSON object"));
        }
        Ok(value)
    }

    pub fn health_check(&self) -> Result<HealthStatus, BackendError> {
        let url = format!("{}/v1/health", self.endpoint);
        let resp = self.agent.get(&url).call().map_err(|e| self.classify(e))?;
        let body = self.read_json(resp)?;
        let name = str_field(&body, "name")?.to_string();
        let ready = match body.get("ready") {
            Some(Value::Bool(b)) => *b,
            Some(other) => return Err(protocol("ready", format!("expected a bool, found {other}"))),
            None => return Err(protocol("ready", "missing")),
        };
        Ok(HealthStatus { name, ready })
    }

    pub fn generate_one(&self, req: &GenerationRequest) -> Result<GenerationResponse, BackendError> {
        req.validate()?;
        let url = format!("{}/v1/generate", self.endpoint);
        let started = Instant::now();
        let resp = self
            .agent
            .post(&url)
            .send_json(req)
            .map_err(|e| self.classify(e))?;
        let body = self.read_json(resp)?;
        let id = str_field(&body, "id")?;
        if id != req.id {
            return Err(protocol("id", format!("expected {:?}, got {id:?}", req.id)));
        }
        let summary = str_field(&body, "summary")?.trim_end().to_string();
        Ok(GenerationResponse {
            id: req.id.clone(),
            summary,
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }

    fn generate_with_retries(
        &self,
        req: &GenerationRequest,
        opts: &BatchOptions,
    ) -> (usize, Result<GenerationResponse, BackendError>) {
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.generate_one(req) {
                Err(e) if e.is_retryable() && attempt <= opts.retries => {
                    debug!("retrying {} after attempt {attempt}: {e}", req.id);
                    thread::sleep(opts.backoff * attempt as u32);
                }
                other => return (attempt, other),
            }
        }
    }

    /// Runs up to `parallelism` requests at once. Output order follows input
    /// order; permanent failures are collected rather than returned as errors.
    pub fn generate_batch(&self, reqs: &[GenerationRequest], opts: &BatchOptions) -> BatchOutcome {
        let workers = opts.parallelism.max(1).min(reqs.len().max(1));
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<(usize, Result<GenerationResponse, BackendError>)>>> =
            Mutex::new((0..reqs.len()).map(|_| None).collect());
        thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(req) = reqs.get(i) else { break };
                    let result = self.generate_with_retries(req, opts);
                    slots.lock().unwrap()[i] = Some(result);
                });
            }
        });
        let mut outcome = BatchOutcome::default();
        for (index, slot) in slots.into_inner().unwrap().into_iter().enumerate() {
            let (attempts, result) = slot.expect("every request is processed");
            match result {
                Ok(resp) => outcome.responses.push(resp),
                Err(error) => {
                    warn!("generation failed for {}: {error}", reqs[index].id);
                    outcome.failures.push(BatchFailure {
                        index,
                        id: reqs[index].id.clone(),
                        attempts,
                        error,
                    });
                }
            }
        }
        outcome
    }
}

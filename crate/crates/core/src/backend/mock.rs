//! Echo backend speaking the generation protocol: the summary is the first
//! `max_tokens` whitespace tokens of the source. Faults can be injected per
//! request id for client tests.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use serde_json::{json, Value};
use tiny_http::{Header, Method, Request, Response, Server};

pub const MOCK_NAME: &str = "prsum-echo-mock";

/// Fault returned for a particular request id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MockFault {
    /// Always answer with this status.
    Status(u16),
    /// Answer with `status` for the first `times` requests, then echo.
    Transient { status: u16, times: usize },
    /// Answer 200 with a body that is missing the `summary` field.
    MissingSummary,
    /// Answer 200 with an `id` that does not match the request.
    WrongId,
}

#[derive(Debug, Clone)]
pub struct MockConfig {
    pub name: String,
    pub ready: bool,
    /// Applied before every generate response.
    pub delay: Duration,
    pub faults: HashMap<String, MockFault>,
    /// Health answers `{"name": ..., "ready": "yes"}` when set.
    pub malformed_health: bool,
}

impl Default for MockConfig {
    fn default() -> Self {
        Self {
            name: MOCK_NAME.to_string(),
            ready: true,
            delay: Duration::ZERO,
            faults: HashMap::new(),
            malformed_health: false,
        }
    }
}

/// Echo summary: first `max_tokens` whitespace tokens of `source`.
pub fn echo_summary(source: &str, max_tokens: usize) -> String {
    source
        .split_whitespace()
        .take(max_tokens)
        .collect::<Vec<_>>()
        .join(" ")
}

struct State {
    config: MockConfig,
    seen: Mutex<HashMap<String, usize>>,
    requests: AtomicUsize,
}

/// A running mock; the server stops when this is dropped.
pub struct MockBackend {
    server: Arc<Server>,
    addr: SocketAddr,
    state: Arc<State>,
    accept: Option<JoinHandle<()>>,
}

impl MockBackend {
    /// Binds to `addr` (use port 0 for an ephemeral port) and starts serving.
    pub fn start(addr: &str, config: MockConfig) -> std::io::Result<Self> {
        let server = Server::http(addr).map_err(std::io::Error::other)?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| std::io::Error::other("mock must listen on an IP socket"))?;
        let server = Arc::new(server);
        let state = Arc::new(State {
            config,
            seen: Mutex::new(HashMap::new()),
            requests: AtomicUsize::new(0),
        });
        let accept = {
            let server = Arc::clone(&server);
            let state = Arc::clone(&state);
            thread::spawn(move || {
                for request in server.incoming_requests() {
                    let state = Arc::clone(&state);
                    thread::spawn(move || handle(request, &state));
                }
            })
        };
        Ok(Self {
            server,
            addr,
            state,
            accept: Some(accept),
        })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Total requests received so far.
    pub fn request_count(&self) -> usize {
        self.state.requests.load(Ordering::SeqCst)
    }

    /// Blocks until the server is shut down from another thread.
    pub fn wait(mut self) {
        if let Some(handle) = self.accept.take() {
            let _ = handle.join();
        }
    }
}

impl Drop for MockBackend {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(handle) = self.accept.take() {
            let _ = handle.join();
        }
    }
}

fn json_response(status: u16, body: &Value) -> Response<std::io::Cursor<Vec<u8>>> {
    let header = Header::from_bytes("Content-Type", "application/json").unwrap();
    Response::from_string(body.to_string())
        .with_status_code(status)
        .with_header(header)
}

fn handle(mut request: Request, state: &State) {
    state.requests.fetch_add(1, Ordering::SeqCst);
    let config = &state.config;
    let response = match (request.method(), request.url()) {
        (Method::Get, "/v1/health") => {
            let ready = if config.malformed_health {
                json!("yes")
            } else {
                json!(config.ready)
            };
            json_response(200, &json!({ "name": config.name, "ready": ready }))
        }
        (Method::Post, "/v1/generate") => {
            let mut body = String::new();
            match request.as_reader().read_to_string(&mut body) {
                Ok(_) => generate(&body, state),
                Err(e) => json_response(400, &json!({ "error": e.to_string() })),
            }
        }
        _ => json_response(404, &json!({ "error": "not found" })),
    };
    let _ = request.respond(response);
}

fn generate(body: &str, state: &State) -> Response<std::io::Cursor<Vec<u8>>> {
    let config = &state.config;
    let parsed: Value = match serde_json::from_str(body) {
        Ok(v) => v,
        Err(e) => return json_response(400, &json!({ "error": format!("bad JSON: {e}") })),
    };
    let (Some(id), Some(source), Some(max_tokens)) = (
        parsed.get("id").and_then(Value::as_str),
        parsed.get("source").and_then(Value::as_str),
        parsed.get("max_tokens").and_then(Value::as_u64),
    ) else {
        return json_response(400, &json!({ "error": "expected id, source and max_tokens" }));
    };
    if !config.delay.is_zero() {
        thread::sleep(config.delay);
    }
    let attempt = {
        let mut seen = state.seen.lock().unwrap();
        let count = seen.entry(id.to_string()).or_insert(0);
        *count += 1;
        *count
    };
    let summary = echo_summary(source, max_tokens as usize);
    match config.faults.get(id) {
        Some(MockFault::Status(status)) => json_response(*status, &json!({ "error": "injected" })),
        Some(MockFault::Transient { status, times }) if attempt <= *times => {
            json_response(*status, &json!({ "error": "injected transient" }))
        }
        Some(MockFault::MissingSummary) => json_response(200, &json!({ "id": id })),
        Some(MockFault::WrongId) => {
            json_response(200, &json!({ "id": format!("{id}-other"), "summary": summary }))
        }
        _ => json_response(200, &json!({ "id": id, "summary": summary })),
    }
}

//! Client-side conformance checks for a generation backend.

use std::collections::HashMap;
use std::path::Path;
use std::time::Duration;

use prsum_core::backend::mock::{MockBackend, MockConfig, MockFault};
use prsum_core::backend::{BackendClient, BackendError, BatchOptions, GenerationRequest};
use serde_json::Value;

pub type Check = (String, Result<(), String>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Replays every recorded vector against `base_url`.
pub fn replay_vectors(base_url: &str, vectors_file: &Path) -> Vec<Check> {
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(vectors_file).unwrap()).unwrap();
    let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs(5)).build();
    let mut checks = Vec::new();
    for v in doc["vectors"].as_array().unwrap() {
        let name = v["name"].as_str().unwrap().to_string();
        let url = format!("{base_url}{}", v["path"].as_str().unwrap());
        let result = match v["method"].as_str().unwrap() {
            "POST" => agent.post(&url).send_json(v["request"].clone()),
            _ => agent.get(&url).call(),
        };
        let (status, body) = match result {
            Ok(r) => (r.status(), r.into_string().unwrap_or_default()),
            Err(ureq::Error::Status(s, r)) => (s, r.into_string().unwrap_or_default()),
            Err(e) => {
                checks.push((name, Err(e.to_string())));
                continue;
            }
        };
        let expected_status = v["status"].as_u64().unwrap() as u16;
        let outcome = ensure(status == expected_status, || format!("status {status}, expected {expected_status}"))
            .and_then(|_| {
                if v["response"].is_null() {
                    return Ok(());
                }
                let got: Value = serde_json::from_str(&body).map_err(|e| format!("not JSON: {e}"))?;
                ensure(got == v["response"], || format!("body {got}, expected {}", v["response"]))
            });
        checks.push((name, outcome));
    }
    checks
}

fn requests(ids: &[&str]) -> Vec<GenerationRequest> {
    ids.iter()
        .map(|id| GenerationRequest::new(*id, format!("source of {id} with several words")))
        .collect()
}

/// Health, generation, fault and batch behaviour of the client against
/// freshly started mocks.
pub fn client_suite() -> Vec<Check> {
    let mut checks: Vec<Check> = Vec::new();
    let mut record = |name: &str, r: Result<(), String>| checks.push((name.to_string(), r));
    let timeout = Duration::from_secs(5);

    let mock = MockBackend::start("127.0.0.1:0", MockConfig::default()).unwrap();
    let client = BackendClient::new(mock.url(), timeout);
    record(
        "health_ready",
        client
            .health_check()
            .map_err(|e| e.to_string())
            .and_then(|h| ensure(h.ready, || format!("{h:?}"))),
    );
    let mut req = GenerationRequest::new("esigate/esigate_11", "add timeout field. use it");
    req.max_tokens = 3;
    record(
        "echo_summary",
        client
            .generate_one(&req)
            .map_err(|e| e.to_string())
            .and_then(|r| ensure(r.summary == "add timeout field." && r.id == req.id, || format!("{r:?}"))),
    );
    let batch = client.generate_batch(&requests(&["a", "b", "c"]), &BatchOptions { parallelism: 2, ..Default::default() });
    record(
        "batch_ordered",
        ensure(
            batch.failures.is_empty() && batch.responses.iter().map(|r| r.id.as_str()).eq(["a", "b", "c"]),
            || format!("{batch:?}"),
        ),
    );
    let empty = client.generate_batch(&[], &BatchOptions::default());
    record("batch_empty", ensure(empty.responses.is_empty() && empty.failures.is_empty(), || format!("{empty:?}")));
    drop(mock);

    let unbound = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap()
    };
    let dead = BackendClient::new(format!("http://{unbound}"), timeout);
    record(
        "connection_refused",
        match dead.health_check() {
            Err(e @ BackendError::Connection { .. }) => ensure(e.is_retryable(), || e.to_string()),
            other => Err(format!("{other:?}")),
        },
    );

    let malformed = MockBackend::start(
        "127.0.0.1:0",
        MockConfig {
            malformed_health: true,
            ..Default::default()
        },
    )
    .unwrap();
    record(
        "malformed_health_names_field",
        match BackendClient::new(malformed.url(), timeout).health_check() {
            Err(BackendError::Protocol { field, .. }) => ensure(field == "ready", || field),
            other => Err(format!("{other:?}")),
        },
    );
    drop(malformed);

    let slow = MockBackend::start(
        "127.0.0.1:0",
        MockConfig {
            delay: Duration::from_millis(300),
            ..Default::default()
        },
    )
    .unwrap();
    record(
        "timeout_is_retryable",
        match BackendClient::new(slow.url(), Duration::from_millis(1)).generate_one(&GenerationRequest::new("t", "x y")) {
            Err(e @ BackendError::Timeout { .. }) => ensure(e.is_retryable(), || e.to_string()),
            other => Err(format!("{other:?}")),
        },
    );
    drop(slow);

    let faults = HashMap::from([
        ("b".to_string(), MockFault::Status(500)),
        ("t".to_string(), MockFault::Transient { status: 503, times: 1 }),
        ("m".to_string(), MockFault::MissingSummary),
        ("w".to_string(), MockFault::WrongId),
        ("q".to_string(), MockFault::Status(422)),
    ]);
    let faulty = MockBackend::start(
        "127.0.0.1:0",
        MockConfig {
            faults,
            ..Default::default()
        },
    )
    .unwrap();
    let client = BackendClient::new(faulty.url(), timeout);
    let opts = BatchOptions {
        parallelism: 2,
        retries: 1,
        backoff: Duration::from_millis(5),
    };
    let out = client.generate_batch(&requests(&["a", "b", "c"]), &opts);
    record(
        "permanent_failure_recorded",
        ensure(
            out.responses.iter().map(|r| r.id.as_str()).eq(["a", "c"])
                && out.failures.len() == 1
                && out.failures[0].index == 1
                && out.failures[0].attempts == 2
                && matches!(out.failures[0].error, BackendError::Server { status: 500, .. }),
            || format!("{out:?}"),
        ),
    );
    let out = client.generate_batch(&requests(&["t"]), &opts);
    record(
        "transient_failure_retried",
        ensure(out.responses.len() == 1 && out.failures.is_empty(), || format!("{out:?}")),
    );
    let out = client.generate_batch(&requests(&["q"]), &opts);
    record(
        "client_error_not_retried",
        ensure(
            out.failures.len() == 1
                && out.failures[0].attempts == 1
                && matches!(out.failures[0].error, BackendError::Client { status: 422, .. }),
            || format!("{out:?}"),
        ),
    );
    record(
        "missing_summary_names_field",
        match client.generate_one(&GenerationRequest::new("m", "x")) {
            Err(BackendError::Protocol { field, .. }) => ensure(field == "summary", || field),
            other => Err(format!("{other:?}")),
        },
    );
    record(
        "mismatched_id_names_field",
        match client.generate_one(&GenerationRequest::new("w", "x")) {
            Err(BackendError::Protocol { field, .. }) => ensure(field == "id", || field),
            other => Err(format!("{other:?}")),
        },
    );
    record(
        "invalid_request_rejected_locally",
        match client.generate_one(&GenerationRequest::new("", "x")) {
            Err(BackendError::InvalidRequest(_)) => Ok(()),
            other => Err(format!("{other:?}")),
        },
    );
    checks
}

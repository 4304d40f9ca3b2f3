//! Replays recorded HTTP responses from `fixtures/github/*.json`.
//!
//! Each route maps a path-and-query to a list of responses served in order;
//! the last one repeats. `{base}` in bodies and headers becomes the server
//! URL and `{reset}` a rate-limit reset time two minutes ahead.

#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde_json::Value;
use tiny_http::{Header, Response, Server};

pub fn fixture_path(rel: &str) -> PathBuf {
    // Resolves from either workspace crate.
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(rel)
}

#[derive(Debug, Clone)]
pub struct Recorded {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

#[derive(Debug, Clone)]
pub struct Seen {
    pub url: String,
    pub accept: Option<String>,
    pub authorization: Option<String>,
}

struct Routes {
    table: HashMap<String, Vec<Recorded>>,
    hits: HashMap<String, usize>,
    log: Vec<Seen>,
}

pub struct FixtureServer {
    server: Arc<Server>,
    routes: Arc<Mutex<Routes>>,
    pub base: String,
    pub reset_at: u64,
    handle: Option<JoinHandle<()>>,
}

fn header_value(req: &tiny_http::Request, name: &'static str) -> Option<String> {
    req.headers()
        .iter()
        .find(|h| h.field.equiv(name))
        .map(|h| h.value.to_string())
}

impl FixtureServer {
    pub fn start(scenario: &str) -> Self {
        let server = Arc::new(Server::http("127.0.0.1:0").unwrap());
        let base = format!("http://{}", server.server_addr().to_ip().unwrap());
        let reset_at = SystemTime::now().duration_since(UNIX_EPOCH).unwrap().as_secs() + 120;
        let raw = std::fs::read_to_string(fixture_path(&format!("github/{scenario}.json"))).unwrap();
        let doc: Value = serde_json::from_str(&raw).unwrap();
        let subst = |s: &str| s.replace("{base}", &base).replace("{reset}", &reset_at.to_string());
        let mut table = HashMap::new();
        for (route, responses) in doc["routes"].as_object().unwrap() {
            let list = responses
                .as_array()
                .unwrap()
                .iter()
                .map(|r| Recorded {
                    status: r["status"].as_u64().unwrap() as u16,
                    headers: r
                        .get("headers")
                        .and_then(Value::as_object)
                        .map(|h| {
                            h.iter()
                                .map(|(k, v)| (k.clone(), subst(v.as_str().unwrap())))
                                .collect()
                        })
                        .unwrap_or_default(),
                    body: match (r.get("json"), r.get("text")) {
                        (Some(j), _) => subst(&j.to_string()),
                        (None, Some(t)) => subst(t.as_str().unwrap()),
                        (None, None) => String::new(),
                    },
                })
                .collect();
            table.insert(route.clone(), list);
        }
        let routes = Arc::new(Mutex::new(Routes {
            table,
            hits: HashMap::new(),
            log: Vec::new(),
        }));
        let handle = {
            let server = Arc::clone(&server);
            let routes = Arc::clone(&routes);
            thread::spawn(move || {
                for req in server.incoming_requests() {
                    let url = req.url().to_string();
                    let recorded = {
                        let mut r = routes.lock().unwrap();
                        r.log.push(Seen {
                            url: url.clone(),
                            accept: header_value(&req, "Accept"),
                            authorization: header_value(&req, "Authorization"),
                        });
                        let hit = *r.hits.entry(url.clone()).and_modify(|h| *h += 1).or_insert(0);
                        r.table.get(&url).map(|list| list[hit.min(list.len() - 1)].clone())
                    };
                    let recorded = recorded.unwrap_or(Recorded {
                        status: 404,
                        headers: Vec::new(),
                        body: r#"{"message":"Not Found"}"#.to_string(),
                    });
                    let mut resp = Response::from_string(recorded.body).with_status_code(recorded.status);
                    for (k, v) in &recorded.headers {
                        resp.add_header(Header::from_bytes(k.as_bytes(), v.as_bytes()).unwrap());
                    }
                    let _ = req.respond(resp);
                }
            })
        };
        Self {
            server,
            routes,
            base,
            reset_at,
            handle: Some(handle),
        }
    }

    pub fn requests(&self) -> Vec<Seen> {
        self.routes.lock().unwrap().log.clone()
    }

    pub fn hits(&self, path: &str) -> usize {
        self.requests().iter().filter(|s| s.url == path).count()
    }
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

/// Sleeper that records requested durations instead of sleeping.
pub fn recording_sleeper() -> (Arc<Mutex<Vec<Duration>>>, Arc<dyn Fn(Duration) + Send + Sync>) {
    let slept = Arc::new(Mutex::new(Vec::new()));
    let sink = Arc::clone(&slept);
    (slept, Arc::new(move |d| sink.lock().unwrap().push(d)))
}

//! Offline completion server that answers from a canned transcript and
//! records every request it sees.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use tiny_http::{Header, Method, Response, Server};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplyMode {
    /// Choice i is `texts[i % len]`.
    #[default]
    Cycle,
    /// Choices drawn uniformly from `texts`, seeded by the request.
    Sample,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Rule {
    pub model: Option<String>,
    /// Exact prompt match.
    pub prompt: Option<String>,
    pub prompt_contains: Option<String>,
    pub texts: Vec<String>,
    pub mode: ReplyMode,
    /// Answer the first matching requests with `fail_status` instead.
    pub fail_first: usize,
    pub fail_status: Option<u16>,
    pub delay_ms: u64,
    /// Return this many choices regardless of `n`.
    pub force_choices: Option<usize>,
}

impl Rule {
    fn matches(&self, model: &str, prompt: &str) -> bool {
        self.model.as_deref().is_none_or(|m| m == model)
            && self.prompt.as_deref().is_none_or(|p| p == prompt)
            && self.prompt_contains.as_deref().is_none_or(|p| prompt.contains(p))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Transcript {
    /// Bearer token that requests must present, if set.
    pub auth_token: Option<String>,
    pub rules: Vec<Rule>,
}

impl Transcript {
    pub fn load(path: &Path) -> Result<Self, MockError> {
        let text = fs::read_to_string(path).map_err(|e| MockError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| MockError::Transcript(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Error)]
pub enum MockError {
    #[error("cannot bind mock server: {0}")]
    Bind(String),
    #[error("{0}")]
    Io(String),
    #[error("invalid transcript: {0}")]
    Transcript(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedRequest {
    pub model: String,
    pub prompt: String,
    pub n: usize,
    pub max_tokens: usize,
    pub temperature: f64,
    pub top_p: f64,
    pub stop: Vec<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub rule: Option<usize>,
    pub status: u16,
}

#[derive(Deserialize)]
struct IncomingRequest {
    model: String,
    prompt: String,
    n: usize,
    #[serde(default)]
    max_tokens: usize,
    #[serde(default)]
    temperature: f64,
    #[serde(default = "one")]
    top_p: f64,
    #[serde(default)]
    stop: Vec<String>,
    #[serde(default)]
    seed: Option<u64>,
}

fn one() -> f64 {
    1.0
}

struct State {
    transcript: Transcript,
    failures_served: Vec<AtomicUsize>,
    log: Mutex<Vec<RecordedRequest>>,
    record_file: Mutex<Option<fs::File>>,
}

pub struct MockServer {
    server: Arc<Server>,
    state: Arc<State>,
    workers: Vec<JoinHandle<()>>,
    port: u16,
}

const WORKERS: usize = 8;

impl MockServer {
    /// Bind to `addr` (use port 0 for an ephemeral port) and start serving.
    pub fn start(transcript: Transcript, addr: &str, record_path: Option<PathBuf>) -> Result<Self, MockError> {
        let server = Arc::new(Server::http(addr).map_err(|e| MockError::Bind(e.to_string()))?);
        let port = server.server_addr().to_ip().map(|a| a.port()).unwrap_or(0);
        let record_file = match record_path {
            Some(path) => Some(fs::File::create(&path).map_err(|e| MockError::Io(format!("{}: {e}", path.display())))?),
            None => None,
        };
        let state = Arc::new(State {
            failures_served: transcript.rules.iter().map(|_| AtomicUsize::new(0)).collect(),
            transcript,
            log: Mutex::new(Vec::new()),
            record_file: Mutex::new(record_file),
        });
        let workers = (0..WORKERS)
            .map(|_| {
                let server = Arc::clone(&server);
                let state = Arc::clone(&state);
                thread::spawn(move || {
                    while let Ok(request) = server.recv() {
                        handle(&state, request);
                    }
                })
            })
            .collect();
        Ok(MockServer { server, state, workers, port })
    }

    pub fn port(&self) -> u16 {
        self.port
    }

    pub fn base_url(&self) -> String {
        format!("http://127.0.0.1:{}", self.port)
    }

    pub fn requests(&self) -> Vec<RecordedRequest> {
        self.state.log.lock().expect("request log").clone()
    }

    /// Block until the server is shut down from another thread.
    pub fn wait(mut self) {
        for worker in self.workers.drain(..) {
            let _ = worker.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        for _ in 0..self.workers.len() {
            self.server.unblock();
        }
        for worker in self.workers.drain(..) {
            let _ = worker.join();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.stop();
    }
}

fn json_response(status: u16, body: String) -> Response<std::io::Cursor<Vec<u8>>> {
    let header = Header::from_bytes("Content-Type", "application/json").expect("static header");
    Response::from_string(body).with_status_code(status).with_header(header)
}

fn error_body(message: &str) -> String {
    serde_json::json!({"error": {"message": message}}).to_string()
}

fn handle(state: &State, mut request: tiny_http::Request) {
    let response = match (request.method(), request.url()) {
        (Method::Get, "/transcript") => {
            let log = state.log.lock().expect("request log");
            json_response(200, serde_json::to_string(&*log).expect("log serializes"))
        }
        (Method::Post, "/v1/completions") => {
            let authorized = match &state.transcript.auth_token {
                None => true,
                Some(token) => {
                    let expected = format!("Bearer {token}");
                    request.headers().iter().any(|h| h.field.equiv("Authorization") && h.value.as_str() == expected)
                }
            };
            let mut body = String::new();
            let read = request.as_reader().read_to_string(&mut body);
            match (read, serde_json::from_str::<IncomingRequest>(&body)) {
                (Err(_), _) => json_response(400, error_body("unreadable body")),
                (Ok(_), Err(e)) => json_response(400, error_body(&e.to_string())),
                (Ok(_), Ok(incoming)) if !authorized => {
                    record(state, incoming, None, 401);
                    json_response(401, error_body("unauthorized"))
                }
                (Ok(_), Ok(incoming)) => complete(state, incoming),
            }
        }
        _ => json_response(404, error_body("not found")),
    };
    let _ = request.respond(response);
}

fn sample_rng(rule: usize, req: &IncomingRequest) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update((rule as u64).to_le_bytes());
    hasher.update(req.prompt.as_bytes());
    hasher.update(req.temperature.to_bits().to_le_bytes());
    hasher.update(req.seed.unwrap_or(0).to_le_bytes());
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

fn complete(state: &State, req: IncomingRequest) -> Response<std::io::Cursor<Vec<u8>>> {
    let found = state.transcript.rules.iter().enumerate().find(|(_, r)| r.matches(&req.model, &req.prompt));
    let (status, body) = match found {
        None => (400, error_body("no transcript rule matches this request")),
        Some((index, rule)) => {
            if rule.delay_ms > 0 {
                thread::sleep(Duration::from_millis(rule.delay_ms));
            }
            let served = &state.failures_served[index];
            let failing = served
                .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |c| (c < rule.fail_first).then_some(c + 1))
                .is_ok();
            if failing {
                (rule.fail_status.unwrap_or(503), error_body("scripted failure"))
            } else if rule.texts.is_empty() {
                (500, error_body("rule has no texts"))
            } else {
                let count = rule.force_choices.unwrap_or(req.n);
                let mut rng = sample_rng(index, &req);
                let choices: Vec<_> = (0..count)
                    .map(|i| {
                        let pick = match rule.mode {
                            ReplyMode::Cycle => i % rule.texts.len(),
                            ReplyMode::Sample => rng.random_range(0..rule.texts.len()),
                        };
                        serde_json::json!({"index": i, "text": rule.texts[pick]})
                    })
                    .collect();
                (200, serde_json::json!({"choices": choices}).to_string())
            }
        }
    };
    record(state, req, found.map(|(i, _)| i), status);
    json_response(status, body)
}

fn record(state: &State, req: IncomingRequest, rule: Option<usize>, status: u16) {
    let record = RecordedRequest {
        model: req.model,
        prompt: req.prompt,
        n: req.n,
        max_tokens: req.max_tokens,
        temperature: req.temperature,
        top_p: req.top_p,
        stop: req.stop,
        seed: req.seed,
        rule,
        status,
    };
    if let Some(file) = state.record_file.lock().expect("record file").as_mut() {
        let _ = writeln!(file, "{}", serde_json::to_string(&record).expect("record serializes"));
    }
    state.log.lock().expect("request log").push(record);
}

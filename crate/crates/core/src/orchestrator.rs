//! Completion client, single-stage baseline, two-stage (sketch then code)
//! generation and temperature sweeps.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::evalkit::{default_stops, truncate_completion, CandidateSet, Problem, Sample, Stage};
use crate::lexer::{self, TokenKind};
use crate::sketch::{vote_with_representative, SketchError, SketchMode, SymbolTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelEndpoint {
    pub base_url: String,
    pub model_id: String,
    /// Environment variable holding the bearer token, if any.
    pub auth_token_env: Option<String>,
    pub timeout_s: f64,
    pub max_retries: u32,
    /// Largest `n` sent in one request; larger requests are split.
    pub max_batch: usize,
    pub backoff_ms: u64,
}

impl Default for ModelEndpoint {
    fn default() -> Self {
        ModelEndpoint {
            base_url: String::new(),
            model_id: String::new(),
            auth_token_env: None,
            timeout_s: 60.0,
            max_retries: 3,
            max_batch: 50,
            backoff_ms: 500,
        }
    }
}

impl ModelEndpoint {
    pub fn new(base_url: impl Into<String>, model_id: impl Into<String>) -> Self {
        ModelEndpoint { base_url: base_url.into(), model_id: model_id.into(), ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), CompletionError> {
        if self.base_url.trim().is_empty() {
            return Err(CompletionError::Config("base_url is empty".into()));
        }
        if self.timeout_s <= 0.0 || self.max_batch == 0 {
            return Err(CompletionError::Config("timeout_s and max_batch must be positive".into()));
        }
        Ok(())
    }

    fn url(&self) -> String {
        format!("{}/v1/completions", self.base_url.trim_end_matches('/'))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub n: usize,
    pub max_tokens: usize,
    pub temperature: f64,
    pub top_p: f64,
    pub stop: Vec<String>,
    /// Forwarded to servers that support seeded sampling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>, n: usize, temperature: f64) -> Self {
        CompletionRequest {
            prompt: prompt.into(),
            n,
            max_tokens: 300,
            temperature,
            top_p: 0.95,
            stop: default_stops(),
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<(), CompletionError> {
        if self.n == 0 {
            return Err(CompletionError::Config("n must be at least 1".into()));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(CompletionError::Config(format!("top_p {} outside (0, 1]", self.top_p)));
        }
        if !(0.0..=1.0).contains(&self.temperature) {
            return Err(CompletionError::Config(format!("temperature {} outside [0, 1]", self.temperature)));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompletionError {
    #[error("request timed out")]
    Timeout,
    #[error("rate limited (HTTP 429)")]
    RateLimited,
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("authentication failed: {0}")]
    AuthFailure(String),
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl CompletionError {
    fn transient(&self) -> bool {
        match self {
            CompletionError::Timeout | CompletionError::RateLimited | CompletionError::Transport(_) => true,
            CompletionError::Http { status, .. } => *status >= 500,
            _ => false,
        }
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    n: usize,
    max_tokens: usize,
    temperature: f64,
    top_p: f64,
    stop: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    text: String,
}

fn bearer_token(endpoint: &ModelEndpoint) -> Result<Option<String>, CompletionError> {
    match &endpoint.auth_token_env {
        None => Ok(None),
        Some(var) => std::env::var(var)
            .map(Some)
            .map_err(|_| CompletionError::AuthFailure(format!("environment variable {var} is not set"))),
    }
}

fn post_once(
    agent: &ureq::Agent,
    endpoint: &ModelEndpoint,
    token: Option<&str>,
    body: &WireRequest<'_>,
) -> Result<Vec<String>, CompletionError> {
    let mut request = agent.post(endpoint.url());
    if let Some(token) = token {
        request = request.header("Authorization", format!("Bearer {token}"));
    }
    let mut response = request.send_json(body).map_err(|e| match e {
        ureq::Error::Timeout(_) => CompletionError::Timeout,
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => CompletionError::Timeout,
        other => CompletionError::Transport(other.to_string()),
    })?;
    let status = response.status().as_u16();
    if status != 200 {
        let text = response.body_mut().read_to_string().unwrap_or_default();
        return Err(match status {
            401 | 403 => CompletionError::AuthFailure(format!("HTTP {status}")),
            429 => CompletionError::RateLimited,
            _ => CompletionError::Http { status, body: text.chars().take(200).collect() },
        });
    }
    let parsed: WireResponse = response.body_mut().read_json().map_err(|e| match e {
        ureq::Error::Timeout(_) => CompletionError::Timeout,
        other => CompletionError::MalformedResponse(other.to_string()),
    })?;
    if parsed.choices.len() != body.n {
        return Err(CompletionError::MalformedResponse(format!(
            "asked for {} choices, got {}",
            body.n,
            parsed.choices.len()
        )));
    }
    Ok(parsed.choices.into_iter().map(|c| c.text).collect())
}

/// Request `request.n` completions, in batches, retrying transient failures
/// with exponential backoff. Every text is stop-truncated client-side.
pub fn complete(endpoint: &ModelEndpoint, request: &CompletionRequest) -> Result<Vec<String>, CompletionError> {
    endpoint.validate()?;
    request.validate()?;
    let token = bearer_token(endpoint)?;
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs_f64(endpoint.timeout_s)))
        .http_status_as_error(false)
        .build()
        .into();

    let mut texts = Vec::with_capacity(request.n);
    let mut batch_index = 0u64;
    while texts.len() < request.n {
        let n = (request.n - texts.len()).min(endpoint.max_batch);
        let body = WireRequest {
            model: &endpoint.model_id,
            prompt: &request.prompt,
            n,
            max_tokens: request.max_tokens,
            temperature: request.temperature,
            top_p: request.top_p,
            stop: &request.stop,
            seed: request.seed.map(|s| s.wrapping_add(batch_index)),
        };
        let mut attempt = 0;
        let batch = loop {
            match post_once(&agent, endpoint, token.as_deref(), &body) {
                Ok(batch) => break batch,
                Err(err) if err.transient() && attempt < endpoint.max_retries => {
                    let delay = endpoint.backoff_ms.saturating_mul(1 << attempt.min(16)).min(30_000);
                    log::warn!("{}: {err}; retrying in {delay} ms", endpoint.url());
                    thread::sleep(Duration::from_millis(delay));
                    attempt += 1;
                }
                Err(err) => return Err(err),
            }
        };
        texts.extend(batch.into_iter().map(|t| truncate_completion(&t, &request.stop)));
        batch_index += 1;
    }
    Ok(texts)
}

/// Sampling settings shared by both stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationSettings {
    pub max_tokens: usize,
    pub top_p: f64,
    pub stop: Vec<String>,
    pub seed: u64,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        GenerationSettings { max_tokens: 300, top_p: 0.95, stop: default_stops(), seed: 0 }
    }
}

impl GenerationSettings {
    fn request(&self, prompt: &str, n: usize, temperature: f64, seed: u64) -> CompletionRequest {
        CompletionRequest {
            prompt: prompt.to_string(),
            n,
            max_tokens: self.max_tokens,
            temperature,
            top_p: self.top_p,
            stop: self.stop.clone(),
            seed: Some(seed),
        }
    }
}

/// Seed for one (problem, temperature, stage) request, stable across runs.
pub fn derive_seed(base: u64, task_id: &str, temperature: f64, stage: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    hasher.update(task_id.as_bytes());
    hasher.update(((temperature * 1000.0).round() as i64).to_le_bytes());
    hasher.update(stage.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 8 bytes"))
}

fn samples(texts: Vec<String>, temperature: f64, seed: u64, stage: Stage) -> Vec<Sample> {
    texts.into_iter().map(|text| Sample { text, temperature, seed, stage }).collect()
}

/// Sample `n` completions of the problem context.
pub fn generate_baseline(
    endpoint: &ModelEndpoint,
    problem: &Problem,
    n: usize,
    temperature: f64,
    settings: &GenerationSettings,
) -> Result<CandidateSet, CompletionError> {
    let seed = derive_seed(settings.seed, &problem.task_id, temperature, "baseline");
    let texts = complete(endpoint, &settings.request(&problem.context, n, temperature, seed))?;
    Ok(CandidateSet { task_id: problem.task_id.clone(), samples: samples(texts, temperature, seed, Stage::Baseline) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TwoStageConfig {
    pub n_sketch: usize,
    pub n_final: usize,
    pub mode: SketchMode,
    pub table: SymbolTable,
}

impl Default for TwoStageConfig {
    fn default() -> Self {
        TwoStageConfig { n_sketch: 200, n_final: 200, mode: SketchMode::default(), table: SymbolTable::default() }
    }
}

#[derive(Debug, Error)]
pub enum TwoStageError {
    #[error(transparent)]
    Completion(#[from] CompletionError),
    #[error(transparent)]
    Sketch(#[from] SketchError),
    #[error("invalid two-stage configuration: {0}")]
    Config(String),
}

/// Which branch of the two-stage procedure produced the candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwoStagePath {
    /// The voted sketch had no symbol words and was used as the answer.
    Shortcut,
    /// The generator saw the voted sketch followed by the context.
    SketchPrompt,
    /// The voted sketch was empty; the generator saw the context alone.
    BareContext,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStageOutcome {
    pub candidates: CandidateSet,
    pub path: TwoStagePath,
    /// The voted raw sketch.
    pub sketch: String,
    pub votes: usize,
}

/// True if `text` contains a symbol word of the table that `mode` produces.
pub fn contains_symbols(text: &str, mode: SketchMode, table: &SymbolTable) -> bool {
    let mut words: Vec<&str> = Vec::new();
    if matches!(mode, SketchMode::ConstantsOnly | SketchMode::NamesAndConstants) {
        words.extend([table.number_symbol.as_str(), table.string_symbol.as_str()]);
    }
    if matches!(mode, SketchMode::NamesOnly | SketchMode::NamesAndConstants) {
        words.extend(table.name_symbols.values().map(String::as_str));
    }
    match lexer::tokenize(text) {
        Ok(stream) => stream.tokens.iter().any(|t| t.kind == TokenKind::Name && words.contains(&t.text.as_str())),
        Err(_) => text.split(|c: char| !(c.is_alphanumeric() || c == '_')).any(|w| words.contains(&w)),
    }
}

/// Sketch, vote, then either return the sketch as the answer or condition
/// the generator on it.
pub fn generate_two_stage(
    sketcher: &ModelEndpoint,
    generator: &ModelEndpoint,
    problem: &Problem,
    config: &TwoStageConfig,
    temperature: f64,
    settings: &GenerationSettings,
) -> Result<TwoStageOutcome, TwoStageError> {
    if config.n_sketch == 0 || config.n_final == 0 {
        return Err(TwoStageError::Config("n_sketch and n_final must be at least 1".into()));
    }
    let sketch_seed = derive_seed(settings.seed, &problem.task_id, temperature, "sketch");
    let sketches = complete(sketcher, &settings.request(&problem.context, config.n_sketch, temperature, sketch_seed))?;
    let outcome = vote_with_representative(&sketches)?;
    let final_seed = derive_seed(settings.seed, &problem.task_id, temperature, "final");

    let (path, prompt) = if outcome.normalized.trim().is_empty() {
        (TwoStagePath::BareContext, problem.context.clone())
    } else if !contains_symbols(&outcome.representative, config.mode, &config.table) {
        let candidates = CandidateSet {
            task_id: problem.task_id.clone(),
            samples: samples(vec![outcome.representative.clone()], temperature, sketch_seed, Stage::SketchShortcut),
        };
        return Ok(TwoStageOutcome {
            candidates,
            path: TwoStagePath::Shortcut,
            sketch: outcome.representative,
            votes: outcome.votes,
        });
    } else {
        (TwoStagePath::SketchPrompt, format!("{}\n{}", outcome.representative, problem.context))
    };

    let texts = complete(generator, &settings.request(&prompt, config.n_final, temperature, final_seed))?;
    Ok(TwoStageOutcome {
        candidates: CandidateSet {
            task_id: problem.task_id.clone(),
            samples: samples(texts, temperature, final_seed, Stage::TwoStage),
        },
        path,
        sketch: outcome.representative,
        votes: outcome.votes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum Strategy {
    Baseline { endpoint: ModelEndpoint, n: usize },
    TwoStage { sketcher: ModelEndpoint, generator: ModelEndpoint, config: TwoStageConfig },
}

pub fn default_temperatures() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub strategy: Strategy,
    pub temperatures: Vec<f64>,
    pub settings: GenerationSettings,
    pub out_dir: PathBuf,
    /// Problems in flight at once.
    pub in_flight: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub written: Vec<PathBuf>,
    pub skipped: Vec<PathBuf>,
    pub failed: Vec<SweepFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub task_id: String,
    pub temperature: f64,
    pub error: String,
}

/// File-name-safe form of a task id.
pub fn task_file_stem(task_id: &str) -> String {
    task_id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
}

pub fn candidate_path(out_dir: &Path, temperature: f64, task_id: &str) -> PathBuf {
    out_dir.join(format!("t{temperature:.2}")).join(format!("{}.jsonl", task_file_stem(task_id)))
}

/// Write `contents` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Run the strategy over every (temperature, problem) pair. Existing output
/// files are left alone, so an interrupted sweep can be resumed.
pub fn sweep(problems: &[Problem], config: &SweepConfig) -> SweepSummary {
    let jobs: Vec<(f64, &Problem)> =
        config.temperatures.iter().flat_map(|&t| problems.iter().map(move |p| (t, p))).collect();
    let run = || {
        jobs.par_iter()
            .map(|&(temperature, problem)| {
                let path = candidate_path(&config.out_dir, temperature, &problem.task_id);
                if path.exists() {
                    return (path, Ok(false));
                }
                let result = match &config.strategy {
                    Strategy::Baseline { endpoint, n } => {
                        generate_baseline(endpoint, problem, *n, temperature, &config.settings)
                            .map_err(|e| e.to_string())
                    }
                    Strategy::TwoStage { sketcher, generator, config: cfg } => {
                        generate_two_stage(sketcher, generator, problem, cfg, temperature, &config.settings)
                            .map(|o| {
                                log::info!("{} @ {temperature:.2}: {:?} ({} votes)", problem.task_id, o.path, o.votes);
                                o.candidates
                            })
                            .map_err(|e| e.to_string())
                    }
                };
                let written = result.and_then(|set| {
                    write_atomic(&path, &set.to_jsonl()).map_err(|e| format!("{}: {e}", path.display()))?;
                    Ok(true)
                });
                (path, written)
            })
            .collect::<Vec<_>>()
    };
    let outcomes = match rayon::ThreadPoolBuilder::new().num_threads(config.in_flight.max(1)).build() {
        Ok(pool) => pool.install(run),
        Err(_) => run(),
    };

    let mut summary = SweepSummary::default();
    for ((temperature, problem), (path, outcome)) in jobs.iter().zip(outcomes) {
        match outcome {
            Ok(true) => summary.written.push(path),
            Ok(false) => summary.skipped.push(path),
            Err(error) => {
                log::error!("{} @ {temperature:.2}: {error}", problem.task_id);
                summary.failed.push(SweepFailure {
                    task_id: problem.task_id.clone(),
                    temperature: *temperature,
                    error,
                });
            }
        }
    }
    summary
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbol_detection_depends_on_mode() {
        let table = SymbolTable::default();
        assert!(contains_symbols("x = number", SketchMode::ConstantsOnly, &table));
        assert!(!contains_symbols("x = 3", SketchMode::ConstantsOnly, &table));
        assert!(!contains_symbols("variable = 3", SketchMode::ConstantsOnly, &table));
        assert!(contains_symbols("variable = 3", SketchMode::NamesOnly, &table));
        assert!(contains_symbols("x = 'open + number", SketchMode::ConstantsOnly, &table));
    }

    #[test]
    fn seeds_are_stable() {
        assert_eq!(derive_seed(1, "a", 0.2, "x"), derive_seed(1, "a", 0.2, "x"));
        assert_ne!(derive_seed(1, "a", 0.2, "x"), derive_seed(1, "a", 0.3, "x"));
    }

    #[test]
    fn paths() {
        let p = candidate_path(Path::new("/o"), 0.1, "PandasEval/3");
        assert_eq!(p, Path::new("/o/t0.10/PandasEval_3.jsonl"));
    }

    #[test]
    fn request_validation() {
        assert!(CompletionRequest::new("x", 0, 0.5).validate().is_err());
        assert!(CompletionRequest::new("x", 1, 1.5).validate().is_err());
        assert!(ModelEndpoint::new("", "m").validate().is_err());
    }
}

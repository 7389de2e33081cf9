//! The prediction interface: a deterministic mock oracle for tests and
//! pipelines with known ground truth, and a remote completion server
//! speaking a minimal JSON protocol. Decoding is always greedy; the
//! temperature is pinned to 0 and not configurable.

use crate::codec::{parse_grid_text, render_grid_text, PromptText, SegmentKind};
use crate::grid::{Grid, HARD_DIM_CAP};
use serde::{Deserialize, Serialize};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("predictor unavailable: {0}")]
    Unavailable(String),
}

/// One model response: the raw text plus either the parsed grid or the
/// reason parsing failed. Exactly one of the two is present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub raw: String,
    pub grid: Option<Grid>,
    pub failure: Option<String>,
}

impl Prediction {
    pub fn from_raw(raw: String) -> Self {
        match parse_grid_text(&raw) {
            Ok(grid) => Prediction { raw, grid: Some(grid), failure: None },
            Err(e) => Prediction { raw, grid: None, failure: Some(e.to_string()) },
        }
    }
}

/// Upper bound on output length in tokens, from the output grid shape.
/// One character per token is a conservative, tokenizer-agnostic ratio.
pub fn max_tokens_for(rows: usize, cols: usize) -> usize {
    (2 * cols + 4) * rows + 64
}

/// Bound for an unknown output shape: the largest grid the pipeline can
/// ever emit.
pub fn max_tokens_cap() -> usize {
    max_tokens_for(HARD_DIM_CAP, HARD_DIM_CAP)
}

pub trait Predictor: Send + Sync {
    fn predict(&self, prompt: &PromptText) -> Result<Prediction, PredictorError>;
}

/// Deterministic oracle: applies a host-supplied ground-truth function to
/// the test-input segment of the prompt and renders the result. Lets
/// end-to-end pipeline tests run with a known answer.
pub struct MockPredictor {
    rule: Arc<dyn Fn(&Grid) -> Grid + Send + Sync>,
}

impl MockPredictor {
    pub fn new(rule: impl Fn(&Grid) -> Grid + Send + Sync + 'static) -> Self {
        MockPredictor { rule: Arc::new(rule) }
    }

    pub fn identity() -> Self {
        MockPredictor::new(|g| g.clone())
    }

    pub fn from_transform(t: crate::transform::Transform) -> Self {
        MockPredictor::new(move |g| {
            crate::transform::apply_to_grid(&t, g).expect("mock rule exceeded size cap")
        })
    }
}

impl Predictor for MockPredictor {
    fn predict(&self, prompt: &PromptText) -> Result<Prediction, PredictorError> {
        let seg = prompt
            .segments_of(SegmentKind::TestInput)
            .last()
            .ok_or_else(|| PredictorError::Unavailable("prompt has no test-input segment".into()))?;
        let input = parse_grid_text(prompt.slice(seg))
            .map_err(|e| PredictorError::Unavailable(format!("bad test-input segment: {e}")))?;
        let output = (self.rule)(&input);
        Ok(Prediction::from_raw(render_grid_text(&output)))
    }
}

/// A predictor that returns fixed raw text; handy for failure-path tests.
pub struct CannedPredictor(pub String);

impl Predictor for CannedPredictor {
    fn predict(&self, _prompt: &PromptText) -> Result<Prediction, PredictorError> {
        Ok(Prediction::from_raw(self.0.clone()))
    }
}

/// Environment variable consulted for the bearer token, if any.
pub const TOKEN_ENV_VAR: &str = "ARC_TTT_TOKEN";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HttpConfig {
    pub endpoint: String,
    /// Sent in the "model" field; doubles as the adapter id by convention.
    pub model: String,
    pub timeout_secs: u64,
    pub retries: u32,
    /// Base delay for exponential backoff between retries, in milliseconds.
    pub backoff_ms: u64,
    /// Maximum concurrent in-flight requests.
    pub max_in_flight: usize,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            endpoint: "http://127.0.0.1:8000".into(),
            model: "default".into(),
            timeout_secs: 120,
            retries: 3,
            backoff_ms: 250,
            max_in_flight: 8,
        }
    }
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    temperature: u32,
    max_tokens: usize,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    text: String,
}

struct Gate {
    state: Mutex<usize>,
    cond: Condvar,
    limit: usize,
}

impl Gate {
    fn acquire(&self) {
        let mut in_flight = self.state.lock().unwrap();
        while *in_flight >= self.limit {
            in_flight = self.cond.wait(in_flight).unwrap();
        }
        *in_flight += 1;
    }

    fn release(&self) {
        *self.state.lock().unwrap() -= 1;
        self.cond.notify_one();
    }
}

/// Remote completion backend. Greedy decoding: every request carries
/// temperature 0. Transport failures are retried with exponential backoff;
/// a body that does not match the protocol degrades to a failed prediction
/// so batches keep going.
pub struct HttpPredictor {
    cfg: HttpConfig,
    client: reqwest::blocking::Client,
    gate: Gate,
}

impl HttpPredictor {
    pub fn new(cfg: HttpConfig) -> Result<Self, PredictorError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| PredictorError::Unavailable(e.to_string()))?;
        let gate = Gate { state: Mutex::new(0), cond: Condvar::new(), limit: cfg.max_in_flight.max(1) };
        Ok(HttpPredictor { cfg, client, gate })
    }

    fn request_once(&self, body: &CompletionRequest) -> Result<String, String> {
        let url = format!("{}/completions", self.cfg.endpoint.trim_end_matches('/'));
        let mut req = self.client.post(&url).json(body);
        if let Ok(token) = std::env::var(TOKEN_ENV_VAR) {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        if !resp.status().is_success() {
            return Err(format!("server returned {}", resp.status()));
        }
        resp.text().map_err(|e| e.to_string())
    }
}

impl Predictor for HttpPredictor {
    fn predict(&self, prompt: &PromptText) -> Result<Prediction, PredictorError> {
        // Output shape is unknown ahead of time; bound by the largest grid
        // a transform can produce from this test input.
        let max_tokens = prompt
            .segments_of(SegmentKind::TestInput)
            .last()
            .and_then(|seg| parse_grid_text(prompt.slice(seg)).ok())
            .map(|g| max_tokens_for((g.rows() * 2).min(HARD_DIM_CAP), (g.cols() * 2).min(HARD_DIM_CAP)))
            .unwrap_or_else(max_tokens_cap);
        let body = CompletionRequest {
            model: &self.cfg.model,
            prompt: &prompt.text,
            temperature: 0,
            max_tokens,
        };

        self.gate.acquire();
        let mut last_err = String::new();
        let mut result = None;
        for attempt in 0..=self.cfg.retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(self.cfg.backoff_ms << (attempt - 1)));
            }
            match self.request_once(&body) {
                Ok(text) => {
                    result = Some(text);
                    break;
                }
                Err(e) => last_err = e,
            }
        }
        self.gate.release();

        let Some(text) = result else {
            return Err(PredictorError::Unavailable(last_err));
        };
        match serde_json::from_str::<CompletionResponse>(&text) {
            Ok(resp) => match resp.choices.into_iter().next() {
                Some(choice) => Ok(Prediction::from_raw(choice.text)),
                None => Ok(Prediction {
                    raw: text,
                    grid: None,
                    failure: Some("empty choices in completion response".into()),
                }),
            },
            Err(e) => Ok(Prediction { raw: text, grid: None, failure: Some(format!("malformed completion response: {e}")) }),
        }
    }
}

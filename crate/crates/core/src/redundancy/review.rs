//! Similarity review of candidate pairs through a chat-completions endpoint.
//!
//! Responses are cached on disk under the SHA-256 of the serialized request,
//! so a rerun with a warm cache makes no network calls.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const TOKEN_ENV: &str = "SUBLIME_REVIEW_TOKEN";
pub const DEFAULT_MODEL: &str = "gpt-4";
pub const DEFAULT_IN_FLIGHT: usize = 4;
pub const MAX_ATTEMPTS: usize = 3;

pub const DEFAULT_PROMPT_TEMPLATE: &str = "\
You compare two programming problems and their reference solutions and judge whether they are redundant.

Consider each of the following aspects:
1. Problem understanding: do both problems ask for the same thing?
2. Solution approach: do the solutions use the same algorithm or strategy?
3. Complexity: do the solutions have the same time and space complexity?
4. Code structure: are the solutions organized in a similar way?
5. Edge cases: do both handle the same edge cases?
6. Constraints: do the problems impose the same input constraints?

Problem A:
{problem_a}

Solution A:
{solution_a}

Problem B:
{problem_b}

Solution B:
{solution_b}

Give a short justification, then end with a line of the form
Similarity: <integer from 0 to 5>
where 0 means unrelated and 5 means the same problem.";

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error("review endpoint unavailable after {attempts} attempt(s): {last}")]
    ReviewUnavailable { attempts: usize, last: String },
    #[error("no similarity score in review response: {raw:?}")]
    ReviewParseError { raw: String },
    #[error("review cache: {0}")]
    Cache(#[from] std::io::Error),
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct TransportError(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

impl ChatRequest {
    pub fn cache_key(&self) -> String {
        let body = serde_json::to_vec(self).expect("request serializes");
        hex::encode(Sha256::digest(&body))
    }
}

/// Anything that answers a chat request with the assistant's text.
pub trait ReviewEndpoint: Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError>;
}

/// POSTs to `{base_url}/chat/completions`, with a bearer token when one is set.
pub struct HttpEndpoint {
    base_url: String,
    token: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpEndpoint {
    pub fn new(base_url: impl Into<String>, token: Option<String>, timeout: Duration) -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| TransportError(e.to_string()))?;
        Ok(Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            token,
            client,
        })
    }

    /// Token from `SUBLIME_REVIEW_TOKEN`, if set.
    pub fn from_env(base_url: impl Into<String>, timeout: Duration) -> Result<Self, TransportError> {
        Self::new(base_url, std::env::var(TOKEN_ENV).ok(), timeout)
    }
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChatMessage,
}

impl ReviewEndpoint for HttpEndpoint {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let body = serde_json::to_vec(request).map_err(|e| TransportError(e.to_string()))?;
        let mut req = self
            .client
            .post(format!("{}/chat/completions", self.base_url))
            .header("content-type", "application/json")
            .body(body);
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| TransportError(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| TransportError(e.to_string()))?;
        if !status.is_success() {
            return Err(TransportError(format!("HTTP {status}: {text}")));
        }
        let parsed: CompletionResponse =
            serde_json::from_str(&text).map_err(|e| TransportError(format!("bad response body: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| TransportError("response has no choices".into()))
    }
}

/// First integer in 0..=5 after the literal `Similarity:` marker.
pub fn parse_similarity(raw: &str) -> Result<u8, ReviewError> {
    let err = || ReviewError::ReviewParseError { raw: raw.to_string() };
    let rest = raw.split_once("Similarity:").ok_or_else(err)?.1.trim_start();
    let digits: String = rest.chars().take_while(char::is_ascii_digit).collect();
    match digits.parse::<u32>() {
        Ok(v) if v <= 5 => Ok(v as u8),
        _ => Err(err()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReviewInput {
    pub problem_a: String,
    pub solution_a: String,
    pub problem_b: String,
    pub solution_b: String,
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    request: ChatRequest,
    response: String,
}

/// Review client with retries and an optional on-disk response cache.
pub struct ReviewClient<E> {
    endpoint: E,
    model: String,
    template: String,
    cache_dir: Option<PathBuf>,
    backoff: Duration,
    write_lock: Mutex<()>,
    calls: AtomicUsize,
}

impl<E: ReviewEndpoint> ReviewClient<E> {
    pub fn new(endpoint: E) -> Self {
        Self {
            endpoint,
            model: DEFAULT_MODEL.to_string(),
            template: DEFAULT_PROMPT_TEMPLATE.to_string(),
            cache_dir: None,
            backoff: Duration::from_millis(500),
            write_lock: Mutex::new(()),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = model.into();
        self
    }

    pub fn with_template(mut self, template: impl Into<String>) -> Self {
        self.template = template.into();
        self
    }

    pub fn with_cache(mut self, dir: impl Into<PathBuf>) -> Self {
        self.cache_dir = Some(dir.into());
        self
    }

    /// Initial retry delay; doubles after each failed attempt.
    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    /// Endpoint calls made so far, including failed attempts.
    pub fn endpoint_calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn request(&self, input: &ReviewInput) -> ChatRequest {
        let content = self
            .template
            .replace("{problem_a}", &input.problem_a)
            .replace("{solution_a}", &input.solution_a)
            .replace("{problem_b}", &input.problem_b)
            .replace("{solution_b}", &input.solution_b);
        ChatRequest {
            model: self.model.clone(),
            messages: vec![ChatMessage {
                role: "user".into(),
                content,
            }],
            temperature: 0.0,
        }
    }

    fn cache_path(&self, key: &str) -> Option<PathBuf> {
        self.cache_dir.as_ref().map(|d| d.join(format!("{key}.json")))
    }

    fn read_cache(path: &Path, request: &ChatRequest) -> Option<String> {
        let entry: CacheEntry = serde_json::from_slice(&fs::read(path).ok()?).ok()?;
        (entry.request == *request).then_some(entry.response)
    }

    fn write_cache(&self, path: &Path, request: &ChatRequest, response: &str) -> Result<(), ReviewError> {
        let _guard = self.write_lock.lock().unwrap_or_else(|e| e.into_inner());
        let dir = path.parent().expect("cache file has a parent");
        fs::create_dir_all(dir)?;
        let entry = CacheEntry {
            request: request.clone(),
            response: response.to_string(),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(&serde_json::to_vec_pretty(&entry).expect("entry serializes"))?;
        tmp.persist(path).map_err(|e| e.error)?;
        Ok(())
    }

    /// Raw response text for the request: from cache if present, otherwise
    /// from the endpoint with up to three attempts.
    pub fn complete(&self, request: &ChatRequest) -> Result<String, ReviewError> {
        let path = self.cache_path(&request.cache_key());
        if let Some(hit) = path.as_deref().and_then(|p| Self::read_cache(p, request)) {
            return Ok(hit);
        }
        let mut delay = self.backoff;
        let mut last = String::new();
        for attempt in 1..=MAX_ATTEMPTS {
            self.calls.fetch_add(1, Ordering::SeqCst);
            match self.endpoint.complete(request) {
                Ok(text) => {
                    if let Some(p) = &path {
                        self.write_cache(p, request, &text)?;
                    }
                    return Ok(text);
                }
                Err(e) => {
                    log::warn!("review attempt {attempt}/{MAX_ATTEMPTS} failed: {e}");
                    last = e.0;
                    if attempt < MAX_ATTEMPTS {
                        thread::sleep(delay);
                        delay *= 2;
                    }
                }
            }
        }
        Err(ReviewError::ReviewUnavailable {
            attempts: MAX_ATTEMPTS,
            last,
        })
    }

    pub fn review(&self, input: &ReviewInput) -> Result<u8, ReviewError> {
        parse_similarity(&self.complete(&self.request(input))?)
    }

    /// Reviews every input with at most `in_flight` requests outstanding.
    /// Results are in input order.
    pub fn review_all(&self, inputs: &[ReviewInput], in_flight: usize) -> Vec<Result<u8, ReviewError>> {
        let workers = in_flight.max(1).min(inputs.len().max(1));
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Result<u8, ReviewError>>>> = inputs.iter().map(|_| Mutex::new(None)).collect();
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= inputs.len() {
                        break;
                    }
                    let r = self.review(&inputs[i]);
                    *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(r);
                });
            }
        });
        slots
            .into_iter()
            .map(|m| m.into_inner().unwrap_or_else(|e| e.into_inner()).expect("every slot filled"))
            .collect()
    }
}

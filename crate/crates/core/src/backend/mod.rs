//! Chat-completion and embedding gateway.
//!
//! Every request has a stable digest computed over its canonical JSON form
//! (sorted keys, no insignificant whitespace). Transcripts map digests to
//! responses so that whole pipeline runs can be recorded once and replayed
//! offline bit-for-bit.

mod http;
mod transcript;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use http::{HttpBackend, RetryPolicy};
pub use transcript::{RecordingBackend, ReplayBackend, Transcript, TranscriptLine};

/// Environment variable holding the API key for live endpoints.
pub const API_KEY_ENV: &str = "PULSE_API_KEY";

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("no transcript entry for request digest {digest}")]
    TranscriptMiss { digest: String },
    #[error("endpoint error after {attempts} attempt(s): {message}")]
    Endpoint { attempts: u32, message: String },
    #[error("{API_KEY_ENV} is not set")]
    AuthMissing,
    #[error("embedding dimension mismatch: vector {index} has {found} components, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("malformed backend payload: {0}")]
    Malformed(String),
    #[error("transcript I/O: {0}")]
    Transcript(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }
    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }
    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<Message>,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    /// A request at temperature 0 with a 1024-token reply budget.
    pub fn new(model: impl Into<String>, messages: Vec<Message>) -> Self {
        Self {
            messages,
            model: model.into(),
            temperature: 0.0,
            max_tokens: 1024,
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.messages.is_empty() {
            return Err(BackendError::InvalidRequest("no messages".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(BackendError::InvalidRequest(format!(
                "temperature {} must be finite and >= 0",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(BackendError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }

    pub fn digest(&self) -> String {
        request_digest(RequestKind::Chat, self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub model: String,
    pub texts: Vec<String>,
}

impl EmbedRequest {
    pub fn digest(&self) -> String {
        request_digest(RequestKind::Embed, self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RequestKind {
    Chat,
    Embed,
}

impl fmt::Display for RequestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RequestKind::Chat => "chat",
            RequestKind::Embed => "embed",
        })
    }
}

/// Serialize a JSON value with object keys sorted and no whitespace.
pub fn canonical_json(value: &serde_json::Value) -> String {
    use serde_json::Value;
    fn write(v: &Value, out: &mut String) {
        match v {
            Value::Object(map) => {
                let mut keys: Vec<&String> = map.keys().collect();
                keys.sort();
                out.push('{');
                for (i, k) in keys.into_iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push_str(&Value::String(k.clone()).to_string());
                    out.push(':');
                    write(&map[k], out);
                }
                out.push('}');
            }
            Value::Array(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    write(item, out);
                }
                out.push(']');
            }
            scalar => out.push_str(&scalar.to_string()),
        }
    }
    let mut out = String::new();
    write(value, &mut out);
    out
}

/// SHA-256 (hex) of `{"kind": .., "request": ..}` in canonical form.
pub fn request_digest<T: Serialize>(kind: RequestKind, request: &T) -> String {
    let body = serde_json::to_value(request).expect("requests serialize to JSON");
    let envelope = serde_json::json!({ "kind": kind.to_string(), "request": body });
    hex::encode(Sha256::digest(canonical_json(&envelope).as_bytes()))
}

/// Check that all vectors share one dimension and that the count matches.
pub fn check_embeddings(vectors: &[Vec<f64>], expected_count: usize) -> Result<(), BackendError> {
    if vectors.len() != expected_count {
        return Err(BackendError::Malformed(format!(
            "expected {expected_count} vectors, got {}",
            vectors.len()
        )));
    }
    if let Some(first) = vectors.first() {
        let dim = first.len();
        for (index, v) in vectors.iter().enumerate() {
            if v.len() != dim {
                return Err(BackendError::DimensionMismatch {
                    index,
                    expected: dim,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(BackendError::Malformed(format!("vector {index} has non-finite components")));
            }
        }
    }
    Ok(())
}

/// A chat/embedding provider.
pub trait Backend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError>;

    /// One vector per input text, in input order, all of one dimension.
    fn embed(&self, request: &EmbedRequest) -> Result<Vec<Vec<f64>>, BackendError>;

    /// Number of network round-trips made so far.
    fn network_calls(&self) -> usize {
        0
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
    fn embed(&self, request: &EmbedRequest) -> Result<Vec<Vec<f64>>, BackendError> {
        (**self).embed(request)
    }
    fn network_calls(&self) -> usize {
        (**self).network_calls()
    }
}

impl<B: Backend + ?Sized> Backend for &B {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
    fn embed(&self, request: &EmbedRequest) -> Result<Vec<Vec<f64>>, BackendError> {
        (**self).embed(request)
    }
    fn network_calls(&self) -> usize {
        (**self).network_calls()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Live,
    Record,
    Replay,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(Mode::Live),
            "record" => Ok(Mode::Record),
            "replay" => Ok(Mode::Replay),
            other => Err(format!("unknown backend mode {other:?} (live|record|replay)")),
        }
    }
}

/// Open a backend for `mode`. Record and Replay require a transcript path.
pub fn open(
    mode: Mode,
    transcript: Option<&Path>,
    config: &crate::config::Config,
) -> Result<Box<dyn Backend>, BackendError> {
    let need_transcript = || {
        transcript.ok_or_else(|| BackendError::InvalidRequest(format!("{mode:?} mode needs a transcript file")))
    };
    let live = || -> Result<HttpBackend, BackendError> {
        let key = std::env::var(API_KEY_ENV).map_err(|_| BackendError::AuthMissing)?;
        let endpoint = config
            .endpoint
            .clone()
            .ok_or_else(|| BackendError::InvalidRequest("no endpoint configured".into()))?;
        Ok(HttpBackend::new(endpoint, key, config.retry_policy(), config.parallelism))
    };
    Ok(match mode {
        Mode::Replay => Box::new(ReplayBackend::new(Transcript::load(need_transcript()?)?)),
        Mode::Live => Box::new(live()?),
        Mode::Record => Box::new(RecordingBackend::create(Box::new(live()?), need_transcript()?)?),
    })
}

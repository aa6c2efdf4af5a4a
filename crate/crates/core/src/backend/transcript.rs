use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{check_embeddings, Backend, BackendError, ChatRequest, EmbedRequest};

/// One line of a JSON-lines transcript file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptLine {
    pub digest: String,
    pub response: Value,
}

/// Map from request digest to recorded response payload.
///
/// Chat responses are JSON strings; embedding responses are arrays of arrays.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transcript {
    entries: BTreeMap<String, Value>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_jsonl(text: &str) -> Result<Self, BackendError> {
        let mut entries = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: TranscriptLine = serde_json::from_str(line)
                .map_err(|e| BackendError::Transcript(format!("line {}: {e}", n + 1)))?;
            entries.insert(parsed.digest, parsed.response);
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Transcript(format!("{}: {e}", path.display())))?;
        Self::from_jsonl(&text)
    }

    /// Lines sorted by digest.
    pub fn to_jsonl(&self) -> String {
        self.entries
            .iter()
            .map(|(digest, response)| {
                let line = TranscriptLine { digest: digest.clone(), response: response.clone() };
                serde_json::to_string(&line).expect("transcript lines serialize") + "\n"
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), BackendError> {
        std::fs::write(path, self.to_jsonl())
            .map_err(|e| BackendError::Transcript(format!("{}: {e}", path.display())))
    }

    pub fn insert(&mut self, digest: String, response: Value) -> bool {
        self.entries.insert(digest, response).is_none()
    }

    pub fn insert_chat(&mut self, request: &ChatRequest, reply: &str) {
        self.insert(request.digest(), Value::String(reply.to_string()));
    }

    pub fn insert_embed(&mut self, request: &EmbedRequest, vectors: &[Vec<f64>]) {
        self.insert(request.digest(), serde_json::json!(vectors));
    }

    pub fn get(&self, digest: &str) -> Option<&Value> {
        self.entries.get(digest)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn chat_payload(value: &Value) -> Result<String, BackendError> {
    value
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| BackendError::Malformed("chat response is not a string".into()))
}

fn embed_payload(value: &Value) -> Result<Vec<Vec<f64>>, BackendError> {
    serde_json::from_value(value.clone())
        .map_err(|e| BackendError::Malformed(format!("embedding response: {e}")))
}

/// Answers every request from a transcript; never touches the network.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    transcript: Transcript,
}

impl ReplayBackend {
    pub fn new(transcript: Transcript) -> Self {
        Self { transcript }
    }

    fn lookup(&self, digest: String) -> Result<&Value, BackendError> {
        self.transcript
            .get(&digest)
            .ok_or(BackendError::TranscriptMiss { digest })
    }
}

impl Backend for ReplayBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        request.validate()?;
        chat_payload(self.lookup(request.digest())?)
    }

    fn embed(&self, request: &EmbedRequest) -> Result<Vec<Vec<f64>>, BackendError> {
        if request.texts.is_empty() {
            return Ok(Vec::new());
        }
        let vectors = embed_payload(self.lookup(request.digest())?)?;
        check_embeddings(&vectors, request.texts.len())?;
        Ok(vectors)
    }
}

/// Forwards to an inner backend and appends every new exchange to a
/// transcript file. Writes are serialized.
pub struct RecordingBackend {
    inner: Box<dyn Backend>,
    state: Mutex<(Transcript, Option<File>)>,
    path: Option<PathBuf>,
}

impl RecordingBackend {
    /// Record into `path`, keeping any entries already present there.
    pub fn create(inner: Box<dyn Backend>, path: &Path) -> Result<Self, BackendError> {
        let existing = if path.exists() { Transcript::load(path)? } else { Transcript::new() };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| BackendError::Transcript(format!("{}: {e}", path.display())))?;
        Ok(Self {
            inner,
            state: Mutex::new((existing, Some(file))),
            path: Some(path.to_path_buf()),
        })
    }

    /// Record in memory only.
    pub fn in_memory(inner: Box<dyn Backend>) -> Self {
        Self {
            inner,
            state: Mutex::new((Transcript::new(), None)),
            path: None,
        }
    }

    pub fn transcript(&self) -> Transcript {
        self.state.lock().unwrap().0.clone()
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn record(&self, digest: String, response: Value) -> Result<(), BackendError> {
        let mut guard = self.state.lock().unwrap();
        let (transcript, file) = &mut *guard;
        if transcript.insert(digest.clone(), response.clone()) {
            if let Some(file) = file {
                let line = serde_json::to_string(&TranscriptLine { digest, response })
                    .expect("transcript lines serialize");
                writeln!(file, "{line}").map_err(|e| BackendError::Transcript(e.to_string()))?;
            }
        }
        Ok(())
    }
}

impl Backend for RecordingBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let reply = self.inner.complete(request)?;
        self.record(request.digest(), Value::String(reply.clone()))?;
        Ok(reply)
    }

    fn embed(&self, request: &EmbedRequest) -> Result<Vec<Vec<f64>>, BackendError> {
        if request.texts.is_empty() {
            return Ok(Vec::new());
        }
        let vectors = self.inner.embed(request)?;
        check_embeddings(&vectors, request.texts.len())?;
        self.record(request.digest(), serde_json::json!(vectors))?;
        Ok(vectors)
    }

    fn network_calls(&self) -> usize {
        self.inner.network_calls()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::Message;

    fn req(text: &str) -> ChatRequest {
        ChatRequest::new("m", vec![Message::user(text)])
    }

    #[test]
    fn replay_hits_and_misses() {
        let mut t = Transcript::new();
        t.insert_chat(&req("hello"), "canned reply");
        let b = ReplayBackend::new(t);
        assert_eq!(b.complete(&req("hello")).unwrap(), "canned reply");
        assert!(matches!(b.complete(&req("unseen")), Err(BackendError::TranscriptMiss { .. })));
        assert_eq!(b.network_calls(), 0);
    }

    #[test]
    fn replay_embeddings() {
        let two = EmbedRequest { model: "e".into(), texts: vec!["a".into(), "b".into()] };
        let bad = EmbedRequest { model: "e".into(), texts: vec!["c".into(), "d".into()] };
        let mut t = Transcript::new();
        t.insert_embed(&two, &[vec![1.0, 0.0], vec![0.0, 1.0]]);
        t.insert_embed(&bad, &[vec![0.0; 8], vec![0.0; 16]]);
        let b = ReplayBackend::new(t);
        assert_eq!(b.embed(&two).unwrap().len(), 2);
        let empty = EmbedRequest { model: "e".into(), texts: vec![] };
        assert!(b.embed(&empty).unwrap().is_empty());
        assert!(matches!(b.embed(&bad), Err(BackendError::DimensionMismatch { .. })));
    }

    #[test]
    fn jsonl_round_trip() {
        let mut t = Transcript::new();
        t.insert_chat(&req("a"), "x\ny");
        t.insert_embed(&EmbedRequest { model: "e".into(), texts: vec!["a".into()] }, &[vec![0.5]]);
        let back = Transcript::from_jsonl(&t.to_jsonl()).unwrap();
        assert_eq!(back, t);
        assert!(Transcript::from_jsonl("not json\n").is_err());
    }

    #[test]
    fn recording_appends_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let mut canned = Transcript::new();
        canned.insert_chat(&req("q"), "a");
        let rec = RecordingBackend::create(Box::new(ReplayBackend::new(canned.clone())), &path).unwrap();
        rec.complete(&req("q")).unwrap();
        rec.complete(&req("q")).unwrap();
        drop(rec);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert_eq!(Transcript::from_jsonl(&text).unwrap(), canned);
    }
}

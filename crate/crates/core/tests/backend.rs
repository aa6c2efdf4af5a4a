use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use pulsechain::backend::{Backend, BackendError, HttpBackend, RecordingBackend, ReplayBackend, RetryPolicy};
use pulsechain::{ChatRequest, EmbedRequest, Message, Transcript};

/// Serve one canned response per connection, in order; returns the base URL
/// and the count of requests received.
fn fake_server(responses: Vec<(u16, &'static str)>) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    std::thread::spawn(move || {
        for ((status, body), stream) in responses.into_iter().zip(listener.incoming()) {
            let mut stream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
            }
            let mut buf = vec![0; length];
            reader.read_exact(&mut buf).unwrap();
            counter.fetch_add(1, Ordering::SeqCst);
            let reply = format!(
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(reply.as_bytes()).unwrap();
        }
    });
    (url, hits)
}

fn fast_retry() -> RetryPolicy {
    RetryPolicy { base_delay: Duration::from_millis(5), ..RetryPolicy::default() }
}

fn hello() -> ChatRequest {
    ChatRequest::new("m", vec![Message::user("hello")])
}

#[test]
fn retries_through_rate_limits() {
    let (url, hits) = fake_server(vec![(429, "{}"), (429, "{}"), (200, r#"{"content":"hi"}"#)]);
    let backend = HttpBackend::new(url, "key", fast_retry(), 1);
    assert_eq!(backend.complete(&hello()).unwrap(), "hi");
    assert_eq!(hits.load(Ordering::SeqCst), 3);
    assert_eq!(backend.network_calls(), 3);
}

#[test]
fn gives_up_after_max_attempts() {
    let (url, hits) = fake_server(vec![(503, "{}"), (502, "{}"), (500, "{}"), (200, r#"{"content":"late"}"#)]);
    let backend = HttpBackend::new(url, "key", fast_retry(), 1);
    let err = backend.complete(&hello()).unwrap_err();
    assert!(matches!(err, BackendError::Endpoint { attempts: 3, .. }), "{err}");
    assert_eq!(hits.load(Ordering::SeqCst), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let (url, hits) = fake_server(vec![(400, r#"{"error":"bad"}"#), (200, r#"{"content":"x"}"#)]);
    let backend = HttpBackend::new(url, "key", fast_retry(), 1);
    assert!(matches!(backend.complete(&hello()), Err(BackendError::Endpoint { attempts: 1, .. })));
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

#[test]
fn embedding_dimensions_are_checked() {
    let (url, _) = fake_server(vec![(200, r#"{"vectors":[[1.0,2.0],[1.0]]}"#)]);
    let backend = HttpBackend::new(url, "key", fast_retry(), 1);
    let req = EmbedRequest { model: "e".into(), texts: vec!["a".into(), "b".into()] };
    assert!(matches!(backend.embed(&req), Err(BackendError::DimensionMismatch { index: 1, expected: 2, found: 1 })));
}

#[test]
fn recorded_http_session_replays_offline() {
    let (url, _) = fake_server(vec![(200, r#"{"content":"recorded"}"#)]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    let recorder = RecordingBackend::create(Box::new(HttpBackend::new(url, "key", fast_retry(), 1)), &path).unwrap();
    assert_eq!(recorder.complete(&hello()).unwrap(), "recorded");
    drop(recorder);
    let replay = ReplayBackend::new(Transcript::load(&path).unwrap());
    assert_eq!(replay.complete(&hello()).unwrap(), "recorded");
    assert_eq!(replay.network_calls(), 0);
    let miss = ChatRequest::new("m", vec![Message::user("other")]);
    assert!(matches!(replay.complete(&miss), Err(BackendError::TranscriptMiss { .. })));
}

#[test]
fn request_digest_is_frozen() {
    // SHA-256 of {"kind":"chat","request":{"max_tokens":1024,"messages":[{"content":"hello","role":"user"}],"model":"m","temperature":0.0}}.
    // Changing the canonical form or hashing invalidates every transcript.
    assert_eq!(hello().digest(), "550f2dde238e041fe0189159746c887ef946ebee24d60abbb8dd0c82b9eda148");
}

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use super::{check_embeddings, Backend, BackendError, ChatRequest, EmbedRequest};

/// Retries on 429, 5xx and transport failures.
#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    /// Total attempts, first try included.
    pub max_attempts: u32,
    /// Delay before retry n (0-based) is `base_delay · 2^n`, jittered.
    pub base_delay: Duration,
    /// Relative jitter amplitude, e.g. 0.1 for ±10%.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay: Duration::from_millis(500),
            jitter: 0.1,
            seed: 0,
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, retry: u32, rng: &mut impl Rng) -> Duration {
        let factor = 1.0 + self.jitter * rng.gen_range(-1.0..=1.0);
        self.base_delay.mul_f64(2f64.powi(retry as i32) * factor.max(0.0))
    }
}

/// Counting semaphore bounding in-flight requests.
struct Limiter {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Limiter {
    fn new(n: usize) -> Self {
        Self { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Limiter);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Deserialize)]
struct ChatReply {
    content: String,
}

#[derive(Deserialize)]
struct EmbedReply {
    vectors: Vec<Vec<f64>>,
}

/// Live endpoint: `POST <endpoint>/chat` and `POST <endpoint>/embed`.
///
/// Chat replies are `{"content": "..."}`, embedding replies `{"vectors": [[..], ..]}`.
pub struct HttpBackend {
    endpoint: String,
    api_key: String,
    agent: ureq::Agent,
    retry: RetryPolicy,
    rng: Mutex<ChaCha8Rng>,
    limiter: Limiter,
    calls: AtomicUsize,
}

impl HttpBackend {
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>, retry: RetryPolicy, parallelism: usize) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        Self {
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            api_key: api_key.into(),
            agent,
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(retry.seed)),
            retry,
            limiter: Limiter::new(parallelism),
            calls: AtomicUsize::new(0),
        }
    }

    fn post(&self, route: &str, body: String) -> Result<String, BackendError> {
        let _permit = self.limiter.acquire();
        let url = format!("{}/{route}", self.endpoint);
        let mut last = String::new();
        let attempts = self.retry.max_attempts.max(1);
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self.retry.delay(attempt - 1, &mut *self.rng.lock().unwrap());
                std::thread::sleep(delay);
            }
            self.calls.fetch_add(1, Ordering::SeqCst);
            let result = self
                .agent
                .post(&url)
                .header("Authorization", &format!("Bearer {}", self.api_key))
                .content_type("application/json")
                .send(body.as_str());
            match result {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    let text = resp.body_mut().read_to_string().unwrap_or_default();
                    match status {
                        200..=299 => return Ok(text),
                        429 | 500..=599 => last = format!("POST {url} returned {status}"),
                        _ => {
                            return Err(BackendError::Endpoint {
                                attempts: attempt + 1,
                                message: format!("POST {url} returned {status}: {text}"),
                            })
                        }
                    }
                }
                Err(e) => last = format!("POST {url}: {e}"),
            }
            log::warn!("attempt {} of {attempts} failed: {last}", attempt + 1);
        }
        Err(BackendError::Endpoint { attempts, message: last })
    }
}

impl Backend for HttpBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        request.validate()?;
        let body = serde_json::to_string(request).expect("requests serialize");
        let text = self.post("chat", body)?;
        let reply: ChatReply =
            serde_json::from_str(&text).map_err(|e| BackendError::Malformed(format!("chat reply: {e}")))?;
        Ok(reply.content)
    }

    fn embed(&self, request: &EmbedRequest) -> Result<Vec<Vec<f64>>, BackendError> {
        if request.texts.is_empty() {
            return Ok(Vec::new());
        }
        let body = serde_json::to_string(request).expect("requests serialize");
        let text = self.post("embed", body)?;
        let reply: EmbedReply =
            serde_json::from_str(&text).map_err(|e| BackendError::Malformed(format!("embed reply: {e}")))?;
        check_embeddings(&reply.vectors, request.texts.len())?;
        Ok(reply.vectors)
    }

    fn network_calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

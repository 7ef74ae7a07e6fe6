use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{AffiliationClassifier, ScorerError, TextScorer, TokenBucket};
use crate::error::{Error, Result};

fn default_backoff_ms() -> u64 {
    500
}

fn default_timeout_secs() -> u64 {
    30
}

fn default_in_flight() -> usize {
    4
}

fn default_burst() -> u32 {
    1
}

/// Connection settings for an external scoring service.
///
/// The service accepts `POST {"texts": [...]}` and answers
/// `{"scores": [...]}` with one element per text: a float for scalar
/// metrics, a `[left, center, right]` triple for the affiliation model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScorerEndpoint {
    pub base_url: String,
    /// Name of the environment variable holding the API key, if any.
    #[serde(default)]
    pub api_key_env: Option<String>,
    pub max_chars_per_request: usize,
    pub requests_per_second: f64,
    pub max_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_burst")]
    pub burst: u32,
    pub scorer_id: String,
    #[serde(default)]
    pub scorer_version: String,
}

impl ScorerEndpoint {
    pub fn new(base_url: impl Into<String>, scorer_id: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            api_key_env: None,
            max_chars_per_request: 3000,
            requests_per_second: 1.0,
            max_retries: 3,
            backoff_ms: default_backoff_ms(),
            timeout_secs: default_timeout_secs(),
            max_in_flight: default_in_flight(),
            burst: default_burst(),
            scorer_id: scorer_id.into(),
            scorer_version: String::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.requests_per_second > 0.0 && self.requests_per_second.is_finite()) {
            return Err(Error::config("requests_per_second must be positive"));
        }
        if self.max_chars_per_request == 0 {
            return Err(Error::config("max_chars_per_request must be positive"));
        }
        if self.max_in_flight == 0 {
            return Err(Error::config("max_in_flight must be positive"));
        }
        if self.base_url.is_empty() {
            return Err(Error::config("scorer base_url is empty"));
        }
        Ok(())
    }
}

/// Splits `text` into pieces of at most `max_chars` characters, breaking
/// at the last whitespace inside each window when there is one.
pub fn chunk_text(text: &str, max_chars: usize) -> Vec<String> {
    assert!(max_chars > 0);
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut start = 0;
    while start < chars.len() {
        let hard_end = (start + max_chars).min(chars.len());
        let end = if hard_end == chars.len() {
            hard_end
        } else {
            (start + 1..=hard_end)
                .rev()
                .find(|&i| chars[i].is_whitespace())
                .unwrap_or(hard_end)
        };
        let piece: String = chars[start..end].iter().collect();
        let piece = piece.trim();
        if !piece.is_empty() {
            out.push(piece.to_string());
        }
        start = end;
    }
    out
}

/// Blocking client shared by the scalar scorer and the affiliation
/// classifier. Requests pass through one token bucket; 429 and 5xx
/// responses are retried with exponential backoff.
#[derive(Debug)]
struct Client {
    endpoint: ScorerEndpoint,
    agent: ureq::Agent,
    limiter: TokenBucket,
    api_key: Option<String>,
    sent: AtomicU64,
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct ScoreResponse {
    scores: Vec<Value>,
}

impl Client {
    fn new(endpoint: ScorerEndpoint) -> Result<Self> {
        endpoint.validate()?;
        let api_key = match &endpoint.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                Error::config(format!("API key variable {var} is not set"))
            })?),
            None => None,
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(endpoint.timeout_secs)))
            .build()
            .into();
        Ok(Self {
            limiter: TokenBucket::new(endpoint.requests_per_second, endpoint.burst),
            endpoint,
            agent,
            api_key,
            sent: AtomicU64::new(0),
        })
    }

    fn post(&self, texts: &[String]) -> std::result::Result<Vec<Value>, ScorerError> {
        let mut attempt = 0u32;
        loop {
            self.limiter.acquire();
            self.sent.fetch_add(1, Ordering::Relaxed);
            let mut req = self.agent.post(&self.endpoint.base_url);
            if let Some(key) = &self.api_key {
                req = req.header("Authorization", &format!("Bearer {key}"));
            }
            let retryable = match req.send_json(ScoreRequest { texts }) {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    if (200..300).contains(&status) {
                        let body: ScoreResponse = resp
                            .body_mut()
                            .read_json()
                            .map_err(|e| ScorerError(format!("bad response body: {e}")))?;
                        if body.scores.len() != texts.len() {
                            return Err(ScorerError(format!(
                                "expected {} scores, got {}",
                                texts.len(),
                                body.scores.len()
                            )));
                        }
                        return Ok(body.scores);
                    }
                    let err = ScorerError(format!("HTTP {status}"));
                    if status == 429 || status >= 500 {
                        err
                    } else {
                        return Err(err);
                    }
                }
                Err(e) => ScorerError(format!("transport: {e}")),
            };
            if attempt >= self.endpoint.max_retries {
                return Err(ScorerError(format!(
                    "{} after {} attempts",
                    retryable.0,
                    attempt + 1
                )));
            }
            let backoff = self.endpoint.backoff_ms.saturating_mul(1u64 << attempt.min(16));
            std::thread::sleep(Duration::from_millis(backoff));
            attempt += 1;
        }
    }

    fn chunks(&self, texts: &[String]) -> Vec<String> {
        chunk_text(&texts.join("\n"), self.endpoint.max_chars_per_request)
    }
}

/// Length-weighted mean of per-chunk values.
fn weighted_mean(parts: &[(usize, f64)]) -> f64 {
    let total: usize = parts.iter().map(|(w, _)| w).sum();
    if total == 0 {
        return 0.0;
    }
    parts
        .iter()
        .map(|(w, v)| *w as f64 / total as f64 * v)
        .sum()
}

/// Scalar scorer backed by an external service. Documents longer than
/// `max_chars_per_request` are split and the chunk scores are combined by
/// a character-weighted mean.
#[derive(Debug, Clone)]
pub struct HttpScorer {
    client: Arc<Client>,
}

impl HttpScorer {
    pub fn new(endpoint: ScorerEndpoint) -> Result<Self> {
        Ok(Self {
            client: Arc::new(Client::new(endpoint)?),
        })
    }

    /// Requests sent so far, retries included.
    pub fn requests_sent(&self) -> u64 {
        self.client.sent.load(Ordering::Relaxed)
    }

    pub fn endpoint(&self) -> &ScorerEndpoint {
        &self.client.endpoint
    }
}

impl TextScorer for HttpScorer {
    fn scorer_id(&self) -> &str {
        &self.client.endpoint.scorer_id
    }

    fn scorer_version(&self) -> &str {
        &self.client.endpoint.scorer_version
    }

    fn score_texts(&self, texts: &[String]) -> std::result::Result<f64, ScorerError> {
        let mut parts = Vec::new();
        for chunk in self.client.chunks(texts) {
            let len = chunk.chars().count();
            let scores = self.client.post(std::slice::from_ref(&chunk))?;
            let v = scores[0]
                .as_f64()
                .ok_or_else(|| ScorerError(format!("non-numeric score {}", scores[0])))?;
            parts.push((len, v));
        }
        if parts.is_empty() {
            return Err(ScorerError("nothing to score".into()));
        }
        Ok(weighted_mean(&parts))
    }
}

/// Partisan-lean classifier backed by an external service returning
/// `[left, center, right]` per text.
#[derive(Debug, Clone)]
pub struct HttpAffiliationClassifier {
    client: Arc<Client>,
}

impl HttpAffiliationClassifier {
    pub fn new(endpoint: ScorerEndpoint) -> Result<Self> {
        Ok(Self {
            client: Arc::new(Client::new(endpoint)?),
        })
    }

    pub fn requests_sent(&self) -> u64 {
        self.client.sent.load(Ordering::Relaxed)
    }
}

impl AffiliationClassifier for HttpAffiliationClassifier {
    fn classifier_id(&self) -> &str {
        &self.client.endpoint.scorer_id
    }

    fn probabilities(&self, texts: &[String]) -> std::result::Result<[f64; 3], ScorerError> {
        let mut acc = [0.0; 3];
        let mut total = 0usize;
        for chunk in self.client.chunks(texts) {
            let len = chunk.chars().count();
            let scores = self.client.post(std::slice::from_ref(&chunk))?;
            let probs: Vec<f64> = scores[0]
                .as_array()
                .map(|a| a.iter().filter_map(Value::as_f64).collect())
                .unwrap_or_default();
            if probs.len() != 3 {
                return Err(ScorerError(format!("expected three probabilities, got {}", scores[0])));
            }
            for (a, p) in acc.iter_mut().zip(&probs) {
                *a += len as f64 * p;
            }
            total += len;
        }
        if total == 0 {
            return Err(ScorerError("nothing to classify".into()));
        }
        Ok(acc.map(|a| a / total as f64))
    }
}

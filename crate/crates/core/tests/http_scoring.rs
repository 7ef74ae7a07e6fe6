use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Instant;

use polarlens_core::pipeline::{run_pipeline, RunConfig, RunStatus, Workspace};
use polarlens_core::scoring::{fetch_external_scores, HttpScorer, ScoreCache, ScorerEndpoint, Side};
use polarlens_core::synth::{generate_corpus, write_corpus, SynthConfig};
use polarlens_core::{Platform, UserDocument};

type Handler = dyn Fn(usize, &serde_json::Value) -> (u16, String) + Send + Sync;

/// Minimal HTTP/1.1 server answering POSTs through `handler`, which gets
/// the zero-based request number and the parsed JSON body.
struct MockServer {
    url: String,
    hits: Arc<AtomicUsize>,
}

impl MockServer {
    fn start(handler: Box<Handler>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/score", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let handler: Arc<Handler> = Arc::from(handler);
        let counter = hits.clone();
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { break };
                let handler = handler.clone();
                let counter = counter.clone();
                std::thread::spawn(move || serve(stream, &*handler, &counter));
            }
        });
        Self { url, hits }
    }

    fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

fn serve(stream: TcpStream, handler: &Handler, hits: &AtomicUsize) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut out = stream;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let mut len = 0usize;
        loop {
            let mut h = String::new();
            if reader.read_line(&mut h).unwrap_or(0) == 0 {
                return;
            }
            let h = h.trim_end();
            if h.is_empty() {
                break;
            }
            if let Some((k, v)) = h.split_once(':') {
                if k.eq_ignore_ascii_case("content-length") {
                    len = v.trim().parse().unwrap();
                }
            }
        }
        let mut body = vec![0u8; len];
        reader.read_exact(&mut body).unwrap();
        let json: serde_json::Value = serde_json::from_slice(&body).unwrap_or_default();
        let n = hits.fetch_add(1, Ordering::SeqCst);
        let (status, text) = handler(n, &json);
        let reply = format!(
            "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\n\r\n{text}",
            text.len()
        );
        if out.write_all(reply.as_bytes()).is_err() {
            return;
        }
    }
}

/// Scores each text by its length in hundreds of characters, capped at 1.
fn length_scores(_: usize, body: &serde_json::Value) -> (u16, String) {
    let scores: Vec<f64> = body["texts"]
        .as_array()
        .map(|a| a.iter().map(|t| (t.as_str().unwrap().len() as f64 / 100.0).min(1.0)).collect())
        .unwrap_or_default();
    (200, serde_json::json!({ "scores": scores }).to_string())
}

fn docs(n: usize) -> BTreeMap<String, UserDocument> {
    (0..n)
        .map(|i| {
            let id = format!("u{i}");
            let doc = UserDocument::new(&id, Platform::Twitter, Side::Authored, vec!["a".repeat(i + 1)]);
            (id, doc)
        })
        .collect()
}

fn endpoint(url: &str, rps: f64) -> ScorerEndpoint {
    let mut e = ScorerEndpoint::new(url, "mock-tox");
    e.scorer_version = "1".into();
    e.requests_per_second = rps;
    e.backoff_ms = 10;
    e
}

#[test]
fn rate_limit_then_warm_cache_sends_nothing() {
    let server = MockServer::start(Box::new(length_scores));
    let dir = tempfile::tempdir().unwrap();
    let cache_path = dir.path().join("scores.jsonl");
    let docs = docs(10);

    let cache = ScoreCache::open(&cache_path).unwrap();
    let scorer = HttpScorer::new(endpoint(&server.url, 2.0)).unwrap();
    let t0 = Instant::now();
    let report = fetch_external_scores(&docs, &scorer, &cache, 4).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(elapsed >= 4.5, "10 requests at 2/s took {elapsed:.2}s");
    assert_eq!(server.hits(), 10);
    assert_eq!(report.computed, 10);
    assert!(report.failures.is_empty());
    assert!((report.scores["u4"] - 0.05).abs() < 1e-12);

    // reopened from disk, as a second process would
    drop(cache);
    let cache = ScoreCache::open(&cache_path).unwrap();
    let scorer = HttpScorer::new(endpoint(&server.url, 2.0)).unwrap();
    let again = fetch_external_scores(&docs, &scorer, &cache, 4).unwrap();
    assert_eq!(server.hits(), 10);
    assert_eq!(scorer.requests_sent(), 0);
    assert_eq!(again.cache_hits, 10);
    assert_eq!(again.scores, report.scores);
}

#[test]
fn too_many_requests_is_retried() {
    let server = MockServer::start(Box::new(|n, body| {
        if n == 0 {
            (429, "{}".into())
        } else {
            length_scores(n, body)
        }
    }));
    let scorer = HttpScorer::new(endpoint(&server.url, 100.0)).unwrap();
    let report = fetch_external_scores(&docs(1), &scorer, &ScoreCache::in_memory(), 1).unwrap();
    assert!(report.failures.is_empty());
    assert_eq!(server.hits(), 2);
    assert_eq!(scorer.requests_sent(), 2);
}

#[test]
fn retries_are_bounded() {
    let server = MockServer::start(Box::new(|_, _| (503, "{}".into())));
    let mut e = endpoint(&server.url, 100.0);
    e.max_retries = 2;
    let scorer = HttpScorer::new(e).unwrap();
    let report = fetch_external_scores(&docs(1), &scorer, &ScoreCache::in_memory(), 1).unwrap();
    assert_eq!(server.hits(), 3);
    assert!(report.failures["u0"].contains("503"), "{:?}", report.failures);
}

#[test]
fn client_errors_are_not_retried() {
    let server = MockServer::start(Box::new(|_, _| (400, "{}".into())));
    let scorer = HttpScorer::new(endpoint(&server.url, 100.0)).unwrap();
    let report = fetch_external_scores(&docs(2), &scorer, &ScoreCache::in_memory(), 1).unwrap();
    assert_eq!(server.hits(), 2);
    assert_eq!(report.failures.len(), 2);
}

fn dead_url() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/score", listener.local_addr().unwrap());
    drop(listener);
    url
}

#[test]
fn endpoint_down_fails_every_user() {
    let mut e = endpoint(&dead_url(), 1000.0);
    e.max_retries = 1;
    let scorer = HttpScorer::new(e).unwrap();
    let docs = docs(5);
    let cache = ScoreCache::in_memory();
    let report = fetch_external_scores(&docs, &scorer, &cache, 2).unwrap();
    assert!(report.is_partial());
    assert!(report.scores.is_empty());
    assert_eq!(report.failures.keys().collect::<Vec<_>>(), docs.keys().collect::<Vec<_>>());
    assert!(cache.is_empty());
}

#[test]
fn pipeline_with_endpoint_down_is_partial() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate_corpus(&SynthConfig::benchmark(6000, 3)).unwrap();
    let files = write_corpus(&corpus, &dir.path().join("corpus")).unwrap();
    let mut cfg = RunConfig::for_corpus(&files).unwrap();
    cfg.dip_replicates = 1000;
    let mut e = endpoint(&dead_url(), 1e6);
    e.max_retries = 0;
    cfg.scorers.toxicity = Some(e);

    let ws = Workspace::open(&dir.path().join("ws")).unwrap();
    let out = run_pipeline(&cfg, &ws).unwrap();
    assert_eq!(out.status(), RunStatus::Partial);
    assert_eq!(out.status().exit_code(), 2);
    let failures: usize = out
        .manifest
        .failures
        .iter()
        .filter(|(k, _)| k.starts_with("score."))
        .map(|(_, v)| v.len())
        .sum();
    assert!(failures > 0);
    assert!(out
        .manifest
        .failures
        .values()
        .flat_map(|m| m.keys())
        .filter(|k| k.ends_with("/toxicity"))
        .count()
        == failures);
    assert_eq!(out.manifest.scorers["toxicity"], "mock-tox@1");
}

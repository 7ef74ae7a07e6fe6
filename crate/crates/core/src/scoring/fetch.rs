use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{content_hash, CacheKey, ScoreCache, ScoreValue, TextScorer, UserDocument};
use crate::error::Result;

/// Outcome of scoring many documents with one scorer.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FetchReport {
    pub scores: BTreeMap<String, f64>,
    /// user id → error message
    pub failures: BTreeMap<String, String>,
    pub cache_hits: usize,
    pub computed: usize,
}

impl FetchReport {
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }
}

/// Scores every document, consulting `cache` first.
///
/// Misses run on `max_in_flight` worker threads; any rate limiting lives in
/// the scorer. Per-user failures are collected and never abort the run.
pub fn fetch_external_scores(
    docs: &BTreeMap<String, UserDocument>,
    scorer: &dyn TextScorer,
    cache: &ScoreCache,
    max_in_flight: usize,
) -> Result<FetchReport> {
    let mut report = FetchReport::default();
    let mut pending: Vec<(&UserDocument, CacheKey)> = Vec::new();
    for (user, doc) in docs {
        let key = CacheKey::new(
            content_hash(&doc.texts),
            scorer.scorer_id(),
            scorer.scorer_version(),
        );
        match cache.get(&key).and_then(|v| v.as_scalar()) {
            Some(v) => {
                report.scores.insert(user.clone(), v);
                report.cache_hits += 1;
            }
            None => pending.push((doc, key)),
        }
    }

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(String, std::result::Result<f64, String>)>> = Mutex::new(Vec::new());
    let workers = max_in_flight.max(1).min(pending.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((doc, key)) = pending.get(i) else {
                    break;
                };
                let outcome = match scorer.score_texts(&doc.texts) {
                    Ok(v) => cache
                        .put(key.clone(), ScoreValue::Scalar(v))
                        .map(|_| v)
                        .map_err(|e| format!("cache write failed: {e}")),
                    Err(e) => Err(e.0),
                };
                results
                    .lock()
                    .expect("results poisoned")
                    .push((doc.user_id.clone(), outcome));
            });
        }
    });

    for (user, outcome) in results.into_inner().expect("results poisoned") {
        match outcome {
            Ok(v) => {
                report.computed += 1;
                report.scores.insert(user, v);
            }
            Err(e) => {
                report.failures.insert(user, e);
            }
        }
    }
    Ok(report)
}

//! Per-user documents and their toxicity, sentiment and pessimism scores.
//!
//! Scorers are pluggable behind [`TextScorer`]: deterministic lexicon stubs
//! ship with the crate, and [`HttpScorer`] talks to an external model
//! service. External results are memoized in a content-addressed
//! [`ScoreCache`].

mod cache;
mod fetch;
mod http;
mod lexicon;
mod ratelimit;

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Affiliation;
use crate::ingest::{InteractionRecord, Platform, RecordKind};
use crate::text::normalize_whitespace;

pub use cache::{content_hash, CacheEntry, CachedScorer, CacheKey, ScoreCache, ScoreValue};
pub use fetch::{fetch_external_scores, FetchReport};
pub use http::{chunk_text, HttpAffiliationClassifier, HttpScorer, ScorerEndpoint};
pub use lexicon::{
    Lexicon, LexiconAffiliation, LexiconFraction, LexiconSentiment, VADER_ALPHA,
};
pub use ratelimit::TokenBucket;

pub const PESSIMISM_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Authored,
    Received,
}

/// A user's aggregated, deduplicated texts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserDocument {
    pub user_id: String,
    pub platform: Platform,
    pub side: Side,
    /// Unique texts in order of first occurrence by `(created_at, message_id)`.
    pub texts: Vec<String>,
    pub total_chars: usize,
    /// Records that fed the document before deduplication.
    pub raw_count: usize,
}

impl UserDocument {
    pub fn new(user_id: impl Into<String>, platform: Platform, side: Side, texts: Vec<String>) -> Self {
        let raw_count = texts.len();
        let texts = dedup_texts(texts);
        let total_chars = texts.iter().map(|t| t.chars().count()).sum();
        Self {
            user_id: user_id.into(),
            platform,
            side,
            texts,
            total_chars,
            raw_count,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.texts.iter().all(|t| t.trim().is_empty())
    }

    /// The texts joined by newlines, as sent to external scorers and hashed
    /// for the cache.
    pub fn joined(&self) -> String {
        self.texts.join("\n")
    }
}

/// Drops texts equal to an earlier one after whitespace normalization.
pub fn dedup_texts<I, S>(texts: I) -> Vec<String>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut seen = HashSet::new();
    texts
        .into_iter()
        .map(|t| normalize_whitespace(t.as_ref()))
        .filter(|t| seen.insert(t.clone()))
        .collect()
}

/// Groups eligible records into per-user documents.
///
/// `Authored` groups by author. `Received` groups reply and comment texts by
/// their (resolved) target. Records flagged ineligible contribute nothing.
pub fn aggregate_user_text(
    records: &[InteractionRecord],
    side: Side,
) -> BTreeMap<String, UserDocument> {
    let mut ordered: Vec<&InteractionRecord> = records.iter().filter(|r| r.eligible).collect();
    ordered.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));

    let mut grouped: BTreeMap<&str, (Platform, Vec<&str>)> = BTreeMap::new();
    for r in ordered {
        let key = match side {
            Side::Authored => Some(r.author_id.as_str()),
            Side::Received => match r.kind {
                RecordKind::Reply | RecordKind::Comment => r.target_author_id.as_deref(),
                _ => None,
            },
        };
        if let Some(user) = key {
            grouped
                .entry(user)
                .or_insert_with(|| (r.platform, Vec::new()))
                .1
                .push(r.text.as_str());
        }
    }
    grouped
        .into_iter()
        .map(|(user, (platform, texts))| {
            let doc = UserDocument::new(
                user,
                platform,
                side,
                texts.into_iter().map(str::to_string).collect(),
            );
            (user.to_string(), doc)
        })
        .filter(|(_, d)| !d.texts.is_empty())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Toxicity,
    Sentiment,
    Pessimism,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Toxicity => "toxicity",
            Metric::Sentiment => "sentiment",
            Metric::Pessimism => "pessimism",
        }
    }

    pub fn bounds(self) -> (f64, f64) {
        match self {
            Metric::Sentiment => (-1.0, 1.0),
            _ => (0.0, 1.0),
        }
    }
}

/// Failure of a single scoring call; the caller attaches the user id.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct ScorerError(pub String);

/// Anything that maps a document's texts to one number.
pub trait TextScorer: Send + Sync {
    fn scorer_id(&self) -> &str;
    fn scorer_version(&self) -> &str;
    fn score_texts(&self, texts: &[String]) -> std::result::Result<f64, ScorerError>;
}

/// Maps texts to `(left, center, right)` probabilities.
pub trait AffiliationClassifier: Send + Sync {
    fn classifier_id(&self) -> &str;
    fn probabilities(&self, texts: &[String]) -> std::result::Result<[f64; 3], ScorerError>;
}

fn checked_score(doc: &UserDocument, scorer: &dyn TextScorer, metric: Metric) -> Result<f64> {
    if doc.is_empty() {
        return Err(Error::contract(format!(
            "cannot score empty document of user {}",
            doc.user_id
        )));
    }
    let value = scorer
        .score_texts(&doc.texts)
        .map_err(|e| Error::Scoring {
            user_id: doc.user_id.clone(),
            message: e.0,
        })?;
    check_bounds(&doc.user_id, metric, value)
}

pub(crate) fn check_bounds(user_id: &str, metric: Metric, value: f64) -> Result<f64> {
    let (lo, hi) = metric.bounds();
    if value.is_nan() || value < lo || value > hi {
        return Err(Error::OutOfBounds {
            user_id: user_id.to_string(),
            field: metric.as_str(),
            value,
        });
    }
    Ok(value)
}

pub fn score_sentiment(doc: &UserDocument, scorer: &dyn TextScorer) -> Result<f64> {
    checked_score(doc, scorer, Metric::Sentiment)
}

pub fn score_toxicity(doc: &UserDocument, scorer: &dyn TextScorer) -> Result<f64> {
    checked_score(doc, scorer, Metric::Toxicity)
}

pub fn score_pessimism(doc: &UserDocument, scorer: &dyn TextScorer) -> Result<(f64, bool)> {
    let p = checked_score(doc, scorer, Metric::Pessimism)?;
    Ok((p, pessimism_label(p)))
}

pub fn pessimism_label(prob: f64) -> bool {
    prob >= PESSIMISM_THRESHOLD
}

/// Margin below which the top class is not trusted.
pub const AFFILIATION_MARGIN: f64 = 0.1;

/// `left → democratic`, `right → republican`; center, or a top class that
/// beats the runner-up by less than [`AFFILIATION_MARGIN`], is unknown.
pub fn affiliation_from_probs(probs: [f64; 3]) -> Affiliation {
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]));
    let (top, second) = (order[0], order[1]);
    if probs[top] - probs[second] < AFFILIATION_MARGIN {
        return Affiliation::Unknown;
    }
    match top {
        0 => Affiliation::Democratic,
        2 => Affiliation::Republican,
        _ => Affiliation::Unknown,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffiliationOutcome {
    pub affiliation: Affiliation,
    pub failure: Option<String>,
}

/// Classifies a document's partisan leaning. Failures degrade to unknown
/// and are reported alongside.
pub fn classify_text_affiliation(
    doc: &UserDocument,
    classifier: &dyn AffiliationClassifier,
) -> Result<AffiliationOutcome> {
    if doc.is_empty() {
        return Err(Error::contract(format!(
            "cannot classify empty document of user {}",
            doc.user_id
        )));
    }
    Ok(match classifier.probabilities(&doc.texts) {
        Ok(p) => AffiliationOutcome {
            affiliation: affiliation_from_probs(p),
            failure: None,
        },
        Err(e) => AffiliationOutcome {
            affiliation: Affiliation::Unknown,
            failure: Some(e.0),
        },
    })
}

/// Per-user scores, all bounds checked on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub user_id: String,
    pub toxicity: f64,
    pub compound: f64,
    pub pessimism_prob: f64,
    pub pessimism_label: bool,
    pub entropy_bits: f64,
}

impl ScoreRecord {
    pub fn new(
        user_id: impl Into<String>,
        toxicity: f64,
        compound: f64,
        pessimism_prob: f64,
        entropy_bits: f64,
    ) -> Result<Self> {
        let user_id = user_id.into();
        check_bounds(&user_id, Metric::Toxicity, toxicity)?;
        check_bounds(&user_id, Metric::Sentiment, compound)?;
        check_bounds(&user_id, Metric::Pessimism, pessimism_prob)?;
        if entropy_bits.is_nan() || entropy_bits < 0.0 {
            return Err(Error::OutOfBounds {
                user_id,
                field: "entropy_bits",
                value: entropy_bits,
            });
        }
        Ok(Self {
            user_id,
            toxicity,
            compound,
            pessimism_prob,
            pessimism_label: pessimism_label(pessimism_prob),
            entropy_bits,
        })
    }
}

/// The three scorers a run uses.
#[derive(Clone)]
pub struct Scorers {
    pub toxicity: Arc<dyn TextScorer>,
    pub sentiment: Arc<dyn TextScorer>,
    pub pessimism: Arc<dyn TextScorer>,
}

impl Scorers {
    /// Built-in lexicon scorers.
    pub fn stub() -> Self {
        Self {
            toxicity: Arc::new(LexiconFraction::builtin_toxicity()),
            sentiment: Arc::new(LexiconSentiment::builtin()),
            pessimism: Arc::new(LexiconFraction::builtin_pessimism()),
        }
    }

    pub fn get(&self, metric: Metric) -> &Arc<dyn TextScorer> {
        match metric {
            Metric::Toxicity => &self.toxicity,
            Metric::Sentiment => &self.sentiment,
            Metric::Pessimism => &self.pessimism,
        }
    }
}

impl std::fmt::Debug for Scorers {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scorers")
            .field("toxicity", &self.toxicity.scorer_id())
            .field("sentiment", &self.sentiment.scorer_id())
            .field("pessimism", &self.pessimism.scorer_id())
            .finish()
    }
}

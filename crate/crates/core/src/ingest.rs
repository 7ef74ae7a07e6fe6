//! Streaming ingestion of platform archives into normalized interaction records.
//!
//! Two line formats are understood: X/Twitter v1.1 tweet objects (as written
//! by Twarc) and Pushshift Reddit dumps (comments or submissions). Every line
//! is parsed independently; a malformed line is counted and skipped, never
//! fatal. Archives may be plain, gzip or zstd compressed.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::text::normalize_whitespace;

/// The eleven debunking phrases used to select discourse.
pub const DEBUNKING_KEYWORDS: [&str; 11] = [
    "fact check",
    "fact-checking",
    "fact checker",
    "fact checkers",
    "fake news",
    "misinformation",
    "disinformation",
    "debunkers",
    "debunker",
    "debunking",
    "debunk",
];

const DELETED_AUTHORS: [&str; 2] = ["[deleted]", "[removed]"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Platform {
    Twitter,
    Reddit,
}

impl Platform {
    pub fn as_str(self) -> &'static str {
        match self {
            Platform::Twitter => "twitter",
            Platform::Reddit => "reddit",
        }
    }
}

impl std::fmt::Display for Platform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Post,
    Retweet,
    Reply,
    Comment,
    Submission,
}

/// One normalized post, retweet, reply, comment or submission.
///
/// `parent_id` carries the raw Reddit parent fullname (`t1_…`/`t3_…`) so the
/// graph stage can resolve reply targets in-corpus. `eligible` is false for
/// deleted or removed Reddit authors; such records are counted but never
/// aggregated per user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub platform: Platform,
    pub topic: String,
    pub message_id: String,
    pub author_id: String,
    pub created_at: i64,
    pub text: String,
    pub kind: RecordKind,
    pub target_author_id: Option<String>,
    #[serde(default)]
    pub parent_id: Option<String>,
    #[serde(default = "default_true")]
    pub eligible: bool,
}

fn default_true() -> bool {
    true
}

impl InteractionRecord {
    /// Ordering key used for every merge: `(created_at, message_id)`.
    pub fn sort_key(&self) -> (i64, &str) {
        (self.created_at, &self.message_id)
    }
}

/// Case-insensitive substring matcher over whitespace-normalized text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordFilter {
    phrases: Vec<String>,
}

impl KeywordFilter {
    pub fn new<I, S>(phrases: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let phrases: Vec<String> = phrases
            .into_iter()
            .map(|p| normalize_whitespace(p.as_ref()).to_lowercase())
            .filter(|p| !p.is_empty())
            .collect();
        if phrases.is_empty() {
            return Err(Error::config("keyword filter needs at least one phrase"));
        }
        Ok(Self { phrases })
    }

    pub fn debunking() -> Self {
        Self::new(DEBUNKING_KEYWORDS).expect("built-in list is non-empty")
    }

    pub fn phrases(&self) -> &[String] {
        &self.phrases
    }

    pub fn matches(&self, text: &str) -> bool {
        let haystack = normalize_whitespace(text).to_lowercase();
        self.phrases.iter().any(|p| haystack.contains(p.as_str()))
    }
}

impl Default for KeywordFilter {
    fn default() -> Self {
        Self::debunking()
    }
}

/// Half-open UTC interval `[start, end)` in epoch seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    start: i64,
    end: i64,
}

impl TimeWindow {
    pub fn new(start: i64, end: i64) -> Result<Self> {
        if start >= end {
            return Err(Error::config(format!(
                "time window start {start} must precede end {end}"
            )));
        }
        Ok(Self { start, end })
    }

    /// Builds a window from two ISO-8601 dates or RFC 3339 timestamps.
    pub fn from_iso(start: &str, end: &str) -> Result<Self> {
        Self::new(parse_utc(start)?, parse_utc(end)?)
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn end(&self) -> i64 {
        self.end
    }

    pub fn contains(&self, t: i64) -> bool {
        self.start <= t && t < self.end
    }

    pub fn unbounded() -> Self {
        Self {
            start: i64::MIN,
            end: i64::MAX,
        }
    }
}

/// Parses `YYYY-MM-DD` (midnight UTC) or an RFC 3339 timestamp to epoch seconds.
pub fn parse_utc(s: &str) -> Result<i64> {
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp());
    }
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.timestamp())
        .map_err(|e| Error::config(format!("bad timestamp {s:?}: {e}")))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipStats {
    /// Non-blank lines seen.
    pub lines: u64,
    pub blank: u64,
    pub malformed: u64,
    pub missing_fields: u64,
    pub empty_text: u64,
}

impl SkipStats {
    pub fn skipped(&self) -> u64 {
        self.malformed + self.missing_fields + self.empty_text
    }

    fn merge(&mut self, other: &SkipStats) {
        self.lines += other.lines;
        self.blank += other.blank;
        self.malformed += other.malformed;
        self.missing_fields += other.missing_fields;
        self.empty_text += other.empty_text;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseOptions {
    pub topic: String,
    /// Treat quote tweets as retweets of the quoted author.
    #[serde(default)]
    pub quoted_as_retweet: bool,
}

impl ParseOptions {
    pub fn topic(topic: impl Into<String>) -> Self {
        Self {
            topic: topic.into(),
            quoted_as_retweet: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceFormat {
    Twitter,
    PushshiftComments,
    PushshiftSubmissions,
}

impl SourceFormat {
    pub fn platform(self) -> Platform {
        match self {
            SourceFormat::Twitter => Platform::Twitter,
            _ => Platform::Reddit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PushshiftKind {
    Comments,
    Submissions,
}

enum LineOutcome {
    Record(InteractionRecord),
    Malformed,
    Missing,
    Empty,
}

/// Iterator over the records of one line-delimited source.
///
/// Skips are tallied in [`RecordStream::stats`]; only a failing reader
/// surfaces as an `Err` item.
pub struct RecordStream<R> {
    reader: R,
    format: SourceFormat,
    opts: ParseOptions,
    stats: SkipStats,
    buf: Vec<u8>,
}

impl<R: BufRead> RecordStream<R> {
    fn new(reader: R, format: SourceFormat, opts: ParseOptions) -> Self {
        Self {
            reader,
            format,
            opts,
            stats: SkipStats::default(),
            buf: Vec::new(),
        }
    }

    pub fn stats(&self) -> SkipStats {
        self.stats
    }

    fn parse_line(&self, line: &str) -> LineOutcome {
        let value: Value = match serde_json::from_str(line) {
            Ok(v @ Value::Object(_)) => v,
            _ => return LineOutcome::Malformed,
        };
        match self.format {
            SourceFormat::Twitter => parse_tweet(&value, &self.opts),
            SourceFormat::PushshiftComments => {
                parse_pushshift(&value, PushshiftKind::Comments, &self.opts)
            }
            SourceFormat::PushshiftSubmissions => {
                parse_pushshift(&value, PushshiftKind::Submissions, &self.opts)
            }
        }
    }
}

impl<R: BufRead> Iterator for RecordStream<R> {
    type Item = io::Result<InteractionRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.reader.read_until(b'\n', &mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e)),
            }
            let Ok(line) = std::str::from_utf8(&self.buf) else {
                self.stats.lines += 1;
                self.stats.malformed += 1;
                continue;
            };
            let line = line.trim();
            if line.is_empty() {
                self.stats.blank += 1;
                continue;
            }
            self.stats.lines += 1;
            match self.parse_line(line) {
                LineOutcome::Record(r) => return Some(Ok(r)),
                LineOutcome::Malformed => self.stats.malformed += 1,
                LineOutcome::Missing => self.stats.missing_fields += 1,
                LineOutcome::Empty => self.stats.empty_text += 1,
            }
        }
    }
}

pub fn parse_twitter_stream<R: BufRead>(reader: R, opts: &ParseOptions) -> RecordStream<R> {
    RecordStream::new(reader, SourceFormat::Twitter, opts.clone())
}

pub fn parse_pushshift_stream<R: BufRead>(
    reader: R,
    kind: PushshiftKind,
    opts: &ParseOptions,
) -> RecordStream<R> {
    let format = match kind {
        PushshiftKind::Comments => SourceFormat::PushshiftComments,
        PushshiftKind::Submissions => SourceFormat::PushshiftSubmissions,
    };
    RecordStream::new(reader, format, opts.clone())
}

pub fn parse_stream<R: BufRead>(
    reader: R,
    format: SourceFormat,
    opts: &ParseOptions,
) -> RecordStream<R> {
    RecordStream::new(reader, format, opts.clone())
}

fn id_field(v: &Value, str_key: &str, num_key: &str) -> Option<String> {
    match v.get(str_key) {
        Some(Value::String(s)) if !s.is_empty() => return Some(s.clone()),
        _ => {}
    }
    match v.get(num_key) {
        Some(Value::Number(n)) => Some(n.to_string()),
        Some(Value::String(s)) if !s.is_empty() => Some(s.clone()),
        _ => None,
    }
}

fn str_field<'a>(v: &'a Value, key: &str) -> Option<&'a str> {
    v.get(key).and_then(Value::as_str)
}

enum Timestamp {
    Ok(i64),
    Missing,
    Invalid,
}

fn twitter_timestamp(v: &Value) -> Timestamp {
    match v.get("created_at") {
        Some(Value::String(s)) => {
            if let Ok(t) = DateTime::parse_from_str(s, "%a %b %d %H:%M:%S %z %Y") {
                return Timestamp::Ok(t.timestamp());
            }
            if let Ok(t) = DateTime::parse_from_rfc3339(s) {
                return Timestamp::Ok(t.timestamp());
            }
            Timestamp::Invalid
        }
        Some(Value::Number(n)) => n.as_i64().map_or(Timestamp::Invalid, Timestamp::Ok),
        Some(Value::Null) | None => match v.get("timestamp_ms") {
            Some(Value::String(s)) => s
                .parse::<i64>()
                .map_or(Timestamp::Invalid, |ms| Timestamp::Ok(ms / 1000)),
            Some(Value::Number(n)) => n
                .as_i64()
                .map_or(Timestamp::Invalid, |ms| Timestamp::Ok(ms / 1000)),
            _ => Timestamp::Missing,
        },
        _ => Timestamp::Invalid,
    }
}

fn numeric_timestamp(v: Option<&Value>) -> Timestamp {
    match v {
        None | Some(Value::Null) => Timestamp::Missing,
        Some(Value::Number(n)) => match (n.as_i64(), n.as_f64()) {
            (Some(i), _) => Timestamp::Ok(i),
            (None, Some(f)) if f.is_finite() => Timestamp::Ok(f.floor() as i64),
            _ => Timestamp::Invalid,
        },
        Some(Value::String(s)) => match s.parse::<f64>() {
            Ok(f) if f.is_finite() => Timestamp::Ok(f.floor() as i64),
            _ => Timestamp::Invalid,
        },
        Some(_) => Timestamp::Invalid,
    }
}

fn parse_tweet(v: &Value, opts: &ParseOptions) -> LineOutcome {
    let Some(message_id) = id_field(v, "id_str", "id") else {
        return LineOutcome::Missing;
    };
    let Some(author_id) = v.get("user").and_then(|u| id_field(u, "id_str", "id")) else {
        return LineOutcome::Missing;
    };
    let created_at = match twitter_timestamp(v) {
        Timestamp::Ok(t) if t > 0 => t,
        Timestamp::Missing => return LineOutcome::Missing,
        _ => return LineOutcome::Malformed,
    };
    let raw_text = str_field(v, "full_text")
        .or_else(|| v.get("extended_tweet").and_then(|e| str_field(e, "full_text")))
        .or_else(|| str_field(v, "text"));
    let Some(raw_text) = raw_text else {
        return LineOutcome::Missing;
    };
    let text = normalize_whitespace(raw_text);
    if text.is_empty() {
        return LineOutcome::Empty;
    }

    let user_of = |key: &str| {
        v.get(key)
            .filter(|s| s.is_object())
            .map(|s| s.get("user").and_then(|u| id_field(u, "id_str", "id")))
    };
    let (kind, target_author_id) = if let Some(target) = user_of("retweeted_status") {
        (RecordKind::Retweet, target)
    } else if let Some(target) = id_field(v, "in_reply_to_user_id_str", "in_reply_to_user_id") {
        (RecordKind::Reply, Some(target))
    } else if let Some(target) = user_of("quoted_status").filter(|_| opts.quoted_as_retweet) {
        (RecordKind::Retweet, target)
    } else {
        (RecordKind::Post, None)
    };

    LineOutcome::Record(InteractionRecord {
        platform: Platform::Twitter,
        topic: opts.topic.clone(),
        message_id,
        author_id,
        created_at,
        text,
        kind,
        target_author_id,
        parent_id: None,
        eligible: true,
    })
}

fn parse_pushshift(v: &Value, kind: PushshiftKind, opts: &ParseOptions) -> LineOutcome {
    let Some(message_id) = id_field(v, "id", "id") else {
        return LineOutcome::Missing;
    };
    let Some(author_id) = str_field(v, "author").filter(|a| !a.is_empty()) else {
        return LineOutcome::Missing;
    };
    let created_at = match numeric_timestamp(v.get("created_utc")) {
        Timestamp::Ok(t) if t > 0 => t,
        Timestamp::Missing => return LineOutcome::Missing,
        _ => return LineOutcome::Malformed,
    };
    let (raw_text, record_kind, parent_id) = match kind {
        PushshiftKind::Comments => {
            let Some(body) = str_field(v, "body") else {
                return LineOutcome::Missing;
            };
            let parent = str_field(v, "parent_id").map(str::to_string);
            (body.to_string(), RecordKind::Comment, parent)
        }
        PushshiftKind::Submissions => {
            let Some(title) = str_field(v, "title") else {
                return LineOutcome::Missing;
            };
            let selftext = str_field(v, "selftext").unwrap_or("");
            (format!("{title}\n{selftext}"), RecordKind::Submission, None)
        }
    };
    let text = normalize_whitespace(&raw_text);
    if text.is_empty() {
        return LineOutcome::Empty;
    }
    LineOutcome::Record(InteractionRecord {
        platform: Platform::Reddit,
        topic: opts.topic.clone(),
        message_id,
        author_id: author_id.to_string(),
        created_at,
        text,
        kind: record_kind,
        target_author_id: None,
        parent_id,
        eligible: !DELETED_AUTHORS.contains(&author_id),
    })
}

/// Keeps records inside `window` whose text contains at least one phrase.
pub fn filter_records<'a, I>(
    records: I,
    filter: &'a KeywordFilter,
    window: &'a TimeWindow,
) -> impl Iterator<Item = InteractionRecord> + 'a
where
    I: IntoIterator<Item = InteractionRecord>,
    I::IntoIter: 'a,
{
    records
        .into_iter()
        .filter(move |r| window.contains(r.created_at) && filter.matches(&r.text))
}

/// Opens a possibly compressed file, sniffing gzip and zstd magic bytes.
pub fn open_input(path: &Path) -> io::Result<Box<dyn BufRead + Send>> {
    let mut reader = BufReader::new(File::open(path)?);
    let head = reader.fill_buf()?;
    if head.starts_with(&[0x1f, 0x8b]) {
        Ok(Box::new(BufReader::new(flate2::read::MultiGzDecoder::new(reader))))
    } else if head.starts_with(&[0x28, 0xb5, 0x2f, 0xfd]) {
        Ok(Box::new(BufReader::new(zstd::stream::read::Decoder::with_buffer(reader)?)))
    } else {
        Ok(Box::new(reader))
    }
}

/// Counts for one ingestion run.
///
/// `lines == emitted + skipped + duplicates + filtered` always holds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub lines: u64,
    pub emitted: u64,
    pub skipped: u64,
    pub duplicates: u64,
    pub filtered: u64,
    pub parse: SkipStats,
}

impl IngestReport {
    pub fn is_conserved(&self) -> bool {
        self.lines == self.emitted + self.skipped + self.duplicates + self.filtered
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputSource {
    pub path: PathBuf,
    pub format: SourceFormat,
}

/// Parses every source (in parallel), drops duplicate message ids, applies
/// the keyword/window filter and returns records sorted by
/// `(created_at, message_id)`.
pub fn ingest_sources(
    sources: &[InputSource],
    opts: &ParseOptions,
    filter: &KeywordFilter,
    window: &TimeWindow,
) -> Result<(Vec<InteractionRecord>, IngestReport)> {
    let parsed: Vec<(Vec<InteractionRecord>, SkipStats)> = sources
        .par_iter()
        .map(|src| -> Result<_> {
            let reader = open_input(&src.path)?;
            let mut stream = parse_stream(reader, src.format, opts);
            let records = stream.by_ref().collect::<io::Result<Vec<_>>>()?;
            Ok((records, stream.stats()))
        })
        .collect::<Result<_>>()?;

    let mut stats = SkipStats::default();
    let mut all = Vec::new();
    for (records, s) in parsed {
        stats.merge(&s);
        all.extend(records);
    }
    Ok(finish_ingest(all, stats, filter, window))
}

/// Dedup, filter and sort already-parsed records.
pub fn finish_ingest(
    mut records: Vec<InteractionRecord>,
    stats: SkipStats,
    filter: &KeywordFilter,
    window: &TimeWindow,
) -> (Vec<InteractionRecord>, IngestReport) {
    // Total order so that which duplicate survives never depends on file order.
    records.sort_by(|a, b| {
        a.sort_key()
            .cmp(&b.sort_key())
            .then_with(|| a.author_id.cmp(&b.author_id))
            .then_with(|| a.text.cmp(&b.text))
            .then_with(|| a.kind.cmp(&b.kind))
    });
    let parsed = records.len() as u64;
    let mut seen = HashSet::with_capacity(records.len());
    records.retain(|r| seen.insert(r.message_id.clone()));
    let duplicates = parsed - records.len() as u64;
    let before_filter = records.len() as u64;
    let kept: Vec<_> = filter_records(records, filter, window).collect();
    let report = IngestReport {
        lines: stats.lines,
        emitted: kept.len() as u64,
        skipped: stats.skipped(),
        duplicates,
        filtered: before_filter - kept.len() as u64,
        parse: stats,
    };
    (kept, report)
}

pub fn write_records<W: Write>(mut out: W, records: &[InteractionRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads normalized records previously written by [`write_records`].
pub fn read_records<R: Read>(reader: R) -> Result<Vec<InteractionRecord>> {
    let reader = BufReader::new(reader);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn tweets(input: &str) -> (Vec<InteractionRecord>, SkipStats) {
        let mut s = parse_twitter_stream(Cursor::new(input), &ParseOptions::topic("t"));
        let recs = s.by_ref().collect::<io::Result<Vec<_>>>().unwrap();
        (recs, s.stats())
    }

    fn comments(input: &str, kind: PushshiftKind) -> (Vec<InteractionRecord>, SkipStats) {
        let mut s = parse_pushshift_stream(Cursor::new(input), kind, &ParseOptions::topic("t"));
        let recs = s.by_ref().collect::<io::Result<Vec<_>>>().unwrap();
        (recs, s.stats())
    }

    #[test]
    fn retweet_targets_original_author() {
        let line = r#"{"id_str":"1","user":{"id_str":"u1"},"created_at":"Wed Oct 12 20:19:24 +0000 2016","full_text":"fake news alert","text":"short","retweeted_status":{"user":{"id_str":"u2"}}}"#;
        let (recs, _) = tweets(line);
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].kind, RecordKind::Retweet);
        assert_eq!(recs[0].target_author_id.as_deref(), Some("u2"));
        assert_eq!(recs[0].text, "fake news alert");
        assert_eq!(recs[0].created_at, 1_476_303_564);
    }

    #[test]
    fn reply_detected_from_reply_user() {
        let line = r#"{"id_str":"2","user":{"id_str":"u3"},"created_at":1476303564,"text":"debunk this","in_reply_to_user_id_str":"u4"}"#;
        let (recs, _) = tweets(line);
        assert_eq!(recs[0].kind, RecordKind::Reply);
        assert_eq!(recs[0].target_author_id.as_deref(), Some("u4"));
    }

    #[test]
    fn null_reply_field_is_post() {
        let line = r#"{"id_str":"3","user":{"id_str":"u3"},"created_at":1476303564,"text":"hello","in_reply_to_user_id_str":null}"#;
        let (recs, _) = tweets(line);
        assert_eq!(recs[0].kind, RecordKind::Post);
        assert_eq!(recs[0].target_author_id, None);
    }

    #[test]
    fn malformed_lines_counted() {
        let (recs, stats) = tweets("not json\n\n[1,2]\n{\"id_str\":\"9\"}\n");
        assert!(recs.is_empty());
        assert_eq!(stats.malformed, 2);
        assert_eq!(stats.missing_fields, 1);
        assert_eq!(stats.blank, 1);
        assert_eq!(stats.lines, 3);
    }

    #[test]
    fn invalid_utf8_is_malformed() {
        let mut s = parse_twitter_stream(Cursor::new(&b"\xff\xfe\n"[..]), &ParseOptions::default());
        assert!(s.next().is_none());
        assert_eq!(s.stats().malformed, 1);
    }

    #[test]
    fn quoted_tweets_follow_flag() {
        let line = r#"{"id_str":"4","user":{"id_str":"a"},"created_at":5,"text":"q","quoted_status":{"user":{"id_str":"b"}}}"#;
        let (recs, _) = tweets(line);
        assert_eq!(recs[0].kind, RecordKind::Post);
        let opts = ParseOptions {
            topic: "t".into(),
            quoted_as_retweet: true,
        };
        let recs: Vec<_> = parse_twitter_stream(Cursor::new(line), &opts)
            .map(Result::unwrap)
            .collect();
        assert_eq!(recs[0].kind, RecordKind::Retweet);
        assert_eq!(recs[0].target_author_id.as_deref(), Some("b"));
    }

    #[test]
    fn pushshift_comment() {
        let line = r#"{"id":"c1","author":"r1","created_utc":100,"body":"misinformation","parent_id":"t1_c0"}"#;
        let (recs, _) = comments(line, PushshiftKind::Comments);
        assert_eq!(recs[0].kind, RecordKind::Comment);
        assert_eq!(recs[0].text, "misinformation");
        assert_eq!(recs[0].parent_id.as_deref(), Some("t1_c0"));
        assert_eq!(recs[0].target_author_id, None);
        assert!(recs[0].eligible);
    }

    #[test]
    fn pushshift_submission_joins_title() {
        let line = r#"{"id":"s1","author":"r2","created_utc":"100","title":"Fact check","selftext":""}"#;
        let (recs, _) = comments(line, PushshiftKind::Submissions);
        assert_eq!(recs[0].kind, RecordKind::Submission);
        assert_eq!(recs[0].text, "Fact check");
    }

    #[test]
    fn deleted_author_flagged() {
        let line = r#"{"id":"c2","author":"[deleted]","created_utc":100.5,"body":"fake news"}"#;
        let (recs, _) = comments(line, PushshiftKind::Comments);
        assert_eq!(recs.len(), 1);
        assert!(!recs[0].eligible);
        assert_eq!(recs[0].created_at, 100);
    }

    #[test]
    fn filter_keywords_and_window() {
        let window = TimeWindow::new(100, 200).unwrap();
        let filter = KeywordFilter::debunking();
        let rec = |text: &str, t: i64| InteractionRecord {
            platform: Platform::Twitter,
            topic: "t".into(),
            message_id: format!("{text}{t}"),
            author_id: "a".into(),
            created_at: t,
            text: text.into(),
            kind: RecordKind::Post,
            target_author_id: None,
            parent_id: None,
            eligible: true,
        };
        let input = vec![
            rec("This is FAKE NEWS", 150),
            rec("fakenews", 150),
            rec("fake news", 200),
            rec("fake news", 100),
            rec("FACT\tCHECK this", 199),
        ];
        let kept: Vec<_> = filter_records(input, &filter, &window)
            .map(|r| (r.text, r.created_at))
            .collect();
        assert_eq!(
            kept,
            vec![
                ("This is FAKE NEWS".to_string(), 150),
                ("fake news".to_string(), 100),
                ("FACT\tCHECK this".to_string(), 199),
            ]
        );
    }

    #[test]
    fn default_phrase_list() {
        assert_eq!(KeywordFilter::debunking().phrases().len(), 11);
        assert!(KeywordFilter::new(Vec::<String>::new()).is_err());
        assert!(TimeWindow::new(5, 5).is_err());
    }

    #[test]
    fn iso_window() {
        let w = TimeWindow::from_iso("2016-11-08", "2016-11-09").unwrap();
        assert_eq!(w.end() - w.start(), 86_400);
        assert_eq!(w.start(), 1_478_563_200);
    }
}

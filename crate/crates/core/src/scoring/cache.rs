use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ScorerError, TextScorer};
use crate::error::Result;

/// SHA-256 of the texts joined by newlines, hex encoded.
pub fn content_hash<S: AsRef<str>>(texts: &[S]) -> String {
    let mut hasher = Sha256::new();
    for (i, t) in texts.iter().enumerate() {
        if i > 0 {
            hasher.update(b"\n");
        }
        hasher.update(t.as_ref().as_bytes());
    }
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScoreValue {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl ScoreValue {
    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            ScoreValue::Scalar(v) => Some(*v),
            ScoreValue::Vector(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub hash: String,
    pub scorer_id: String,
    pub scorer_version: String,
}

impl CacheKey {
    pub fn new(hash: impl Into<String>, scorer_id: &str, scorer_version: &str) -> Self {
        Self {
            hash: hash.into(),
            scorer_id: scorer_id.to_string(),
            scorer_version: scorer_version.to_string(),
        }
    }
}

/// One line of the cache file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub hash: String,
    pub scorer_id: String,
    pub scorer_version: String,
    pub score: ScoreValue,
}

/// Append-only NDJSON score store keyed by content hash and scorer identity.
///
/// The first value stored under a key wins; later writes of the same key
/// are ignored. A torn final line from an interrupted run is skipped on load.
#[derive(Debug, Default)]
pub struct ScoreCache {
    path: Option<PathBuf>,
    entries: RwLock<HashMap<CacheKey, ScoreValue>>,
    writer: Mutex<Option<File>>,
}

impl ScoreCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn open(path: &Path) -> Result<Self> {
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for line in reader.lines() {
                let line = line?;
                let Ok(e) = serde_json::from_str::<CacheEntry>(&line) else {
                    continue;
                };
                entries
                    .entry(CacheKey {
                        hash: e.hash,
                        scorer_id: e.scorer_id,
                        scorer_version: e.scorer_version,
                    })
                    .or_insert(e.score);
            }
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        // terminate a torn line so the next append starts fresh
        if file.metadata()?.len() > 0 && !ends_with_newline(path)? {
            file.write_all(b"\n")?;
        }
        Ok(Self {
            path: Some(path.to_path_buf()),
            entries: RwLock::new(entries),
            writer: Mutex::new(Some(file)),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &CacheKey) -> Option<ScoreValue> {
        self.entries.read().expect("cache poisoned").get(key).cloned()
    }

    pub fn put(&self, key: CacheKey, score: ScoreValue) -> Result<()> {
        let mut entries = self.entries.write().expect("cache poisoned");
        if entries.contains_key(&key) {
            return Ok(());
        }
        let mut writer = self.writer.lock().expect("cache poisoned");
        if let Some(file) = writer.as_mut() {
            let entry = CacheEntry {
                hash: key.hash.clone(),
                scorer_id: key.scorer_id.clone(),
                scorer_version: key.scorer_version.clone(),
                score: score.clone(),
            };
            let mut line = serde_json::to_vec(&entry)?;
            line.push(b'\n');
            file.write_all(&line)?;
            file.flush()?;
        }
        entries.insert(key, score);
        Ok(())
    }
}

/// Consults a [`ScoreCache`] before delegating to another scorer, so a
/// rerun over the same texts does no new work.
pub struct CachedScorer {
    inner: Arc<dyn TextScorer>,
    cache: Arc<ScoreCache>,
}

impl CachedScorer {
    pub fn new(inner: Arc<dyn TextScorer>, cache: Arc<ScoreCache>) -> Self {
        Self { inner, cache }
    }
}

impl TextScorer for CachedScorer {
    fn scorer_id(&self) -> &str {
        self.inner.scorer_id()
    }

    fn scorer_version(&self) -> &str {
        self.inner.scorer_version()
    }

    fn score_texts(&self, texts: &[String]) -> std::result::Result<f64, ScorerError> {
        let key = CacheKey::new(content_hash(texts), self.scorer_id(), self.scorer_version());
        if let Some(v) = self.cache.get(&key).and_then(|v| v.as_scalar()) {
            return Ok(v);
        }
        let v = self.inner.score_texts(texts)?;
        self.cache
            .put(key, ScoreValue::Scalar(v))
            .map_err(|e| ScorerError(format!("cache write failed: {e}")))?;
        Ok(v)
    }
}

fn ends_with_newline(path: &Path) -> Result<bool> {
    use std::io::{Read, Seek, SeekFrom};
    let mut f = File::open(path)?;
    f.seek(SeekFrom::End(-1))?;
    let mut b = [0u8; 1];
    f.read_exact(&mut b)?;
    Ok(b[0] == b'\n')
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Counting(AtomicUsize);

    impl TextScorer for Counting {
        fn scorer_id(&self) -> &str {
            "counting"
        }
        fn scorer_version(&self) -> &str {
            "1"
        }
        fn score_texts(&self, texts: &[String]) -> std::result::Result<f64, ScorerError> {
            self.0.fetch_add(1, Ordering::SeqCst);
            Ok(texts.len() as f64 / 10.0)
        }
    }

    #[test]
    fn cached_scorer_calls_through_once() {
        let inner = Arc::new(Counting(AtomicUsize::new(0)));
        let cache = Arc::new(ScoreCache::in_memory());
        let s = CachedScorer::new(inner.clone(), cache.clone());
        let texts = vec!["a".to_string(), "b".to_string()];
        assert_eq!(s.score_texts(&texts).unwrap(), 0.2);
        assert_eq!(s.score_texts(&texts).unwrap(), 0.2);
        assert_eq!(inner.0.load(Ordering::SeqCst), 1);
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(content_hash(&["a", "b"]), content_hash(&["a\nb"]));
        assert_ne!(content_hash(&["a", "b"]), content_hash(&["b", "a"]));
        assert_eq!(content_hash::<&str>(&[]).len(), 64);
    }

    #[test]
    fn persists_and_first_write_wins() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.ndjson");
        let key = CacheKey::new("h1", "tox", "v1");
        {
            let c = ScoreCache::open(&path).unwrap();
            c.put(key.clone(), ScoreValue::Scalar(0.25)).unwrap();
            c.put(key.clone(), ScoreValue::Scalar(0.99)).unwrap();
            c.put(CacheKey::new("h1", "tox", "v2"), ScoreValue::Scalar(0.5)).unwrap();
            c.put(CacheKey::new("h2", "aff", "v1"), ScoreValue::Vector(vec![0.1, 0.2, 0.7])).unwrap();
        }
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with(r#"{"hash":"h1","scorer_id":"tox","scorer_version":"v1","score":0.25}"#));

        let c = ScoreCache::open(&path).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.get(&key), Some(ScoreValue::Scalar(0.25)));
        assert_eq!(
            c.get(&CacheKey::new("h2", "aff", "v1")),
            Some(ScoreValue::Vector(vec![0.1, 0.2, 0.7]))
        );
        assert_eq!(c.get(&CacheKey::new("h1", "tox", "v3")), None);
    }

    #[test]
    fn torn_tail_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.ndjson");
        std::fs::write(
            &path,
            "{\"hash\":\"a\",\"scorer_id\":\"s\",\"scorer_version\":\"1\",\"score\":0.5}\n{\"hash\":\"b\",\"sco",
        )
        .unwrap();
        let c = ScoreCache::open(&path).unwrap();
        assert_eq!(c.len(), 1);
        c.put(CacheKey::new("c", "s", "1"), ScoreValue::Scalar(0.1)).unwrap();
        drop(c);
        assert_eq!(ScoreCache::open(&path).unwrap().len(), 2);
    }
}

//! Text normalization and tokenization shared by scoring and entropy.

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

/// NFC-normalizes `text`, collapses every run of Unicode whitespace into a
/// single ASCII space and trims both ends.
pub fn normalize_whitespace(text: &str) -> String {
    let nfc: String = text.nfc().collect();
    let mut out = String::with_capacity(nfc.len());
    for word in nfc.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Word tokenizer used for entropy and the lexicon scorers.
///
/// Lowercases, splits on Unicode whitespace, strips leading and trailing
/// punctuation, and drops URLs. `#hashtags` and `@mentions` survive as
/// tokens with their sigil.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tokenizer {
    pub lowercase: bool,
    pub drop_urls: bool,
    pub keep_sigils: bool,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Self {
            lowercase: true,
            drop_urls: true,
            keep_sigils: true,
        }
    }
}

impl Tokenizer {
    pub fn tokenize<'a>(&'a self, text: &'a str) -> impl Iterator<Item = String> + 'a {
        text.split_whitespace().filter_map(move |raw| self.token(raw))
    }

    /// Tokenizes every text of a document, in order.
    pub fn tokenize_all<S: AsRef<str>>(&self, texts: &[S]) -> Vec<String> {
        texts
            .iter()
            .flat_map(|t| self.tokenize(t.as_ref()).collect::<Vec<_>>())
            .collect()
    }

    fn token(&self, raw: &str) -> Option<String> {
        if self.drop_urls && is_url(raw) {
            return None;
        }
        let keep = |c: char| self.keep_sigils && (c == '#' || c == '@');
        let trimmed = raw
            .trim_start_matches(|c: char| is_punct(c) && !keep(c))
            .trim_end_matches(is_punct);
        if trimmed.chars().all(is_punct) {
            return None;
        }
        Some(if self.lowercase {
            trimmed.to_lowercase()
        } else {
            trimmed.to_string()
        })
    }
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation() || (!c.is_alphanumeric() && !c.is_whitespace() && !c.is_ascii())
}

fn is_url(raw: &str) -> bool {
    let lower = raw.to_ascii_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
}

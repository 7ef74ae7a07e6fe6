use std::collections::HashMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{AffiliationClassifier, ScorerError, TextScorer};
use crate::error::{Error, Result};
use crate::text::Tokenizer;

/// Normalization constant of the VADER compound score.
pub const VADER_ALPHA: f64 = 15.0;

const SENTIMENT: &str = include_str!("../../lexicons/sentiment.txt");
const TOXICITY: &str = include_str!("../../lexicons/toxicity.txt");
const PESSIMISM: &str = include_str!("../../lexicons/pessimism.txt");
const LEFT: &str = include_str!("../../lexicons/affiliation_left.txt");
const RIGHT: &str = include_str!("../../lexicons/affiliation_right.txt");

/// Word → score table read from `word score` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    entries: HashMap<String, f64>,
    version: String,
}

impl Lexicon {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(word), Some(score), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::config(format!(
                    "lexicon line {}: expected `word score`",
                    lineno + 1
                )));
            };
            let score: f64 = score.parse().map_err(|_| {
                Error::config(format!("lexicon line {}: bad score {score:?}", lineno + 1))
            })?;
            entries.insert(word.to_lowercase(), score);
        }
        if entries.is_empty() {
            return Err(Error::config("lexicon is empty"));
        }
        let mut canonical: Vec<_> = entries.iter().collect();
        canonical.sort_by(|a, b| a.0.cmp(b.0));
        let mut hasher = Sha256::new();
        for (w, s) in canonical {
            hasher.update(format!("{w}\t{s}\n"));
        }
        let version = hex::encode(&hasher.finalize()[..6]);
        Ok(Self { entries, version })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, word: &str) -> Option<f64> {
        self.entries.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(word)
    }

    /// Content hash; changes whenever any entry changes.
    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn words(&self) -> Vec<&str> {
        let mut w: Vec<&str> = self.entries.keys().map(String::as_str).collect();
        w.sort_unstable();
        w
    }

    pub fn builtin_sentiment() -> Self {
        Self::parse(SENTIMENT).expect("bundled lexicon parses")
    }

    pub fn builtin_toxicity() -> Self {
        Self::parse(TOXICITY).expect("bundled lexicon parses")
    }

    pub fn builtin_pessimism() -> Self {
        Self::parse(PESSIMISM).expect("bundled lexicon parses")
    }

    pub fn builtin_left() -> Self {
        Self::parse(LEFT).expect("bundled lexicon parses")
    }

    pub fn builtin_right() -> Self {
        Self::parse(RIGHT).expect("bundled lexicon parses")
    }
}

/// Rule-based compound sentiment: the signed valence sum `s` over all
/// tokens, squashed to `s / sqrt(s² + 15)`.
#[derive(Debug, Clone)]
pub struct LexiconSentiment {
    lexicon: Lexicon,
    tokenizer: Tokenizer,
    id: String,
}

impl LexiconSentiment {
    pub fn new(lexicon: Lexicon) -> Self {
        Self {
            lexicon,
            tokenizer: Tokenizer::default(),
            id: "stub-sentiment".into(),
        }
    }

    pub fn builtin() -> Self {
        Self::new(Lexicon::builtin_sentiment())
    }

    pub fn valence_sum(&self, texts: &[String]) -> f64 {
        texts
            .iter()
            .flat_map(|t| self.tokenizer.tokenize(t))
            .filter_map(|tok| self.lexicon.get(&tok))
            .sum()
    }
}

pub fn compound(sum: f64) -> f64 {
    let c = sum / (sum * sum + VADER_ALPHA).sqrt();
    c.clamp(-1.0, 1.0)
}

impl TextScorer for LexiconSentiment {
    fn scorer_id(&self) -> &str {
        &self.id
    }

    fn scorer_version(&self) -> &str {
        self.lexicon.version()
    }

    fn score_texts(&self, texts: &[String]) -> std::result::Result<f64, ScorerError> {
        Ok(compound(self.valence_sum(texts)))
    }
}

/// Fraction of tokens found in a lexicon, used as a stand-in probability
/// for toxicity or pessimism.
#[derive(Debug, Clone)]
pub struct LexiconFraction {
    lexicon: Lexicon,
    tokenizer: Tokenizer,
    id: String,
}

impl LexiconFraction {
    pub fn new(id: impl Into<String>, lexicon: Lexicon) -> Self {
        Self {
            lexicon,
            tokenizer: Tokenizer::default(),
            id: id.into(),
        }
    }

    pub fn builtin_toxicity() -> Self {
        Self::new("stub-toxicity", Lexicon::builtin_toxicity())
    }

    pub fn builtin_pessimism() -> Self {
        Self::new("stub-pessimism", Lexicon::builtin_pessimism())
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn fraction<S: AsRef<str>>(&self, texts: &[S]) -> f64 {
        let (mut hits, mut total) = (0usize, 0usize);
        for tok in texts.iter().flat_map(|t| self.tokenizer.tokenize(t.as_ref())) {
            total += 1;
            if self.lexicon.contains(&tok) {
                hits += 1;
            }
        }
        if total == 0 {
            0.0
        } else {
            (hits as f64 / total as f64).clamp(0.0, 1.0)
        }
    }
}

impl TextScorer for LexiconFraction {
    fn scorer_id(&self) -> &str {
        &self.id
    }

    fn scorer_version(&self) -> &str {
        self.lexicon.version()
    }

    fn score_texts(&self, texts: &[String]) -> std::result::Result<f64, ScorerError> {
        Ok(self.fraction(texts))
    }
}

/// Marker-word classifier: with `l` left and `r` right hits the
/// probabilities are `(l, 1, r) / (l + 1 + r)`, so a text with no markers
/// is centered.
#[derive(Debug, Clone)]
pub struct LexiconAffiliation {
    left: Lexicon,
    right: Lexicon,
    tokenizer: Tokenizer,
}

impl LexiconAffiliation {
    pub fn new(left: Lexicon, right: Lexicon) -> Self {
        Self {
            left,
            right,
            tokenizer: Tokenizer::default(),
        }
    }

    pub fn builtin() -> Self {
        Self::new(Lexicon::builtin_left(), Lexicon::builtin_right())
    }
}

impl AffiliationClassifier for LexiconAffiliation {
    fn classifier_id(&self) -> &str {
        "stub-affiliation"
    }

    fn probabilities(&self, texts: &[String]) -> std::result::Result<[f64; 3], ScorerError> {
        let (mut l, mut r) = (0.0, 0.0);
        for tok in texts.iter().flat_map(|t| self.tokenizer.tokenize(t)) {
            if self.left.contains(&tok) {
                l += 1.0;
            }
            if self.right.contains(&tok) {
                r += 1.0;
            }
        }
        let z = l + 1.0 + r;
        Ok([l / z, 1.0 / z, r / z])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Affiliation;
    use crate::scoring::affiliation_from_probs;

    fn texts(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn compound_normalization() {
        let s = LexiconSentiment::new(Lexicon::parse("good 2").unwrap());
        assert_eq!(s.score_texts(&texts(&["nothing here"])).unwrap(), 0.0);
        // s = 4 -> 4 / sqrt(31)
        let c = s.score_texts(&texts(&["good good"])).unwrap();
        assert!((c - 4.0 / 31f64.sqrt()).abs() < 1e-15);
        assert!((c - 0.718).abs() < 5e-4);
        let s = LexiconSentiment::new(Lexicon::parse("bad -2").unwrap());
        let c = s.score_texts(&texts(&["bad"])).unwrap();
        assert!((c - (-2.0 / 19f64.sqrt())).abs() < 1e-15);
        assert!((c + 0.459).abs() < 5e-4);
    }

    #[test]
    fn compound_stays_in_range() {
        assert!(compound(1e200) <= 1.0);
        assert!(compound(-1e9) >= -1.0);
    }

    #[test]
    fn toxicity_fraction() {
        let t = LexiconFraction::new("t", Lexicon::parse("idiot 1").unwrap());
        assert_eq!(t.score_texts(&texts(&["hello there"])).unwrap(), 0.0);
        let v = t.score_texts(&texts(&["you idiot you"])).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn pessimism_stub_identity() {
        let p = LexiconFraction::builtin_pessimism();
        assert_eq!(p.score_texts(&texts(&["what a lovely day"])).unwrap(), 0.0);
    }

    #[test]
    fn lexicon_parsing() {
        assert!(Lexicon::parse("").is_err());
        assert!(Lexicon::parse("word").is_err());
        assert!(Lexicon::parse("word x").is_err());
        let a = Lexicon::parse("a 1\nb 2\n").unwrap();
        let b = Lexicon::parse("b 2\n\na 1").unwrap();
        assert_eq!(a.version(), b.version());
        let c = Lexicon::parse("a 1\nb 3").unwrap();
        assert_ne!(a.version(), c.version());
        for lex in [
            Lexicon::builtin_sentiment(),
            Lexicon::builtin_toxicity(),
            Lexicon::builtin_pessimism(),
            Lexicon::builtin_left(),
            Lexicon::builtin_right(),
        ] {
            assert!(!lex.words().is_empty());
        }
    }

    #[test]
    fn marker_classifier() {
        let c = LexiconAffiliation::builtin();
        let p = c.probabilities(&texts(&["vote biden democrats"])).unwrap();
        assert_eq!(affiliation_from_probs(p), Affiliation::Democratic);
        let p = c.probabilities(&texts(&["#maga trump"])).unwrap();
        assert_eq!(affiliation_from_probs(p), Affiliation::Republican);
        let p = c.probabilities(&texts(&["no markers at all"])).unwrap();
        assert_eq!(p, [0.0, 1.0, 0.0]);
        assert_eq!(affiliation_from_probs(p), Affiliation::Unknown);
    }
}

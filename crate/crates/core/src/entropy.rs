//! Per-user Shannon entropy, minimal entropy intervals on the 0.1 grid, and
//! the bubble-size transform used to compare cohorts.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scoring::UserDocument;
use crate::text::Tokenizer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropySample {
    pub user_id: String,
    pub entropy_bits: f64,
    pub token_count: usize,
}

/// Shannon entropy in bits of the word distribution of `tokens`, along with
/// the token and distinct-token counts. `None` for an empty sequence.
pub fn token_entropy<I, S>(tokens: I) -> Option<(f64, usize, usize)>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut counts: HashMap<String, usize> = HashMap::new();
    let mut total = 0usize;
    for t in tokens {
        total += 1;
        let t = t.as_ref();
        match counts.get_mut(t) {
            Some(c) => *c += 1,
            None => {
                counts.insert(t.to_string(), 1);
            }
        }
    }
    if total == 0 {
        return None;
    }
    let n = total as f64;
    // sum in a fixed order so the result does not depend on hash seeds
    let mut freq: Vec<usize> = counts.values().copied().collect();
    freq.sort_unstable();
    let h: f64 = freq
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum();
    Some((if h > 0.0 { h } else { 0.0 }, total, counts.len()))
}

pub fn shannon_entropy(doc: &UserDocument, tokenizer: &Tokenizer) -> Result<EntropySample> {
    let tokens = tokenizer.tokenize_all(&doc.texts);
    let (entropy_bits, token_count, _) = token_entropy(&tokens).ok_or_else(|| {
        Error::contract(format!("document of user {} has no tokens", doc.user_id))
    })?;
    Ok(EntropySample {
        user_id: doc.user_id.clone(),
        entropy_bits,
        token_count,
    })
}

pub fn write_entropy_csv<W: Write>(samples: &[EntropySample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in samples {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

/// A count of tenths. Grid positions are kept integral so that stepping by
/// 0.1 never drifts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Tenths(pub i64);

impl Tenths {
    pub fn value(self) -> f64 {
        self.0 as f64 / 10.0
    }

    /// Largest grid point not above `x`.
    pub fn floor_of(x: f64) -> Tenths {
        Tenths((x * 10.0 + 1e-9).floor() as i64)
    }
}

/// A grid window `(start, end)` holding more than half of the data strictly
/// inside it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimalInterval {
    pub start: Tenths,
    pub end: Tenths,
    pub proportion: f64,
}

impl MinimalInterval {
    pub fn length(&self) -> Tenths {
        Tenths(self.end.0 - self.start.0)
    }
}

impl Serialize for MinimalInterval {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Out {
            start: f64,
            end: f64,
            length: f64,
            proportion: f64,
            user_rate_percent: f64,
        }
        Out {
            start: self.start.value(),
            end: self.end.value(),
            length: self.length().value(),
            proportion: self.proportion,
            user_rate_percent: self.proportion * 100.0,
        }
        .serialize(s)
    }
}

/// Fraction of `data` lying strictly between `lower` and `upper`.
pub fn compute_prop(data: &[f64], lower: f64, upper: f64) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::contract("proportion of an empty sample"));
    }
    let inside = data.iter().filter(|&&x| lower < x && x < upper).count();
    Ok(inside as f64 / data.len() as f64)
}

/// Sorted copy of a sample answering strict-interior counts in log time.
struct SortedSample {
    sorted: Vec<f64>,
}

impl SortedSample {
    fn new(data: &[f64]) -> Self {
        let mut sorted = data.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self { sorted }
    }

    fn max(&self) -> Option<f64> {
        self.sorted.last().copied()
    }

    fn proportion(&self, lower: f64, upper: f64) -> f64 {
        let below_upper = self.sorted.partition_point(|&x| x < upper);
        let at_most_lower = self.sorted.partition_point(|&x| x <= lower);
        below_upper.saturating_sub(at_most_lower) as f64 / self.sorted.len() as f64
    }

    fn intervals(&self, len: Tenths) -> Vec<MinimalInterval> {
        let Some(max) = self.max() else {
            return Vec::new();
        };
        // windows starting beyond the largest value cannot hold anything
        let last_start = Tenths::floor_of(max).0;
        (0..=last_start)
            .filter_map(|start| {
                let (lo, hi) = (Tenths(start), Tenths(start + len.0));
                let proportion = self.proportion(lo.value(), hi.value());
                (proportion > 0.5).then_some(MinimalInterval {
                    start: lo,
                    end: hi,
                    proportion,
                })
            })
            .collect()
    }
}

/// Every grid window of length `interval_len` whose strict interior holds
/// more than half of `data`, scanning starts `0, 0.1, …` up to the last
/// grid point not above `max(data)`.
pub fn find_intervals(data: &[f64], interval_len: Tenths) -> Vec<MinimalInterval> {
    if interval_len.0 < 0 {
        return Vec::new();
    }
    SortedSample::new(data).intervals(interval_len)
}

/// Shortest qualifying grid window. Among windows of that length the one
/// with the largest proportion wins, then the smallest start.
pub fn find_minimum_interval(data: &[f64]) -> Result<MinimalInterval> {
    if data.is_empty() {
        return Err(Error::contract("minimal interval of an empty sample"));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::contract("entropy values must be finite"));
    }
    let sample = SortedSample::new(data);
    let max = sample.max().expect("non-empty");
    // a window of length floor(max) + 0.1 starting at 0 already covers (0, max]
    for len in 0..=Tenths::floor_of(max).0 + 1 {
        let found = sample.intervals(Tenths(len));
        if let Some(best) = found.into_iter().reduce(|best, c| {
            if c.proportion > best.proportion {
                c
            } else {
                best
            }
        }) {
            return Ok(best);
        }
    }
    Err(Error::NotFound(
        "no grid interval holds more than half of the sample".into(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BubbleConfig {
    q: f64,
    global_min_entropy: f64,
}

pub const DEFAULT_BUBBLE_SCALE: f64 = 500.0;

impl BubbleConfig {
    pub fn new(q: f64, global_min_entropy: f64) -> Result<Self> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::config(format!("bubble scale q must be positive, got {q}")));
        }
        if !global_min_entropy.is_finite() {
            return Err(Error::config("minimum entropy must be finite"));
        }
        Ok(Self {
            q,
            global_min_entropy,
        })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn global_min_entropy(&self) -> f64 {
        self.global_min_entropy
    }
}

/// `q · 2^H / 2^Hmin`; one extra bit doubles the bubble.
pub fn bubble_size(entropy: f64, config: &BubbleConfig) -> f64 {
    config.q * (entropy - config.global_min_entropy).exp2()
}

/// Entropy difference recovered from two bubble sizes: `log2(size1/size2)`.
pub fn entropy_diff_from_sizes(size1: f64, size2: f64) -> Result<f64> {
    if !(size1 > 0.0 && size2 > 0.0) {
        return Err(Error::contract("bubble sizes must be positive"));
    }
    Ok((size1 / size2).log2())
}

//! Synthetic debunking corpora with planted ground truth.
//!
//! Each cohort is one (platform, topic, affiliation) population. Its
//! interaction graph is a ring lattice core (every member has at least two
//! neighbours, so the whole ring is in the 2-core) plus star-attached
//! periphery users who each touch exactly one core member. Per-user
//! toxicity and pessimism are drawn through a Gaussian copula and written
//! into the text as lexicon words, so the stub scorers read them back.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::DateTime;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use statrs::distribution::{Beta, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::graph::{Affiliation, DegreeClass};
use crate::ingest::{parse_utc, InteractionRecord, Platform, RecordKind, SourceFormat, DEBUNKING_KEYWORDS};
use crate::scoring::Lexicon;
use crate::stats::pearson;
use crate::text::Tokenizer;

/// A marginal distribution on `[0, 1]` (or the configured range).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Marginal {
    Uniform { low: f64, high: f64 },
    Beta { alpha: f64, beta: f64 },
}

impl Marginal {
    fn validate(&self) -> Result<()> {
        match *self {
            Marginal::Uniform { low, high } if low < high && low.is_finite() && high.is_finite() => Ok(()),
            Marginal::Beta { alpha, beta } if alpha > 0.0 && beta > 0.0 => Ok(()),
            _ => Err(Error::config(format!("invalid marginal {self:?}"))),
        }
    }

    /// Quantile function.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match *self {
            Marginal::Uniform { low, high } => low + u * (high - low),
            Marginal::Beta { alpha, beta } => Beta::new(alpha, beta)
                .expect("validated shape parameters")
                .inverse_cdf(u),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Marginal::Uniform { low, high } => (low + high) / 2.0,
            Marginal::Beta { alpha, beta } => alpha / (alpha + beta),
        }
    }
}

fn probit_cdf(z: f64) -> f64 {
    Normal::standard().cdf(z)
}

/// Gaussian copula sample: a standard bivariate normal with correlation
/// `rho`, pushed through Φ and then through each marginal's quantile.
pub fn plant_correlation(
    n: usize,
    marginals: (Marginal, Marginal),
    rho: f64,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    if !(rho > -1.0 && rho < 1.0) {
        return Err(Error::config(format!("rho must lie in (-1, 1), got {rho}")));
    }
    marginals.0.validate()?;
    marginals.1.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(copula_pairs(&mut rng, n, marginals, rho))
}

fn copula_pairs(rng: &mut impl Rng, n: usize, marginals: (Marginal, Marginal), rho: f64) -> Vec<(f64, f64)> {
    let c = (1.0 - rho * rho).sqrt();
    (0..n)
        .map(|_| {
            let z1: f64 = rng.sample(StandardNormal);
            let e: f64 = rng.sample(StandardNormal);
            let z2 = rho * z1 + c * e;
            (
                marginals.0.inverse_cdf(probit_cdf(z1)),
                marginals.1.inverse_cdf(probit_cdf(z2)),
            )
        })
        .collect()
}

/// Two samples whose population Cliff's delta equals `delta`: latent
/// normals shifted by `−√2·Φ⁻¹((1+δ)/2)`, mapped through `marginal`.
/// The monotone map leaves the dominance probability unchanged.
pub fn plant_cliffs_delta(
    n_x: usize,
    n_y: usize,
    delta: f64,
    marginal: Marginal,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(delta > -1.0 && delta < 1.0) {
        return Err(Error::config(format!("delta must lie in (-1, 1), got {delta}")));
    }
    marginal.validate()?;
    let shift = -std::f64::consts::SQRT_2 * Normal::standard().inverse_cdf((1.0 + delta) / 2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |mu: f64, n: usize| -> Vec<f64> {
        (0..n)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                marginal.inverse_cdf(probit_cdf(z + mu))
            })
            .collect()
    };
    let x = draw(0.0, n_x);
    let y = draw(shift, n_y);
    Ok((x, y))
}

/// One component of the per-user compound-score mixture; compound values
/// are drawn uniformly from `[low, high]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SentimentComponent {
    pub weight: f64,
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortConfig {
    pub platform: Platform,
    pub topic: String,
    pub affiliation: Affiliation,
    pub n_users: usize,
    pub two_core_fraction: f64,
    pub toxicity: Marginal,
    pub pessimism: Marginal,
    /// Latent correlation between toxicity and pessimism.
    pub rho: f64,
    pub sentiment: Vec<SentimentComponent>,
    pub vocab_size: usize,
    /// Tokens in each user's aggregated document.
    pub words_per_user: usize,
    pub posts_per_user: usize,
    /// Zipf exponent of core-user popularity; 0 spreads periphery
    /// interactions uniformly over the core.
    #[serde(default)]
    pub popularity_exponent: f64,
    /// Chance that a Twitter periphery user also replies to a core user.
    #[serde(default)]
    pub reply_probability: f64,
    /// First day of the collection window (`YYYY-MM-DD`).
    pub start: String,
    pub days: u32,
}

impl CohortConfig {
    fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::config(format!("cohort {}: {m}", self.label())));
        if self.n_users == 0 {
            return fail("n_users must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.two_core_fraction) {
            return fail(format!("two_core_fraction {} outside [0, 1]", self.two_core_fraction));
        }
        let n_core = self.core_size();
        if n_core > 0 && n_core < 3 {
            return fail(format!(
                "two_core_fraction {} gives {n_core} core users; a core needs at least 3",
                self.two_core_fraction
            ));
        }
        if n_core == 0 && self.n_users >= 2 && self.two_core_fraction > 0.0 {
            return fail("two_core_fraction rounds to an empty core".into());
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return fail(format!("rho {} outside (-1, 1)", self.rho));
        }
        self.toxicity.validate()?;
        self.pessimism.validate()?;
        for m in [self.toxicity, self.pessimism] {
            let (lo, hi) = (m.inverse_cdf(0.0), m.inverse_cdf(1.0));
            if lo < 0.0 || hi > 1.0 {
                return fail("score marginals must stay inside [0, 1]".into());
            }
        }
        if self.sentiment.is_empty() || self.sentiment.iter().any(|c| {
            !(c.weight >= 0.0) || c.low > c.high || c.low <= -1.0 || c.high >= 1.0
        }) {
            return fail("sentiment components need weights ≥ 0 and ranges inside (-1, 1)".into());
        }
        if self.sentiment.iter().map(|c| c.weight).sum::<f64>() <= 0.0 {
            return fail("sentiment weights sum to zero".into());
        }
        if self.vocab_size == 0 {
            return fail("vocab_size must be at least 1".into());
        }
        if self.posts_per_user < 3 {
            return fail("posts_per_user must be at least 3".into());
        }
        if self.words_per_user < 4 * self.posts_per_user {
            return fail("words_per_user must be at least 4 per post".into());
        }
        if !(0.0..=1.0).contains(&self.reply_probability) {
            return fail("reply_probability outside [0, 1]".into());
        }
        if self.days == 0 {
            return fail("days must be positive".into());
        }
        parse_utc(&self.start)?;
        Ok(())
    }

    fn core_size(&self) -> usize {
        (self.two_core_fraction * self.n_users as f64).round() as usize
    }

    pub fn label(&self) -> String {
        format!("{}.{}.{}", self.platform, self.topic, self.affiliation)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub cohorts: Vec<CohortConfig>,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cohorts.is_empty() {
            return Err(Error::config("synth config has no cohorts"));
        }
        let mut seen = BTreeSet::new();
        let mut windows: BTreeMap<(Platform, &str), (&str, u32)> = BTreeMap::new();
        for c in &self.cohorts {
            c.validate()?;
            if !seen.insert(c.label()) {
                return Err(Error::config(format!("duplicate cohort {}", c.label())));
            }
            if c.affiliation == Affiliation::Unknown {
                return Err(Error::config(format!("cohort {} needs a partisan affiliation", c.label())));
            }
            let w = windows.entry((c.platform, c.topic.as_str())).or_insert((&c.start, c.days));
            if *w != (c.start.as_str(), c.days) {
                return Err(Error::config(format!(
                    "cohorts of {} {} disagree on the collection window",
                    c.platform, c.topic
                )));
            }
        }
        Ok(())
    }

    /// Twelve cohorts (two platforms × three topics × two affiliations)
    /// whose 2-core fractions follow the published demographics, with
    /// `total_users` spread evenly.
    pub fn benchmark(total_users: usize, seed: u64) -> Self {
        const TOPICS: [(&str, &str, u32); 3] = [
            ("election2016", "2016-10-20", 35),
            ("election2020", "2020-10-15", 35),
            ("qanon", "2020-12-20", 35),
        ];
        // (platform, topic index) → 2-core share
        let fractions = |p: Platform, t: usize| match (p, t) {
            (Platform::Twitter, 0) => 0.3262,
            (Platform::Twitter, 1) => 0.4372,
            (Platform::Twitter, _) => 0.1932,
            (Platform::Reddit, 0) => 0.0712,
            (Platform::Reddit, 1) => 0.0485,
            (Platform::Reddit, _) => 0.0076,
        };
        let per = total_users / 12;
        let mut cohorts = Vec::new();
        let mut k = 0usize;
        for platform in [Platform::Twitter, Platform::Reddit] {
            for (t, (topic, start, days)) in TOPICS.iter().enumerate() {
                for affiliation in [Affiliation::Democratic, Affiliation::Republican] {
                    let n_users = if k == 11 { total_users - per * 11 } else { per };
                    let republican = affiliation == Affiliation::Republican;
                    cohorts.push(CohortConfig {
                        platform,
                        topic: topic.to_string(),
                        affiliation,
                        n_users,
                        two_core_fraction: fractions(platform, t),
                        toxicity: if republican {
                            Marginal::Beta { alpha: 2.5, beta: 5.0 }
                        } else {
                            Marginal::Beta { alpha: 2.0, beta: 6.0 }
                        },
                        pessimism: Marginal::Beta { alpha: 1.5, beta: 12.0 },
                        rho: if republican { -0.216 } else { -0.12 },
                        sentiment: vec![
                            SentimentComponent { weight: 0.34, low: -0.9, high: -0.5 },
                            SentimentComponent { weight: 0.34, low: -0.3, high: 0.3 },
                            SentimentComponent { weight: 0.32, low: 0.5, high: 0.9 },
                        ],
                        vocab_size: 24 + 40 * k,
                        words_per_user: 60 + 4 * (k % 4),
                        posts_per_user: 4,
                        popularity_exponent: 1.0,
                        reply_probability: 0.3,
                        start: start.to_string(),
                        days: *days,
                    });
                    k += 1;
                }
            }
        }
        Self { seed, cohorts }
    }
}

/// Planted parameters and realised summaries of one cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortTruth {
    pub platform: Platform,
    pub topic: String,
    pub affiliation: Affiliation,
    pub n_users: usize,
    pub n_two_core: usize,
    pub two_core_fraction_planted: f64,
    pub two_core_fraction_realized: f64,
    pub rho_planted: f64,
    /// Pearson r of the planted (toxicity, pessimism) pairs; differs from
    /// `rho_planted` by marginal attenuation and sampling noise.
    pub pearson_planted_scores: Option<f64>,
    pub mean_toxicity: f64,
    pub mean_pessimism: f64,
    /// Share of users drawn from each sentiment component.
    pub sentiment_shares: Vec<f64>,
    pub vocab_size: usize,
    /// `log2(vocab_size)`, the entropy limit of long uniform documents.
    pub entropy_limit_bits: f64,
    pub words_per_user: usize,
    pub records: usize,
    pub seed_users: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserTruth {
    pub user_id: String,
    pub platform: Platform,
    pub topic: String,
    pub affiliation: Affiliation,
    pub degree_class: DegreeClass,
    pub toxicity: f64,
    pub pessimism: f64,
    pub compound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub config: SynthConfig,
    pub cohorts: Vec<CohortTruth>,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub records: Vec<InteractionRecord>,
    pub users: Vec<UserTruth>,
    pub ground_truth: GroundTruth,
}

/// Lexicon words split so no word counts towards two planted metrics.
struct WordBank {
    toxic: Vec<String>,
    pessimistic: Vec<String>,
    positive: Vec<(String, f64)>,
    negative: Vec<(String, f64)>,
    left: Vec<String>,
    right: Vec<String>,
    keywords: Vec<&'static str>,
}

impl WordBank {
    fn new() -> Self {
        let tox = Lexicon::builtin_toxicity();
        let pes = Lexicon::builtin_pessimism();
        let sen = Lexicon::builtin_sentiment();
        let left = Lexicon::builtin_left();
        let right = Lexicon::builtin_right();
        let all = [&tox, &pes, &sen, &left, &right];
        let only_in = |lex: &Lexicon| -> Vec<String> {
            lex.words()
                .into_iter()
                .filter(|w| all.iter().filter(|l| l.contains(w)).count() == 1)
                .map(str::to_string)
                .collect()
        };
        let sentiment = only_in(&sen);
        let valence = |w: &String| sen.get(w).expect("word from this lexicon");
        let tokenizer = Tokenizer::default();
        let keywords = DEBUNKING_KEYWORDS
            .iter()
            .copied()
            .filter(|k| tokenizer.tokenize(k).all(|t| all.iter().all(|l| !l.contains(&t))))
            .collect();
        Self {
            toxic: only_in(&tox),
            pessimistic: only_in(&pes),
            positive: sentiment.iter().filter(|w| valence(w) > 0.0).map(|w| (w.clone(), valence(w))).collect(),
            negative: sentiment.iter().filter(|w| valence(w) < 0.0).map(|w| (w.clone(), valence(w))).collect(),
            left: only_in(&left),
            right: only_in(&right),
            keywords,
        }
    }

    fn is_lexical(&self, w: &str) -> bool {
        self.toxic.iter().any(|t| t == w)
            || self.pessimistic.iter().any(|t| t == w)
            || self.positive.iter().any(|t| t.0 == w)
            || self.negative.iter().any(|t| t.0 == w)
            || self.left.iter().any(|t| t == w)
            || self.right.iter().any(|t| t == w)
    }

    /// Sentiment words (at most `cap`) whose valences sum as close as
    /// possible to `target`, found by breadth-first search over sums in
    /// tenths.
    fn sentiment_words(&self, target: f64, cap: usize) -> Vec<String> {
        const RANGE: i32 = 400;
        const MAX_WORDS: usize = 12;
        let words: Vec<(&String, i32)> = self
            .positive
            .iter()
            .chain(&self.negative)
            .map(|(w, v)| (w, (v * 10.0).round() as i32))
            .collect();
        let size = (2 * RANGE + 1) as usize;
        // best[sum] = (word count, last word, previous sum)
        let mut best: Vec<Option<(usize, usize, i32)>> = vec![None; size];
        let slot = |s: i32| (s + RANGE) as usize;
        best[slot(0)] = Some((0, usize::MAX, 0));
        let mut frontier = vec![0i32];
        for depth in 1..=cap.min(MAX_WORDS) {
            let mut next = Vec::new();
            for &s in &frontier {
                for (i, &(_, v)) in words.iter().enumerate() {
                    let t = s + v;
                    if t.abs() <= RANGE && best[slot(t)].is_none() {
                        best[slot(t)] = Some((depth, i, s));
                        next.push(t);
                    }
                }
            }
            frontier = next;
        }
        let goal = (target * 10.0).round() as i32;
        let chosen = (-RANGE..=RANGE)
            .filter_map(|s| best[slot(s)].map(|(d, _, _)| (s, d)))
            .min_by_key(|&(s, d)| ((s - goal).abs(), d))
            .map(|(s, _)| s)
            .unwrap_or(0);
        let mut out = Vec::new();
        let mut s = chosen;
        while let Some((d, i, prev)) = best[slot(s)] {
            if d == 0 {
                break;
            }
            out.push(words[i].0.clone());
            s = prev;
        }
        out
    }
}

const CONSONANTS: &[u8] = b"bcdfghjklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

/// `n` distinct pronounceable filler words, none of them lexicon entries.
pub fn vocabulary(n: usize) -> Vec<String> {
    let bank = WordBank::new();
    let syllables: Vec<[u8; 2]> = CONSONANTS
        .iter()
        .flat_map(|&c| VOWELS.iter().map(move |&v| [c, v]))
        .collect();
    let base = syllables.len();
    let mut out = Vec::with_capacity(n);
    let mut k = 0usize;
    while out.len() < n {
        let (mut word, mut rest) = (String::new(), k);
        for _ in 0..3 {
            let s = syllables[rest % base];
            word.push(s[0] as char);
            word.push(s[1] as char);
            rest /= base;
        }
        if rest > 0 {
            word.push_str(&rest.to_string());
        }
        if !bank.is_lexical(&word) {
            out.push(word);
        }
        k += 1;
    }
    out
}

/// Cumulative Zipf weights over `n` ranks.
fn zipf_cdf(n: usize, exponent: f64) -> Vec<f64> {
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = (1..=n)
        .map(|r| {
            acc += (r as f64).powf(-exponent);
            acc
        })
        .collect();
    for v in &mut cdf {
        *v /= acc;
    }
    cdf
}

fn pick(cdf: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    cdf.partition_point(|c| *c < u).min(cdf.len() - 1)
}

struct CohortOutput {
    records: Vec<InteractionRecord>,
    users: Vec<UserTruth>,
    truth: CohortTruth,
}

fn user_id(platform: Platform, cohort: usize, i: usize) -> String {
    match platform {
        Platform::Twitter => format!("{}", (cohort as u64 + 1) * 10_000_000 + i as u64),
        Platform::Reddit => format!("u{cohort:02}_{i:06}"),
    }
}

fn generate_cohort(index: usize, cfg: &CohortConfig, seed: u64, bank: &WordBank) -> Result<CohortOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let n = cfg.n_users;
    let n_core = cfg.core_size();
    let start = parse_utc(&cfg.start)?;
    let span = cfg.days as i64 * 86_400;
    let vocab = vocabulary(cfg.vocab_size);
    let markers = match cfg.affiliation {
        Affiliation::Democratic => &bank.left,
        _ => &bank.right,
    };

    let pairs = copula_pairs(&mut rng, n, (cfg.toxicity, cfg.pessimism), cfg.rho);
    let weights: Vec<f64> = cfg.sentiment.iter().map(|c| c.weight).collect();
    let total_w: f64 = weights.iter().sum();
    let mut component_counts = vec![0usize; cfg.sentiment.len()];
    let compounds: Vec<f64> = (0..n)
        .map(|_| {
            let mut u = rng.random::<f64>() * total_w;
            let mut k = 0;
            while k + 1 < weights.len() && u >= weights[k] {
                u -= weights[k];
                k += 1;
            }
            component_counts[k] += 1;
            let c = cfg.sentiment[k];
            c.low + rng.random::<f64>() * (c.high - c.low)
        })
        .collect();

    let ids: Vec<String> = (0..n).map(|i| user_id(cfg.platform, index, i)).collect();
    let popularity = if n_core > 0 { zipf_cdf(n_core, cfg.popularity_exponent) } else { Vec::new() };

    // message ids, unique across cohorts
    let mut counter = 0u64;
    let mut next_id = |platform: Platform| -> String {
        counter += 1;
        match platform {
            Platform::Twitter => format!("{}", (index as u64 + 1) * 1_000_000_000 + counter),
            Platform::Reddit => format!("c{index:02}x{counter:x}"),
        }
    };

    let mut posts_text: Vec<Vec<String>> = Vec::with_capacity(n);
    for i in 0..n {
        posts_text.push(user_posts(cfg, &pairs[i], compounds[i], &vocab, markers, bank, &mut rng));
    }

    let mut records = Vec::with_capacity(n * cfg.posts_per_user);
    let mut first_comment: Vec<String> = Vec::with_capacity(n);
    let topic_thread = format!("t3_s{index:02}");
    let time = |rng: &mut ChaCha8Rng| start + rng.random_range(0..span);

    // plan (kind, target user index) for every post
    let mut plans: Vec<Vec<(RecordKind, Option<usize>)>> = Vec::with_capacity(n);
    for i in 0..n {
        let p = cfg.posts_per_user;
        let own = match cfg.platform {
            Platform::Twitter => RecordKind::Post,
            Platform::Reddit => RecordKind::Comment,
        };
        let link = match cfg.platform {
            Platform::Twitter => RecordKind::Retweet,
            Platform::Reddit => RecordKind::Comment,
        };
        let mut plan = vec![(own, None); p];
        if i < n_core {
            plan[1] = (link, Some((i + 1) % n_core));
            plan[2] = (link, Some((i + 2) % n_core));
        } else if n_core > 0 {
            plan[1] = (link, Some(pick(&popularity, &mut rng)));
            if cfg.platform == Platform::Twitter && rng.random::<f64>() < cfg.reply_probability {
                plan[2] = (RecordKind::Reply, Some(pick(&popularity, &mut rng)));
            }
        } else if i > 0 {
            // no core: a star around user 0
            plan[1] = (link, Some(0));
        }
        plans.push(plan);
    }

    // first (top-level) record of every user is emitted before any reply
    // so parents always exist
    for i in 0..n {
        let id = next_id(cfg.platform);
        first_comment.push(id.clone());
        records.push(InteractionRecord {
            platform: cfg.platform,
            topic: cfg.topic.clone(),
            message_id: id,
            author_id: ids[i].clone(),
            created_at: time(&mut rng),
            text: posts_text[i][0].clone(),
            kind: plans[i][0].0,
            target_author_id: None,
            parent_id: (cfg.platform == Platform::Reddit).then(|| topic_thread.clone()),
            eligible: true,
        });
    }
    for i in 0..n {
        for (k, &(kind, target)) in plans[i].iter().enumerate().skip(1) {
            let (target_author_id, parent_id) = match (cfg.platform, target) {
                (Platform::Twitter, Some(t)) => (Some(ids[t].clone()), None),
                (Platform::Twitter, None) => (None, None),
                (Platform::Reddit, Some(t)) => (None, Some(format!("t1_{}", first_comment[t]))),
                (Platform::Reddit, None) => (None, Some(topic_thread.clone())),
            };
            records.push(InteractionRecord {
                platform: cfg.platform,
                topic: cfg.topic.clone(),
                message_id: next_id(cfg.platform),
                author_id: ids[i].clone(),
                created_at: time(&mut rng),
                text: posts_text[i][k].clone(),
                kind,
                target_author_id,
                parent_id,
                eligible: true,
            });
        }
    }

    let tox: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let pes: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let users: Vec<UserTruth> = (0..n)
        .map(|i| UserTruth {
            user_id: ids[i].clone(),
            platform: cfg.platform,
            topic: cfg.topic.clone(),
            affiliation: cfg.affiliation,
            degree_class: if i < n_core { DegreeClass::TwoCore } else { DegreeClass::OneDegree },
            toxicity: tox[i],
            pessimism: pes[i],
            compound: compounds[i],
        })
        .collect();
    let n_seeds = if n_core == 0 { 0 } else { (n_core / 20).max(1) };
    let truth = CohortTruth {
        platform: cfg.platform,
        topic: cfg.topic.clone(),
        affiliation: cfg.affiliation,
        n_users: n,
        n_two_core: n_core,
        two_core_fraction_planted: cfg.two_core_fraction,
        two_core_fraction_realized: n_core as f64 / n as f64,
        rho_planted: cfg.rho,
        pearson_planted_scores: pearson(&tox, &pes).ok().map(|c| c.r),
        mean_toxicity: tox.iter().sum::<f64>() / n as f64,
        mean_pessimism: pes.iter().sum::<f64>() / n as f64,
        sentiment_shares: component_counts.iter().map(|c| *c as f64 / n as f64).collect(),
        vocab_size: cfg.vocab_size,
        entropy_limit_bits: (cfg.vocab_size as f64).log2(),
        words_per_user: cfg.words_per_user,
        records: records.len(),
        seed_users: ids[..n_seeds].to_vec(),
    };
    Ok(CohortOutput { records, users, truth })
}

/// The user's posts. Together they hold exactly `words_per_user` tokens:
/// one debunking keyword per post, two partisan markers, toxic and
/// pessimistic words in proportion to the planted scores, sentiment
/// words summing to the planted compound, and vocabulary filler.
fn user_posts(
    cfg: &CohortConfig,
    scores: &(f64, f64),
    compound_target: f64,
    vocab: &[String],
    markers: &[String],
    bank: &WordBank,
    rng: &mut ChaCha8Rng,
) -> Vec<String> {
    let w = cfg.words_per_user;
    let p = cfg.posts_per_user;
    let tokenizer = Tokenizer::default();
    let keywords: Vec<&str> = (0..p).map(|_| *bank.keywords.choose(rng).expect("keywords")).collect();
    let kw_tokens: usize = keywords.iter().map(|k| tokenizer.tokenize(k).count()).sum();
    let budget = w - kw_tokens;
    let n_markers = 2.min(budget);
    let n_toxic = ((scores.0 * w as f64).round() as usize).min(budget - n_markers);
    let n_pess = ((scores.1 * w as f64).round() as usize).min(budget - n_markers - n_toxic);
    let free = budget - n_markers - n_toxic - n_pess;
    let valence = compound_target * (crate::scoring::VADER_ALPHA / (1.0 - compound_target.powi(2))).sqrt();
    let sentiment = bank.sentiment_words(valence, free.min(w / 4));
    let n_filler = free - sentiment.len();

    let mut payload: Vec<String> = Vec::with_capacity(budget);
    payload.extend((0..n_markers).map(|_| markers.choose(rng).expect("markers").clone()));
    payload.extend((0..n_toxic).map(|_| bank.toxic.choose(rng).expect("toxic words").clone()));
    payload.extend((0..n_pess).map(|_| bank.pessimistic.choose(rng).expect("pessimism words").clone()));
    payload.extend(sentiment);
    payload.extend((0..n_filler).map(|_| vocab.choose(rng).expect("vocabulary").clone()));
    payload.shuffle(rng);

    let per = payload.len() / p;
    let mut posts = Vec::with_capacity(p);
    let mut rest = payload.into_iter();
    for (k, kw) in keywords.iter().enumerate() {
        let take = if k + 1 == p { usize::MAX } else { per };
        let mut words: Vec<String> = rest.by_ref().take(take).collect();
        let at = rng.random_range(0..=words.len());
        words.insert(at, kw.to_string());
        posts.push(words.join(" "));
    }
    posts
}

/// Generates every cohort (in parallel, each on its own ChaCha stream) and
/// returns records in a fixed order.
pub fn generate_corpus(config: &SynthConfig) -> Result<SynthCorpus> {
    config.validate()?;
    let bank = WordBank::new();
    let outputs: Vec<CohortOutput> = config
        .cohorts
        .par_iter()
        .enumerate()
        .map(|(i, c)| generate_cohort(i, c, config.seed, &bank))
        .collect::<Result<_>>()?;
    let mut records = Vec::new();
    let mut users = Vec::new();
    let mut cohorts = Vec::new();
    for o in outputs {
        records.extend(o.records);
        users.extend(o.users);
        cohorts.push(o.truth);
    }
    Ok(SynthCorpus {
        records,
        users,
        ground_truth: GroundTruth {
            seed: config.seed,
            config: config.clone(),
            cohorts,
        },
    })
}

fn twitter_time(ts: i64) -> String {
    DateTime::from_timestamp(ts, 0)
        .expect("timestamp in range")
        .format("%a %b %d %H:%M:%S +0000 %Y")
        .to_string()
}

/// The record as a Twitter v1.1 status object.
pub fn twitter_json(r: &InteractionRecord) -> serde_json::Value {
    let mut v = json!({
        "id_str": r.message_id,
        "created_at": twitter_time(r.created_at),
        "text": r.text,
        "user": {"id_str": r.author_id},
    });
    match (r.kind, &r.target_author_id) {
        (RecordKind::Retweet, Some(t)) => {
            v["retweeted_status"] = json!({"user": {"id_str": t}});
        }
        (RecordKind::Reply, Some(t)) => {
            v["in_reply_to_user_id_str"] = json!(t);
        }
        _ => {}
    }
    v
}

/// The record as a Pushshift comment object.
pub fn pushshift_comment_json(r: &InteractionRecord, subreddit: &str) -> serde_json::Value {
    json!({
        "id": r.message_id,
        "author": r.author_id,
        "created_utc": r.created_at,
        "body": r.text,
        "parent_id": r.parent_id,
        "subreddit": subreddit,
    })
}

/// Files written for one (platform, topic) dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFiles {
    pub platform: Platform,
    pub topic: String,
    pub input: PathBuf,
    pub format: SourceFormat,
    pub seeds: PathBuf,
    pub start: String,
    pub days: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusFiles {
    pub datasets: Vec<DatasetFiles>,
    pub ground_truth: PathBuf,
    pub users: PathBuf,
}

/// Writes raw platform dumps, seed lists and ground truth into `dir`.
/// File names are `<platform>.<topic>.jsonl` and `seeds.<platform>.<topic>.csv`.
pub fn write_corpus(corpus: &SynthCorpus, dir: &Path) -> Result<CorpusFiles> {
    std::fs::create_dir_all(dir)?;
    let mut groups: BTreeMap<(Platform, String), Vec<&InteractionRecord>> = BTreeMap::new();
    for r in &corpus.records {
        groups.entry((r.platform, r.topic.clone())).or_default().push(r);
    }
    let mut datasets = Vec::new();
    for ((platform, topic), recs) in &groups {
        let input = dir.join(format!("{platform}.{topic}.jsonl"));
        let mut out = BufWriter::new(File::create(&input)?);
        for r in recs {
            let v = match platform {
                Platform::Twitter => twitter_json(r),
                Platform::Reddit => pushshift_comment_json(r, topic),
            };
            serde_json::to_writer(&mut out, &v)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;

        let seeds = dir.join(format!("seeds.{platform}.{topic}.csv"));
        let mut w = csv::Writer::from_path(&seeds)?;
        w.write_record(["user_id", "affiliation"])?;
        let mut window = None;
        for c in corpus
            .ground_truth
            .cohorts
            .iter()
            .filter(|c| c.platform == *platform && &c.topic == topic)
        {
            for u in &c.seed_users {
                w.write_record([u.as_str(), c.affiliation.as_str()])?;
            }
            let cfg = corpus
                .ground_truth
                .config
                .cohorts
                .iter()
                .find(|k| k.platform == c.platform && k.topic == c.topic && k.affiliation == c.affiliation)
                .expect("truth mirrors config");
            window = Some((cfg.start.clone(), cfg.days));
        }
        w.flush()?;
        let (start, days) = window.expect("every dataset has a cohort");
        datasets.push(DatasetFiles {
            platform: *platform,
            topic: topic.clone(),
            input,
            format: match platform {
                Platform::Twitter => SourceFormat::Twitter,
                Platform::Reddit => SourceFormat::PushshiftComments,
            },
            seeds,
            start,
            days,
        });
    }
    let ground_truth = dir.join("ground_truth.json");
    let mut out = BufWriter::new(File::create(&ground_truth)?);
    serde_json::to_writer_pretty(&mut out, &corpus.ground_truth)?;
    out.write_all(b"\n")?;
    out.flush()?;
    let users = dir.join("ground_truth_users.csv");
    let mut w = csv::Writer::from_path(&users)?;
    for u in &corpus.users {
        w.serialize(u)?;
    }
    w.flush()?;
    Ok(CorpusFiles {
        datasets,
        ground_truth,
        users,
    })
}

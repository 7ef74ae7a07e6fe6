//! Stage orchestration: ingest → graph → score → entropy → stats →
//! temporal → report over one workspace directory.
//!
//! Every stage reads the artifacts of the stages before it from the
//! workspace, so each can be rerun on its own. Artifact names follow
//! `<stage>.<platform>.<topic>[.<kind>].<ext>`; cross-cohort reports use
//! `report.<kind>.<ext>`.

mod config;
mod workspace;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{DatasetConfig, RunConfig, ScorerConfig, WindowConfig, CONFIG_SCHEMA};
pub use workspace::{sha256_hex, ArtifactEntry, Manifest, RunStatus, Workspace, CACHE_DIR, LOCK_FILE, MANIFEST};

use crate::entropy::{find_minimum_interval, shannon_entropy, write_entropy_csv, EntropySample, MinimalInterval};
use crate::error::{Error, Result};
use crate::graph::{
    build_interaction_graph, classify_users, cluster_partition, interaction_users, k_core,
    read_class_assignments, read_seeds, resolve_reply_targets, write_class_assignments, write_edge_list,
    Affiliation, DegreeClass, UserClassAssignment,
};
use crate::ingest::{ingest_sources, read_records, write_records, InteractionRecord};
use crate::report::{
    emit_bubble_table, emit_density_grid, emit_regression_report, regression_svg, violin_summary, write_csv,
    write_density_csv, CohortKey, RegressionSeries,
};
use crate::scoring::{
    aggregate_user_text, classify_text_affiliation, content_hash, fetch_external_scores, AffiliationClassifier,
    CacheKey, CachedScorer, FetchReport, HttpAffiliationClassifier, HttpScorer, LexiconAffiliation, Metric,
    ScoreCache, ScoreRecord, ScoreValue, ScorerError, Scorers, Side, TextScorer, UserDocument,
};
use crate::stats::{
    cliffs_delta, distribution_share, fligner_killeen, hartigan_dip, ks_two_sample, mann_whitney_u, pearson,
    Correlation, EffectSize, RegressionFit, ShareReport, TestResult,
};
use crate::temporal::{
    daily_aggregate, daily_fit, engagement_fit, event_window, reply_engagement_curve, segment_counts,
    write_daily_csv, write_events_csv, write_segments_csv, EngagementMetric, EngagementPoint,
};
use crate::text::Tokenizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Graph,
    Score,
    Entropy,
    Stats,
    Temporal,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Ingest,
        Stage::Graph,
        Stage::Score,
        Stage::Entropy,
        Stage::Stats,
        Stage::Temporal,
        Stage::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Graph => "graph",
            Stage::Score => "score",
            Stage::Entropy => "entropy",
            Stage::Stats => "stats",
            Stage::Temporal => "temporal",
            Stage::Report => "report",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn artifact(stage: Stage, d: &DatasetConfig, kind: Option<&str>, ext: &str) -> String {
    match kind {
        Some(k) => format!("{stage}.{}.{k}.{ext}", d.cohort()),
        None => format!("{stage}.{}.{ext}", d.cohort()),
    }
}

const AFFILIATIONS: [Affiliation; 2] = [Affiliation::Democratic, Affiliation::Republican];
const CLASSES: [DegreeClass; 2] = [DegreeClass::TwoCore, DegreeClass::OneDegree];

/// Affiliation classifier whose answers are kept in the score cache.
struct CachedClassifier {
    inner: Arc<dyn AffiliationClassifier>,
    cache: Arc<ScoreCache>,
}

impl AffiliationClassifier for CachedClassifier {
    fn classifier_id(&self) -> &str {
        self.inner.classifier_id()
    }

    fn probabilities(&self, texts: &[String]) -> std::result::Result<[f64; 3], ScorerError> {
        let key = CacheKey::new(content_hash(texts), self.classifier_id(), "");
        if let Some(ScoreValue::Vector(v)) = self.cache.get(&key) {
            if let [l, c, r] = v[..] {
                return Ok([l, c, r]);
            }
        }
        let p = self.inner.probabilities(texts)?;
        self.cache
            .put(key, ScoreValue::Vector(p.to_vec()))
            .map_err(|e| ScorerError(format!("cache write failed: {e}")))?;
        Ok(p)
    }
}

/// Scorers resolved from the config: external endpoints where given,
/// built-in lexicon stubs elsewhere.
pub struct Runtime {
    raw: Scorers,
    cached: Scorers,
    external: BTreeSet<Metric>,
    classifier: Arc<dyn AffiliationClassifier>,
    cache: Arc<ScoreCache>,
    in_flight: usize,
}

impl Runtime {
    pub fn from_config(cfg: &RunConfig, ws: &Workspace) -> Result<Self> {
        let s = &cfg.scorers;
        let any_external = [&s.toxicity, &s.sentiment, &s.pessimism, &s.affiliation]
            .iter()
            .any(|e| e.is_some());
        let cache = Arc::new(if any_external {
            ScoreCache::open(&ws.path(CACHE_DIR).join("scores.jsonl"))?
        } else {
            ScoreCache::in_memory()
        });
        let stub = Scorers::stub();
        let mut raw = stub.clone();
        let mut cached = stub;
        let mut external = BTreeSet::new();
        let mut in_flight = 1;
        for (metric, endpoint) in [
            (Metric::Toxicity, &s.toxicity),
            (Metric::Sentiment, &s.sentiment),
            (Metric::Pessimism, &s.pessimism),
        ] {
            let Some(e) = endpoint else { continue };
            let http: Arc<dyn TextScorer> = Arc::new(HttpScorer::new(e.clone())?);
            let wrapped: Arc<dyn TextScorer> = Arc::new(CachedScorer::new(http.clone(), cache.clone()));
            in_flight = in_flight.max(e.max_in_flight);
            external.insert(metric);
            match metric {
                Metric::Toxicity => (raw.toxicity, cached.toxicity) = (http, wrapped),
                Metric::Sentiment => (raw.sentiment, cached.sentiment) = (http, wrapped),
                Metric::Pessimism => (raw.pessimism, cached.pessimism) = (http, wrapped),
            }
        }
        let classifier: Arc<dyn AffiliationClassifier> = match &s.affiliation {
            Some(e) => Arc::new(CachedClassifier {
                inner: Arc::new(HttpAffiliationClassifier::new(e.clone())?),
                cache: cache.clone(),
            }),
            None => Arc::new(LexiconAffiliation::builtin()),
        };
        Ok(Self {
            raw,
            cached,
            external,
            classifier,
            cache,
            in_flight,
        })
    }

    /// metric → `id` or `id@version`
    pub fn scorer_ids(&self) -> BTreeMap<String, String> {
        let name = |s: &Arc<dyn TextScorer>| match s.scorer_version() {
            "" => s.scorer_id().to_string(),
            v => format!("{}@{v}", s.scorer_id()),
        };
        let mut out = BTreeMap::new();
        for m in [Metric::Toxicity, Metric::Sentiment, Metric::Pessimism] {
            out.insert(m.as_str().to_string(), name(self.raw.get(m)));
        }
        out.insert("affiliation".into(), self.classifier.classifier_id().to_string());
        out
    }

    /// Scorers with every external call going through the cache.
    pub fn scorers(&self) -> &Scorers {
        &self.cached
    }

    fn score_docs(&self, docs: &BTreeMap<String, UserDocument>, metric: Metric) -> Result<FetchReport> {
        let scorer = self.raw.get(metric);
        let mut report = if self.external.contains(&metric) {
            fetch_external_scores(docs, scorer.as_ref(), &self.cache, self.in_flight)?
        } else {
            let results: Vec<(String, std::result::Result<f64, ScorerError>)> = docs
                .par_iter()
                .map(|(u, d)| (u.clone(), scorer.score_texts(&d.texts)))
                .collect();
            let mut report = FetchReport::default();
            for (u, r) in results {
                match r {
                    Ok(v) => {
                        report.scores.insert(u, v);
                        report.computed += 1;
                    }
                    Err(e) => {
                        report.failures.insert(u, e.0);
                    }
                }
            }
            report
        };
        let (lo, hi) = metric.bounds();
        let bad: Vec<(String, f64)> = report
            .scores
            .iter()
            .filter(|(_, v)| !(v.is_finite() && (lo..=hi).contains(*v)))
            .map(|(u, v)| (u.clone(), *v))
            .collect();
        for (u, v) in bad {
            report.scores.remove(&u);
            report
                .failures
                .insert(u, format!("{} score {v} outside [{lo}, {hi}]", metric.as_str()));
        }
        Ok(report)
    }
}

/// What a command produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: Manifest,
    pub stages: Vec<Stage>,
}

impl RunOutcome {
    pub fn status(&self) -> RunStatus {
        self.manifest.status
    }
}

/// Runs every stage in order and writes the manifest.
pub fn run_pipeline(cfg: &RunConfig, ws: &Workspace) -> Result<RunOutcome> {
    run_stages(cfg, ws, &Stage::ALL)
}

/// Runs the given stages in order, then rewrites the manifest over the
/// whole workspace. The config is validated before any work starts.
pub fn run_stages(cfg: &RunConfig, ws: &Workspace, stages: &[Stage]) -> Result<RunOutcome> {
    cfg.validate()?;
    let rt = Runtime::from_config(cfg, ws)?;
    for &stage in stages {
        match stage {
            Stage::Ingest => stage_ingest(cfg, ws)?,
            Stage::Graph => stage_graph(cfg, ws, &rt)?,
            Stage::Score => stage_score(cfg, ws, &rt)?,
            Stage::Entropy => stage_entropy(cfg, ws)?,
            Stage::Stats => stage_stats(cfg, ws)?,
            Stage::Temporal => stage_temporal(cfg, ws, &rt)?,
            Stage::Report => stage_report(cfg, ws)?,
        }
    }
    let manifest = write_manifest(cfg, ws, &rt)?;
    Ok(RunOutcome {
        manifest,
        stages: stages.to_vec(),
    })
}

pub fn config_hash(cfg: &RunConfig) -> Result<String> {
    let mut c = cfg.clone();
    c.workspace = None;
    Ok(sha256_hex(&serde_json::to_vec(&c)?))
}

fn write_manifest(cfg: &RunConfig, ws: &Workspace, rt: &Runtime) -> Result<Manifest> {
    let artifacts = workspace::hash_artifacts(ws)?;
    let mut failures = BTreeMap::new();
    for a in &artifacts {
        if let Some(stem) = a.path.strip_suffix(".failures.json") {
            let f: BTreeMap<String, String> = ws.read_json(&a.path, "score")?;
            if !f.is_empty() {
                failures.insert(stem.to_string(), f);
            }
        }
    }
    let manifest = Manifest {
        seed: cfg.seed,
        config_hash: config_hash(cfg)?,
        status: if failures.is_empty() {
            RunStatus::Success
        } else {
            RunStatus::Partial
        },
        scorers: rt.scorer_ids(),
        graphics: artifacts.iter().any(|a| a.path.ends_with(".svg")),
        failures,
        artifacts,
    };
    ws.write_json(MANIFEST, &manifest)?;
    Ok(manifest)
}

fn load_records(ws: &Workspace, d: &DatasetConfig) -> Result<Vec<InteractionRecord>> {
    read_records(&ws.read(&artifact(Stage::Ingest, d, None, "jsonl"), "ingest")?[..])
}

fn load_classes(ws: &Workspace, d: &DatasetConfig) -> Result<Vec<UserClassAssignment>> {
    read_class_assignments(&ws.read(&artifact(Stage::Graph, d, Some("classes"), "csv"), "graph")?[..])
}

fn read_csv<T: for<'de> Deserialize<'de>>(bytes: &[u8]) -> Result<Vec<T>> {
    csv::Reader::from_reader(bytes)
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(Into::into)
}

fn authored_docs(records: &[InteractionRecord]) -> BTreeMap<String, UserDocument> {
    let mut docs = aggregate_user_text(records, Side::Authored);
    docs.retain(|_, d| !d.is_empty());
    docs
}

// ---- ingest

fn stage_ingest(cfg: &RunConfig, ws: &Workspace) -> Result<()> {
    let filter = cfg.keyword_filter()?;
    for d in &cfg.datasets {
        let (records, report) = ingest_sources(&d.inputs, &d.parse_options(), &filter, &d.time_window()?)?;
        ws.write_with(&artifact(Stage::Ingest, d, None, "jsonl"), |buf| write_records(buf, &records))?;
        ws.write_json(&artifact(Stage::Ingest, d, Some("report"), "json"), &report)?;
    }
    Ok(())
}

// ---- graph

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub nodes: usize,
    pub edges: usize,
    pub users: usize,
    pub two_core: usize,
    pub one_degree: usize,
    pub two_core_fraction: f64,
    pub seeds: usize,
    /// degree class → affiliation → users
    pub affiliations: BTreeMap<DegreeClass, BTreeMap<Affiliation, usize>>,
}

fn stage_graph(cfg: &RunConfig, ws: &Workspace, rt: &Runtime) -> Result<()> {
    for d in &cfg.datasets {
        let mut records = load_records(ws, d)?;
        resolve_reply_targets(&mut records);
        let graph = build_interaction_graph(&records, d.graph_mode());
        let users = interaction_users(&records, &graph);
        let core = k_core(&graph, 2)?;

        let mut seeds = BTreeMap::new();
        let mut affiliations = BTreeMap::new();
        if let Some(path) = &d.seeds {
            seeds = read_seeds(std::fs::File::open(path)?)?;
            affiliations = cluster_partition(&graph.induced(&core), &seeds)?;
            affiliations.retain(|_, a| *a != Affiliation::Unknown);
        }

        // users outside the labelled core are classified from their own text
        let docs = authored_docs(&records);
        let pending: Vec<&UserDocument> = docs
            .values()
            .filter(|doc| !core.contains(&doc.user_id) || (d.seeds.is_none() && !affiliations.contains_key(&doc.user_id)))
            .collect();
        let outcomes: Vec<_> = pending
            .par_iter()
            .map(|doc| classify_text_affiliation(doc, rt.classifier.as_ref()).map(|o| (doc.user_id.clone(), o)))
            .collect::<Result<_>>()?;
        let mut failures = BTreeMap::new();
        for (user, o) in outcomes {
            if let Some(f) = o.failure {
                failures.insert(user.clone(), f);
            }
            if o.affiliation != Affiliation::Unknown {
                affiliations.insert(user, o.affiliation);
            }
        }

        let classes = classify_users(&users, &core, &affiliations);
        let mut tally: BTreeMap<DegreeClass, BTreeMap<Affiliation, usize>> = BTreeMap::new();
        for c in &classes {
            *tally.entry(c.degree_class).or_default().entry(c.affiliation).or_default() += 1;
        }
        let summary = GraphSummary {
            nodes: graph.node_count(),
            edges: graph.edge_count(),
            users: users.len(),
            two_core: core.len(),
            one_degree: users.len() - core.len(),
            two_core_fraction: if users.is_empty() {
                0.0
            } else {
                core.len() as f64 / users.len() as f64
            },
            seeds: seeds.len(),
            affiliations: tally,
        };
        ws.write_with(&artifact(Stage::Graph, d, Some("edges"), "csv"), |buf| write_edge_list(&graph, buf))?;
        ws.write_with(&artifact(Stage::Graph, d, Some("classes"), "csv"), |buf| {
            write_class_assignments(&classes, buf)
        })?;
        ws.write_json(&artifact(Stage::Graph, d, Some("summary"), "json"), &summary)?;
        ws.write_json(&artifact(Stage::Graph, d, Some("failures"), "json"), &failures)?;
    }
    Ok(())
}

/// The graph summary written for one dataset.
pub fn read_graph_summary(ws: &Workspace, d: &DatasetConfig) -> Result<GraphSummary> {
    ws.read_json(&artifact(Stage::Graph, d, Some("summary"), "json"), "graph")
}

// ---- score

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ScoreRow {
    user_id: String,
    toxicity: f64,
    compound: f64,
    pessimism_prob: f64,
    pessimism_label: bool,
}

fn stage_score(cfg: &RunConfig, ws: &Workspace, rt: &Runtime) -> Result<()> {
    for d in &cfg.datasets {
        let docs = authored_docs(&load_records(ws, d)?);
        let mut failures = BTreeMap::new();
        let mut by_metric = BTreeMap::new();
        for metric in [Metric::Toxicity, Metric::Sentiment, Metric::Pessimism] {
            let report = rt.score_docs(&docs, metric)?;
            for (u, msg) in report.failures {
                failures.insert(format!("{u}/{}", metric.as_str()), msg);
            }
            by_metric.insert(metric, report.scores);
        }
        let rows: Vec<ScoreRow> = docs
            .keys()
            .filter_map(|u| {
                let tox = *by_metric[&Metric::Toxicity].get(u)?;
                let compound = *by_metric[&Metric::Sentiment].get(u)?;
                let pes = *by_metric[&Metric::Pessimism].get(u)?;
                Some(ScoreRow {
                    user_id: u.clone(),
                    toxicity: tox,
                    compound,
                    pessimism_prob: pes,
                    pessimism_label: crate::scoring::pessimism_label(pes),
                })
            })
            .collect();
        ws.write_with(&artifact(Stage::Score, d, None, "csv"), |buf| write_csv(&rows, buf))?;
        ws.write_json(&artifact(Stage::Score, d, Some("failures"), "json"), &failures)?;
    }
    Ok(())
}

// ---- entropy

#[derive(Debug, Clone, PartialEq, Serialize)]
struct IntervalRow {
    affiliation: Affiliation,
    degree_class: &'static str,
    n: usize,
    interval: Option<MinimalInterval>,
    skipped: Option<String>,
}

fn stage_entropy(cfg: &RunConfig, ws: &Workspace) -> Result<()> {
    let tokenizer = Tokenizer::default();
    for d in &cfg.datasets {
        let docs = authored_docs(&load_records(ws, d)?);
        let samples: Vec<EntropySample> = docs
            .par_iter()
            .filter_map(|(_, doc)| shannon_entropy(doc, &tokenizer).ok())
            .collect();
        let classes = load_classes(ws, d)?;
        let class_of: BTreeMap<&str, &UserClassAssignment> =
            classes.iter().map(|c| (c.user_id.as_str(), c)).collect();

        let mut intervals = Vec::new();
        for aff in AFFILIATIONS {
            for (label, class) in [("all", None), ("two_core", Some(DegreeClass::TwoCore)), ("one_degree", Some(DegreeClass::OneDegree))] {
                let values: Vec<f64> = samples
                    .iter()
                    .filter(|s| {
                        class_of.get(s.user_id.as_str()).is_some_and(|c| {
                            c.affiliation == aff && class.is_none_or(|k| c.degree_class == k)
                        })
                    })
                    .map(|s| s.entropy_bits)
                    .collect();
                let (interval, skipped) = match find_minimum_interval(&values) {
                    Ok(i) => (Some(i), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                intervals.push(IntervalRow {
                    affiliation: aff,
                    degree_class: label,
                    n: values.len(),
                    interval,
                    skipped,
                });
            }
        }
        ws.write_with(&artifact(Stage::Entropy, d, None, "csv"), |buf| write_entropy_csv(&samples, buf))?;
        ws.write_json(&artifact(Stage::Entropy, d, Some("intervals"), "json"), &intervals)?;
    }
    Ok(())
}

/// Joined per-user view of the graph, score and entropy stages.
#[derive(Debug, Clone, PartialEq)]
pub struct UserRow {
    pub class: UserClassAssignment,
    pub record: ScoreRecord,
}

/// Users with a class, all three scores and an entropy value, in id order.
pub fn load_user_table(ws: &Workspace, d: &DatasetConfig) -> Result<Vec<UserRow>> {
    let classes = load_classes(ws, d)?;
    let scores: Vec<ScoreRow> = read_csv(&ws.read(&artifact(Stage::Score, d, None, "csv"), "score")?)?;
    let entropy: Vec<EntropySample> = read_csv(&ws.read(&artifact(Stage::Entropy, d, None, "csv"), "entropy")?)?;
    let scores: BTreeMap<&str, &ScoreRow> = scores.iter().map(|s| (s.user_id.as_str(), s)).collect();
    let entropy: BTreeMap<&str, f64> = entropy.iter().map(|e| (e.user_id.as_str(), e.entropy_bits)).collect();
    classes
        .into_iter()
        .filter_map(|c| {
            let s = scores.get(c.user_id.as_str())?;
            let h = *entropy.get(c.user_id.as_str())?;
            Some((c, s, h))
        })
        .map(|(c, s, h)| {
            let record = ScoreRecord::new(c.user_id.clone(), s.toxicity, s.compound, s.pessimism_prob, h)?;
            Ok(UserRow { class: c, record })
        })
        .collect()
}

// ---- stats

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatMetric {
    Toxicity,
    Compound,
    Pessimism,
    Entropy,
}

impl StatMetric {
    const ALL: [StatMetric; 4] = [
        StatMetric::Toxicity,
        StatMetric::Compound,
        StatMetric::Pessimism,
        StatMetric::Entropy,
    ];

    fn of(self, r: &ScoreRecord) -> f64 {
        match self {
            StatMetric::Toxicity => r.toxicity,
            StatMetric::Compound => r.compound,
            StatMetric::Pessimism => r.pessimism_prob,
            StatMetric::Entropy => r.entropy_bits,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatOutcome {
    Test(TestResult),
    Effect(EffectSize),
    Correlation(Correlation),
    Shares(ShareReport),
    Skipped(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatEntry {
    pub family: String,
    pub metric: Option<StatMetric>,
    pub groups: Vec<String>,
    pub outcome: StatOutcome,
}

fn outcome<T>(r: Result<T>, wrap: fn(T) -> StatOutcome) -> StatOutcome {
    match r {
        Ok(v) => wrap(v),
        Err(e) => StatOutcome::Skipped(e.to_string()),
    }
}

fn stage_stats(cfg: &RunConfig, ws: &Workspace) -> Result<()> {
    for d in &cfg.datasets {
        let users = load_user_table(ws, d)?;
        let pick = |aff: Affiliation, class: Option<DegreeClass>, m: StatMetric| -> Vec<f64> {
            users
                .iter()
                .filter(|u| u.class.affiliation == aff && class.is_none_or(|c| u.class.degree_class == c))
                .map(|u| m.of(&u.record))
                .collect()
        };
        let mut entries = Vec::new();
        let mut push = |family: &str, metric: Option<StatMetric>, groups: &[&str], o: StatOutcome| {
            entries.push(StatEntry {
                family: family.into(),
                metric,
                groups: groups.iter().map(|g| g.to_string()).collect(),
                outcome: o,
            })
        };

        // republican vs democratic, one comparison per metric
        let k_aff = StatMetric::ALL.len() as u32;
        let groups = ["republican", "democratic"];
        for m in StatMetric::ALL {
            let r = pick(Affiliation::Republican, None, m);
            let dm = pick(Affiliation::Democratic, None, m);
            push("affiliation", Some(m), &groups, outcome(mann_whitney_u(&r, &dm, k_aff), StatOutcome::Test));
            push(
                "affiliation",
                Some(m),
                &groups,
                outcome(ks_two_sample(&r, &dm).map(|t| t.adjusted(k_aff)), StatOutcome::Test),
            );
            push("affiliation", Some(m), &groups, outcome(cliffs_delta(&r, &dm), StatOutcome::Effect));
            push("affiliation", Some(m), &groups, outcome(fligner_killeen(&[r, dm]), StatOutcome::Test));
        }

        // 2-core vs 1-degree within each affiliation
        let k_deg = (AFFILIATIONS.len() * StatMetric::ALL.len()) as u32;
        for aff in AFFILIATIONS {
            let family = format!("degree_class.{aff}");
            let groups = ["two_core", "one_degree"];
            for m in StatMetric::ALL {
                let core = pick(aff, Some(DegreeClass::TwoCore), m);
                let one = pick(aff, Some(DegreeClass::OneDegree), m);
                push(&family, Some(m), &groups, outcome(mann_whitney_u(&core, &one, k_deg), StatOutcome::Test));
                push(&family, Some(m), &groups, outcome(cliffs_delta(&core, &one), StatOutcome::Effect));
            }
        }

        for aff in AFFILIATIONS {
            let family = format!("cohort.{aff}");
            let tox = pick(aff, None, StatMetric::Toxicity);
            let pes = pick(aff, None, StatMetric::Pessimism);
            let compound = pick(aff, None, StatMetric::Compound);
            push(
                &family,
                Some(StatMetric::Toxicity),
                &["toxicity", "pessimism"],
                outcome(pearson(&tox, &pes), StatOutcome::Correlation),
            );
            push(
                &family,
                Some(StatMetric::Compound),
                &[aff.as_str()],
                outcome(hartigan_dip(&compound, cfg.dip_replicates, cfg.seed), StatOutcome::Test),
            );
            push(
                &family,
                Some(StatMetric::Compound),
                &[aff.as_str()],
                outcome(distribution_share(&compound, &cfg.share_ranges), StatOutcome::Shares),
            );
        }
        ws.write_json(&artifact(Stage::Stats, d, None, "json"), &entries)?;
    }
    Ok(())
}

// ---- temporal

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EngagementRow {
    user_id: String,
    affiliation: Affiliation,
    replied_times: usize,
    max_toxicity: f64,
    max_pessimism: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledFit {
    pub label: String,
    pub fit: Option<RegressionFit>,
    pub skipped: Option<String>,
}

impl LabeledFit {
    fn new(label: String, r: Result<RegressionFit>) -> Self {
        match r {
            Ok(fit) => Self {
                label,
                fit: Some(fit),
                skipped: None,
            },
            Err(e) => Self {
                label,
                fit: None,
                skipped: Some(e.to_string()),
            },
        }
    }
}

fn stage_temporal(cfg: &RunConfig, ws: &Workspace, rt: &Runtime) -> Result<()> {
    let events = cfg.event_dates()?;
    for d in &cfg.datasets {
        let mut records = load_records(ws, d)?;
        resolve_reply_targets(&mut records);
        let classes = load_classes(ws, d)?;
        let mut failures = BTreeMap::new();
        let mut fits = Vec::new();

        let segments = segment_counts(&records, &d.time_window()?, cfg.segment_days, &classes)?;
        ws.write_with(&artifact(Stage::Temporal, d, Some("segments"), "csv"), |buf| {
            write_segments_csv(&segments, buf)
        })?;

        match daily_aggregate(&records, rt.scorers()) {
            Ok(daily) => {
                let windows: Vec<_> = events.iter().filter_map(|e| event_window(&daily, *e).ok()).collect();
                fits.push(LabeledFit::new(format!("{}.daily", d.cohort()), daily_fit(&daily, cfg.daily_fit)));
                ws.write_with(&artifact(Stage::Temporal, d, Some("daily"), "csv"), |buf| write_daily_csv(&daily, buf))?;
                ws.write_with(&artifact(Stage::Temporal, d, Some("events"), "csv"), |buf| {
                    write_events_csv(&windows, buf)
                })?;
            }
            Err(e @ (Error::Scoring { .. } | Error::OutOfBounds { .. })) => {
                failures.insert("daily".to_string(), e.to_string());
            }
            Err(e) => return Err(e),
        }

        let received = aggregate_user_text(&records, Side::Received);
        match reply_engagement_curve(&received, rt.scorers()) {
            Ok(points) => {
                let aff_of: BTreeMap<&str, Affiliation> =
                    classes.iter().map(|c| (c.user_id.as_str(), c.affiliation)).collect();
                let rows: Vec<EngagementRow> = points
                    .iter()
                    .map(|p| EngagementRow {
                        user_id: p.user_id.clone(),
                        affiliation: aff_of.get(p.user_id.as_str()).copied().unwrap_or(Affiliation::Unknown),
                        replied_times: p.replied_times,
                        max_toxicity: p.max_toxicity,
                        max_pessimism: p.max_pessimism,
                    })
                    .collect();
                for aff in AFFILIATIONS {
                    let pts: Vec<EngagementPoint> = points
                        .iter()
                        .filter(|p| aff_of.get(p.user_id.as_str()) == Some(&aff))
                        .cloned()
                        .collect();
                    for (metric, name) in [
                        (EngagementMetric::MaxToxicity, "max_toxicity"),
                        (EngagementMetric::MaxPessimism, "max_pessimism"),
                    ] {
                        fits.push(LabeledFit::new(
                            format!("{}.{aff}.{name}", d.cohort()),
                            engagement_fit(&pts, metric),
                        ));
                    }
                }
                ws.write_with(&artifact(Stage::Temporal, d, Some("engagement"), "csv"), |buf| write_csv(&rows, buf))?;
            }
            Err(e @ (Error::Scoring { .. } | Error::OutOfBounds { .. })) => {
                failures.insert("engagement".to_string(), e.to_string());
            }
            Err(e) => return Err(e),
        }
        ws.write_json(&artifact(Stage::Temporal, d, Some("fits"), "json"), &fits)?;
        ws.write_json(&artifact(Stage::Temporal, d, Some("failures"), "json"), &failures)?;
    }
    Ok(())
}

// ---- report

pub const BUBBLE_TABLE: &str = "report.bubbles.csv";
pub const REGRESSION_TABLE: &str = "report.regressions.csv";
pub const REPORT_WARNINGS: &str = "report.warnings.json";

fn stage_report(cfg: &RunConfig, ws: &Workspace) -> Result<()> {
    let mut warnings = Vec::new();
    let mut cohorts = Vec::new();
    let mut labeled_fits = Vec::new();
    for name in ws.artifact_names()? {
        if name.starts_with("report.") && name.ends_with(".svg") {
            ws.remove(&name)?;
        }
    }
    for d in &cfg.datasets {
        let users = load_user_table(ws, d)?;
        for aff in AFFILIATIONS {
            let records: Vec<ScoreRecord> = users
                .iter()
                .filter(|u| u.class.affiliation == aff)
                .map(|u| u.record.clone())
                .collect();
            cohorts.push((CohortKey::new(d.platform, d.topic.clone(), aff), records));
        }

        let tox: Vec<f64> = users.iter().map(|u| u.record.toxicity).collect();
        let comp: Vec<f64> = users.iter().map(|u| u.record.compound).collect();
        match emit_density_grid(&tox, &comp, cfg.density_bins) {
            Ok(grid) => ws.write_with(&artifact(Stage::Report, d, Some("density"), "csv"), |buf| {
                write_density_csv(&grid, buf)
            })?,
            Err(e) => warnings.push(format!("{}: density grid skipped: {e}", d.cohort())),
        }

        let mut violins = Vec::new();
        for aff in AFFILIATIONS {
            let key = CohortKey::new(d.platform, d.topic.clone(), aff);
            for class in CLASSES {
                for metric in [Metric::Toxicity, Metric::Sentiment, Metric::Pessimism] {
                    let values: Vec<f64> = users
                        .iter()
                        .filter(|u| u.class.affiliation == aff && u.class.degree_class == class)
                        .map(|u| match metric {
                            Metric::Toxicity => u.record.toxicity,
                            Metric::Sentiment => u.record.compound,
                            Metric::Pessimism => u.record.pessimism_prob,
                        })
                        .collect();
                    if let Ok(v) = violin_summary(&key, class, metric, &values) {
                        violins.push(v);
                    }
                }
            }
        }
        ws.write_with(&artifact(Stage::Report, d, Some("violins"), "csv"), |buf| write_csv(&violins, buf))?;

        let fits: Vec<LabeledFit> = ws.read_json(&artifact(Stage::Temporal, d, Some("fits"), "json"), "temporal")?;
        for f in &fits {
            match (&f.fit, &f.skipped) {
                (Some(fit), _) => labeled_fits.push((f.label.clone(), *fit)),
                (None, Some(why)) => warnings.push(format!("{}: fit skipped: {why}", f.label)),
                _ => {}
            }
        }

        if cfg.svg {
            let name = artifact(Stage::Temporal, d, Some("engagement"), "csv");
            if ws.exists(&name) {
                let rows: Vec<EngagementRow> = read_csv(&ws.read(&name, "temporal")?)?;
                let mut series_data = Vec::new();
                for aff in AFFILIATIONS {
                    let label = format!("{}.{aff}.max_toxicity", d.cohort());
                    let Some(fit) = fits.iter().find(|f| f.label == label).and_then(|f| f.fit) else {
                        continue;
                    };
                    let pts: Vec<&EngagementRow> = rows.iter().filter(|r| r.affiliation == aff).collect();
                    let x: Vec<f64> = pts.iter().map(|r| (r.replied_times as f64).log10()).collect();
                    let y: Vec<f64> = pts.iter().map(|r| r.max_toxicity).collect();
                    series_data.push((aff.as_str(), x, y, fit));
                }
                if !series_data.is_empty() {
                    let series: Vec<RegressionSeries<'_>> = series_data
                        .iter()
                        .map(|(label, x, y, fit)| RegressionSeries { label, x, y, fit })
                        .collect();
                    let svg = regression_svg(&series, "log10(replied times)", "max toxicity");
                    ws.write_atomic(&artifact(Stage::Report, d, Some("engagement"), "svg"), svg.as_bytes())?;
                }
            }
        }
    }

    let table = emit_bubble_table(&cohorts, cfg.q)?;
    warnings.extend(table.warnings.iter().cloned());
    ws.write_with(BUBBLE_TABLE, |buf| write_csv(&table.rows, buf))?;
    if labeled_fits.is_empty() {
        warnings.push("no regression fits available".into());
        ws.remove(REGRESSION_TABLE)?;
    } else {
        let rows = emit_regression_report(&labeled_fits)?;
        ws.write_with(REGRESSION_TABLE, |buf| write_csv(&rows, buf))?;
    }
    ws.write_json(REPORT_WARNINGS, &warnings)?;
    Ok(())
}

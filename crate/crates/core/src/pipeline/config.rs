use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GraphMode;
use crate::ingest::{InputSource, KeywordFilter, ParseOptions, Platform, TimeWindow};
use crate::scoring::ScorerEndpoint;
use crate::stats::{distribution_share, DEFAULT_DIP_REPLICATES};
use crate::synth::CorpusFiles;
use crate::temporal::{parse_event_date, DailyFitOrientation, DEFAULT_EVENTS};

/// JSON Schema for [`RunConfig`], as published with the CLI.
pub const CONFIG_SCHEMA: &str = include_str!("../../schema/run_config.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub start: String,
    pub end: String,
}

/// One (platform, topic) cohort family and its raw inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub platform: Platform,
    pub topic: String,
    pub inputs: Vec<InputSource>,
    pub window: WindowConfig,
    /// CSV of `user_id,affiliation` hub labels for the 2-core partition.
    #[serde(default)]
    pub seeds: Option<PathBuf>,
    #[serde(default)]
    pub quoted_as_retweet: bool,
}

impl DatasetConfig {
    /// `<platform>.<topic>`, the cohort part of every artifact name.
    pub fn cohort(&self) -> String {
        format!("{}.{}", self.platform, self.topic)
    }

    pub fn time_window(&self) -> Result<TimeWindow> {
        TimeWindow::from_iso(&self.window.start, &self.window.end)
    }

    pub fn parse_options(&self) -> ParseOptions {
        ParseOptions {
            topic: self.topic.clone(),
            quoted_as_retweet: self.quoted_as_retweet,
        }
    }

    /// Retweets on Twitter, replies and comments on Reddit.
    pub fn graph_mode(&self) -> GraphMode {
        match self.platform {
            Platform::Twitter => GraphMode::Retweet,
            Platform::Reddit => GraphMode::Reply,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScorerConfig {
    #[serde(default)]
    pub toxicity: Option<ScorerEndpoint>,
    #[serde(default)]
    pub sentiment: Option<ScorerEndpoint>,
    #[serde(default)]
    pub pessimism: Option<ScorerEndpoint>,
    #[serde(default)]
    pub affiliation: Option<ScorerEndpoint>,
    /// Use the built-in lexicon scorers wherever no endpoint is given.
    #[serde(default = "yes")]
    pub stub_fallback: bool,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        Self {
            toxicity: None,
            sentiment: None,
            pessimism: None,
            affiliation: None,
            stub_fallback: true,
        }
    }
}

fn yes() -> bool {
    true
}
fn default_q() -> f64 {
    crate::entropy::DEFAULT_BUBBLE_SCALE
}
fn default_segment_days() -> u32 {
    7
}
fn default_events() -> Vec<String> {
    DEFAULT_EVENTS.iter().map(|s| s.to_string()).collect()
}
fn default_dip() -> usize {
    DEFAULT_DIP_REPLICATES
}
fn default_bins() -> usize {
    20
}
fn default_share_ranges() -> Vec<(f64, f64)> {
    vec![(-1.0, -0.05), (0.05, 1.0)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub datasets: Vec<DatasetConfig>,
    /// Debunking phrases; the built-in list when absent.
    #[serde(default)]
    pub keywords: Option<Vec<String>>,
    #[serde(default)]
    pub scorers: ScorerConfig,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default = "default_segment_days")]
    pub segment_days: u32,
    #[serde(default = "default_events")]
    pub events: Vec<String>,
    #[serde(default)]
    pub workspace: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub svg: bool,
    #[serde(default = "default_dip")]
    pub dip_replicates: usize,
    #[serde(default = "default_bins")]
    pub density_bins: usize,
    /// Closed compound-score ranges whose shares are reported per cohort.
    #[serde(default = "default_share_ranges")]
    pub share_ranges: Vec<(f64, f64)>,
    #[serde(default)]
    pub daily_fit: DailyFitOrientation,
}

impl RunConfig {
    pub fn new(datasets: Vec<DatasetConfig>) -> Self {
        Self {
            datasets,
            keywords: None,
            scorers: ScorerConfig::default(),
            q: default_q(),
            segment_days: default_segment_days(),
            events: default_events(),
            workspace: None,
            seed: 0,
            svg: false,
            dip_replicates: default_dip(),
            density_bins: default_bins(),
            share_ranges: default_share_ranges(),
            daily_fit: DailyFitOrientation::default(),
        }
    }

    /// Parses a config; relative paths are taken relative to `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::config(format!("invalid config: {e}")))?;
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for d in &mut cfg.datasets {
            d.inputs.iter_mut().for_each(|i| rebase(&mut i.path));
            if let Some(s) = d.seeds.as_mut() {
                rebase(s);
            }
        }
        if let Some(w) = cfg.workspace.as_mut() {
            rebase(w);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, base)
    }

    pub fn keyword_filter(&self) -> Result<KeywordFilter> {
        match &self.keywords {
            Some(k) => KeywordFilter::new(k),
            None => Ok(KeywordFilter::debunking()),
        }
    }

    pub fn event_dates(&self) -> Result<Vec<NaiveDate>> {
        self.events.iter().map(|e| parse_event_date(e)).collect()
    }

    /// Checks everything that can be checked without doing any work.
    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q.is_finite()) {
            return Err(Error::config(format!("q must be positive, got {}", self.q)));
        }
        if self.datasets.is_empty() {
            return Err(Error::config("config lists no datasets"));
        }
        if self.segment_days == 0 {
            return Err(Error::config("segment_days must be positive"));
        }
        if self.dip_replicates < 1000 {
            return Err(Error::config("dip_replicates must be at least 1000"));
        }
        if self.density_bins < 2 {
            return Err(Error::config("density_bins must be at least 2"));
        }
        if self.share_ranges.is_empty() {
            return Err(Error::config("share_ranges is empty"));
        }
        distribution_share(&[0.0], &self.share_ranges)
            .map_err(|e| Error::config(format!("bad share_ranges: {e}")))?;
        self.keyword_filter()?;
        self.event_dates()?;

        let mut seen = BTreeSet::new();
        for d in &self.datasets {
            if !seen.insert((d.platform, d.topic.clone())) {
                return Err(Error::config(format!("dataset {} listed twice", d.cohort())));
            }
            if d.topic.is_empty() || d.topic.contains(['/', '\\', '.']) {
                return Err(Error::config(format!("topic {:?} is not a valid name", d.topic)));
            }
            d.time_window()?;
            if d.inputs.is_empty() {
                return Err(Error::config(format!("dataset {} has no inputs", d.cohort())));
            }
            for i in &d.inputs {
                if i.format.platform() != d.platform {
                    return Err(Error::config(format!(
                        "input {} is not a {} dump",
                        i.path.display(),
                        d.platform
                    )));
                }
                if !i.path.is_file() {
                    return Err(Error::config(format!("input {} does not exist", i.path.display())));
                }
            }
            if let Some(s) = &d.seeds {
                if !s.is_file() {
                    return Err(Error::config(format!("seed list {} does not exist", s.display())));
                }
            }
        }

        let s = &self.scorers;
        for e in [&s.toxicity, &s.sentiment, &s.pessimism, &s.affiliation].into_iter().flatten() {
            e.validate()?;
        }
        if !s.stub_fallback
            && [&s.toxicity, &s.sentiment, &s.pessimism, &s.affiliation]
                .iter()
                .any(|e| e.is_none())
        {
            return Err(Error::config(
                "stub_fallback is off but not every scorer has an endpoint",
            ));
        }
        Ok(())
    }

    /// Config for a corpus written by [`crate::synth::write_corpus`], with
    /// every window spanning the cohort's `days` from its start date.
    pub fn for_corpus(files: &CorpusFiles) -> Result<Self> {
        let datasets = files
            .datasets
            .iter()
            .map(|d| {
                let start = NaiveDate::parse_from_str(&d.start, "%Y-%m-%d")
                    .map_err(|e| Error::config(format!("bad start date {}: {e}", d.start)))?;
                let end = start + Days::new(u64::from(d.days));
                Ok(DatasetConfig {
                    platform: d.platform,
                    topic: d.topic.clone(),
                    inputs: vec![InputSource {
                        path: d.input.clone(),
                        format: d.format,
                    }],
                    window: WindowConfig {
                        start: d.start.clone(),
                        end: end.format("%Y-%m-%d").to_string(),
                    },
                    seeds: Some(d.seeds.clone()),
                    quoted_as_retweet: false,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self::new(datasets))
    }
}

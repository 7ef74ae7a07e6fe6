//! Batch analytics for polarization in debunking discourse on social media.
//!
//! The crate covers the full measurement path: streaming ingestion of
//! platform archives, retweet/reply graphs and their 2-core, per-user
//! toxicity, sentiment and pessimism scores, Shannon entropy and minimal
//! entropy intervals, a nonparametric statistics battery, temporal
//! aggregation, synthetic corpora with planted ground truth, and the
//! report/pipeline layer behind the `polarlens` CLI.

pub mod entropy;
pub mod error;
pub mod graph;
pub mod ingest;
pub mod pipeline;
pub mod report;
pub mod scoring;
pub mod stats;
pub mod synth;
pub mod temporal;
pub mod text;

pub use entropy::{EntropySample, MinimalInterval};
pub use error::{Error, Result};
pub use graph::{Affiliation, DegreeClass, DirectedGraph, UserClassAssignment};
pub use ingest::{InteractionRecord, KeywordFilter, Platform, RecordKind, TimeWindow};
pub use scoring::{ScoreRecord, UserDocument};
pub use stats::{RegressionFit, TestResult};

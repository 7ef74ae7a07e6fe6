//! Daily aggregation, fixed-length segmentation and event-centred windows.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use chrono::{DateTime, Duration, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DegreeClass, UserClassAssignment};
use crate::ingest::{InteractionRecord, TimeWindow};
use crate::scoring::{
    aggregate_user_text, score_pessimism, score_sentiment, score_toxicity, Scorers, Side,
    UserDocument,
};
use crate::stats::{iqr_filter, median, ols_fit, RegressionFit};

const DAY: i64 = 86_400;

pub const DEFAULT_EVENTS: [&str; 3] = ["2016-11-08", "2020-11-03", "2021-01-06"];

/// Half-width in days of an event window.
pub const EVENT_HALF_WIDTH: i64 = 7;

pub fn utc_day(ts: i64) -> NaiveDate {
    DateTime::from_timestamp(ts.div_euclid(DAY) * DAY, 0)
        .expect("timestamp in chrono range")
        .date_naive()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyPoint {
    pub date: NaiveDate,
    pub mean_toxicity: f64,
    pub mean_pessimism: f64,
    pub mean_compound: f64,
    /// Users active that day, before outlier removal.
    pub user_count: usize,
}

#[derive(Debug, Clone, Copy)]
struct UserDay {
    toxicity: f64,
    pessimism: f64,
    compound: f64,
}

/// Mean of the Tukey-filtered values; fewer than four values are used as is.
fn filtered_mean(values: &[f64]) -> Result<f64> {
    let kept = if values.len() >= 4 {
        iqr_filter(values)?
    } else {
        values.to_vec()
    };
    Ok(kept.iter().sum::<f64>() / kept.len() as f64)
}

fn aggregate_day(date: NaiveDate, docs: &BTreeMap<String, UserDocument>, scorers: &Scorers) -> Result<Option<DailyPoint>> {
    let mut users = Vec::with_capacity(docs.len());
    for doc in docs.values().filter(|d| !d.is_empty()) {
        users.push(UserDay {
            toxicity: score_toxicity(doc, scorers.toxicity.as_ref())?,
            pessimism: score_pessimism(doc, scorers.pessimism.as_ref())?.0,
            compound: score_sentiment(doc, scorers.sentiment.as_ref())?,
        });
    }
    if users.is_empty() {
        return Ok(None);
    }
    let col = |f: fn(&UserDay) -> f64| users.iter().map(f).collect::<Vec<_>>();
    Ok(Some(DailyPoint {
        date,
        mean_toxicity: filtered_mean(&col(|u| u.toxicity))?,
        mean_pessimism: filtered_mean(&col(|u| u.pessimism))?,
        mean_compound: filtered_mean(&col(|u| u.compound))?,
        user_count: users.len(),
    }))
}

/// Groups records by UTC day and author, scores every user-day, drops
/// Tukey outliers per metric and averages the rest. Days without eligible
/// users are left out of the series.
pub fn daily_aggregate(records: &[InteractionRecord], scorers: &Scorers) -> Result<Vec<DailyPoint>> {
    let mut by_day: BTreeMap<NaiveDate, Vec<InteractionRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.eligible) {
        by_day.entry(utc_day(r.created_at)).or_default().push(r.clone());
    }
    let days: Vec<(NaiveDate, Vec<InteractionRecord>)> = by_day.into_iter().collect();
    let points: Vec<Option<DailyPoint>> = days
        .par_iter()
        .map(|(date, recs)| aggregate_day(*date, &aggregate_user_text(recs, Side::Authored), scorers))
        .collect::<Result<_>>()?;
    Ok(points.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentCount {
    pub index: usize,
    pub start: NaiveDate,
    /// Exclusive.
    pub end: NaiveDate,
    pub two_core: usize,
    pub one_degree: usize,
}

/// Distinct active users per degree class in consecutive `segment_days`
/// segments anchored at the window start. The last segment may be short.
/// Users without a class assignment are not counted.
pub fn segment_counts(
    records: &[InteractionRecord],
    window: &TimeWindow,
    segment_days: u32,
    classes: &[UserClassAssignment],
) -> Result<Vec<SegmentCount>> {
    if segment_days == 0 {
        return Err(Error::config("segment_days must be positive"));
    }
    if window.start() == i64::MIN || window.end() == i64::MAX {
        return Err(Error::config("segmentation needs a bounded time window"));
    }
    let seg = segment_days as i64 * DAY;
    let n_segments = ((window.end() - window.start() + seg - 1) / seg) as usize;
    let class_of: BTreeMap<&str, DegreeClass> = classes
        .iter()
        .map(|c| (c.user_id.as_str(), c.degree_class))
        .collect();
    let mut active: Vec<[BTreeSet<&str>; 2]> = vec![Default::default(); n_segments];
    for r in records.iter().filter(|r| r.eligible && window.contains(r.created_at)) {
        let Some(class) = class_of.get(r.author_id.as_str()) else {
            continue;
        };
        let i = ((r.created_at - window.start()) / seg) as usize;
        let slot = match class {
            DegreeClass::TwoCore => 0,
            DegreeClass::OneDegree => 1,
        };
        active[i][slot].insert(r.author_id.as_str());
    }
    Ok(active
        .iter()
        .enumerate()
        .map(|(i, [core, one])| {
            let start = window.start() + i as i64 * seg;
            SegmentCount {
                index: i,
                start: utc_day(start),
                end: utc_day((start + seg).min(window.end()) - 1) + Duration::days(1),
                two_core: core.len(),
                one_degree: one.len(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventWindowPoint {
    pub event_date: NaiveDate,
    pub window_start: NaiveDate,
    pub window_end: NaiveDate,
    pub covered_days: usize,
    pub median_toxicity: f64,
    pub median_pessimism: f64,
}

/// Medians of the daily means over `event_date ± 7` days. Missing days
/// are skipped, not imputed.
pub fn event_window(daily: &[DailyPoint], event_date: NaiveDate) -> Result<EventWindowPoint> {
    let start = event_date - Duration::days(EVENT_HALF_WIDTH);
    let end = event_date + Duration::days(EVENT_HALF_WIDTH);
    let inside: Vec<&DailyPoint> = daily
        .iter()
        .filter(|p| p.date >= start && p.date <= end)
        .collect();
    if inside.is_empty() {
        return Err(Error::NotFound(format!(
            "no daily data between {start} and {end}"
        )));
    }
    let tox: Vec<f64> = inside.iter().map(|p| p.mean_toxicity).collect();
    let pes: Vec<f64> = inside.iter().map(|p| p.mean_pessimism).collect();
    Ok(EventWindowPoint {
        event_date,
        window_start: start,
        window_end: end,
        covered_days: inside.len(),
        median_toxicity: median(&tox)?,
        median_pessimism: median(&pes)?,
    })
}

pub fn parse_event_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map_err(|e| Error::config(format!("bad event date {s:?}: {e}")))
}

/// Which daily mean is regressed on which for the daily scatter fit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DailyFitOrientation {
    /// toxicity = k · pessimism + b
    #[default]
    ToxicityOnPessimism,
    /// pessimism = k · toxicity + b
    PessimismOnToxicity,
}

pub fn daily_fit(daily: &[DailyPoint], orientation: DailyFitOrientation) -> Result<RegressionFit> {
    let tox: Vec<f64> = daily.iter().map(|p| p.mean_toxicity).collect();
    let pes: Vec<f64> = daily.iter().map(|p| p.mean_pessimism).collect();
    match orientation {
        DailyFitOrientation::ToxicityOnPessimism => ols_fit(&pes, &tox),
        DailyFitOrientation::PessimismOnToxicity => ols_fit(&tox, &pes),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementPoint {
    pub user_id: String,
    /// Replies received, duplicates included.
    pub replied_times: usize,
    pub max_toxicity: f64,
    pub max_pessimism: f64,
}

impl EngagementPoint {
    /// Regressor used for engagement fits.
    pub fn log_replies(&self) -> f64 {
        (self.replied_times as f64).log10()
    }
}

/// Scores every received reply on its own and keeps the maximum per
/// replied-to user. Users without replies are skipped.
pub fn reply_engagement_curve(
    received: &BTreeMap<String, UserDocument>,
    scorers: &Scorers,
) -> Result<Vec<EngagementPoint>> {
    received
        .par_iter()
        .filter(|(_, d)| d.raw_count > 0 && !d.is_empty())
        .map(|(user, doc)| {
            let mut max_t = f64::NEG_INFINITY;
            let mut max_p = f64::NEG_INFINITY;
            for text in doc.texts.iter().filter(|t| !t.trim().is_empty()) {
                let single = UserDocument::new(user.clone(), doc.platform, Side::Received, vec![text.clone()]);
                max_t = max_t.max(score_toxicity(&single, scorers.toxicity.as_ref())?);
                max_p = max_p.max(score_pessimism(&single, scorers.pessimism.as_ref())?.0);
            }
            Ok(EngagementPoint {
                user_id: user.clone(),
                replied_times: doc.raw_count,
                max_toxicity: max_t,
                max_pessimism: max_p,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngagementMetric {
    MaxToxicity,
    MaxPessimism,
}

/// Regression of the chosen maximum on `log10(replied_times)`.
pub fn engagement_fit(points: &[EngagementPoint], metric: EngagementMetric) -> Result<RegressionFit> {
    let x: Vec<f64> = points.iter().map(EngagementPoint::log_replies).collect();
    let y: Vec<f64> = points
        .iter()
        .map(|p| match metric {
            EngagementMetric::MaxToxicity => p.max_toxicity,
            EngagementMetric::MaxPessimism => p.max_pessimism,
        })
        .collect();
    ols_fit(&x, &y)
}

fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_daily_csv<W: Write>(daily: &[DailyPoint], out: W) -> Result<()> {
    write_csv(daily, out)
}

pub fn write_segments_csv<W: Write>(segments: &[SegmentCount], out: W) -> Result<()> {
    write_csv(segments, out)
}

pub fn write_events_csv<W: Write>(events: &[EventWindowPoint], out: W) -> Result<()> {
    write_csv(events, out)
}

pub fn write_engagement_csv<W: Write>(points: &[EngagementPoint], out: W) -> Result<()> {
    write_csv(points, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Affiliation;
    use crate::ingest::{Platform, RecordKind};
    use crate::scoring::{ScorerError, TextScorer};
    use std::sync::Arc;

    /// Scores a document by the number parsed from its first text.
    struct Literal;

    impl TextScorer for Literal {
        fn scorer_id(&self) -> &str {
            "literal"
        }
        fn scorer_version(&self) -> &str {
            "1"
        }
        fn score_texts(&self, texts: &[String]) -> std::result::Result<f64, ScorerError> {
            texts[0].parse().map_err(|_| ScorerError("not a number".into()))
        }
    }

    fn literal_scorers() -> Scorers {
        Scorers {
            toxicity: Arc::new(Literal),
            sentiment: Arc::new(Literal),
            pessimism: Arc::new(Literal),
        }
    }

    fn rec(id: usize, author: &str, t: i64, text: &str) -> InteractionRecord {
        InteractionRecord {
            platform: Platform::Twitter,
            topic: "t".into(),
            message_id: format!("m{id}"),
            author_id: author.into(),
            created_at: t,
            text: text.into(),
            kind: RecordKind::Post,
            target_author_id: None,
            parent_id: None,
            eligible: true,
        }
    }

    const T0: i64 = 1_478_563_200; // 2016-11-08T00:00:00Z

    #[test]
    fn singleton_day() {
        let d = daily_aggregate(&[rec(0, "u", T0 + 10, "0.25")], &literal_scorers()).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].date, NaiveDate::from_ymd_opt(2016, 11, 8).unwrap());
        assert_eq!(d[0].mean_toxicity, 0.25);
        assert_eq!(d[0].user_count, 1);
    }

    #[test]
    fn outlier_user_dropped() {
        // 19 users at 0.10..0.28 step 0.01 and one at 0.95
        let mut recs: Vec<InteractionRecord> = (0..19)
            .map(|i| rec(i, &format!("u{i:02}"), T0 + 100, &format!("{:.2}", 0.10 + 0.01 * i as f64)))
            .collect();
        recs.push(rec(99, "z", T0 + 100, "0.95"));
        let d = daily_aggregate(&recs, &literal_scorers()).unwrap();
        // Q1 = 0.1475, Q3 = 0.2425 → upper fence 0.385
        assert!((d[0].mean_toxicity - 0.19).abs() < 1e-12);
        assert_eq!(d[0].user_count, 20);
    }

    #[test]
    fn midnight_split() {
        let recs = [rec(0, "a", T0 + DAY - 1, "0.1"), rec(1, "a", T0 + DAY, "0.3")];
        let d = daily_aggregate(&recs, &literal_scorers()).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!((d[0].mean_toxicity, d[1].mean_toxicity), (0.1, 0.3));
    }

    #[test]
    fn disjoint_days_merge() {
        let s = literal_scorers();
        let a = [rec(0, "a", T0, "0.1"), rec(1, "b", T0 + 5, "0.2")];
        let b = [rec(2, "c", T0 + 3 * DAY, "0.4")];
        let all: Vec<_> = a.iter().chain(&b).cloned().collect();
        let mut merged = daily_aggregate(&a, &s).unwrap();
        merged.extend(daily_aggregate(&b, &s).unwrap());
        assert_eq!(daily_aggregate(&all, &s).unwrap(), merged);
    }

    fn classes() -> Vec<UserClassAssignment> {
        [("a", DegreeClass::TwoCore), ("b", DegreeClass::OneDegree), ("c", DegreeClass::OneDegree)]
            .into_iter()
            .map(|(u, c)| UserClassAssignment {
                user_id: u.into(),
                degree_class: c,
                affiliation: Affiliation::Unknown,
            })
            .collect()
    }

    #[test]
    fn thirty_five_days_in_five_day_segments() {
        let w = TimeWindow::new(T0, T0 + 35 * DAY).unwrap();
        let recs = [
            rec(0, "a", T0 + 10, "x"),
            rec(1, "a", T0 + 20, "x"),
            rec(2, "b", T0 + DAY, "x"),
            rec(3, "c", T0 + 12 * DAY, "x"),
            rec(4, "a", T0 + 34 * DAY, "x"),
        ];
        let segs = segment_counts(&recs, &w, 5, &classes()).unwrap();
        assert_eq!(segs.len(), 7);
        assert_eq!((segs[0].two_core, segs[0].one_degree), (1, 1));
        assert_eq!((segs[1].two_core, segs[1].one_degree), (0, 0));
        assert_eq!((segs[2].two_core, segs[2].one_degree), (0, 1));
        assert_eq!(segs[6].two_core, 1);
        assert_eq!(segs[6].end, NaiveDate::from_ymd_opt(2016, 12, 13).unwrap());
        assert_eq!(segment_counts(&recs, &w, 10, &classes()).unwrap().len(), 4);
        assert!(segment_counts(&recs, &w, 0, &classes()).is_err());
    }

    fn day(offset: i64, tox: f64, pes: f64) -> DailyPoint {
        DailyPoint {
            date: NaiveDate::from_ymd_opt(2016, 11, 8).unwrap() + Duration::days(offset),
            mean_toxicity: tox,
            mean_pessimism: pes,
            mean_compound: 0.0,
            user_count: 1,
        }
    }

    #[test]
    fn event_window_medians() {
        let event = NaiveDate::from_ymd_opt(2016, 11, 8).unwrap();
        let ramp: Vec<DailyPoint> = (-7..=7).map(|o| day(o, 0.3 + 0.01 * o as f64, 0.05)).collect();
        let w = event_window(&ramp, event).unwrap();
        assert!((w.median_toxicity - 0.3).abs() < 1e-12);
        assert_eq!(w.covered_days, 15);
        let mut reversed = ramp.clone();
        reversed.reverse();
        assert_eq!(event_window(&reversed, event).unwrap(), w);

        let one = [day(3, 0.33, 0.056), day(20, 0.9, 0.9)];
        let w = event_window(&one, event).unwrap();
        assert_eq!((w.median_toxicity, w.median_pessimism), (0.33, 0.056));
        assert!(matches!(event_window(&[day(8, 0.1, 0.1)], event), Err(Error::NotFound(_))));
    }

    #[test]
    fn engagement_max_and_log() {
        let mut received = BTreeMap::new();
        received.insert(
            "u".to_string(),
            UserDocument::new("u", Platform::Reddit, Side::Received, vec!["0.1".into(), "0.7".into(), "0.3".into()]),
        );
        received.insert(
            "v".to_string(),
            UserDocument::new("v", Platform::Reddit, Side::Received, vec!["0.2".into()]),
        );
        let pts = reply_engagement_curve(&received, &literal_scorers()).unwrap();
        let u = pts.iter().find(|p| p.user_id == "u").unwrap();
        assert_eq!((u.replied_times, u.max_toxicity), (3, 0.7));
        let v = pts.iter().find(|p| p.user_id == "v").unwrap();
        assert_eq!(v.log_replies(), 0.0);
    }

    #[test]
    fn csv_has_iso_dates() {
        let mut buf = Vec::new();
        write_daily_csv(&[day(0, 0.1, 0.2)], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("date,mean_toxicity"));
        assert!(s.contains("2016-11-08,0.1,0.2"));
    }
}

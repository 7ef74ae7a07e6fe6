//! Figure-ready artifacts: bubble tables, density grids, regression reports
//! (with an optional SVG scatter) and violin summaries.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::entropy::{bubble_size, BubbleConfig};
use crate::error::{Error, Result};
use crate::graph::{Affiliation, DegreeClass};
use crate::ingest::Platform;
use crate::scoring::{Metric, ScoreRecord};
use crate::stats::{median, quantile, RegressionFit};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CohortKey {
    pub platform: Platform,
    pub topic: String,
    pub affiliation: Affiliation,
}

impl CohortKey {
    pub fn new(platform: Platform, topic: impl Into<String>, affiliation: Affiliation) -> Self {
        Self {
            platform,
            topic: topic.into(),
            affiliation,
        }
    }
}

impl std::fmt::Display for CohortKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}.{}.{}", self.platform, self.topic, self.affiliation)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleRow {
    pub platform: Platform,
    pub topic: String,
    pub affiliation: Affiliation,
    pub median_toxicity: f64,
    pub median_pessimism: f64,
    pub median_entropy: f64,
    pub bubble_size: f64,
    pub n_users: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BubbleTable {
    pub rows: Vec<BubbleRow>,
    pub warnings: Vec<String>,
}

/// One row per non-empty cohort. The smallest median entropy across all
/// cohorts is the denominator, so that cohort gets a bubble of exactly `q`.
pub fn emit_bubble_table(cohorts: &[(CohortKey, Vec<ScoreRecord>)], q: f64) -> Result<BubbleTable> {
    let mut warnings = Vec::new();
    let mut medians = Vec::new();
    for (key, records) in cohorts {
        if records.is_empty() {
            warnings.push(format!("cohort {key} has no scored users; bubble row omitted"));
            continue;
        }
        let col = |f: fn(&ScoreRecord) -> f64| records.iter().map(f).collect::<Vec<_>>();
        medians.push((
            key,
            median(&col(|r| r.toxicity))?,
            median(&col(|r| r.pessimism_prob))?,
            median(&col(|r| r.entropy_bits))?,
            records.len(),
        ));
    }
    let Some(h_min) = medians.iter().map(|m| m.3).min_by(f64::total_cmp) else {
        BubbleConfig::new(q, 0.0)?;
        return Ok(BubbleTable {
            rows: Vec::new(),
            warnings,
        });
    };
    let config = BubbleConfig::new(q, h_min)?;
    let rows = medians
        .into_iter()
        .map(|(key, tox, pes, h, n)| BubbleRow {
            platform: key.platform,
            topic: key.topic.clone(),
            affiliation: key.affiliation,
            median_toxicity: tox,
            median_pessimism: pes,
            median_entropy: h,
            bubble_size: bubble_size(h, &config),
            n_users: n,
        })
        .collect();
    Ok(BubbleTable { rows, warnings })
}

/// Normalized 2-D histogram of toxicity (x, over [0, 1]) against compound
/// sentiment (y, over [−1, 1]). `cells[i][j]` is the mass of toxicity bin
/// `i` and compound bin `j`; bins are half-open except the last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub x_edges: Vec<f64>,
    pub y_edges: Vec<f64>,
    pub n: usize,
    pub cells: Vec<Vec<f64>>,
}

impl DensityGrid {
    pub fn total_mass(&self) -> f64 {
        self.cells.iter().flatten().sum()
    }

    /// Mass summed over toxicity bins, one entry per compound bin.
    pub fn compound_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.y_edges.len() - 1];
        for row in &self.cells {
            for (o, c) in out.iter_mut().zip(row) {
                *o += c;
            }
        }
        out
    }
}

fn edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    (0..=bins)
        .map(|i| lo + (hi - lo) * i as f64 / bins as f64)
        .collect()
}

fn bin_of(v: f64, lo: f64, hi: f64, bins: usize) -> usize {
    let i = ((v - lo) / (hi - lo) * bins as f64).floor();
    (i.max(0.0) as usize).min(bins - 1)
}

pub fn emit_density_grid(toxicity: &[f64], compound: &[f64], bins: usize) -> Result<DensityGrid> {
    if toxicity.len() != compound.len() {
        return Err(Error::contract("density grid needs paired values of equal length"));
    }
    if bins < 2 {
        return Err(Error::contract("density grid needs at least 2 bins per axis"));
    }
    if toxicity.is_empty() {
        return Err(Error::contract("density grid needs at least one point"));
    }
    for (&t, &c) in toxicity.iter().zip(compound) {
        if !(0.0..=1.0).contains(&t) || !(-1.0..=1.0).contains(&c) {
            return Err(Error::contract(format!(
                "point ({t}, {c}) lies outside [0,1]x[-1,1]"
            )));
        }
    }
    let mut counts = vec![vec![0usize; bins]; bins];
    for (&t, &c) in toxicity.iter().zip(compound) {
        counts[bin_of(t, 0.0, 1.0, bins)][bin_of(c, -1.0, 1.0, bins)] += 1;
    }
    let n = toxicity.len() as f64;
    Ok(DensityGrid {
        x_edges: edges(0.0, 1.0, bins),
        y_edges: edges(-1.0, 1.0, bins),
        n: toxicity.len(),
        cells: counts
            .into_iter()
            .map(|row| row.into_iter().map(|c| c as f64 / n).collect())
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionRow {
    pub label: String,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_ci_low: f64,
    pub slope_ci_high: f64,
    pub residual_se: f64,
    pub x_mean: f64,
    pub sxx: f64,
    pub t_crit: f64,
    pub n: usize,
}

pub fn emit_regression_report(fits: &[(String, RegressionFit)]) -> Result<Vec<RegressionRow>> {
    if fits.is_empty() {
        return Err(Error::contract("regression report needs at least one fit"));
    }
    Ok(fits
        .iter()
        .map(|(label, f)| {
            let (lo, hi) = f.slope_ci();
            RegressionRow {
                label: label.clone(),
                slope: f.slope,
                intercept: f.intercept,
                r_squared: f.r_squared,
                slope_ci_low: lo,
                slope_ci_high: hi,
                residual_se: f.residual_se,
                x_mean: f.x_mean,
                sxx: f.sxx,
                t_crit: f.t_crit,
                n: f.n,
            }
        })
        .collect())
}

/// Points and fit of one cohort for the scatter plot.
#[derive(Debug, Clone)]
pub struct RegressionSeries<'a> {
    pub label: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub fit: &'a RegressionFit,
}

const PALETTE: [&str; 6] = ["#c0392b", "#2e6fba", "#27ae60", "#8e44ad", "#d68910", "#17a589"];

/// Scatter with fit lines and shaded 95% bands, one color per series.
pub fn regression_svg(series: &[RegressionSeries<'_>], x_label: &str, y_label: &str) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const M: f64 = 50.0;
    let xs = series.iter().flat_map(|s| s.x.iter().copied());
    let ys = series.iter().flat_map(|s| s.y.iter().copied());
    let (x0, x1) = span(xs);
    let (mut y0, mut y1) = span(ys);
    for s in series {
        for x in [x0, x1] {
            let (lo, hi) = s.fit.band(x);
            if lo.is_finite() && hi.is_finite() {
                y0 = y0.min(lo);
                y1 = y1.max(hi);
            }
        }
    }
    let px = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let py = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<path d="M{M} {M} V{b} H{r}" fill="none" stroke="black"/>"#,
        b = H - M,
        r = W - M
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#,
        W / 2.0,
        H - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let steps = 40;
        let grid: Vec<f64> = (0..=steps)
            .map(|k| x0 + (x1 - x0) * k as f64 / steps as f64)
            .collect();
        let mut band = String::new();
        for (k, &x) in grid.iter().enumerate() {
            let (_, hi) = s.fit.band(x);
            let _ = write!(band, "{}{:.2} {:.2} ", if k == 0 { "M" } else { "L" }, px(x), py(hi));
        }
        for &x in grid.iter().rev() {
            let (lo, _) = s.fit.band(x);
            let _ = write!(band, "L{:.2} {:.2} ", px(x), py(lo));
        }
        let _ = writeln!(svg, r#"<path d="{}Z" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, band);
        for (&x, &y) in s.x.iter().zip(s.y) {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{color}" fill-opacity="0.6"/>"#,
                px(x),
                py(y)
            );
        }
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"/>"#,
            px(x0),
            py(s.fit.predict(x0)),
            px(x1),
            py(s.fit.predict(x1))
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="12" fill="{color}">{} (a={:.3}, R²={:.3})</text>"#,
            W - M - 180.0,
            M + 16.0 * i as f64,
            escape(s.label),
            s.fit.slope,
            s.fit.r_squared
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Five-number summary backing one violin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolinSummary {
    pub platform: Platform,
    pub topic: String,
    pub affiliation: Affiliation,
    pub degree_class: DegreeClass,
    pub metric: Metric,
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

pub fn violin_summary(
    key: &CohortKey,
    degree_class: DegreeClass,
    metric: Metric,
    values: &[f64],
) -> Result<ViolinSummary> {
    Ok(ViolinSummary {
        platform: key.platform,
        topic: key.topic.clone(),
        affiliation: key.affiliation,
        degree_class,
        metric,
        n: values.len(),
        min: quantile(values, 0.0)?,
        q1: quantile(values, 0.25)?,
        median: quantile(values, 0.5)?,
        q3: quantile(values, 0.75)?,
        max: quantile(values, 1.0)?,
    })
}

pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Long-format grid: one `(x_low, x_high, y_low, y_high, mass)` row per cell,
/// row-major in toxicity.
pub fn write_density_csv<W: Write>(grid: &DensityGrid, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x_low", "x_high", "y_low", "y_high", "mass"])?;
    for (i, row) in grid.cells.iter().enumerate() {
        for (j, mass) in row.iter().enumerate() {
            w.serialize((
                grid.x_edges[i],
                grid.x_edges[i + 1],
                grid.y_edges[j],
                grid.y_edges[j + 1],
                mass,
            ))?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{distribution_share, ols_fit};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rec(id: usize, tox: f64, pes: f64, h: f64) -> ScoreRecord {
        ScoreRecord::new(format!("u{id}"), tox, 0.0, pes, h).unwrap()
    }

    fn cohort(aff: Affiliation, entropies: &[f64]) -> (CohortKey, Vec<ScoreRecord>) {
        (
            CohortKey::new(Platform::Twitter, "t", aff),
            entropies
                .iter()
                .enumerate()
                .map(|(i, &h)| rec(i, 0.2, 0.1, h))
                .collect(),
        )
    }

    #[test]
    fn minimum_cohort_gets_exactly_q() {
        let table = emit_bubble_table(
            &[
                cohort(Affiliation::Democratic, &[6.0, 6.2, 6.4]),
                cohort(Affiliation::Republican, &[4.4, 4.5, 4.6]),
            ],
            500.0,
        )
        .unwrap();
        assert_eq!(table.rows.len(), 2);
        assert_eq!(table.rows[1].bubble_size, 500.0);
        assert!((table.rows[0].bubble_size - 1624.504792712471).abs() < 1e-6);
        assert_eq!(table.rows.iter().filter(|r| r.bubble_size == 500.0).count(), 1);
    }

    #[test]
    fn equal_medians_equal_bubbles() {
        let table = emit_bubble_table(
            &[
                cohort(Affiliation::Democratic, &[5.0, 5.5, 9.0]),
                cohort(Affiliation::Republican, &[1.0, 5.5, 6.0]),
                (CohortKey::new(Platform::Reddit, "t", Affiliation::Democratic), vec![rec(0, 0.1, 0.1, 4.0)]),
            ],
            500.0,
        )
        .unwrap();
        assert_eq!(table.rows[0].bubble_size, table.rows[1].bubble_size);
    }

    #[test]
    fn empty_cohort_is_omitted_with_warning() {
        let table = emit_bubble_table(
            &[cohort(Affiliation::Democratic, &[]), cohort(Affiliation::Republican, &[5.0])],
            500.0,
        )
        .unwrap();
        assert_eq!(table.rows.len(), 1);
        assert_eq!(table.warnings.len(), 1);
        assert!(emit_bubble_table(&[cohort(Affiliation::Democratic, &[5.0])], 0.0).is_err());
    }

    #[test]
    fn point_mass_grid() {
        let g = emit_density_grid(&[0.0; 5], &[0.0; 5], 4).unwrap();
        let nonzero: Vec<f64> = g.cells.iter().flatten().copied().filter(|&m| m > 0.0).collect();
        assert_eq!(nonzero, vec![1.0]);
        // compound 0 falls into the bin [0, 0.5)
        assert_eq!(g.cells[0][2], 1.0);
        assert_eq!(g.x_edges.len(), 5);
        assert!(emit_density_grid(&[0.1], &[0.1], 1).is_err());
        assert!(emit_density_grid(&[0.1, 0.2], &[0.1], 4).is_err());
    }

    #[test]
    fn uniform_grid_is_near_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 10_000;
        let t: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let c: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let g = emit_density_grid(&t, &c, 10).unwrap();
        assert!((g.total_mass() - 1.0).abs() < 1e-12);
        let mean = 1.0 / 100.0;
        let max = g.cells.iter().flatten().copied().fold(0.0, f64::max);
        assert!(max < 3.0 * mean, "max cell {max}");
    }

    #[test]
    fn bimodal_compound_shows_two_ridges() {
        // 60% near -0.6, 40% near +0.7, nothing in between
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 5000;
        let c: Vec<f64> = (0..n)
            .map(|i| {
                let centre = if i % 5 < 3 { -0.6 } else { 0.7 };
                centre + (rng.random::<f64>() - 0.5) * 0.2
            })
            .collect();
        let t: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let g = emit_density_grid(&t, &c, 20).unwrap();
        let marginal = g.compound_marginal();
        let share = distribution_share(&c, &[(-0.7, -0.5), (0.6, 0.8)]).unwrap();
        assert!((share.shares[0] - 0.6).abs() < 1e-12);
        assert!((share.shares[1] - 0.4).abs() < 1e-12);
        // grid marginal agrees: the two ridges carry all mass and are disjoint
        let ridge = |lo: f64, hi: f64| -> f64 {
            marginal
                .iter()
                .enumerate()
                .filter(|(j, _)| g.y_edges[*j] >= lo - 1e-9 && g.y_edges[j + 1] <= hi + 1e-9)
                .map(|(_, m)| m)
                .sum()
        };
        assert!((ridge(-0.7, -0.5) - 0.6).abs() < 1e-9);
        assert!((ridge(0.6, 0.8) - 0.4).abs() < 1e-9);
        assert_eq!(ridge(-0.4, 0.5), 0.0);
    }

    #[test]
    fn perfect_fit_has_zero_band() {
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| -4.158 * v + 0.511).collect();
        let fit = ols_fit(&x, &y).unwrap();
        for v in [0.0, 3.3, 12.0] {
            assert!(fit.band_half_width(v).abs() < 1e-9);
        }
        let rows = emit_regression_report(&[("exact".into(), fit)]).unwrap();
        assert!((rows[0].r_squared - 1.0).abs() < 1e-9);
    }

    #[test]
    fn report_keeps_labelled_rows() {
        let x: Vec<f64> = (1..=20).map(|v| f64::from(v).log10()).collect();
        let noise = |i: usize| ((i * 37) % 11) as f64 / 500.0;
        let y1: Vec<f64> = x.iter().enumerate().map(|(i, v)| -0.27 * v + 0.9 + noise(i)).collect();
        let y2: Vec<f64> = x.iter().enumerate().map(|(i, v)| -0.22 * v + 0.8 + noise(i)).collect();
        let f1 = ols_fit(&x, &y1).unwrap();
        let f2 = ols_fit(&x, &y2).unwrap();
        let rows = emit_regression_report(&[("republican".into(), f1), ("democratic".into(), f2)]).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].label, "republican");
        assert_eq!(rows[1].label, "democratic");
        assert!((rows[0].slope + 0.27).abs() < 0.02 && (rows[1].slope + 0.22).abs() < 0.02);
        assert!(emit_regression_report(&[]).is_err());

        let svg = regression_svg(
            &[
                RegressionSeries { label: "republican", x: &x, y: &y1, fit: &f1 },
                RegressionSeries { label: "democratic", x: &x, y: &y2, fit: &f2 },
            ],
            "log10(replies)",
            "max toxicity",
        );
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), 40);
        assert_eq!(svg.matches("fill-opacity=\"0.2\"").count(), 2);
    }

    #[test]
    fn violin_quartiles() {
        let key = CohortKey::new(Platform::Reddit, "qanon", Affiliation::Republican);
        let v = violin_summary(&key, DegreeClass::TwoCore, Metric::Toxicity, &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((v.min, v.q1, v.median, v.q3, v.max), (1.0, 2.0, 3.0, 4.0, 5.0));
        assert!(violin_summary(&key, DegreeClass::TwoCore, Metric::Toxicity, &[]).is_err());
    }
}

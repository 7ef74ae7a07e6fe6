//! Statistical battery: correlation, rank tests, scale test, dip test,
//! effect size, least squares and the small descriptive helpers they share.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

mod dip;
mod rank;

pub use dip::{dip_statistic, hartigan_dip, DEFAULT_DIP_REPLICATES};
pub use rank::{
    fligner_killeen, ks_two_sample, mann_whitney_u, mann_whitney_u_with, Alternative, MwMethod,
    MwOptions, EXACT_MAX_TOTAL, EXACT_MAX_SMALL,
};

/// Smallest p value ever reported. Exact zeros are floored here.
pub const P_FLOOR: f64 = f64::MIN_POSITIVE;

pub(crate) fn clamp_p(p: f64) -> f64 {
    if p.is_nan() {
        1.0
    } else {
        p.clamp(P_FLOOR, 1.0)
    }
}

/// Multiplies `p` by the number of comparisons, clamped at 1.
pub fn bonferroni(p: f64, comparisons: u32) -> f64 {
    (p * comparisons.max(1) as f64).min(1.0)
}

/// Outcome of a hypothesis test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub method: String,
    pub statistic: f64,
    #[serde(rename = "p")]
    pub p_value: f64,
    #[serde(default)]
    pub p_adjusted: Option<f64>,
    pub n: Vec<usize>,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
}

impl TestResult {
    pub(crate) fn new(method: &str, statistic: f64, p_value: f64, n: Vec<usize>) -> Self {
        Self {
            method: method.to_string(),
            statistic,
            p_value: clamp_p(p_value),
            p_adjusted: None,
            n,
            params: BTreeMap::new(),
        }
    }

    pub(crate) fn param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    /// Applies a Bonferroni correction for `comparisons` tests.
    pub fn adjusted(mut self, comparisons: u32) -> Self {
        self.p_adjusted = Some(bonferroni(self.p_value, comparisons));
        self.params
            .insert("comparisons".into(), Value::from(comparisons.max(1)));
        self
    }

    pub fn is_degenerate(&self) -> bool {
        self.params.get("degenerate") == Some(&Value::Bool(true))
    }
}

pub(crate) fn check_finite(name: &str, x: &[f64]) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::contract(format!("{name} contains non-finite values")));
    }
    Ok(())
}

/// Mid-ranks (1-based, ties averaged).
pub fn rank_values(x: &[f64]) -> Vec<f64> {
    rank::mid_ranks(x).0
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub(crate) fn sorted(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Quantile of already sorted data by linear interpolation between order
/// statistics (position `(n-1)·p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(x: &[f64], p: f64) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::contract("quantile of an empty sample"));
    }
    check_finite("sample", x)?;
    Ok(quantile_sorted(&sorted(x), p))
}

pub fn median(x: &[f64]) -> Result<f64> {
    quantile(x, 0.5)
}

/// Keeps values inside the Tukey fences `[Q1 − 1.5·IQR, Q3 + 1.5·IQR]`,
/// preserving input order.
pub fn iqr_filter(x: &[f64]) -> Result<Vec<f64>> {
    if x.len() < 4 {
        return Err(Error::contract(format!(
            "iqr_filter needs at least 4 values, got {}",
            x.len()
        )));
    }
    let (lo, hi) = tukey_fences(x)?;
    Ok(x.iter().copied().filter(|v| *v >= lo && *v <= hi).collect())
}

pub fn tukey_fences(x: &[f64]) -> Result<(f64, f64)> {
    check_finite("sample", x)?;
    let s = sorted(x);
    let q1 = quantile_sorted(&s, 0.25);
    let q3 = quantile_sorted(&s, 0.75);
    let iqr = q3 - q1;
    Ok((q1 - 1.5 * iqr, q3 + 1.5 * iqr))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareReport {
    pub ranges: Vec<(f64, f64)>,
    pub shares: Vec<f64>,
    /// Sum of the per-range shares.
    pub total: f64,
}

/// Fraction of values falling in each closed range.
pub fn distribution_share(values: &[f64], ranges: &[(f64, f64)]) -> Result<ShareReport> {
    if values.is_empty() {
        return Err(Error::contract("distribution_share of an empty sample"));
    }
    for (i, &(lo, hi)) in ranges.iter().enumerate() {
        if !(lo <= hi) {
            return Err(Error::contract(format!("range [{lo}, {hi}] is inverted")));
        }
        for &(lo2, hi2) in &ranges[..i] {
            if lo <= hi2 && lo2 <= hi {
                return Err(Error::contract(format!(
                    "ranges [{lo2}, {hi2}] and [{lo}, {hi}] overlap"
                )));
            }
        }
    }
    let n = values.len() as f64;
    let shares: Vec<f64> = ranges
        .iter()
        .map(|&(lo, hi)| values.iter().filter(|v| **v >= lo && **v <= hi).count() as f64 / n)
        .collect();
    Ok(ShareReport {
        ranges: ranges.to_vec(),
        total: shares.iter().sum(),
        shares,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    #[serde(rename = "p")]
    pub p_value: f64,
    pub n: usize,
}

/// Pearson correlation with a two-sided t-test on n − 2 degrees of freedom.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(Error::contract("pearson needs paired samples of equal length"));
    }
    if x.len() < 3 {
        return Err(Error::contract("pearson needs at least 3 pairs"));
    }
    check_finite("x", x)?;
    check_finite("y", y)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("correlation undefined for zero variance".into()));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let df = (x.len() - 2) as f64;
    let p = if r.abs() >= 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        2.0 * student_sf(t.abs(), df)
    };
    Ok(Correlation {
        r,
        p_value: clamp_p(p),
        n: x.len(),
    })
}

fn student_sf(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("valid degrees of freedom");
    dist.sf(t)
}

fn student_quantile(p: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("valid degrees of freedom");
    dist.inverse_cdf(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Magnitude {
    Negligible,
    Small,
    Medium,
    Large,
}

impl Magnitude {
    pub fn from_delta(delta: f64) -> Self {
        match delta.abs() {
            d if d < 0.147 => Self::Negligible,
            d if d < 0.33 => Self::Small,
            d if d < 0.474 => Self::Medium,
            _ => Self::Large,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectSize {
    pub cliffs_delta: f64,
    pub magnitude: Magnitude,
}

/// Cliff's delta, (#{x > y} − #{x < y}) / (|x|·|y|).
pub fn cliffs_delta(x: &[f64], y: &[f64]) -> Result<EffectSize> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::contract("cliffs_delta needs two non-empty samples"));
    }
    check_finite("x", x)?;
    check_finite("y", y)?;
    let ys = sorted(y);
    let mut dominance: i128 = 0;
    for &v in x {
        let below = ys.partition_point(|w| *w < v) as i128;
        let above = (ys.len() - ys.partition_point(|w| *w <= v)) as i128;
        dominance += below - above;
    }
    let delta = dominance as f64 / (x.len() as f64 * y.len() as f64);
    Ok(EffectSize {
        cliffs_delta: delta,
        magnitude: Magnitude::from_delta(delta),
    })
}

/// Least-squares line `y = a·x + b` with what is needed to draw a 95%
/// confidence band for the conditional mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Residual standard error, sqrt(SSE / (n − 2)).
    pub residual_se: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
    pub n: usize,
    pub x_mean: f64,
    pub y_mean: f64,
    pub sxx: f64,
    /// Two-sided 95% t quantile on n − 2 degrees of freedom.
    pub t_crit: f64,
}

impl RegressionFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.y_mean + self.slope * (x - self.x_mean)
    }

    /// Half-width of the 95% band for the mean response at `x`.
    pub fn band_half_width(&self, x: f64) -> f64 {
        let n = self.n as f64;
        let d = x - self.x_mean;
        self.t_crit * self.residual_se * (1.0 / n + d * d / self.sxx).sqrt()
    }

    pub fn band(&self, x: f64) -> (f64, f64) {
        let (y, h) = (self.predict(x), self.band_half_width(x));
        (y - h, y + h)
    }

    pub fn slope_ci(&self) -> (f64, f64) {
        let h = self.t_crit * self.slope_se;
        (self.slope - h, self.slope + h)
    }
}

pub fn ols_fit(x: &[f64], y: &[f64]) -> Result<RegressionFit> {
    if x.len() != y.len() {
        return Err(Error::contract("ols_fit needs paired samples of equal length"));
    }
    if x.len() < 3 {
        return Err(Error::contract("ols_fit needs at least 3 points"));
    }
    check_finite("x", x)?;
    check_finite("y", y)?;
    let n = x.len();
    let (mx, my) = (mean(x), mean(y));
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 {
        return Err(Error::contract("ols_fit needs nonzero variance in x"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let e = b - (my + slope * (a - mx));
            e * e
        })
        .sum();
    let r_squared = if syy == 0.0 {
        0.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    let df = (n - 2) as f64;
    let residual_se = (sse / df).sqrt();
    let slope_se = residual_se / sxx.sqrt();
    let intercept_se = residual_se * (1.0 / n as f64 + mx * mx / sxx).sqrt();
    Ok(RegressionFit {
        slope,
        intercept,
        r_squared,
        residual_se,
        slope_se,
        intercept_se,
        n,
        x_mean: mx,
        y_mean: my,
        sxx,
        t_crit: student_quantile(0.975, df),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bonferroni_arithmetic() {
        assert!((bonferroni(0.03, 2) - 0.06).abs() < 1e-15);
        assert_eq!(bonferroni(0.7, 3), 1.0);
        assert_eq!(bonferroni(0.2, 1), 0.2);
    }

    #[test]
    fn iqr_examples() {
        assert_eq!(iqr_filter(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(iqr_filter(&[5.0; 6]).unwrap(), vec![5.0; 6]);
        assert!(iqr_filter(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn quantiles_interpolate() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert!((quantile_sorted(&s, 0.25) - 1.75).abs() < 1e-15);
        assert!((quantile_sorted(&s, 0.5) - 2.5).abs() < 1e-15);
        assert_eq!(median(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
    }

    #[test]
    fn shares() {
        let v: Vec<f64> = (0..2000).map(|i| -1.0 + (i as f64 + 0.5) / 1000.0).collect();
        let r = distribution_share(&v, &[(0.5, 1.0), (-1.0, -0.5)]).unwrap();
        assert!((r.shares[0] - 0.25).abs() < 1e-3);
        assert!((r.shares[1] - 0.25).abs() < 1e-3);
        assert!((r.total - 0.5).abs() < 2e-3);
        let zeros = distribution_share(&[0.0; 5], &[(0.1, 1.0), (-1.0, -0.1)]).unwrap();
        assert_eq!(zeros.shares, vec![0.0, 0.0]);
        assert!(distribution_share(&v, &[(0.0, 0.6), (0.5, 1.0)]).is_err());
        assert!(distribution_share(&v, &[(0.0, 0.5), (0.5, 1.0)]).is_err());
    }

    #[test]
    fn pearson_perfect_and_degenerate() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let c = pearson(&x, &y).unwrap();
        assert!((c.r - 1.0).abs() < 1e-12);
        assert!(c.p_value > 0.0);
        assert!(matches!(pearson(&x, &[1.0; 4]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn pearson_matches_frozen_reference() {
        // scipy.stats.pearsonr
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y = [2.0, 1.0, 4.0, 3.0, 7.0, 5.0];
        let c = pearson(&x, &y).unwrap();
        assert!((c.r - 0.791_794_654_888_629_7).abs() < 1e-12);
        assert!((c.p_value - 0.060_511_403_362_756_59).abs() < 1e-9);
    }

    #[test]
    fn cliffs_examples() {
        let x = [5.0, 6.0, 7.0];
        let y = [1.0, 2.0];
        assert_eq!(cliffs_delta(&x, &y).unwrap().cliffs_delta, 1.0);
        assert_eq!(cliffs_delta(&y, &x).unwrap().cliffs_delta, -1.0);
        assert_eq!(cliffs_delta(&x, &x).unwrap().cliffs_delta, 0.0);
        assert_eq!(Magnitude::from_delta(-0.96), Magnitude::Large);
        assert_eq!(Magnitude::from_delta(0.2), Magnitude::Small);
        assert_eq!(Magnitude::from_delta(0.4), Magnitude::Medium);
        assert_eq!(Magnitude::from_delta(0.1), Magnitude::Negligible);
    }

    #[test]
    fn ols_exact_line() {
        let x = [0.0, 0.1, 0.2, 0.3, 0.4];
        let y: Vec<f64> = x.iter().map(|v| -4.158 * v + 0.511).collect();
        let f = ols_fit(&x, &y).unwrap();
        assert!((f.slope + 4.158).abs() < 1e-9);
        assert!((f.intercept - 0.511).abs() < 1e-9);
        assert!((f.r_squared - 1.0).abs() < 1e-9);
        assert!(f.band_half_width(0.25) < 1e-9);
    }

    #[test]
    fn ols_flat_and_degenerate() {
        let f = ols_fit(&[1.0, 2.0, 3.0], &[4.0, 4.0, 4.0]).unwrap();
        assert_eq!(f.slope, 0.0);
        assert_eq!(f.r_squared, 0.0);
        assert!(ols_fit(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn ols_matches_frozen_reference() {
        // scipy.stats.linregress
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y = [2.0, 1.0, 4.0, 3.0, 7.0, 5.0];
        let f = ols_fit(&x, &y).unwrap();
        assert!((f.slope - 0.914_285_714_285_714_3).abs() < 1e-12);
        assert!((f.intercept - 0.466_666_666_666_666_8).abs() < 1e-12);
        assert!((f.slope_se - 0.352_638_258_696_640_3).abs() < 1e-9);
        assert!((f.intercept_se - 1.373_328_710_117_044_6).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn cliffs_antisymmetric_and_rank_based(
            x in prop::collection::vec(-50i32..50, 1..40),
            y in prop::collection::vec(-50i32..50, 1..40),
        ) {
            let xf: Vec<f64> = x.iter().map(|v| *v as f64).collect();
            let yf: Vec<f64> = y.iter().map(|v| *v as f64).collect();
            let d = cliffs_delta(&xf, &yf).unwrap().cliffs_delta;
            prop_assert_eq!(d, -cliffs_delta(&yf, &xf).unwrap().cliffs_delta);
            prop_assert!((-1.0..=1.0).contains(&d));
            let tx: Vec<f64> = xf.iter().map(|v| (v / 10.0).exp()).collect();
            let ty: Vec<f64> = yf.iter().map(|v| (v / 10.0).exp()).collect();
            prop_assert_eq!(d, cliffs_delta(&tx, &ty).unwrap().cliffs_delta);
            // brute force
            let mut dom = 0i64;
            for a in &x { for b in &y { dom += (a > b) as i64 - (a < b) as i64; } }
            prop_assert_eq!(d, dom as f64 / (x.len() * y.len()) as f64);
        }

        #[test]
        fn ols_passes_through_means(
            pts in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..50)
        ) {
            let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
            if let Ok(f) = ols_fit(&x, &y) {
                prop_assert_eq!(f.predict(f.x_mean), f.y_mean);
                prop_assert!((0.0..=1.0).contains(&f.r_squared));
            }
        }

        #[test]
        fn bonferroni_never_decreases(p in 0.0f64..=1.0, k in 1u32..50) {
            let adj = bonferroni(p, k);
            prop_assert!(adj >= p && adj <= 1.0);
        }
    }
}

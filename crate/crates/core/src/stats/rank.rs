use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use super::{check_finite, clamp_p, median, TestResult};
use crate::error::{Error, Result};

/// Largest smaller-sample size for which exact Mann–Whitney p values are
/// enumerated.
pub const EXACT_MAX_SMALL: usize = 8;
/// Exact enumeration is skipped above this combined sample size; the
/// normal approximation is already tight there.
pub const EXACT_MAX_TOTAL: usize = 1000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    #[default]
    TwoSided,
    /// `x` tends to be smaller than `y`.
    Less,
    /// `x` tends to be larger than `y`.
    Greater,
}

impl Alternative {
    fn as_str(self) -> &'static str {
        match self {
            Self::TwoSided => "two_sided",
            Self::Less => "less",
            Self::Greater => "greater",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MwMethod {
    /// Exact when the smaller sample has at most [`EXACT_MAX_SMALL`] values.
    #[default]
    Auto,
    Exact,
    Asymptotic,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MwOptions {
    pub alternative: Alternative,
    pub method: MwMethod,
}

/// Mid-ranks (1-based) of `values` and the sizes of every tie group.
pub(crate) fn mid_ranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && values[idx[j]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = r;
        }
        ties.push(j - i);
        i = j;
    }
    (ranks, ties)
}

/// Two-sided Mann–Whitney U test with a Bonferroni adjustment for
/// `comparisons` tests.
pub fn mann_whitney_u(x: &[f64], y: &[f64], comparisons: u32) -> Result<TestResult> {
    mann_whitney_u_with(x, y, comparisons, MwOptions::default())
}

pub fn mann_whitney_u_with(
    x: &[f64],
    y: &[f64],
    comparisons: u32,
    opts: MwOptions,
) -> Result<TestResult> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::contract("mann_whitney_u needs two non-empty samples"));
    }
    if comparisons == 0 {
        return Err(Error::contract("comparisons must be positive"));
    }
    check_finite("x", x)?;
    check_finite("y", y)?;
    let (n, m) = (x.len(), y.len());
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let (ranks, ties) = mid_ranks(&pooled);
    let rx: f64 = ranks[..n].iter().sum();
    let u = rx - (n * (n + 1)) as f64 / 2.0;

    let exact = match opts.method {
        MwMethod::Exact => true,
        MwMethod::Asymptotic => false,
        MwMethod::Auto => n.min(m) <= EXACT_MAX_SMALL && n + m <= EXACT_MAX_TOTAL,
    };
    let (method, p) = if exact {
        ("mann_whitney_exact", exact_p(&ranks, n, opts.alternative))
    } else {
        ("mann_whitney_asymptotic", normal_p(u, n, m, &ties, opts.alternative))
    };
    Ok(TestResult::new(method, u, p, vec![n, m])
        .param("alternative", opts.alternative.as_str())
        .adjusted(comparisons))
}

fn normal_p(u: f64, n: usize, m: usize, ties: &[usize], alt: Alternative) -> f64 {
    let (nf, mf) = (n as f64, m as f64);
    let total = nf + mf;
    let mu = nf * mf / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>();
    let var = nf * mf / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let sd = var.sqrt();
    let z = Normal::standard();
    match alt {
        Alternative::TwoSided => {
            let d = ((u - mu).abs() - 0.5).max(0.0);
            (2.0 * z.sf(d / sd)).min(1.0)
        }
        Alternative::Less => z.cdf((u - mu + 0.5) / sd),
        Alternative::Greater => z.sf((u - mu - 0.5) / sd),
    }
}

/// Exact permutation p value from the distribution of doubled mid-rank
/// sums of the smaller sample over all equally likely splits.
fn exact_p(ranks: &[f64], n: usize, alt: Alternative) -> f64 {
    let total = ranks.len();
    let m = total - n;
    // enumerate over the smaller group; `flip` when that group is y
    let (k, flip) = if n <= m { (n, false) } else { (m, true) };
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let observed: usize = if flip {
        doubled[n..].iter().sum()
    } else {
        doubled[..n].iter().sum()
    };
    let max_sum: usize = {
        let mut d = doubled.clone();
        d.sort_unstable();
        d[total - k..].iter().sum()
    };
    // counts[j][s]: number of j-subsets with doubled rank sum s
    let mut counts = vec![vec![0.0f64; max_sum + 1]; k + 1];
    counts[0][0] = 1.0;
    for &r in &doubled {
        for j in (1..=k).rev() {
            let (lower, upper) = counts.split_at_mut(j);
            let (prev, cur) = (&lower[j - 1], &mut upper[0]);
            for s in (r..=max_sum).rev() {
                let c = prev[s - r];
                if c != 0.0 {
                    cur[s] += c;
                }
            }
        }
    }
    let dist = &counts[k];
    let all: f64 = dist.iter().sum();
    let center = (k * (total + 1)) as f64;
    let obs = observed as f64;
    let tol = 1e-7;
    let mass = |keep: &dyn Fn(f64) -> bool| -> f64 {
        dist.iter()
            .enumerate()
            .filter(|(s, c)| **c != 0.0 && keep(*s as f64))
            .map(|(_, c)| c)
            .sum::<f64>()
            / all
    };
    let x_less = match (alt, flip) {
        (Alternative::TwoSided, _) => {
            let dev = (obs - center).abs();
            return mass(&|s| (s - center).abs() >= dev - tol).min(1.0);
        }
        (Alternative::Less, f) => !f,
        (Alternative::Greater, f) => f,
    };
    if x_less {
        mass(&|s| s <= obs + tol)
    } else {
        mass(&|s| s >= obs - tol)
    }
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic Kolmogorov
/// distribution evaluated at `(√ne + 0.12 + 0.11/√ne)·D`.
pub fn ks_two_sample(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::contract("ks_two_sample needs two non-empty samples"));
    }
    check_finite("x", x)?;
    check_finite("y", y)?;
    let xs = super::sorted(x);
    let ys = super::sorted(y);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] == v {
            i += 1;
        }
        while j < ys.len() && ys[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let en = (n * m / (n + m)).sqrt();
    let p = kolmogorov_q((en + 0.12 + 0.11 / en) * d);
    Ok(TestResult::new("ks_two_sample", d, p, vec![xs.len(), ys.len()]).param("effective_n", en * en))
}

/// Survival function of the Kolmogorov distribution.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let a2 = -2.0 * lambda * lambda;
    let mut fac = 2.0;
    let mut sum = 0.0;
    let mut prev = 0.0f64;
    for j in 1..=100 {
        let term = fac * (a2 * (j * j) as f64).exp();
        sum += term;
        if term.abs() <= 0.001 * prev || term.abs() <= 1e-8 * sum {
            return sum.clamp(0.0, 1.0);
        }
        fac = -fac;
        prev = term.abs();
    }
    1.0
}

/// Fligner–Killeen test of equal dispersion (median-centred).
pub fn fligner_killeen<S: AsRef<[f64]>>(groups: &[S]) -> Result<TestResult> {
    if groups.len() < 2 {
        return Err(Error::contract("fligner_killeen needs at least two groups"));
    }
    let mut deviations = Vec::new();
    let mut sizes = Vec::with_capacity(groups.len());
    for g in groups {
        let g = g.as_ref();
        if g.len() < 2 {
            return Err(Error::contract("every fligner_killeen group needs at least two values"));
        }
        check_finite("group", g)?;
        let med = median(g)?;
        deviations.extend(g.iter().map(|v| (v - med).abs()));
        sizes.push(g.len());
    }
    let total = deviations.len() as f64;
    let (ranks, _) = mid_ranks(&deviations);
    let z = Normal::standard();
    let scores: Vec<f64> = ranks
        .iter()
        .map(|r| z.inverse_cdf((1.0 + r / (total + 1.0)) / 2.0))
        .collect();
    let grand = scores.iter().sum::<f64>() / total;
    let var = scores.iter().map(|a| (a - grand).powi(2)).sum::<f64>() / (total - 1.0);
    let df = (groups.len() - 1) as f64;
    if var <= 1e-300 {
        return Ok(TestResult::new("fligner_killeen", 0.0, 1.0, sizes)
            .param("df", df)
            .param("degenerate", true));
    }
    let mut stat = 0.0;
    let mut offset = 0;
    for &len in &sizes {
        let mean_i = scores[offset..offset + len].iter().sum::<f64>() / len as f64;
        stat += len as f64 * (mean_i - grand).powi(2);
        offset += len;
    }
    stat /= var;
    let chi = ChiSquared::new(df).expect("positive degrees of freedom");
    let p = clamp_p(chi.sf(stat));
    Ok(TestResult::new("fligner_killeen", stat, p, sizes).param("df", df))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn opts(alternative: Alternative, method: MwMethod) -> MwOptions {
        MwOptions { alternative, method }
    }

    #[test]
    fn separated_triples_exact_one_sided() {
        let x = [1.0, 2.0, 3.0];
        let y = [4.0, 5.0, 6.0];
        let r = mann_whitney_u_with(&x, &y, 1, opts(Alternative::Less, MwMethod::Auto)).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.method, "mann_whitney_exact");
        assert!((r.p_value - 1.0 / 20.0).abs() < 1e-12);
        let two = mann_whitney_u(&x, &y, 1).unwrap();
        assert!((two.p_value - 0.1).abs() < 1e-12);
        let g = mann_whitney_u_with(&y, &x, 1, opts(Alternative::Greater, MwMethod::Auto)).unwrap();
        assert!((g.p_value - 1.0 / 20.0).abs() < 1e-12);
    }

    #[test]
    fn identical_samples_not_rejected() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        let r = mann_whitney_u(&x, &x, 1).unwrap();
        assert!(r.p_value > 0.99);
        let a = mann_whitney_u_with(&x, &x, 1, opts(Alternative::TwoSided, MwMethod::Asymptotic)).unwrap();
        assert!(a.p_value > 0.99);
    }

    #[test]
    fn adjustment_recorded() {
        let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0, 5.0], 3).unwrap();
        assert_eq!(r.p_adjusted, Some((3.0 * r.p_value).min(1.0)));
    }

    #[test]
    fn matches_frozen_reference_values() {
        // scipy.stats.mannwhitneyu, method="asymptotic" / "exact"
        let x: Vec<f64> = (0..30).map(|i| (i * 7 % 13) as f64 + 0.5 * (i % 3) as f64).collect();
        let y: Vec<f64> = (0..25).map(|i| (i * 5 % 11) as f64 + 2.0).collect();
        let a = mann_whitney_u_with(&x, &y, 1, opts(Alternative::TwoSided, MwMethod::Asymptotic)).unwrap();
        assert_eq!(a.statistic, 329.5);
        assert!((a.p_value - 0.446_108_938_887_066_93).abs() < 1e-9, "{}", a.p_value);
        let xs = [1.1, 3.4, 2.2, 8.0, 5.5];
        let ys = [4.0, 6.1, 7.7, 9.3, 10.0, 2.9];
        let e = mann_whitney_u_with(&xs, &ys, 1, opts(Alternative::TwoSided, MwMethod::Exact)).unwrap();
        assert_eq!(e.statistic, 7.0);
        assert!((e.p_value - 0.177_489_177_489_177_47).abs() < 1e-12, "{}", e.p_value);
    }

    #[test]
    fn exact_with_ties_sums_to_one_sided_complements() {
        let x = [1.0, 2.0, 2.0, 3.0];
        let y = [2.0, 3.0, 3.0, 4.0, 5.0];
        let less = mann_whitney_u_with(&x, &y, 1, opts(Alternative::Less, MwMethod::Exact)).unwrap();
        let greater = mann_whitney_u_with(&x, &y, 1, opts(Alternative::Greater, MwMethod::Exact)).unwrap();
        // both tails include the observed value
        assert!(less.p_value + greater.p_value >= 1.0);
        assert!(less.p_value < greater.p_value);
    }

    #[test]
    fn ks_examples() {
        let r = ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]).unwrap().statistic, 1.0);
        let r = ks_two_sample(&[1.0, 2.0, 3.0, 4.0], &[2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!((r.statistic - 0.25).abs() < 1e-15);
    }

    #[test]
    fn kolmogorov_reference_points() {
        // 1 - scipy.special.kolmogorov inverse pairs
        assert!((kolmogorov_q(1.0) - 0.269_999_671_677_354_56).abs() < 1e-9);
        assert!((kolmogorov_q(1.358_098_639_322_550_7) - 0.05).abs() < 1e-6);
        assert_eq!(kolmogorov_q(0.1), 1.0);
    }

    #[test]
    fn fligner_location_shift_is_null() {
        let a = [1.0, 2.0, 4.0, 7.0, 11.0];
        let b: Vec<f64> = a.iter().map(|v| v + 100.0).collect();
        let r = fligner_killeen(&[&a[..], &b[..]]).unwrap();
        assert!(r.statistic.abs() < 1e-12);
        assert!(r.p_value > 0.999);
    }

    #[test]
    fn fligner_matches_frozen_reference() {
        // scipy.stats.fligner(center="median")
        let a = [2.1, 3.4, 1.9, 5.6, 4.4, 3.3];
        let b = [10.0, -3.0, 7.5, 0.2, 12.1, -6.4, 4.0];
        let c = [3.0, 3.2, 2.9, 3.1];
        let r = fligner_killeen(&[&a[..], &b[..], &c[..]]).unwrap();
        assert!((r.statistic - 7.352_085_013_524_09).abs() < 1e-6, "{}", r.statistic);
        assert!((r.p_value - 0.025_322_992_366_392_92).abs() < 1e-6, "{}", r.p_value);
    }

    #[test]
    fn fligner_degenerate_flagged() {
        let r = fligner_killeen(&[[1.0, 1.0], [2.0, 2.0]]).unwrap();
        assert!(r.is_degenerate());
        assert!(fligner_killeen(&[[1.0, 2.0]]).is_err());
        assert!(fligner_killeen(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    /// Brute-force exact p by enumerating every split of the pooled ranks.
    fn enumerate_two_sided(x: &[f64], y: &[f64]) -> f64 {
        let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
        let (ranks, _) = mid_ranks(&pooled);
        let n = x.len();
        let total = pooled.len();
        let center = n as f64 * (total + 1) as f64 / 2.0;
        let obs: f64 = ranks[..n].iter().sum();
        let (mut hit, mut all) = (0u64, 0u64);
        for mask in 0u32..(1 << total) {
            if mask.count_ones() as usize != n {
                continue;
            }
            let s: f64 = (0..total).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            all += 1;
            if (s - center).abs() >= (obs - center).abs() - 1e-9 {
                hit += 1;
            }
        }
        hit as f64 / all as f64
    }

    proptest! {
        #[test]
        fn exact_matches_enumeration(
            x in prop::collection::vec(0i32..6, 1..6),
            y in prop::collection::vec(0i32..6, 1..7),
        ) {
            let xf: Vec<f64> = x.iter().map(|v| *v as f64).collect();
            let yf: Vec<f64> = y.iter().map(|v| *v as f64).collect();
            let r = mann_whitney_u_with(&xf, &yf, 1, opts(Alternative::TwoSided, MwMethod::Exact)).unwrap();
            let oracle = enumerate_two_sided(&xf, &yf);
            prop_assert!((r.p_value - oracle.max(f64::MIN_POSITIVE)).abs() < 1e-12);
        }

        #[test]
        fn p_values_in_unit_interval(
            x in prop::collection::vec(-5.0f64..5.0, 1..30),
            y in prop::collection::vec(-5.0f64..5.0, 1..30),
        ) {
            for r in [mann_whitney_u(&x, &y, 4).unwrap(), ks_two_sample(&x, &y).unwrap()] {
                prop_assert!(r.p_value > 0.0 && r.p_value <= 1.0);
                if let Some(adj) = r.p_adjusted {
                    prop_assert!(adj >= r.p_value && adj <= 1.0);
                }
            }
        }
    }
}

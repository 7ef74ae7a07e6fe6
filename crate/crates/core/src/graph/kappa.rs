use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Conventional verbal scale for Cohen's kappa.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgreementBand {
    Poor,
    Slight,
    Fair,
    Moderate,
    Substantial,
    NearPerfect,
}

impl AgreementBand {
    pub fn from_kappa(kappa: f64) -> Self {
        match kappa {
            k if k < 0.0 => AgreementBand::Poor,
            k if k < 0.2 => AgreementBand::Slight,
            k if k < 0.4 => AgreementBand::Fair,
            k if k < 0.6 => AgreementBand::Moderate,
            k if k < 0.8 => AgreementBand::Substantial,
            _ => AgreementBand::NearPerfect,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AgreementBand::Poor => "poor agreement",
            AgreementBand::Slight => "slight agreement",
            AgreementBand::Fair => "fair agreement",
            AgreementBand::Moderate => "moderate agreement",
            AgreementBand::Substantial => "substantial agreement",
            AgreementBand::NearPerfect => "near-perfect agreement",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaResult {
    pub kappa: f64,
    pub observed: f64,
    pub expected: f64,
    pub band: AgreementBand,
    pub n: usize,
}

/// Cohen's kappa between two coders' labels for the same items.
pub fn verify_sample<T: Ord>(labels_a: &[T], labels_b: &[T]) -> Result<KappaResult> {
    if labels_a.is_empty() || labels_a.len() != labels_b.len() {
        return Err(Error::contract(
            "kappa needs two non-empty label lists of equal length",
        ));
    }
    let n = labels_a.len() as f64;
    let mut margin_a: BTreeMap<&T, f64> = BTreeMap::new();
    let mut margin_b: BTreeMap<&T, f64> = BTreeMap::new();
    let mut agree = 0usize;
    for (a, b) in labels_a.iter().zip(labels_b) {
        *margin_a.entry(a).or_default() += 1.0;
        *margin_b.entry(b).or_default() += 1.0;
        if a == b {
            agree += 1;
        }
    }
    let observed = agree as f64 / n;
    let expected: f64 = margin_a
        .iter()
        .map(|(cat, ca)| ca * margin_b.get(cat).copied().unwrap_or(0.0))
        .sum::<f64>()
        / (n * n);
    let kappa = if (1.0 - expected).abs() < 1e-15 {
        if agree == labels_a.len() {
            1.0
        } else {
            return Err(Error::Degenerate(
                "chance agreement is 1 but observed agreement is not".into(),
            ));
        }
    } else {
        (observed - expected) / (1.0 - expected)
    };
    Ok(KappaResult {
        kappa,
        observed,
        expected,
        band: AgreementBand::from_kappa(kappa),
        n: labels_a.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bands() {
        assert_eq!(AgreementBand::from_kappa(0.9264).label(), "near-perfect agreement");
        assert_eq!(AgreementBand::from_kappa(0.9116), AgreementBand::NearPerfect);
        assert_eq!(AgreementBand::from_kappa(0.6482), AgreementBand::Substantial);
        assert_eq!(AgreementBand::from_kappa(0.7248), AgreementBand::Substantial);
        assert_eq!(AgreementBand::from_kappa(0.1), AgreementBand::Slight);
        assert_eq!(AgreementBand::from_kappa(-0.1), AgreementBand::Poor);
    }

    #[test]
    fn identical_lists() {
        let a = ["R", "D", "R", "D", "D"];
        let k = verify_sample(&a, &a).unwrap();
        assert_eq!(k.kappa, 1.0);
        // single category on both sides
        let k = verify_sample(&["R", "R"], &["R", "R"]).unwrap();
        assert_eq!(k.kappa, 1.0);
    }

    #[test]
    fn chance_level_is_zero() {
        let k = verify_sample(&["A", "A", "B", "B"], &["A", "B", "A", "B"]).unwrap();
        assert_eq!(k.observed, 0.5);
        assert_eq!(k.expected, 0.5);
        assert_eq!(k.kappa, 0.0);
    }

    #[test]
    fn two_by_two_table() {
        // a: 22 R/R, 3 R/D, 8 D/R, 17 D/D
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (x, y, c) in [("R", "R", 22), ("R", "D", 3), ("D", "R", 8), ("D", "D", 17)] {
            for _ in 0..c {
                a.push(x);
                b.push(y);
            }
        }
        let k = verify_sample(&a, &b).unwrap();
        // po = 0.78, pe = 0.5*0.6 + 0.5*0.4 = 0.5
        assert!((k.kappa - 0.56).abs() < 1e-12);
        assert_eq!(k.band, AgreementBand::Moderate);
    }

    #[test]
    fn degenerate_and_bad_input() {
        assert!(verify_sample::<&str>(&[], &[]).is_err());
        assert!(verify_sample(&["A"], &["A", "B"]).is_err());
    }
}

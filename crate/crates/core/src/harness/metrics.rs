//! Distribution distances between two EE samples.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const KL_BINS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// KL(a || b) between 64-bin histograms with add-one smoothing.
    pub kl_divergence: f64,
    /// |q_a(5%) - q_b(5%)| / q_a(5%).
    pub p95_loss: f64,
}

/// Histogram counts over `bins` equal-width bins on [lo, hi].
fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let mut counts = vec![0.0; bins];
    let width = (hi - lo) / bins as f64;
    for v in values {
        let k = if width > 0.0 { ((v - lo) / width).floor() as usize } else { 0 };
        counts[k.min(bins - 1)] += 1.0;
    }
    counts
}

pub fn kl_divergence(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySeries);
    }
    let lo = a.iter().chain(b).copied().fold(f64::INFINITY, f64::min);
    let hi = a.iter().chain(b).copied().fold(f64::NEG_INFINITY, f64::max);
    let (ha, hb) = (histogram(a, lo, hi, KL_BINS), histogram(b, lo, hi, KL_BINS));
    let (na, nb) = ((a.len() + KL_BINS) as f64, (b.len() + KL_BINS) as f64);
    Ok(ha
        .iter()
        .zip(&hb)
        .map(|(ca, cb)| {
            let (p, q) = ((ca + 1.0) / na, (cb + 1.0) / nb);
            p * (p / q).ln()
        })
        .sum::<f64>()
        .max(0.0))
}

/// Linear-interpolated empirical quantile.
pub fn quantile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySeries);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    Ok(if i + 1 < v.len() { v[i] + frac * (v[i + 1] - v[i]) } else { v[i] })
}

pub fn p95_loss(a: &[f64], b: &[f64]) -> Result<f64> {
    let (qa, qb) = (quantile(a, 0.05)?, quantile(b, 0.05)?);
    if qa == 0.0 {
        return Ok(if qb == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok((qa - qb).abs() / qa.abs())
}

pub fn metrics(a: &[f64], b: &[f64]) -> Result<Metrics> {
    Ok(Metrics {
        kl_divergence: kl_divergence(a, b)?,
        p95_loss: p95_loss(a, b)?,
    })
}

/// Metrics report written by an external model evaluation.
pub fn read_report(path: &Path) -> Result<Metrics> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_series_have_zero_distance() {
        let a: Vec<f64> = (0..500).map(|i| (i as f64).sqrt()).collect();
        let m = metrics(&a, &a).unwrap();
        assert_eq!(m.kl_divergence, 0.0);
        assert_eq!(m.p95_loss, 0.0);
    }

    #[test]
    fn disjoint_supports_stay_finite() {
        let a = vec![0.0; 100];
        let b = vec![10.0; 100];
        let kl = kl_divergence(&a, &b).unwrap();
        // mass 101/164 vs 1/164 in the first bin, mirrored in the last
        let expected = 100.0 / 164.0 * 101f64.ln();
        assert!((kl - expected).abs() < 1e-12, "{kl} vs {expected}");
    }

    #[test]
    fn p95_loss_by_hand() {
        // 5% quantile of 0..=100 is 5, of 1..=101 is 6
        let a: Vec<f64> = (0..=100).map(f64::from).collect();
        let b: Vec<f64> = (1..=101).map(f64::from).collect();
        assert!((p95_loss(&a, &b).unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn empty_series_rejected() {
        assert!(matches!(metrics(&[], &[1.0]), Err(Error::EmptySeries)));
    }

    #[test]
    fn report_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        std::fs::write(&path, r#"{"kl_divergence": 0.099113, "p95_loss": 0.0019714}"#).unwrap();
        let m = read_report(&path).unwrap();
        assert_eq!(m.kl_divergence, 0.099113);
    }

    proptest! {
        #[test]
        fn kl_nonnegative(a in prop::collection::vec(0.0f64..1e3, 1..50), b in prop::collection::vec(0.0f64..1e3, 1..50)) {
            let kl = kl_divergence(&a, &b).unwrap();
            prop_assert!(kl >= 0.0 && kl.is_finite());
        }
    }
}

//! Risk metrics on damage samples.
//!
//! Quantiles use linear interpolation between order statistics at
//! `h = (n − 1)α + 1` (one-based), the "type 7" estimator. The Wasserstein
//! distance integrates the exact empirical step quantile functions, which
//! reduces to the mean absolute difference of sorted samples when both
//! samples have the same size.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default over-estimation weight for [`dev_weighted`].
pub const DEFAULT_OVER_WEIGHT: f64 = 2.0;

/// Default confidence levels for reports.
pub const DEFAULT_ALPHAS: [f64; 3] = [0.90, 0.95, 0.99];

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::config(format!("alpha must lie in (0,1), got {alpha}")))
    }
}

fn check_sample(sample: &[f64]) -> Result<()> {
    if sample.is_empty() {
        return Err(Error::data("empty sample"));
    }
    if let Some(x) = sample.iter().find(|x| !x.is_finite()) {
        return Err(Error::data(format!("sample contains non-finite value {x}")));
    }
    Ok(())
}

fn sorted(sample: &[f64]) -> Vec<f64> {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Type-7 quantile of an already sorted, non-empty slice. `p` is clamped
/// to `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of empty slice");
    let h = (n as f64 - 1.0) * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

pub fn empirical_quantile(sample: &[f64], p: f64) -> Result<f64> {
    check_sample(sample)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::config(format!("probability must lie in [0,1], got {p}")));
    }
    Ok(quantile_sorted(&sorted(sample), p))
}

/// Value at risk: the α-quantile of the damage sample.
pub fn var(sample: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    empirical_quantile(sample, alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tvar {
    pub value: f64,
    /// No observation exceeded VaR, so `value` is VaR itself.
    pub fallback: bool,
}

/// Mean of observations strictly above `VaR_α`.
pub fn tvar(sample: &[f64], alpha: f64) -> Result<Tvar> {
    let v = var(sample, alpha)?;
    let (sum, count) = sample
        .iter()
        .filter(|&&x| x > v)
        .fold((0.0, 0usize), |(s, c), &x| (s + x, c + 1));
    Ok(if count == 0 {
        Tvar { value: v, fallback: true }
    } else {
        Tvar { value: sum / count as f64, fallback: false }
    })
}

/// `P(X > t)` for each strictly increasing threshold `t`.
pub fn exceedance_curve(sample: &[f64], thresholds: &[f64]) -> Result<Vec<f64>> {
    check_sample(sample)?;
    if thresholds.windows(2).any(|w| !(w[0] < w[1])) || thresholds.iter().any(|t| t.is_nan()) {
        return Err(Error::config("thresholds must be strictly increasing"));
    }
    let s = sorted(sample);
    let n = s.len() as f64;
    Ok(thresholds
        .iter()
        .map(|&t| {
            let at_or_below = s.partition_point(|&x| x <= t);
            (s.len() - at_or_below) as f64 / n
        })
        .collect())
}

/// Order-1 Wasserstein distance between two empirical distributions.
pub fn wasserstein_1d(p: &[f64], q: &[f64]) -> Result<f64> {
    check_sample(p)?;
    check_sample(q)?;
    let (a, b) = (sorted(p), sorted(q));
    let (n, m) = (a.len(), b.len());
    if n == m {
        let total: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
        return Ok(total / n as f64);
    }
    // Walk the merged breakpoints i/n and j/m of the two step quantile
    // functions, using integer arithmetic on the common denominator n·m.
    let (mut i, mut j) = (0usize, 0usize);
    let mut u = 0usize;
    let total_len = n * m;
    let mut acc = 0.0;
    while u < total_len {
        let next_a = (i + 1) * m;
        let next_b = (j + 1) * n;
        let next = next_a.min(next_b);
        acc += (next - u) as f64 * (a[i] - b[j]).abs();
        u = next;
        if next == next_a {
            i += 1;
        }
        if next == next_b {
            j += 1;
        }
    }
    Ok(acc / total_len as f64)
}

/// `|y − VaR|`.
pub fn dev_sym(true_damage: f64, var_value: f64) -> f64 {
    (true_damage - var_value).abs()
}

/// `√(w·e²)` when VaR over-estimates the truth, `|e|` otherwise,
/// with `e = y − VaR`.
pub fn dev_weighted(true_damage: f64, var_value: f64, over_weight: f64) -> Result<f64> {
    if !(over_weight > 1.0 && over_weight.is_finite()) {
        return Err(Error::config(format!("over-weight must exceed 1, got {over_weight}")));
    }
    let e = true_damage - var_value;
    let w = if e < 0.0 { over_weight } else { 1.0 };
    Ok((w * e * e).sqrt())
}

/// Pinball loss `max(α·e, (α − 1)·e)` with `e = y − VaR`.
pub fn dev_asym(true_damage: f64, var_value: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let e = true_damage - var_value;
    Ok((alpha * e).max((alpha - 1.0) * e))
}

/// What a model is compared against.
#[derive(Debug, Clone, PartialEq)]
pub enum Truth {
    Sample(Vec<f64>),
    Scalar(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelMetrics {
    pub alpha: f64,
    pub var: f64,
    pub tvar: f64,
    pub tvar_fallback: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dev_sym: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dev_weighted: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dev_asym: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub model: String,
    pub n: usize,
    pub levels: Vec<LevelMetrics>,
    pub exceedance: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wasserstein: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub alphas: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub over_weight: f64,
    /// Scalar truth, when the comparison was against a single value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_damage: Option<f64>,
    /// VaR/TVaR of the truth sample, when one was supplied.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<ModelMetrics>,
    pub models: Vec<ModelMetrics>,
}

impl RiskReport {
    pub fn model(&self, name: &str) -> Option<&ModelMetrics> {
        self.models.iter().find(|m| m.model == name)
    }

    /// Rows `model,threshold,prob` (truth first when present).
    pub fn exceedance_rows(&self) -> Vec<(String, f64, f64)> {
        self.truth
            .iter()
            .chain(&self.models)
            .flat_map(|m| {
                self.thresholds
                    .iter()
                    .zip(&m.exceedance)
                    .map(move |(&t, &p)| (m.model.clone(), t, p))
            })
            .collect()
    }
}

/// Evenly spaced thresholds spanning the pooled range of all samples.
pub fn default_thresholds(samples: &[&[f64]], count: usize) -> Vec<f64> {
    let (lo, hi) = samples
        .iter()
        .flat_map(|s| s.iter())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if !lo.is_finite() || count == 0 {
        return Vec::new();
    }
    if count == 1 || hi <= lo {
        return vec![lo];
    }
    let step = (hi - lo) / (count - 1) as f64;
    (0..count).map(|k| lo + step * k as f64).collect()
}

fn sample_metrics(
    name: &str,
    sample: &[f64],
    alphas: &[f64],
    thresholds: &[f64],
    scalar_truth: Option<(f64, f64)>,
) -> Result<ModelMetrics> {
    check_sample(sample).map_err(|e| Error::data(format!("model {name}: {e}")))?;
    let levels = alphas
        .iter()
        .map(|&alpha| {
            let v = var(sample, alpha)?;
            let t = tvar(sample, alpha)?;
            let (ds, dw, da) = match scalar_truth {
                Some((y, w)) => (
                    Some(dev_sym(y, v)),
                    Some(dev_weighted(y, v, w)?),
                    Some(dev_asym(y, v, alpha)?),
                ),
                None => (None, None, None),
            };
            Ok(LevelMetrics {
                alpha,
                var: v,
                tvar: t.value,
                tvar_fallback: t.fallback,
                dev_sym: ds,
                dev_weighted: dw,
                dev_asym: da,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ModelMetrics {
        model: name.to_string(),
        n: sample.len(),
        levels,
        exceedance: exceedance_curve(sample, thresholds)?,
        wasserstein: None,
    })
}

/// Metrics for every model, in the given order. A sample truth adds
/// Wasserstein distances and truth VaR/TVaR; a scalar truth adds the three
/// deviation metrics per level.
pub fn build_risk_report(
    models: &[(String, Vec<f64>)],
    truth: &Truth,
    alphas: &[f64],
    thresholds: &[f64],
    over_weight: f64,
) -> Result<RiskReport> {
    if models.is_empty() {
        return Err(Error::config("risk report needs at least one model"));
    }
    for &a in alphas {
        check_alpha(a)?;
    }
    let mut seen = BTreeMap::new();
    for (name, _) in models {
        if seen.insert(name.as_str(), ()).is_some() {
            return Err(Error::config(format!("duplicate model name {name:?}")));
        }
    }
    let scalar = match truth {
        Truth::Scalar(y) => {
            if !y.is_finite() {
                return Err(Error::data(format!("true damage must be finite, got {y}")));
            }
            Some((*y, over_weight))
        }
        Truth::Sample(_) => None,
    };
    if scalar.is_some() && !(over_weight > 1.0) {
        return Err(Error::config(format!("over-weight must exceed 1, got {over_weight}")));
    }
    let truth_block = match truth {
        Truth::Sample(s) => Some(sample_metrics("truth", s, alphas, thresholds, None)?),
        Truth::Scalar(_) => None,
    };
    let mut blocks = Vec::with_capacity(models.len());
    for (name, sample) in models {
        let mut m = sample_metrics(name, sample, alphas, thresholds, scalar)?;
        if let Truth::Sample(t) = truth {
            m.wasserstein = Some(wasserstein_1d(sample, t)?);
        }
        blocks.push(m);
    }
    Ok(RiskReport {
        alphas: alphas.to_vec(),
        thresholds: thresholds.to_vec(),
        over_weight,
        true_damage: scalar.map(|(y, _)| y),
        truth: truth_block,
        models: blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn var_examples() {
        assert_eq!(var(&[7.0; 9], 0.3).unwrap(), 7.0);
        assert_eq!(var(&[40.0, 10.0, 30.0, 20.0], 0.5).unwrap(), 25.0);
        let ramp: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert!((var(&ramp, 0.99).unwrap() - 990.01).abs() < 1e-9);
        assert!(var(&ramp, 0.0).is_err());
        assert!(var(&ramp, 1.0).is_err());
        assert!(var(&[], 0.5).is_err());
    }

    #[test]
    fn tvar_examples() {
        let t = tvar(&[3.0; 4], 0.9).unwrap();
        assert_eq!(t, Tvar { value: 3.0, fallback: true });
        let t = tvar(&[1.0, 2.0, 3.0, 4.0, 100.0], 0.5).unwrap();
        assert_eq!(t, Tvar { value: 52.0, fallback: false });
    }

    #[test]
    fn exceedance_examples() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(exceedance_curve(&s, &[0.0, 2.5, 4.0, 5.0]).unwrap(), vec![1.0, 0.5, 0.0, 0.0]);
        assert!(exceedance_curve(&s, &[2.0, 1.0]).is_err());
        assert!(exceedance_curve(&s, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn wasserstein_examples() {
        assert_eq!(wasserstein_1d(&[1.0, 5.0], &[5.0, 1.0]).unwrap(), 0.0);
        assert_eq!(wasserstein_1d(&[2.0], &[7.5]).unwrap(), 5.5);
        assert_eq!(wasserstein_1d(&[0.0, 1.0], &[0.0, 0.0]).unwrap(), 0.5);
        // {0,1} against {0,0,1,1} describe the same distribution.
        assert_eq!(wasserstein_1d(&[0.0, 1.0], &[0.0, 0.0, 1.0, 1.0]).unwrap(), 0.0);
        // {0} vs {0,3}: half the mass moves by 3.
        assert!((wasserstein_1d(&[0.0], &[0.0, 3.0]).unwrap() - 1.5).abs() < 1e-15);
        assert!(wasserstein_1d(&[], &[1.0]).is_err());
    }

    #[test]
    fn deviation_examples() {
        assert_eq!(dev_sym(5.0, 5.0), 0.0);
        assert_eq!(dev_sym(10.0, 8.0), 2.0);
        assert_eq!(dev_sym(8.0, 10.0), 2.0);
        assert_eq!(dev_weighted(3.0, 3.0, 2.0).unwrap(), 0.0);
        assert_eq!(dev_weighted(8.0, 10.0, 4.0).unwrap(), 4.0);
        assert_eq!(dev_weighted(10.0, 8.0, 7.0).unwrap(), 2.0);
        assert!(dev_weighted(10.0, 8.0, 1.0).is_err());
        assert_eq!(dev_asym(4.0, 4.0, 0.9).unwrap(), 0.0);
        assert!((dev_asym(10.0, 8.0, 0.95).unwrap() - 1.9).abs() < 1e-12);
        assert!((dev_asym(8.0, 10.0, 0.95).unwrap() - 0.1).abs() < 1e-12);
        assert!(dev_asym(8.0, 10.0, 1.5).is_err());
    }

    #[test]
    fn report_against_itself_and_shifted() {
        let truth: Vec<f64> = (0..50).map(|i| 1.0 + (i as f64).sqrt()).collect();
        let shifted: Vec<f64> = truth.iter().map(|x| x + 2.5).collect();
        let models = vec![("same".to_string(), truth.clone()), ("shift".to_string(), shifted)];
        let th = default_thresholds(&[&truth], 5);
        let r = build_risk_report(&models, &Truth::Sample(truth.clone()), &DEFAULT_ALPHAS, &th, 2.0)
            .unwrap();
        assert_eq!(r.model("same").unwrap().wasserstein, Some(0.0));
        assert!((r.model("shift").unwrap().wasserstein.unwrap() - 2.5).abs() < 1e-12);
        assert_eq!(r.truth.as_ref().unwrap().levels, r.model("same").unwrap().levels);
        assert_eq!(r.exceedance_rows().len(), 3 * th.len());

        let v95 = var(&truth, 0.95).unwrap();
        let r = build_risk_report(&models[..1], &Truth::Scalar(v95), &[0.95], &th, 2.0).unwrap();
        let l = &r.models[0].levels[0];
        assert_eq!((l.dev_sym, l.dev_weighted, l.dev_asym), (Some(0.0), Some(0.0), Some(0.0)));
        assert!(build_risk_report(&[], &Truth::Scalar(1.0), &[0.9], &th, 2.0).is_err());
    }

    fn brute_w1(a: &[f64], b: &[f64]) -> f64 {
        // Riemann sum of |F⁻¹ − G⁻¹| on a grid finer than both step widths.
        let (a, b) = (sorted(a), sorted(b));
        let k = a.len() * b.len() * 8;
        (0..k)
            .map(|i| {
                let u = (i as f64 + 0.5) / k as f64;
                let qa = a[((u * a.len() as f64).floor() as usize).min(a.len() - 1)];
                let qb = b[((u * b.len() as f64).floor() as usize).min(b.len() - 1)];
                (qa - qb).abs()
            })
            .sum::<f64>()
            / k as f64
    }

    proptest! {
        #[test]
        fn var_monotone_and_tvar_dominates(s in prop::collection::vec(-1e3f64..1e3, 1..60)) {
            let mut prev = f64::NEG_INFINITY;
            for k in 1..20 {
                let a = k as f64 / 20.0;
                let v = var(&s, a).unwrap();
                prop_assert!(v >= prev);
                prop_assert!(tvar(&s, a).unwrap().value >= v);
                prev = v;
            }
        }

        #[test]
        fn w1_axioms(
            a in prop::collection::vec(-50f64..50.0, 1..12),
            b in prop::collection::vec(-50f64..50.0, 1..12),
            c in prop::collection::vec(-50f64..50.0, 1..12),
            shift in -20f64..20.0,
        ) {
            let ab = wasserstein_1d(&a, &b).unwrap();
            prop_assert!((ab - wasserstein_1d(&b, &a).unwrap()).abs() < 1e-12);
            let ac = wasserstein_1d(&a, &c).unwrap();
            let cb = wasserstein_1d(&c, &b).unwrap();
            prop_assert!(ab <= ac + cb + 1e-9);
            let moved: Vec<f64> = a.iter().map(|x| x + shift).collect();
            prop_assert!((wasserstein_1d(&moved, &a).unwrap() - shift.abs()).abs() < 1e-9);
            prop_assert!((ab - brute_w1(&a, &b)).abs() < 1e-9 * (1.0 + ab));
        }

        #[test]
        fn exceedance_is_one_minus_cdf(
            s in prop::collection::vec(-10f64..10.0, 1..40),
            t in prop::collection::vec(-12f64..12.0, 1..10),
        ) {
            let mut t = t;
            t.sort_by(f64::total_cmp);
            t.dedup();
            let curve = exceedance_curve(&s, &t).unwrap();
            for (p, &th) in curve.iter().zip(&t) {
                let cdf = s.iter().filter(|&&x| x <= th).count() as f64 / s.len() as f64;
                prop_assert!((p - (1.0 - cdf)).abs() < 1e-15);
            }
            prop_assert!(curve.windows(2).all(|w| w[1] <= w[0]));
        }

        #[test]
        fn pinball_mirror(y in -100f64..100.0, v in -100f64..100.0, a in 0.01f64..0.99) {
            let lhs = dev_asym(y, v, a).unwrap();
            let rhs = dev_asym(v, y, 1.0 - a).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-9);
            prop_assert!(lhs >= 0.0);
        }
    }
}

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use libm::lgamma as ln_gamma;

use crate::error::{Error, Result};

/// Gamma priors use the shape–rate convention (mean `shape / rate`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "lowercase")]
pub enum Prior {
    Gamma { shape: f64, rate: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl Prior {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Prior::Gamma { shape, rate } => {
                if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
                    return Err(Error::config(format!(
                        "gamma prior needs positive shape and rate, got ({shape}, {rate})"
                    )));
                }
            }
            Prior::Uniform { lo, hi } => {
                if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                    return Err(Error::config(format!(
                        "uniform prior needs lo < hi, got ({lo}, {hi})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Log density; `-inf` outside the support.
    pub fn log_density(&self, x: f64) -> f64 {
        match *self {
            Prior::Gamma { shape, rate } => {
                if !(x > 0.0) || !x.is_finite() {
                    return f64::NEG_INFINITY;
                }
                shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
            }
            Prior::Uniform { lo, hi } => {
                if (lo..=hi).contains(&x) {
                    -(hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Prior::Gamma { shape, rate } => Gamma::new(shape, 1.0 / rate)
                .expect("validated gamma prior")
                .sample(rng),
            Prior::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        }
    }
}

/// Priors keyed by parameter name (`gamma`, `beta_<hazard>`, `sigma2`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub priors: BTreeMap<String, Prior>,
}

impl PriorSpec {
    /// `β_j ~ Gam(5, 1)` for each hazard, `γ ~ U(5, 15)`, `σ² ~ Gam(2, 0.5)`.
    pub fn tropical_cyclone<S: AsRef<str>>(hazards: &[S]) -> Self {
        let mut priors = BTreeMap::new();
        priors.insert("gamma".to_string(), Prior::Uniform { lo: 5.0, hi: 15.0 });
        for h in hazards {
            priors.insert(
                format!("beta_{}", h.as_ref()),
                Prior::Gamma {
                    shape: 5.0,
                    rate: 1.0,
                },
            );
        }
        priors.insert(
            "sigma2".to_string(),
            Prior::Gamma {
                shape: 2.0,
                rate: 0.5,
            },
        );
        Self { priors }
    }

    pub fn get(&self, name: &str) -> Result<&Prior> {
        self.priors
            .get(name)
            .ok_or_else(|| Error::config(format!("no prior for parameter {name:?}")))
    }

    /// Priors aligned with `names`.
    pub fn aligned(&self, names: &[String]) -> Result<Vec<Prior>> {
        names
            .iter()
            .map(|n| {
                let p = *self.get(n)?;
                p.validate()?;
                Ok(p)
            })
            .collect()
    }
}

/// Sum of prior log densities of `theta` (aligned with `names`).
pub fn log_prior(theta: &[f64], names: &[String], priors: &PriorSpec) -> Result<f64> {
    if theta.len() != names.len() {
        return Err(Error::config(format!(
            "{} values for {} parameter names",
            theta.len(),
            names.len()
        )));
    }
    Ok(priors
        .aligned(names)?
        .iter()
        .zip(theta)
        .map(|(p, x)| p.log_density(*x))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn examples() {
        let spec = PriorSpec::tropical_cyclone(&["wind", "precip"]);
        let g = names(&["gamma"]);
        assert_eq!(log_prior(&[4.9], &g, &spec).unwrap(), f64::NEG_INFINITY);
        assert!((log_prior(&[7.0], &g, &spec).unwrap() - (0.1f64).ln()).abs() < 1e-15);
        let b = names(&["beta_wind"]);
        let oracle = 4.0 * 5f64.ln() - 5.0 - 24f64.ln();
        assert!((log_prior(&[5.0], &b, &spec).unwrap() - oracle).abs() < 1e-12);
        assert!((oracle - (-1.740_302)).abs() < 1e-6);
        assert_eq!(log_prior(&[-0.1], &b, &spec).unwrap(), f64::NEG_INFINITY);
        assert!(log_prior(&[1.0], &names(&["beta_surge"]), &spec).is_err());
    }

    #[test]
    fn gamma_density_integrates_to_one() {
        // Shape–rate Gam(2, 0.5): trapezoid over [0, 80].
        let p = Prior::Gamma {
            shape: 2.0,
            rate: 0.5,
        };
        let h = 1e-3;
        let total: f64 = (1..80_000).map(|i| p.log_density(i as f64 * h).exp() * h).sum();
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn prior_draws_have_prior_means() {
        let mut rng = rng_from_seed(2);
        let g = Prior::Gamma {
            shape: 2.0,
            rate: 0.5,
        };
        let n = 40_000;
        let m: f64 = (0..n).map(|_| g.sample(&mut rng)).sum::<f64>() / n as f64;
        // mean 4, sd 2√2
        assert!((m - 4.0).abs() < 4.0 * 8f64.sqrt() / (n as f64).sqrt());
        let u = Prior::Uniform { lo: 5.0, hi: 15.0 };
        assert!((0..1000).all(|_| (5.0..15.0).contains(&u.sample(&mut rng))));
    }

    #[test]
    fn validation() {
        assert!(Prior::Gamma { shape: 0.0, rate: 1.0 }.validate().is_err());
        assert!(Prior::Uniform { lo: 2.0, hi: 2.0 }.validate().is_err());
        let json = serde_json::to_string(&Prior::Uniform { lo: 5.0, hi: 15.0 }).unwrap();
        assert_eq!(json, r#"{"dist":"uniform","lo":5.0,"hi":15.0}"#);
    }
}

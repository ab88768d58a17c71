use std::fmt;
use std::sync::Arc;

use super::priors::{Prior, PriorSpec};
use super::sampler::LogDensity;
use crate::damage::{log_normal_obs_density, EventCatalog};
use crate::error::{Error, Result};
use crate::par;
use crate::rng::StreamRng;
use crate::vulnerability::{sigmoid, LogisticVulnParams, VulnerabilityModel};

/// Which hazards enter the logistic vulnerability.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelFamily {
    /// All catalog hazards.
    Multi,
    /// A single named hazard (`wind-only`, `precip-only`, ...).
    Single(String),
}

impl ModelFamily {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "multi" => Ok(Self::Multi),
            _ => match s.strip_suffix("-only") {
                Some(h) if !h.is_empty() => Ok(Self::Single(h.to_string())),
                _ => Err(Error::config(format!(
                    "unknown model family {s:?} (expected multi or <hazard>-only)"
                ))),
            },
        }
    }

    /// Hazards used by this family, in catalog order.
    pub fn hazards(&self, catalog_hazards: &[String]) -> Result<Vec<String>> {
        match self {
            Self::Multi => Ok(catalog_hazards.to_vec()),
            Self::Single(h) => {
                if catalog_hazards.contains(h) {
                    Ok(vec![h.clone()])
                } else {
                    Err(Error::data(format!(
                        "hazard {h:?} not in catalog hazards {catalog_hazards:?}"
                    )))
                }
            }
        }
    }

    /// Parameter names: `gamma`, `beta_<h>` per hazard, `sigma2`.
    pub fn param_names(&self, catalog_hazards: &[String]) -> Result<Vec<String>> {
        let mut names = vec!["gamma".to_string()];
        names.extend(self.hazards(catalog_hazards)?.iter().map(|h| format!("beta_{h}")));
        names.push("sigma2".to_string());
        Ok(names)
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Multi => f.write_str("multi"),
            Self::Single(h) => write!(f, "{h}-only"),
        }
    }
}

struct EventData {
    log_damage: f64,
    /// Cell-major intensities of the selected hazards.
    hazards: Vec<f64>,
}

/// Posterior of `(γ, β, σ²)` given a catalog with fixed exposure and hazards.
///
/// Parameter order is `[gamma, beta_<h>..., sigma2]`.
pub struct DamagePosterior {
    names: Vec<String>,
    hazards: Vec<String>,
    priors: Vec<Prior>,
    exposure: Vec<f64>,
    events: Vec<EventData>,
}

/// Log-posterior plus per-event log expected damages, reused when a
/// proposal leaves `(γ, β)` unchanged.
#[derive(Debug, Clone)]
pub struct DamageEval {
    pub log_posterior: f64,
    pub log_means: Option<Arc<Vec<f64>>>,
}

impl DamagePosterior {
    pub fn new(catalog: &EventCatalog, family: &ModelFamily, priors: &PriorSpec) -> Result<Self> {
        let hazards = family.hazards(catalog.hazard_names())?;
        let names = family.param_names(catalog.hazard_names())?;
        let priors = priors.aligned(&names)?;
        let columns: Vec<usize> = hazards
            .iter()
            .map(|h| catalog.hazard_names().iter().position(|n| n == h).expect("checked"))
            .collect();
        let k = columns.len();
        let n_cells = catalog.grid().len();
        let mut events = Vec::with_capacity(catalog.len());
        for e in catalog.events() {
            let d = e.observed_damage.ok_or_else(|| {
                Error::data(format!("event {:?} has no observed damage", e.event_id))
            })?;
            let mut flat = vec![0.0; n_cells * k];
            for (j, col) in columns.iter().enumerate() {
                for (i, v) in e.hazards.values(*col).iter().enumerate() {
                    flat[i * k + j] = *v;
                }
            }
            events.push(EventData {
                log_damage: d.ln(),
                hazards: flat,
            });
        }
        if events.is_empty() {
            return Err(Error::data("catalog has no observed events to fit"));
        }
        Ok(Self {
            names,
            hazards,
            priors,
            exposure: catalog.exposure().values().to_vec(),
            events,
        })
    }

    pub fn hazards(&self) -> &[String] {
        &self.hazards
    }

    pub fn n_events(&self) -> usize {
        self.events.len()
    }

    /// The vulnerability model encoded by `theta`.
    pub fn vulnerability(&self, theta: &[f64]) -> VulnerabilityModel {
        let k = self.hazards.len();
        VulnerabilityModel::Logistic {
            params: LogisticVulnParams {
                gamma: theta[0],
                beta: theta[1..=k].to_vec(),
            },
            hazards: self.hazards.clone(),
        }
    }

    pub fn log_prior(&self, theta: &[f64]) -> f64 {
        self.priors
            .iter()
            .zip(theta)
            .map(|(p, x)| p.log_density(*x))
            .sum()
    }

    /// Per-event `log Σ_s E(s) V(H(s))`.
    pub fn log_means(&self, theta: &[f64]) -> Vec<f64> {
        let k = self.hazards.len();
        let gamma = theta[0];
        let beta = &theta[1..=k];
        par::map_slice(&self.events, |ev| {
            let total: f64 = self
                .exposure
                .iter()
                .zip(ev.hazards.chunks_exact(k))
                .map(|(e, h)| {
                    let score: f64 = beta.iter().zip(h).map(|(b, x)| b * x).sum();
                    e * sigmoid(score - gamma)
                })
                .sum();
            total.ln()
        })
    }

    pub fn log_likelihood_from_means(&self, log_means: &[f64], sigma2: f64) -> f64 {
        self.events
            .iter()
            .zip(log_means)
            .map(|(ev, m)| {
                if m.is_finite() {
                    log_normal_obs_density(ev.log_damage, *m, sigma2)
                } else {
                    f64::NEG_INFINITY
                }
            })
            .sum()
    }

    pub fn log_likelihood(&self, theta: &[f64]) -> f64 {
        let sigma2 = theta[theta.len() - 1];
        self.log_likelihood_from_means(&self.log_means(theta), sigma2)
    }
}

impl LogDensity for DamagePosterior {
    type Eval = DamageEval;

    fn param_names(&self) -> &[String] {
        &self.names
    }

    fn evaluate(&self, theta: &[f64], previous: Option<(&[f64], &DamageEval)>) -> DamageEval {
        let lp = self.log_prior(theta);
        if !lp.is_finite() {
            return DamageEval {
                log_posterior: f64::NEG_INFINITY,
                log_means: None,
            };
        }
        let k = self.hazards.len();
        let sigma2 = theta[k + 1];
        let log_means = match previous {
            Some((prev, eval)) if prev[..=k] == theta[..=k] && eval.log_means.is_some() => {
                eval.log_means.clone().expect("checked")
            }
            _ => Arc::new(self.log_means(theta)),
        };
        let ll = self.log_likelihood_from_means(&log_means, sigma2);
        DamageEval {
            log_posterior: lp + ll,
            log_means: Some(log_means),
        }
    }

    fn log_density(eval: &DamageEval) -> f64 {
        if eval.log_posterior.is_nan() {
            f64::NEG_INFINITY
        } else {
            eval.log_posterior
        }
    }

    fn draw_initial(&self, rng: &mut StreamRng) -> Option<Vec<f64>> {
        Some(self.priors.iter().map(|p| p.sample(rng)).collect())
    }
}

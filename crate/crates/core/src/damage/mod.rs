//! Aggregated damage, the log-normal observation model and synthetic catalogs.

mod synthetic;

pub use synthetic::{
    generate_synthetic_catalog, ExposureGenSpec, GridSpec, HazardGenSpec, HoldoutTruth,
    NormalizationMode, RidgeSpec, ScenarioSpec, SyntheticTruth, VulnerabilityLevel,
};

use std::collections::HashSet;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grids::{ExposureField, HazardFieldSet, HazardScale, SpatialGrid};
use crate::rng::rng_from_seed;
use crate::vulnerability::{vulnerability_surface, VulnerabilityModel};

/// Variance of the log-damage error `ε ~ N(0, σ²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorParams {
    variance: f64,
}

impl ErrorParams {
    pub fn new(variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::config(format!(
                "error variance must be positive, got {variance}"
            )));
        }
        Ok(Self { variance })
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub event_id: String,
    pub hazards: HazardFieldSet,
    /// `None` for prediction targets.
    pub observed_damage: Option<f64>,
}

/// Events sharing one grid, one exposure surface and one hazard
/// normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct EventCatalog {
    exposure: ExposureField,
    hazard_names: Vec<String>,
    normalization: Option<Vec<HazardScale>>,
    events: Vec<EventRecord>,
}

impl EventCatalog {
    pub fn new(
        exposure: ExposureField,
        hazard_names: Vec<String>,
        normalization: Option<Vec<HazardScale>>,
        events: Vec<EventRecord>,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &events {
            if !seen.insert(e.event_id.as_str()) {
                return Err(Error::data(format!("duplicate event id {:?}", e.event_id)));
            }
            if e.event_id.is_empty() || e.event_id.contains(['/', '\\', ',']) {
                return Err(Error::data(format!(
                    "event id {:?} must be non-empty and free of '/', '\\' and ','",
                    e.event_id
                )));
            }
            if e.hazards.grid() != exposure.grid() {
                return Err(Error::data(format!(
                    "event {:?} is on a different grid than the catalog",
                    e.event_id
                )));
            }
            if e.hazards.names() != hazard_names.as_slice() {
                return Err(Error::data(format!(
                    "event {:?} has hazards {:?}, catalog expects {:?}",
                    e.event_id,
                    e.hazards.names(),
                    hazard_names
                )));
            }
            if e.hazards.normalization() != normalization.as_deref() {
                return Err(Error::data(format!(
                    "event {:?} uses different hazard normalization than the catalog",
                    e.event_id
                )));
            }
            if let Some(d) = e.observed_damage {
                if !(d > 0.0 && d.is_finite()) {
                    return Err(Error::data(format!(
                        "observed damage of {:?} must be positive, got {d}",
                        e.event_id
                    )));
                }
            }
        }
        Ok(Self {
            exposure,
            hazard_names,
            normalization,
            events,
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        self.exposure.grid()
    }

    pub fn exposure(&self) -> &ExposureField {
        &self.exposure
    }

    pub fn hazard_names(&self) -> &[String] {
        &self.hazard_names
    }

    pub fn normalization(&self) -> Option<&[HazardScale]> {
        self.normalization.as_deref()
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn event(&self, id: &str) -> Option<&EventRecord> {
        self.events.iter().find(|e| e.event_id == id)
    }

    /// Catalog restricted to events with an observed damage.
    pub fn observed(&self) -> Self {
        Self {
            exposure: self.exposure.clone(),
            hazard_names: self.hazard_names.clone(),
            normalization: self.normalization.clone(),
            events: self
                .events
                .iter()
                .filter(|e| e.observed_damage.is_some())
                .cloned()
                .collect(),
        }
    }
}

/// `Σ_s E(s) · V(H(s))`.
pub fn expected_damage(
    exposure: &ExposureField,
    fields: &HazardFieldSet,
    model: &VulnerabilityModel,
) -> Result<f64> {
    if exposure.grid() != fields.grid() {
        return Err(Error::data("exposure and hazard fields are on different grids"));
    }
    let fractions = vulnerability_surface(model, fields)?;
    Ok(exposure
        .values()
        .iter()
        .zip(&fractions)
        .map(|(e, f)| e * f)
        .sum())
}

/// `expected · exp(ε)`, `ε ~ N(0, σ²)`, using `rng`.
pub fn simulate_damage_with<R: Rng + ?Sized>(expected: f64, err: &ErrorParams, rng: &mut R) -> Result<f64> {
    if !(expected > 0.0 && expected.is_finite()) {
        return Err(Error::numerical(format!(
            "expected damage must be positive to apply log-normal error, got {expected}"
        )));
    }
    let eps: f64 = rng.sample(StandardNormal);
    Ok(expected * (err.sd() * eps).exp())
}

pub fn simulate_damage(expected: f64, err: &ErrorParams, seed: u64) -> Result<f64> {
    simulate_damage_with(expected, err, &mut rng_from_seed(seed))
}

/// Normal log-density of `log D` around `log μ` with variance `σ²`.
#[inline]
pub fn log_normal_obs_density(log_damage: f64, log_mean: f64, variance: f64) -> f64 {
    let r = log_damage - log_mean;
    -0.5 * (2.0 * std::f64::consts::PI * variance).ln() - 0.5 * r * r / variance
}

/// `Σ_i log N(log D_i; log E[D_i], σ²)` over all events.
pub fn log_likelihood(
    catalog: &EventCatalog,
    model: &VulnerabilityModel,
    err: &ErrorParams,
) -> Result<f64> {
    let mut total = 0.0;
    for e in catalog.events() {
        let d = e.observed_damage.ok_or_else(|| {
            Error::data(format!("event {:?} has no observed damage", e.event_id))
        })?;
        let mu = expected_damage(catalog.exposure(), &e.hazards, model)?;
        if !(mu > 0.0) {
            return Err(Error::numerical(format!(
                "expected damage of event {:?} is {mu}; log-normal mean undefined",
                e.event_id
            )));
        }
        total += log_normal_obs_density(d.ln(), mu.ln(), err.variance());
    }
    Ok(total)
}

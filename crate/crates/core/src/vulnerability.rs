//! Vulnerability functions: hazard intensity to fractional loss in `[0, 1]`.

use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::error::{ensure_finite, Error, Result};
use crate::grids::HazardFieldSet;

/// Emanuel-type power curve parameters (physical wind units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmanuelParams {
    pub v_thresh: f64,
    pub v_half: f64,
}

impl EmanuelParams {
    pub fn new(v_thresh: f64, v_half: f64) -> Result<Self> {
        let p = Self { v_thresh, v_half };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("v_thresh", self.v_thresh)?;
        ensure_finite("v_half", self.v_half)?;
        if !(self.v_thresh >= 0.0 && self.v_half > self.v_thresh) {
            return Err(Error::config(format!(
                "Emanuel parameters need v_half > v_thresh >= 0, got v_thresh={} v_half={}",
                self.v_thresh, self.v_half
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormalVulnParams {
    /// Log-scale median.
    pub eta: f64,
    /// Dispersion.
    pub beta: f64,
}

impl LogNormalVulnParams {
    pub fn new(eta: f64, beta: f64) -> Result<Self> {
        let p = Self { eta, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("eta", self.eta)?;
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::config(format!(
                "log-normal dispersion must be positive, got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

/// Logistic multi-hazard vulnerability `1 / (1 + exp(γ − βᵀh))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticVulnParams {
    pub gamma: f64,
    pub beta: Vec<f64>,
}

impl LogisticVulnParams {
    pub fn new(gamma: f64, beta: Vec<f64>) -> Result<Self> {
        let p = Self { gamma, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("gamma", self.gamma)?;
        for b in &self.beta {
            ensure_finite("beta", *b)?;
        }
        Ok(())
    }
}

/// One of the three vulnerability families. Single-hazard families name the
/// hazard they consume; the logistic family names one hazard per coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum VulnerabilityModel {
    Emanuel {
        params: EmanuelParams,
        hazard: String,
    },
    Lognormal {
        params: LogNormalVulnParams,
        hazard: String,
    },
    Logistic {
        params: LogisticVulnParams,
        hazards: Vec<String>,
    },
}

impl VulnerabilityModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            VulnerabilityModel::Emanuel { params, .. } => params.validate(),
            VulnerabilityModel::Lognormal { params, .. } => params.validate(),
            VulnerabilityModel::Logistic { params, hazards } => {
                params.validate()?;
                if hazards.len() != params.beta.len() {
                    return Err(Error::config(format!(
                        "logistic model has {} coefficients for {} hazard labels",
                        params.beta.len(),
                        hazards.len()
                    )));
                }
                Ok(())
            }
        }
    }

    /// Hazard labels this model reads, in coefficient order.
    pub fn hazards(&self) -> Vec<&str> {
        match self {
            VulnerabilityModel::Emanuel { hazard, .. }
            | VulnerabilityModel::Lognormal { hazard, .. } => vec![hazard.as_str()],
            VulnerabilityModel::Logistic { hazards, .. } => {
                hazards.iter().map(String::as_str).collect()
            }
        }
    }
}

pub fn emanuel_fraction(v_o: f64, p: &EmanuelParams) -> Result<f64> {
    ensure_finite("wind speed", v_o)?;
    Ok(emanuel_unchecked(v_o, p))
}

#[inline]
fn emanuel_unchecked(v_o: f64, p: &EmanuelParams) -> f64 {
    let v = (v_o - p.v_thresh).max(0.0) / (p.v_half - p.v_thresh);
    let v3 = v * v * v;
    v3 / (1.0 + v3)
}

/// Standard normal CDF via `erfc`, accurate to ~1e-15 absolute.
pub fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub fn lognormal_fraction(h: f64, p: &LogNormalVulnParams) -> Result<f64> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::data(format!(
            "log-normal vulnerability needs a positive intensity, got {h}"
        )));
    }
    Ok(standard_normal_cdf((h.ln() - p.eta) / p.beta))
}

/// `1 / (1 + exp(−x))` without exponentiating a large positive number.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logistic_fraction(h: &[f64], p: &LogisticVulnParams) -> Result<f64> {
    if h.len() != p.beta.len() {
        return Err(Error::data(format!(
            "intensity vector has {} entries but model has {} coefficients",
            h.len(),
            p.beta.len()
        )));
    }
    let score: f64 = p.beta.iter().zip(h).map(|(b, x)| b * x).sum();
    Ok(sigmoid(score - p.gamma))
}

/// Per-cell fractional loss for one event.
pub fn vulnerability_surface(model: &VulnerabilityModel, fields: &HazardFieldSet) -> Result<Vec<f64>> {
    model.validate()?;
    match model {
        VulnerabilityModel::Emanuel { params, hazard } => Ok(fields
            .hazard(hazard)?
            .iter()
            .map(|v| emanuel_unchecked(*v, params))
            .collect()),
        VulnerabilityModel::Lognormal { params, hazard } => fields
            .hazard(hazard)?
            .iter()
            .map(|h| lognormal_fraction(*h, params))
            .collect(),
        VulnerabilityModel::Logistic { params, hazards } => {
            let columns = hazards
                .iter()
                .map(|name| fields.hazard(name))
                .collect::<Result<Vec<_>>>()?;
            let n = fields.grid().len();
            Ok((0..n)
                .map(|i| {
                    let score: f64 = params
                        .beta
                        .iter()
                        .zip(&columns)
                        .map(|(b, col)| b * col[i])
                        .sum();
                    sigmoid(score - params.gamma)
                })
                .collect())
        }
    }
}

//! Posterior predictive damage for new events and deterministic baselines.

use rand::seq::index::sample as sample_indices;
use serde::{Deserialize, Serialize};

use crate::damage::{simulate_damage_with, ErrorParams};
use crate::error::{Error, Result};
use crate::grids::{denormalize_hazards, ExposureField, HazardFieldSet, HazardScale};
use crate::inference::PosteriorSamples;
use crate::par;
use crate::risk::quantile_sorted;
use crate::rng::stream;
use crate::vulnerability::{emanuel_fraction, sigmoid, EmanuelParams};

/// What a new event must agree with: the training hazard labels and the
/// normalization constants the training catalog was scaled with.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingFrame {
    pub hazard_names: Vec<String>,
    pub normalization: Option<Vec<HazardScale>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveSample {
    pub event_id: String,
    pub damages: Vec<f64>,
    pub posterior_hash: String,
    pub seed: u64,
}

/// Hazards named by `beta_<h>` parameters, in parameter order.
fn model_hazards(param_names: &[String]) -> Result<Vec<String>> {
    let n = param_names.len();
    if n < 3 || param_names[0] != "gamma" || param_names[n - 1] != "sigma2" {
        return Err(Error::data(format!(
            "posterior parameters {param_names:?} are not [gamma, beta_*, sigma2]"
        )));
    }
    param_names[1..n - 1]
        .iter()
        .map(|p| {
            p.strip_prefix("beta_")
                .map(str::to_string)
                .ok_or_else(|| Error::data(format!("unexpected parameter {p:?}")))
        })
        .collect()
}

fn check_frame(frame: &TrainingFrame, hazards: &HazardFieldSet, used: &[String]) -> Result<()> {
    if hazards.names() != frame.hazard_names.as_slice() {
        return Err(Error::data(format!(
            "event hazards {:?} do not match training hazards {:?}",
            hazards.names(),
            frame.hazard_names
        )));
    }
    if let Some(h) = used.iter().find(|h| !frame.hazard_names.contains(h)) {
        return Err(Error::data(format!("posterior uses hazard {h:?} absent from the event")));
    }
    match (&frame.normalization, hazards.normalization()) {
        (None, None) => Ok(()),
        (Some(train), Some(event)) if train.as_slice() == event => Ok(()),
        (Some(_), None) => Err(Error::data(
            "training catalog is normalized but the event carries no normalization constants",
        )),
        (None, Some(_)) => Err(Error::data(
            "event is normalized but the training catalog is in raw units",
        )),
        _ => Err(Error::data(
            "event normalization constants differ from the training catalog's",
        )),
    }
}

/// Indices of the pooled draws to use: all of them, or a reproducible
/// subsample of `max_draws` kept in pooled order.
pub fn select_draws(total: usize, max_draws: Option<usize>, seed: u64) -> Vec<usize> {
    match max_draws {
        Some(k) if k < total => {
            let mut idx = sample_indices(&mut stream(seed, "subsample", 0), total, k).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..total).collect(),
    }
}

/// Composition sampling: for every selected posterior draw `(γ, β, σ²)`,
/// expected damage `Σ E·V` times `exp(ε)`, `ε ~ N(0, σ²)`.
///
/// Expected damages are computed in parallel; the error draws come from one
/// seeded stream consumed in draw order.
pub fn posterior_predict(
    posterior: &PosteriorSamples,
    frame: &TrainingFrame,
    exposure: &ExposureField,
    event_id: &str,
    hazards: &HazardFieldSet,
    seed: u64,
    max_draws: Option<usize>,
) -> Result<PredictiveSample> {
    let used = model_hazards(&posterior.param_names)?;
    check_frame(frame, hazards, &used)?;
    if exposure.grid() != hazards.grid() {
        return Err(Error::data("exposure and event hazards are on different grids"));
    }
    let pooled = posterior.pooled();
    if pooled.is_empty() {
        return Err(Error::data("posterior has no post-burn-in draws"));
    }
    let k = used.len();
    let n_cells = exposure.values().len();
    let mut flat = vec![0.0; n_cells * k];
    for (j, h) in used.iter().enumerate() {
        for (i, v) in hazards.hazard(h)?.iter().enumerate() {
            flat[i * k + j] = *v;
        }
    }
    let chosen: Vec<&[f64]> = select_draws(pooled.len(), max_draws, seed)
        .into_iter()
        .map(|i| pooled[i])
        .collect();
    let expected = par::map_slice(&chosen, |theta| {
        let (gamma, beta) = (theta[0], &theta[1..=k]);
        exposure
            .values()
            .iter()
            .zip(flat.chunks_exact(k))
            .map(|(e, h)| {
                let score: f64 = beta.iter().zip(h).map(|(b, x)| b * x).sum();
                e * sigmoid(score - gamma)
            })
            .sum::<f64>()
    });
    let mut rng = stream(seed, "predict", 0);
    let damages = chosen
        .iter()
        .zip(expected)
        .map(|(theta, mu)| {
            let err = ErrorParams::new(theta[k + 1])?;
            simulate_damage_with(mu, &err, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PredictiveSample {
        event_id: event_id.to_string(),
        damages,
        posterior_hash: posterior.provenance.config_hash.clone(),
        seed,
    })
}

/// `n` draws of `expected · exp(ε)`, `ε ~ N(0, σ²)`: the damage
/// distribution of an event under known parameters.
pub fn truth_damage_sample(expected: f64, sigma2: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    let err = ErrorParams::new(sigma2)?;
    let mut rng = stream(seed, "truth", 0);
    (0..n).map(|_| simulate_damage_with(expected, &err, &mut rng)).collect()
}

/// A published Emanuel wind-damage curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterministicBaseline {
    pub label: String,
    pub params: EmanuelParams,
    /// Hazard holding wind speed in physical units.
    pub hazard: String,
}

impl DeterministicBaseline {
    pub fn baldwin() -> Self {
        Self::custom("baldwin", EmanuelParams { v_thresh: 25.0, v_half: 80.0 })
    }

    pub fn eberenz() -> Self {
        Self::custom("eberenz", EmanuelParams { v_thresh: 25.7, v_half: 84.7 })
    }

    pub fn custom(label: &str, params: EmanuelParams) -> Self {
        Self { label: label.to_string(), params, hazard: "wind".to_string() }
    }

    pub fn named(label: &str) -> Result<Self> {
        match label {
            "baldwin" => Ok(Self::baldwin()),
            "eberenz" => Ok(Self::eberenz()),
            _ => Err(Error::config(format!(
                "unknown baseline {label:?} (expected baldwin or eberenz, or give v_thresh/v_half)"
            ))),
        }
    }
}

/// `Σ_s E(s) · f_emanuel(wind(s))` on raw wind speeds. Normalized input is
/// mapped back with its stored constants first.
pub fn baseline_predict(
    baseline: &DeterministicBaseline,
    exposure: &ExposureField,
    hazards: &HazardFieldSet,
) -> Result<f64> {
    baseline.params.validate()?;
    if exposure.grid() != hazards.grid() {
        return Err(Error::data("exposure and event hazards are on different grids"));
    }
    if hazards.hazard_index(&baseline.hazard).is_none() {
        return Err(Error::data(format!(
            "baseline {:?} needs hazard {:?}, event has {:?}",
            baseline.label,
            baseline.hazard,
            hazards.names()
        )));
    }
    let raw = denormalize_hazards(hazards)?;
    let wind = raw.hazard(&baseline.hazard)?;
    let mut total = 0.0;
    for (e, v) in exposure.values().iter().zip(wind) {
        total += e * emanuel_fraction(*v, &baseline.params)?;
    }
    Ok(total)
}

/// Empirical CDF at `truth` with ties counted half: `(#less + #equal/2)/n`.
pub fn percentile_of_truth(sample: &[f64], truth: f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::data("empty predictive sample"));
    }
    let less = sample.iter().filter(|&&x| x < truth).count() as f64;
    let equal = sample.iter().filter(|&&x| x == truth).count() as f64;
    Ok((less + 0.5 * equal) / sample.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveSummary {
    pub event_id: String,
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub interval_50: [f64; 2],
    pub interval_90: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_damage: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub percentile_of_truth: Option<f64>,
    pub posterior_hash: String,
    pub seed: u64,
}

pub fn summarize_predictive(sample: &PredictiveSample, truth: Option<f64>) -> Result<PredictiveSummary> {
    if sample.damages.is_empty() {
        return Err(Error::data("empty predictive sample"));
    }
    let mut s = sample.damages.clone();
    s.sort_by(f64::total_cmp);
    let q = |p| quantile_sorted(&s, p);
    Ok(PredictiveSummary {
        event_id: sample.event_id.clone(),
        n: s.len(),
        mean: s.iter().sum::<f64>() / s.len() as f64,
        median: q(0.5),
        interval_50: [q(0.25), q(0.75)],
        interval_90: [q(0.05), q(0.95)],
        true_damage: truth,
        percentile_of_truth: truth.map(|t| percentile_of_truth(&sample.damages, t)).transpose()?,
        posterior_hash: sample.posterior_hash.clone(),
        seed: sample.seed,
    })
}

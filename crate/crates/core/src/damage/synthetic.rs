//! Synthetic event catalogs.
//!
//! Each event gets a straight storm track across the lattice. Every hazard
//! has a ridge-shaped mean around the track (per-event peak and width drawn
//! uniformly from the configured ranges) plus a cross-correlated Matérn
//! residual; raw intensities are clipped at zero. Hazards are then
//! normalized with catalog-wide min–max constants from the training events,
//! damages follow `D = Σ E·V · exp(ε)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{expected_damage, simulate_damage_with, ErrorParams, EventCatalog, EventRecord};
use crate::error::{Error, Result};
use crate::grids::{
    min_max_constants, normalize_hazards, sample_exposure_field, CrossMaternParams, HazardFieldSet,
    MaternParams, MultiHazardSampler, NormalizationStrategy, SpatialGrid, UrbanCenterSpec,
};
use crate::rng::{derive_seed, stream};
use crate::vulnerability::{LogisticVulnParams, VulnerabilityModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_rows: usize,
    pub n_cols: usize,
    #[serde(default = "default_cell_size")]
    pub cell_size: f64,
}

fn default_cell_size() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureGenSpec {
    pub urban: UrbanCenterSpec,
    pub field: MaternParams,
    /// Monetary value of one exposure unit.
    pub unit_value: f64,
}

/// Ridge profile of one hazard around the storm track, in raw units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeSpec {
    pub background: f64,
    /// Range of the per-event peak above background.
    pub peak: [f64; 2],
    /// Range of the ridge half-width, as a fraction of the grid extent.
    pub width: [f64; 2],
    /// Signed lateral shift of the ridge from the track, fraction of extent.
    #[serde(default)]
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardGenSpec {
    pub names: Vec<String>,
    pub ridges: Vec<RidgeSpec>,
    pub field: CrossMaternParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationMode {
    MinMax,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VulnerabilityLevel {
    Low,
    Medium,
    High,
}

impl VulnerabilityLevel {
    pub const ALL: [VulnerabilityLevel; 3] = [Self::Low, Self::Medium, Self::High];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Low => "low",
            Self::Medium => "medium",
            Self::High => "high",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "low" => Ok(Self::Low),
            "medium" => Ok(Self::Medium),
            "high" => Ok(Self::High),
            _ => Err(Error::config(format!(
                "unknown vulnerability level {s:?} (expected low, medium or high)"
            ))),
        }
    }

    /// Wind coefficient for this level.
    pub fn wind_beta(self) -> f64 {
        match self {
            Self::Low => 5.0,
            Self::Medium => 7.0,
            Self::High => 9.0,
        }
    }

    /// Precipitation coefficient for this level.
    pub fn precip_beta(self) -> f64 {
        match self {
            Self::Low => 2.0,
            Self::Medium => 4.0,
            Self::High => 6.0,
        }
    }
}

/// Everything needed to regenerate a synthetic catalog from a seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub grid: GridSpec,
    pub exposure: ExposureGenSpec,
    pub hazards: HazardGenSpec,
    pub gamma: f64,
    /// One coefficient per hazard, in `hazards.names` order.
    pub beta: Vec<f64>,
    pub error_variance: f64,
    pub n_events: usize,
    #[serde(default)]
    pub n_holdout: usize,
    #[serde(default = "default_normalization")]
    pub normalization: NormalizationMode,
}

fn default_normalization() -> NormalizationMode {
    NormalizationMode::MinMax
}

impl ScenarioSpec {
    /// Wind/precipitation preset on a 20×20 lattice. `γ = 6`, `σ² = 3`.
    pub fn preset(wind: VulnerabilityLevel, precip: VulnerabilityLevel) -> Self {
        let field = CrossMaternParams {
            marginals: vec![
                MaternParams {
                    variance: 9.0,
                    range: 2.0,
                    smoothness: 1.5,
                },
                MaternParams {
                    variance: 100.0,
                    range: 2.0,
                    smoothness: 1.5,
                },
            ],
            correlation: vec![vec![1.0, 0.4], vec![0.4, 1.0]],
        };
        Self {
            name: format!("{}-{}", wind.as_str(), precip.as_str()),
            grid: GridSpec {
                n_rows: 20,
                n_cols: 20,
                cell_size: 1.0,
            },
            exposure: ExposureGenSpec {
                urban: UrbanCenterSpec {
                    baseline: 0.5,
                    centers: vec![[5.0, 14.0], [14.0, 5.0]],
                    amplitudes: vec![40.0, 15.0],
                    decay_rates: vec![0.08, 0.15],
                },
                field: MaternParams {
                    variance: 1.0,
                    range: 3.0,
                    smoothness: 0.5,
                },
                unit_value: 1e6,
            },
            hazards: HazardGenSpec {
                names: vec!["wind".into(), "precip".into()],
                ridges: vec![
                    RidgeSpec {
                        background: 8.0,
                        peak: [0.0, 80.0],
                        width: [0.08, 0.18],
                        offset: 0.0,
                    },
                    RidgeSpec {
                        background: 5.0,
                        peak: [0.0, 150.0],
                        width: [0.15, 0.35],
                        offset: 0.1,
                    },
                ],
                field,
            },
            gamma: 6.0,
            beta: vec![wind.wind_beta(), precip.precip_beta()],
            error_variance: 3.0,
            n_events: 113,
            n_holdout: 0,
            normalization: NormalizationMode::MinMax,
        }
    }

    /// Parses `"<wind>-<precip>"`, e.g. `"medium-high"`.
    pub fn named(name: &str) -> Result<Self> {
        let (w, p) = name.split_once('-').ok_or_else(|| {
            Error::config(format!(
                "scenario {name:?} must look like <wind>-<precip>, e.g. medium-high"
            ))
        })?;
        Ok(Self::preset(
            VulnerabilityLevel::parse(w)?,
            VulnerabilityLevel::parse(p)?,
        ))
    }

    /// Same scenario on an `n_rows × n_cols` lattice, with urban centres and
    /// their decay rescaled so the exposure pattern keeps its shape.
    pub fn resized(&self, n_rows: usize, n_cols: usize) -> Self {
        let sx = (n_cols.max(2) - 1) as f64 / (self.grid.n_cols.max(2) - 1) as f64;
        let sy = (n_rows.max(2) - 1) as f64 / (self.grid.n_rows.max(2) - 1) as f64;
        let mut out = self.clone();
        out.grid.n_rows = n_rows;
        out.grid.n_cols = n_cols;
        let urban = &mut out.exposure.urban;
        for c in &mut urban.centers {
            *c = [c[0] * sx, c[1] * sy];
        }
        for phi in &mut urban.decay_rates {
            *phi /= sx * sy;
        }
        out
    }

    /// All nine wind × precipitation presets.
    pub fn grid_of_presets() -> Vec<Self> {
        VulnerabilityLevel::ALL
            .iter()
            .flat_map(|w| VulnerabilityLevel::ALL.iter().map(move |p| Self::preset(*w, *p)))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.hazards.names.len();
        if m == 0 {
            return Err(Error::config("scenario needs at least one hazard"));
        }
        if self.hazards.ridges.len() != m || self.hazards.field.n_hazards() != m || self.beta.len() != m {
            return Err(Error::config(format!(
                "scenario has {m} hazards but {} ridges, {} field marginals and {} coefficients",
                self.hazards.ridges.len(),
                self.hazards.field.n_hazards(),
                self.beta.len()
            )));
        }
        for r in &self.hazards.ridges {
            if !(r.peak[0] <= r.peak[1] && r.width[0] <= r.width[1] && r.width[0] > 0.0) {
                return Err(Error::config(format!("invalid ridge spec {r:?}")));
            }
        }
        if !(self.exposure.unit_value > 0.0) {
            return Err(Error::config("exposure unit_value must be positive"));
        }
        ErrorParams::new(self.error_variance)?;
        LogisticVulnParams::new(self.gamma, self.beta.clone())?;
        self.hazards.field.validate()
    }

    pub fn vulnerability(&self) -> VulnerabilityModel {
        VulnerabilityModel::Logistic {
            params: LogisticVulnParams {
                gamma: self.gamma,
                beta: self.beta.clone(),
            },
            hazards: self.hazards.names.clone(),
        }
    }
}

/// True generating values and per-holdout damages of a synthetic catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub scenario: String,
    pub seed: u64,
    pub gamma: f64,
    pub beta: Vec<(String, f64)>,
    pub sigma2: f64,
    #[serde(default)]
    pub holdout: Vec<HoldoutTruth>,
}

impl SyntheticTruth {
    /// Parameter values keyed like posterior parameter names.
    pub fn parameter(&self, name: &str) -> Option<f64> {
        match name {
            "gamma" => Some(self.gamma),
            "sigma2" => Some(self.sigma2),
            _ => name
                .strip_prefix("beta_")
                .and_then(|h| self.beta.iter().find(|(n, _)| n == h))
                .map(|(_, v)| *v),
        }
    }

    pub fn holdout(&self, event_id: &str) -> Option<&HoldoutTruth> {
        self.holdout.iter().find(|h| h.event_id == event_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutTruth {
    pub event_id: String,
    pub expected_damage: f64,
    pub damage: f64,
}

fn raw_event_fields<R: Rng>(
    spec: &ScenarioSpec,
    grid: &SpatialGrid,
    sampler: &MultiHazardSampler,
    rng: &mut R,
) -> Result<HazardFieldSet> {
    let [x0, y0, x1, y1] = grid.bounding_box();
    let extent = grid.extent();
    let px = x0 + (x1 - x0) * rng.random_range(0.2..=0.8);
    let py = y0 + (y1 - y0) * rng.random_range(0.2..=0.8);
    let angle = rng.random_range(0.0..std::f64::consts::PI);
    let (nx, ny) = (-angle.sin(), angle.cos());
    let profiles: Vec<(f64, f64)> = spec
        .hazards
        .ridges
        .iter()
        .map(|r| {
            let peak = r.peak[0] + (r.peak[1] - r.peak[0]) * rng.random::<f64>();
            let width = extent * (r.width[0] + (r.width[1] - r.width[0]) * rng.random::<f64>());
            (peak, width)
        })
        .collect();
    let noise = sampler.sample(rng);
    let centers = grid.cell_centers();
    let values = spec
        .hazards
        .ridges
        .iter()
        .zip(&profiles)
        .zip(noise)
        .map(|((ridge, (peak, width)), z)| {
            centers
                .iter()
                .zip(z)
                .map(|(c, z)| {
                    let across = (c[0] - px) * nx + (c[1] - py) * ny - ridge.offset * extent;
                    let mean = ridge.background + peak * (-0.5 * (across / width).powi(2)).exp();
                    (mean + z).max(0.0)
                })
                .collect()
        })
        .collect();
    HazardFieldSet::new(grid.clone(), spec.hazards.names.clone(), values)
}

/// Generates `n_events` observed events (ids `ev0000`, ...) followed by
/// `n_holdout` prediction targets (ids `ho0000`, ...) whose damages are kept
/// only in the returned truth.
pub fn generate_synthetic_catalog(spec: &ScenarioSpec, seed: u64) -> Result<(EventCatalog, SyntheticTruth)> {
    spec.validate()?;
    let grid = SpatialGrid::new(spec.grid.n_rows, spec.grid.n_cols, [0.0, 0.0], spec.grid.cell_size)?;
    let exposure = sample_exposure_field(
        &grid,
        &spec.exposure.urban,
        &spec.exposure.field,
        derive_seed(seed, "exposure", 0),
    )?
    .scaled(spec.exposure.unit_value)?;

    let sampler = MultiHazardSampler::new(&grid, &spec.hazards.field)?;
    let total = spec.n_events + spec.n_holdout;
    let raw = (0..total)
        .map(|i| raw_event_fields(spec, &grid, &sampler, &mut stream(seed, "hazards", i as u64)))
        .collect::<Result<Vec<_>>>()?;

    let scales = match spec.normalization {
        NormalizationMode::None => None,
        NormalizationMode::MinMax if total == 0 => None,
        NormalizationMode::MinMax => {
            let basis = if spec.n_events > 0 {
                &raw[..spec.n_events]
            } else {
                &raw[..]
            };
            Some(min_max_constants(&basis.iter().collect::<Vec<_>>())?)
        }
    };
    let fields = match &scales {
        None => raw,
        Some(s) => {
            let strategy = NormalizationStrategy::Fixed(s.clone());
            raw.iter()
                .map(|f| normalize_hazards(f, &strategy))
                .collect::<Result<Vec<_>>>()?
        }
    };

    let model = spec.vulnerability();
    let err = ErrorParams::new(spec.error_variance)?;
    let mut events = Vec::with_capacity(total);
    let mut holdout = Vec::with_capacity(spec.n_holdout);
    for (i, hazards) in fields.into_iter().enumerate() {
        let mu = expected_damage(&exposure, &hazards, &model)?;
        let d = simulate_damage_with(mu, &err, &mut stream(seed, "damage", i as u64))?;
        if i < spec.n_events {
            events.push(EventRecord {
                event_id: format!("ev{i:04}"),
                hazards,
                observed_damage: Some(d),
            });
        } else {
            let id = format!("ho{:04}", i - spec.n_events);
            holdout.push(HoldoutTruth {
                event_id: id.clone(),
                expected_damage: mu,
                damage: d,
            });
            events.push(EventRecord {
                event_id: id,
                hazards,
                observed_damage: None,
            });
        }
    }
    let catalog = EventCatalog::new(exposure, spec.hazards.names.clone(), scales, events)?;
    let truth = SyntheticTruth {
        scenario: spec.name.clone(),
        seed,
        gamma: spec.gamma,
        beta: spec
            .hazards
            .names
            .iter()
            .cloned()
            .zip(spec.beta.iter().copied())
            .collect(),
        sigma2: spec.error_variance,
        holdout,
    };
    Ok((catalog, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vulnerability::logistic_fraction;

    fn small(n: usize) -> ScenarioSpec {
        let mut s = ScenarioSpec::named("medium-high").unwrap();
        s.grid = GridSpec {
            n_rows: 6,
            n_cols: 6,
            cell_size: 1.0,
        };
        s.exposure.urban.centers = vec![[2.0, 3.0]];
        s.exposure.urban.amplitudes = vec![10.0];
        s.exposure.urban.decay_rates = vec![0.2];
        s.n_events = n;
        s
    }

    #[test]
    fn preset_names() {
        let s = ScenarioSpec::named("medium-high").unwrap();
        assert_eq!(s.beta, vec![7.0, 6.0]);
        assert_eq!(s.gamma, 6.0);
        assert_eq!(s.error_variance, 3.0);
        assert!(ScenarioSpec::named("medium").is_err());
        assert!(ScenarioSpec::named("extreme-low").is_err());
        assert_eq!(ScenarioSpec::grid_of_presets().len(), 9);
    }

    #[test]
    fn empty_catalog() {
        let (cat, truth) = generate_synthetic_catalog(&small(0), 1).unwrap();
        assert!(cat.is_empty());
        assert_eq!(truth.gamma, 6.0);
        assert_eq!(truth.parameter("beta_precip"), Some(6.0));
        assert_eq!(cat.grid().len(), 36);
    }

    #[test]
    fn deterministic_and_normalized() {
        let spec = small(12);
        let (a, _) = generate_synthetic_catalog(&spec, 9).unwrap();
        let (b, _) = generate_synthetic_catalog(&spec, 9).unwrap();
        assert_eq!(a, b);
        let (c, _) = generate_synthetic_catalog(&spec, 10).unwrap();
        assert_ne!(a, c);
        for j in 0..2 {
            let (lo, hi) = a.events().iter().flat_map(|e| e.hazards.values(j)).fold(
                (f64::INFINITY, f64::NEG_INFINITY),
                |(lo, hi), v| (lo.min(*v), hi.max(*v)),
            );
            assert!(lo.abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn holdout_events_have_no_observation() {
        let mut spec = small(5);
        spec.n_holdout = 3;
        let (cat, truth) = generate_synthetic_catalog(&spec, 4).unwrap();
        assert_eq!(cat.len(), 8);
        assert_eq!(cat.observed().len(), 5);
        assert_eq!(truth.holdout.len(), 3);
        assert!(cat.event("ho0002").unwrap().observed_damage.is_none());
        // Training events are unchanged by adding holdouts.
        let (base, _) = generate_synthetic_catalog(&small(5), 4).unwrap();
        assert_eq!(base.events()[..5], cat.events()[..5]);
    }

    #[test]
    fn deterministic_collapse_on_single_cell() {
        let mut spec = small(4);
        spec.grid = GridSpec {
            n_rows: 1,
            n_cols: 1,
            cell_size: 1.0,
        };
        spec.exposure.urban = UrbanCenterSpec::flat(2.0);
        spec.exposure.field.variance = 1e-18;
        spec.error_variance = 1e-18;
        spec.normalization = NormalizationMode::None;
        for (r, m) in spec.hazards.ridges.iter_mut().zip(spec.hazards.field.marginals.iter_mut()) {
            r.peak = [0.0, 0.0];
            r.background = 0.5;
            m.variance = 1e-18;
        }
        let (cat, _) = generate_synthetic_catalog(&spec, 2).unwrap();
        let params = LogisticVulnParams::new(spec.gamma, spec.beta.clone()).unwrap();
        for e in cat.events() {
            let h = [e.hazards.values(0)[0], e.hazards.values(1)[0]];
            assert!((h[0] - 0.5).abs() < 1e-6 && (h[1] - 0.5).abs() < 1e-6);
            let exact = cat.exposure().values()[0] * logistic_fraction(&h, &params).unwrap();
            let d = e.observed_damage.unwrap();
            assert!(((d - exact) / exact).abs() < 1e-8);
        }
    }
}

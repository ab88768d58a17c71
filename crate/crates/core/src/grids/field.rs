use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::matern::{cholesky_with_jitter, matern_covariance, CrossMaternParams, MaternParams};
use super::normalize::HazardFieldSet;
use super::{euclidean, SpatialGrid};
use crate::error::{ensure_finite, Error, Result};
use crate::rng::rng_from_seed;

/// Urban-centre trend `μ_E(s) = α₀ + Σ_k α_k exp(−φ_k |s − c_k|²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrbanCenterSpec {
    pub baseline: f64,
    #[serde(default)]
    pub centers: Vec<[f64; 2]>,
    #[serde(default)]
    pub amplitudes: Vec<f64>,
    #[serde(default)]
    pub decay_rates: Vec<f64>,
}

impl UrbanCenterSpec {
    pub fn flat(baseline: f64) -> Self {
        Self {
            baseline,
            centers: Vec::new(),
            amplitudes: Vec::new(),
            decay_rates: Vec::new(),
        }
    }

    pub fn validate(&self, grid: &SpatialGrid) -> Result<()> {
        ensure_finite("baseline", self.baseline)?;
        let k = self.centers.len();
        if self.amplitudes.len() != k || self.decay_rates.len() != k {
            return Err(Error::config(format!(
                "urban centre spec has {k} centres, {} amplitudes and {} decay rates",
                self.amplitudes.len(),
                self.decay_rates.len()
            )));
        }
        for (i, ((c, a), phi)) in self
            .centers
            .iter()
            .zip(&self.amplitudes)
            .zip(&self.decay_rates)
            .enumerate()
        {
            ensure_finite("centre coordinate", c[0])?;
            ensure_finite("centre coordinate", c[1])?;
            ensure_finite("amplitude", *a)?;
            if !(*phi > 0.0 && phi.is_finite()) {
                return Err(Error::config(format!(
                    "decay rate of centre {i} must be positive, got {phi}"
                )));
            }
            if !grid.contains(*c) {
                return Err(Error::config(format!(
                    "urban centre {i} at ({}, {}) lies outside the grid",
                    c[0], c[1]
                )));
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, s: [f64; 2]) -> f64 {
        self.centers
            .iter()
            .zip(&self.amplitudes)
            .zip(&self.decay_rates)
            .fold(self.baseline, |acc, ((c, a), phi)| {
                let d = euclidean(s, *c);
                acc + a * (-phi * d * d).exp()
            })
    }
}

pub fn build_exposure_mean(grid: &SpatialGrid, spec: &UrbanCenterSpec) -> Result<Vec<f64>> {
    spec.validate(grid)?;
    Ok(grid
        .cell_centers()
        .into_iter()
        .map(|s| spec.evaluate(s))
        .collect())
}

/// Monetary exposure per cell; constant across events within a catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureField {
    grid: SpatialGrid,
    values: Vec<f64>,
}

impl ExposureField {
    pub fn new(grid: SpatialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::data(format!(
                "exposure has {} values for a grid of {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0 && v.is_finite()))
        {
            return Err(Error::data(format!(
                "exposure at cell {i} must be finite and non-negative, got {v}"
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn uniform(grid: SpatialGrid, value: f64) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, vec![value; n])
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Same grid, every value multiplied by `c ≥ 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.grid.clone(), self.values.iter().map(|v| v * c).collect())
    }
}

/// Zero-mean Gaussian field sampler holding the Cholesky factor of the
/// assembled `L × L` Matérn covariance, so repeated draws skip refactoring.
#[derive(Debug, Clone)]
pub struct GaussianFieldSampler {
    factor: DMatrix<f64>,
    jitter: f64,
}

impl GaussianFieldSampler {
    pub fn new(grid: &SpatialGrid, p: &MaternParams) -> Result<Self> {
        p.validate()?;
        let n = grid.len();
        let cov = covariance_matrix(grid, p)?;
        let (ch, jitter) = cholesky_with_jitter(&cov, p.variance).map_err(|e| {
            Error::numerical(format!(
                "{e} (grid {}x{}, σ²={}, ρ={}, ν={})",
                grid.n_rows(),
                grid.n_cols(),
                p.variance,
                p.range,
                p.smoothness
            ))
        })?;
        debug_assert_eq!(ch.l().nrows(), n);
        Ok(Self {
            factor: ch.l(),
            jitter,
        })
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        correlate(&self.factor, rng)
    }
}

/// Assembled `L × L` Matérn covariance.
pub fn covariance_matrix(grid: &SpatialGrid, p: &MaternParams) -> Result<DMatrix<f64>> {
    let n = grid.len();
    let centers = grid.cell_centers();
    let mut cov = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let c = matern_covariance(euclidean(centers[i], centers[j]), p)?;
            cov[(i, j)] = c;
            cov[(j, i)] = c;
        }
    }
    Ok(cov)
}

fn correlate<R: Rng + ?Sized>(factor: &DMatrix<f64>, rng: &mut R) -> Vec<f64> {
    let n = factor.nrows();
    let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
    (factor * z).iter().copied().collect()
}

/// One draw of `W ~ N_L(0, Σ)` with Matérn `Σ`.
pub fn sample_gaussian_field(grid: &SpatialGrid, p: &MaternParams, seed: u64) -> Result<Vec<f64>> {
    let sampler = GaussianFieldSampler::new(grid, p)?;
    Ok(sampler.sample(&mut rng_from_seed(seed)))
}

/// `E(s) = μ_E(s) + exp(W_E(s))`.
pub fn sample_exposure_field(
    grid: &SpatialGrid,
    spec: &UrbanCenterSpec,
    p: &MaternParams,
    seed: u64,
) -> Result<ExposureField> {
    let mean = build_exposure_mean(grid, spec)?;
    if let Some((i, m)) = mean.iter().enumerate().find(|(_, m)| **m < 0.0) {
        return Err(Error::config(format!(
            "exposure mean is negative ({m}) at cell {i}; urban-centre amplitudes must keep μ_E ≥ 0"
        )));
    }
    let w = sample_gaussian_field(grid, p, seed)?;
    let values = mean.iter().zip(&w).map(|(m, w)| m + w.exp()).collect();
    ExposureField::new(grid.clone(), values)
}

/// Joint sampler for `M` correlated hazards, hazard-major layout
/// (all cells of hazard 0, then hazard 1, ...).
#[derive(Debug, Clone)]
pub struct MultiHazardSampler {
    factor: DMatrix<f64>,
    n_cells: usize,
    n_hazards: usize,
    jitter: f64,
}

impl MultiHazardSampler {
    pub fn new(grid: &SpatialGrid, p: &CrossMaternParams) -> Result<Self> {
        p.validate()?;
        let (l, m) = (grid.len(), p.n_hazards());
        let centers = grid.cell_centers();
        let mut cov = DMatrix::zeros(l * m, l * m);
        for j in 0..m {
            for k in 0..=j {
                for a in 0..l {
                    for b in 0..l {
                        let c = p.cross_covariance(j, k, euclidean(centers[a], centers[b]));
                        cov[(j * l + a, k * l + b)] = c;
                        cov[(k * l + b, j * l + a)] = c;
                    }
                }
            }
        }
        let (ch, jitter) = cholesky_with_jitter(&cov, p.max_variance()).map_err(|e| {
            Error::numerical(format!("{e}; offending cross-Matérn parameters: {p:?}"))
        })?;
        Ok(Self {
            factor: ch.l(),
            n_cells: l,
            n_hazards: m,
            jitter,
        })
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Zero-mean draw, one vector per hazard.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vec<f64>> {
        let flat = correlate(&self.factor, rng);
        flat.chunks(self.n_cells)
            .take(self.n_hazards)
            .map(<[f64]>::to_vec)
            .collect()
    }
}

/// Joint draw `H_j(s) = μ_j(s) + Z_j(s)` of `M` correlated hazard fields.
pub fn sample_multihazard_fields(
    grid: &SpatialGrid,
    names: &[String],
    means: &[Vec<f64>],
    p: &CrossMaternParams,
    seed: u64,
) -> Result<HazardFieldSet> {
    let m = p.n_hazards();
    if means.len() != m || names.len() != m {
        return Err(Error::config(format!(
            "{m} hazards in covariance but {} means and {} names",
            means.len(),
            names.len()
        )));
    }
    let sampler = MultiHazardSampler::new(grid, p)?;
    let z = sampler.sample(&mut rng_from_seed(seed));
    let mut values = Vec::with_capacity(m);
    for (mu, zj) in means.iter().zip(z) {
        if mu.len() != grid.len() {
            return Err(Error::data(format!(
                "hazard mean has {} values for {} cells",
                mu.len(),
                grid.len()
            )));
        }
        values.push(mu.iter().zip(zj).map(|(a, b)| a + b).collect());
    }
    HazardFieldSet::new(grid.clone(), names.to_vec(), values)
}

use serde::{Deserialize, Serialize};

use super::SpatialGrid;
use crate::error::{Error, Result};

/// Affine map from raw to normalized units: `normalized = (raw − offset) · scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardScale {
    pub name: String,
    pub offset: f64,
    pub scale: f64,
}

impl HazardScale {
    pub fn apply(&self, raw: f64) -> f64 {
        (raw - self.offset) * self.scale
    }

    pub fn invert(&self, normalized: f64) -> f64 {
        normalized / self.scale + self.offset
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NormalizationStrategy {
    /// Per hazard, map `[min, max]` of this field set onto `[0, 1]`.
    MinMax,
    /// Per hazard, offset 0 and scale `1 / max`.
    MaxScale,
    /// Apply given constants (for example a training catalog's).
    Fixed(Vec<HazardScale>),
}

/// Per-event intensity surfaces for `M` named hazards on a shared grid.
/// `normalization` is `None` for raw physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct HazardFieldSet {
    grid: SpatialGrid,
    names: Vec<String>,
    values: Vec<Vec<f64>>,
    normalization: Option<Vec<HazardScale>>,
}

impl HazardFieldSet {
    pub fn new(grid: SpatialGrid, names: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != values.len() {
            return Err(Error::data(format!(
                "{} hazard names for {} value vectors",
                names.len(),
                values.len()
            )));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::data(format!("duplicate hazard label {n:?}")));
            }
        }
        for (name, v) in names.iter().zip(&values) {
            if v.len() != grid.len() {
                return Err(Error::data(format!(
                    "hazard {name:?} has {} values for a grid of {} cells",
                    v.len(),
                    grid.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::data(format!("hazard {name:?} has non-finite values")));
            }
        }
        Ok(Self {
            grid,
            names,
            values,
            normalization: None,
        })
    }

    /// Field set already expressed in normalized units.
    pub fn with_normalization(mut self, scales: Vec<HazardScale>) -> Result<Self> {
        check_scales(&self.names, &scales)?;
        self.normalization = Some(scales);
        Ok(self)
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_hazards(&self) -> usize {
        self.names.len()
    }

    pub fn values(&self, j: usize) -> &[f64] {
        &self.values[j]
    }

    pub fn all_values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn normalization(&self) -> Option<&[HazardScale]> {
        self.normalization.as_deref()
    }

    pub fn hazard_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn hazard(&self, name: &str) -> Result<&[f64]> {
        self.hazard_index(name)
            .map(|j| self.values(j))
            .ok_or_else(|| Error::data(format!("hazard {name:?} not present (have {:?})", self.names)))
    }

    /// Applies `f(hazard, value)` to every value; normalization metadata is kept.
    pub fn map_values(&self, f: impl Fn(usize, f64) -> f64) -> Result<Self> {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(j, v)| v.iter().map(|x| f(j, *x)).collect())
            .collect();
        let mut out = Self::new(self.grid.clone(), self.names.clone(), values)?;
        out.normalization = self.normalization.clone();
        Ok(out)
    }
}

fn check_scales(names: &[String], scales: &[HazardScale]) -> Result<()> {
    if scales.len() != names.len() || scales.iter().zip(names).any(|(s, n)| &s.name != n) {
        return Err(Error::data(format!(
            "normalization constants {:?} do not match hazards {names:?}",
            scales.iter().map(|s| &s.name).collect::<Vec<_>>()
        )));
    }
    if let Some(s) = scales.iter().find(|s| !(s.scale > 0.0 && s.scale.is_finite()) || !s.offset.is_finite()) {
        return Err(Error::data(format!(
            "normalization for {:?} needs a positive scale and finite offset",
            s.name
        )));
    }
    Ok(())
}

/// Catalog-wide min–max constants over several raw field sets.
pub fn min_max_constants(sets: &[&HazardFieldSet]) -> Result<Vec<HazardScale>> {
    let first = sets
        .first()
        .ok_or_else(|| Error::data("min-max normalization needs at least one field set"))?;
    let names = first.names();
    let mut out = Vec::with_capacity(names.len());
    for (j, name) in names.iter().enumerate() {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for set in sets {
            if set.names() != names {
                return Err(Error::data("field sets carry different hazard labels"));
            }
            if set.normalization.is_some() {
                return Err(Error::data("min-max constants must be computed on raw fields"));
            }
            for v in set.values(j) {
                lo = lo.min(*v);
                hi = hi.max(*v);
            }
        }
        if !(hi > lo) {
            return Err(Error::data(format!(
                "hazard {name:?} is constant ({lo}); min-max normalization undefined"
            )));
        }
        out.push(HazardScale {
            name: name.clone(),
            offset: lo,
            scale: 1.0 / (hi - lo),
        });
    }
    Ok(out)
}

pub fn normalize_hazards(raw: &HazardFieldSet, strategy: &NormalizationStrategy) -> Result<HazardFieldSet> {
    let scales = match strategy {
        NormalizationStrategy::MinMax => min_max_constants(&[&denormalize_hazards(raw)?])?,
        NormalizationStrategy::MaxScale => {
            let base = denormalize_hazards(raw)?;
            base.names
                .iter()
                .zip(&base.values)
                .map(|(name, v)| {
                    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    if max > 0.0 {
                        Ok(HazardScale {
                            name: name.clone(),
                            offset: 0.0,
                            scale: 1.0 / max,
                        })
                    } else {
                        Err(Error::data(format!(
                            "hazard {name:?} has no positive values; max-scaling undefined"
                        )))
                    }
                })
                .collect::<Result<Vec<_>>>()?
        }
        NormalizationStrategy::Fixed(s) => s.clone(),
    };
    check_scales(&raw.names, &scales)?;
    if raw.normalization.as_deref() == Some(scales.as_slice()) {
        return Ok(raw.clone());
    }
    let base = denormalize_hazards(raw)?;
    let values = base
        .values
        .iter()
        .zip(&scales)
        .map(|(v, s)| v.iter().map(|x| s.apply(*x)).collect())
        .collect();
    HazardFieldSet::new(base.grid, base.names, values)?.with_normalization(scales)
}

/// Back to raw physical units; a raw set is returned unchanged.
pub fn denormalize_hazards(set: &HazardFieldSet) -> Result<HazardFieldSet> {
    match &set.normalization {
        None => Ok(set.clone()),
        Some(scales) => {
            let values = set
                .values
                .iter()
                .zip(scales)
                .map(|(v, s)| v.iter().map(|x| s.invert(*x)).collect())
                .collect();
            HazardFieldSet::new(set.grid.clone(), set.names.clone(), values)
        }
    }
}

//! Lattice geometry, exposure surfaces and Gaussian random fields.

mod field;
mod matern;
mod normalize;

pub use field::{
    build_exposure_mean, sample_exposure_field, sample_gaussian_field, sample_multihazard_fields,
    ExposureField, GaussianFieldSampler, MultiHazardSampler, UrbanCenterSpec,
};
pub use matern::{
    bessel_k, cholesky_with_jitter, matern_correlation, matern_covariance, CrossMaternParams,
    MaternParams, MaternPath, JITTER_LADDER,
};
pub use normalize::{
    denormalize_hazards, min_max_constants, normalize_hazards, HazardFieldSet, HazardScale,
    NormalizationStrategy,
};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Regular planar lattice. Cell `(row, col)` is centred at
/// `origin + (col, row) * cell_size`; cells are stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    n_rows: usize,
    n_cols: usize,
    origin: [f64; 2],
    cell_size: f64,
}

impl SpatialGrid {
    pub fn new(n_rows: usize, n_cols: usize, origin: [f64; 2], cell_size: f64) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::config(format!(
                "grid must have at least one cell, got {n_rows}x{n_cols}"
            )));
        }
        ensure_finite("origin.x", origin[0])?;
        ensure_finite("origin.y", origin[1])?;
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::config(format!(
                "cell_size must be positive, got {cell_size}"
            )));
        }
        Ok(Self {
            n_rows,
            n_cols,
            origin,
            cell_size,
        })
    }

    /// Unit-spaced grid with its first cell centred at the origin.
    pub fn unit(n_rows: usize, n_cols: usize) -> Result<Self> {
        Self::new(n_rows, n_cols, [0.0, 0.0], 1.0)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    /// Number of cells `L`.
    pub fn len(&self) -> usize {
        self.n_rows * self.n_cols
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, row: usize, col: usize) -> Option<usize> {
        (row < self.n_rows && col < self.n_cols).then(|| row * self.n_cols + col)
    }

    pub fn row_col(&self, index: usize) -> (usize, usize) {
        (index / self.n_cols, index % self.n_cols)
    }

    pub fn cell_center(&self, index: usize) -> [f64; 2] {
        let (row, col) = self.row_col(index);
        [
            self.origin[0] + col as f64 * self.cell_size,
            self.origin[1] + row as f64 * self.cell_size,
        ]
    }

    pub fn cell_centers(&self) -> Vec<[f64; 2]> {
        (0..self.len()).map(|i| self.cell_center(i)).collect()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        euclidean(self.cell_center(i), self.cell_center(j))
    }

    /// Footprint of the lattice: `[xmin, ymin, xmax, ymax]` over cell edges.
    pub fn bounding_box(&self) -> [f64; 4] {
        let h = 0.5 * self.cell_size;
        [
            self.origin[0] - h,
            self.origin[1] - h,
            self.origin[0] + (self.n_cols as f64 - 0.5) * self.cell_size,
            self.origin[1] + (self.n_rows as f64 - 0.5) * self.cell_size,
        ]
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let [x0, y0, x1, y1] = self.bounding_box();
        p[0] >= x0 && p[0] <= x1 && p[1] >= y0 && p[1] <= y1
    }

    /// Extent of the footprint along its longer side.
    pub fn extent(&self) -> f64 {
        self.cell_size * self.n_rows.max(self.n_cols) as f64
    }
}

pub(crate) fn euclidean(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Bilinear resampling of a cell-centred field onto another lattice.
/// Target centres outside the source hull are clamped to the nearest edge.
pub fn resample_bilinear(values: &[f64], from: &SpatialGrid, to: &SpatialGrid) -> Result<Vec<f64>> {
    if values.len() != from.len() {
        return Err(Error::data(format!(
            "field has {} values but source grid has {} cells",
            values.len(),
            from.len()
        )));
    }
    let at = |r: usize, c: usize| values[r * from.n_cols + c];
    let out = (0..to.len())
        .map(|i| {
            let [x, y] = to.cell_center(i);
            let fx = ((x - from.origin[0]) / from.cell_size).clamp(0.0, (from.n_cols - 1) as f64);
            let fy = ((y - from.origin[1]) / from.cell_size).clamp(0.0, (from.n_rows - 1) as f64);
            let (c0, r0) = (fx.floor() as usize, fy.floor() as usize);
            let (c1, r1) = ((c0 + 1).min(from.n_cols - 1), (r0 + 1).min(from.n_rows - 1));
            let (tx, ty) = (fx - c0 as f64, fy - r0 as f64);
            let top = at(r0, c0) * (1.0 - tx) + at(r0, c1) * tx;
            let bottom = at(r1, c0) * (1.0 - tx) + at(r1, c1) * tx;
            top * (1.0 - ty) + bottom * ty
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_empty_and_bad_cell_size() {
        assert!(SpatialGrid::unit(0, 3).is_err());
        assert!(SpatialGrid::new(2, 2, [0.0, 0.0], 0.0).is_err());
        assert!(SpatialGrid::new(2, 2, [f64::NAN, 0.0], 1.0).is_err());
    }

    #[test]
    fn row_major_layout() {
        let g = SpatialGrid::new(2, 3, [10.0, 20.0], 2.0).unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g.index(1, 2), Some(5));
        assert_eq!(g.index(2, 0), None);
        assert_eq!(g.row_col(4), (1, 1));
        assert_eq!(g.cell_center(5), [14.0, 22.0]);
        assert!(g.contains([9.0, 19.0]));
        assert!(!g.contains([8.9, 19.0]));
    }

    #[test]
    fn bilinear_reproduces_planes() {
        let coarse = SpatialGrid::new(3, 3, [0.0, 0.0], 2.0).unwrap();
        let fine = SpatialGrid::new(5, 5, [0.0, 0.0], 1.0).unwrap();
        let plane: Vec<f64> = coarse
            .cell_centers()
            .iter()
            .map(|p| 1.0 + 2.0 * p[0] - 0.5 * p[1])
            .collect();
        let out = resample_bilinear(&plane, &coarse, &fine).unwrap();
        for (i, v) in out.iter().enumerate() {
            let p = fine.cell_center(i);
            assert!((v - (1.0 + 2.0 * p[0] - 0.5 * p[1])).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn index_bijection_and_metric(rows in 1usize..8, cols in 1usize..8, a in 0usize..64, b in 0usize..64, c in 0usize..64) {
            let g = SpatialGrid::unit(rows, cols).unwrap();
            let n = g.len();
            let (a, b, c) = (a % n, b % n, c % n);
            let (r, col) = g.row_col(a);
            prop_assert_eq!(g.index(r, col), Some(a));
            prop_assert_eq!(g.distance(a, b), g.distance(b, a));
            prop_assert!(g.distance(a, c) <= g.distance(a, b) + g.distance(b, c) + 1e-12);
            if a != b {
                prop_assert!(g.distance(a, b) > 0.0);
            }
        }
    }
}

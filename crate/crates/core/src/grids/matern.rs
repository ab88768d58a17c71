use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};
use libm::lgamma as ln_gamma;

use crate::error::{Error, Result};

/// Diagonal jitter factors (relative to the largest marginal variance),
/// tried in order until the Cholesky factorization succeeds.
pub const JITTER_LADDER: [f64; 7] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaternParams {
    pub variance: f64,
    pub range: f64,
    pub smoothness: f64,
}

/// How a Matérn evaluation is carried out for a given smoothness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaternPath {
    /// ν = 1/2: exp(−x).
    Exponential,
    /// ν = 3/2: (1 + x) exp(−x).
    ThreeHalves,
    /// ν = 5/2: (1 + x + x²/3) exp(−x).
    FiveHalves,
    /// Any other ν: numerically evaluated K_ν.
    Bessel,
}

impl MaternParams {
    pub fn new(variance: f64, range: f64, smoothness: f64) -> Result<Self> {
        let p = Self {
            variance,
            range,
            smoothness,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("variance", self.variance),
            ("range", self.range),
            ("smoothness", self.smoothness),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!(
                    "Matérn {name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn path(&self) -> MaternPath {
        smoothness_path(self.smoothness)
    }
}

fn smoothness_path(nu: f64) -> MaternPath {
    if nu == 0.5 {
        MaternPath::Exponential
    } else if nu == 1.5 {
        MaternPath::ThreeHalves
    } else if nu == 2.5 {
        MaternPath::FiveHalves
    } else {
        MaternPath::Bessel
    }
}

/// Unit-variance Matérn correlation at scaled lag `x = d / ρ`:
/// `2^{1−ν}/Γ(ν) · x^ν · K_ν(x)`.
pub fn matern_correlation(x: f64, nu: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    match smoothness_path(nu) {
        MaternPath::Exponential => (-x).exp(),
        MaternPath::ThreeHalves => (1.0 + x) * (-x).exp(),
        MaternPath::FiveHalves => (1.0 + x + x * x / 3.0) * (-x).exp(),
        MaternPath::Bessel => {
            if x < 1e-10 {
                return 1.0;
            }
            let log_c = (1.0 - nu) * std::f64::consts::LN_2 - ln_gamma(nu)
                + nu * x.ln()
                + bessel_k_scaled(nu, x).ln()
                - x;
            log_c.exp().min(1.0)
        }
    }
}

/// Matérn covariance `C(d)` for lag `d ≥ 0`.
pub fn matern_covariance(d: f64, p: &MaternParams) -> Result<f64> {
    if !(d >= 0.0) || !d.is_finite() {
        return Err(Error::config(format!(
            "distance must be finite and non-negative, got {d}"
        )));
    }
    p.validate()?;
    Ok(p.variance * matern_correlation(d / p.range, p.smoothness))
}

/// `e^x K_ν(x)` for `x > 0`, from the integral representation
/// `K_ν(x) = ∫₀^∞ exp(−x cosh t) cosh(νt) dt`, summed with the trapezoid
/// rule (exponentially convergent for this integrand).
fn bessel_k_scaled(nu: f64, x: f64) -> f64 {
    const STEP: f64 = 0.05;
    let term = |t: f64| (-x * (t.cosh() - 1.0)).exp() * (nu * t).cosh();
    let mut sum = 0.5 * term(0.0);
    let mut k = 1u32;
    loop {
        let v = term(f64::from(k) * STEP);
        sum += v;
        if v < 1e-18 * sum || k > 20_000 {
            break;
        }
        k += 1;
    }
    sum * STEP
}

/// Modified Bessel function of the second kind, real order, `x > 0`.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    bessel_k_scaled(nu, x) * (-x).exp()
}

/// Multivariate Matérn with a shared range: `ν_jk = (ν_j + ν_k)/2` and
/// `σ_jk = R_jk √(σ²_j σ²_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossMaternParams {
    pub marginals: Vec<MaternParams>,
    pub correlation: Vec<Vec<f64>>,
}

impl CrossMaternParams {
    pub fn new(marginals: Vec<MaternParams>, correlation: Vec<Vec<f64>>) -> Result<Self> {
        let p = Self {
            marginals,
            correlation,
        };
        p.validate()?;
        Ok(p)
    }

    /// Independent hazards sharing one marginal.
    pub fn independent(marginal: MaternParams, n_hazards: usize) -> Result<Self> {
        let r = (0..n_hazards)
            .map(|j| (0..n_hazards).map(|k| if j == k { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(vec![marginal; n_hazards], r)
    }

    pub fn n_hazards(&self) -> usize {
        self.marginals.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.marginals.len();
        if m == 0 {
            return Err(Error::config("cross-Matérn needs at least one hazard"));
        }
        for p in &self.marginals {
            p.validate()?;
        }
        let range = self.marginals[0].range;
        if self.marginals.iter().any(|p| p.range != range) {
            return Err(Error::config(
                "cross-Matérn marginals must share a common range",
            ));
        }
        if self.correlation.len() != m || self.correlation.iter().any(|r| r.len() != m) {
            return Err(Error::config(format!(
                "cross-correlation matrix must be {m}x{m}"
            )));
        }
        for j in 0..m {
            if self.correlation[j][j] != 1.0 {
                return Err(Error::config("cross-correlation diagonal must be 1"));
            }
            for k in 0..m {
                let r = self.correlation[j][k];
                if !(-1.0..=1.0).contains(&r) || r != self.correlation[k][j] {
                    return Err(Error::config(format!(
                        "cross-correlation entry ({j},{k}) = {r} must lie in [-1,1] and be symmetric"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Cross-covariance between hazard `j` and `k` at lag `d`.
    pub fn cross_covariance(&self, j: usize, k: usize, d: f64) -> f64 {
        let (pj, pk) = (&self.marginals[j], &self.marginals[k]);
        let sigma = self.correlation[j][k] * (pj.variance * pk.variance).sqrt();
        let nu = 0.5 * (pj.smoothness + pk.smoothness);
        sigma * matern_correlation(d / pj.range, nu)
    }

    pub(crate) fn max_variance(&self) -> f64 {
        self.marginals
            .iter()
            .map(|p| p.variance)
            .fold(0.0, f64::max)
    }
}

/// Cholesky factorization, adding `JITTER_LADDER[k] · scale` to the diagonal
/// until it succeeds. Returns the factor and the jitter actually applied.
pub fn cholesky_with_jitter(
    matrix: &DMatrix<f64>,
    scale: f64,
) -> Result<(Cholesky<f64, Dyn>, f64)> {
    for factor in JITTER_LADDER {
        let jitter = factor * scale;
        let mut m = matrix.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(ch) = Cholesky::new(m) {
            return Ok((ch, jitter));
        }
    }
    Err(Error::numerical(format!(
        "covariance matrix ({n}x{n}) is not positive definite even with diagonal jitter {:e}; \
         check range/smoothness/cross-correlation",
        JITTER_LADDER[JITTER_LADDER.len() - 1] * scale,
        n = matrix.nrows()
    )))
}

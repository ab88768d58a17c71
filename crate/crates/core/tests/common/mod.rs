#![allow(dead_code)]

use mhbhm::inference::{run_chain, ChainConfig, FnTarget};
use mhbhm::rng::rng_from_seed;
use rand::Rng;
use rand_distr::StandardNormal;

/// Mean and batch-means standard error of `x` with `batches` equal batches.
pub fn batch_mean_se(x: &[f64], batches: usize) -> (f64, f64) {
    let size = x.len() / batches;
    let means: Vec<f64> = x
        .chunks_exact(size)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let m = means.iter().sum::<f64>() / means.len() as f64;
    let var = means.iter().map(|b| (b - m).powi(2)).sum::<f64>() / (means.len() as f64 - 1.0);
    (m, (var / means.len() as f64).sqrt())
}

pub struct ConjugateOutcome {
    pub data_mean: f64,
    pub posterior_var: f64,
    pub mc_mean: f64,
    pub mc_mean_se: f64,
    pub mc_var: f64,
    pub mc_var_se: f64,
}

/// `log D_i ~ N(μ, 1)`, 20 observations, flat prior on `μ ∈ (−100, 100)`.
/// The posterior is `N(ȳ, 1/20)`.
pub fn conjugate_toy(seed: u64) -> ConjugateOutcome {
    let mut rng = rng_from_seed(seed);
    let y: Vec<f64> = (0..20).map(|_| 2.5 + rng.sample::<f64, _>(StandardNormal)).collect();
    let ybar = y.iter().sum::<f64>() / y.len() as f64;
    let target = FnTarget::new(&["mu"], move |t: &[f64]| {
        if t[0].abs() >= 100.0 {
            f64::NEG_INFINITY
        } else {
            y.iter().map(|v| -0.5 * (v - t[0]).powi(2)).sum()
        }
    });
    let chain = run_chain(
        &target,
        &ChainConfig { n_iter: 201_000, half_width: 0.5, seed: seed + 1, initial: Some(vec![0.0]) },
    )
    .unwrap();
    let mu: Vec<f64> = chain.retained(1000, 1).map(|d| d[0]).collect();
    let (mc_mean, mc_mean_se) = batch_mean_se(&mu, 100);
    let sq: Vec<f64> = mu.iter().map(|m| (m - mc_mean).powi(2)).collect();
    let (mc_var, mc_var_se) = batch_mean_se(&sq, 100);
    ConjugateOutcome {
        data_mean: ybar,
        posterior_var: 1.0 / 20.0,
        mc_mean,
        mc_mean_se,
        mc_var,
        mc_var_se,
    }
}

pub const THREE_STATE_TARGET: [f64; 3] = [0.2, 0.3, 0.5];

/// State frequencies of the random-walk sampler on the piecewise-constant
/// density `p(x) ∝ w[⌊x⌋]`, `x ∈ [0, 3)`, over 200,000 steps.
pub fn three_state_frequencies(seed: u64) -> [f64; 3] {
    let target = FnTarget::new(&["x"], |t: &[f64]| {
        let x = t[0];
        if (0.0..3.0).contains(&x) {
            THREE_STATE_TARGET[x as usize].ln()
        } else {
            f64::NEG_INFINITY
        }
    });
    let chain = run_chain(
        &target,
        &ChainConfig { n_iter: 200_000, half_width: 0.5, seed, initial: Some(vec![1.5]) },
    )
    .unwrap();
    let mut counts = [0usize; 3];
    for d in &chain.draws {
        counts[d[0] as usize] += 1;
    }
    counts.map(|c| c as f64 / chain.draws.len() as f64)
}

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::diagnostics::RhatKind;
use crate::error::{Error, Result};
use crate::par;
use crate::rng::{derive_seed, rng_from_seed, StreamRng};

/// Bound on prior redraws when looking for a starting point with finite
/// log-posterior.
pub const MAX_INIT_ATTEMPTS: usize = 1000;

/// Unnormalized log target for Metropolis–Hastings.
///
/// `Eval` carries the log density together with whatever intermediate the
/// target wants to reuse when only part of the parameter vector moves.
pub trait LogDensity: Sync {
    type Eval: Clone + Send;

    fn param_names(&self) -> &[String];

    fn evaluate(&self, theta: &[f64], previous: Option<(&[f64], &Self::Eval)>) -> Self::Eval;

    fn log_density(eval: &Self::Eval) -> f64;

    /// Random starting point, if the target knows how to draw one.
    fn draw_initial(&self, _rng: &mut StreamRng) -> Option<Vec<f64>> {
        None
    }
}

/// Closure-backed target without caching, for toy problems.
pub struct FnTarget<F> {
    names: Vec<String>,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnTarget<F> {
    pub fn new(names: &[&str], f: F) -> Self {
        Self {
            names: names.iter().map(|s| s.to_string()).collect(),
            f,
        }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> LogDensity for FnTarget<F> {
    type Eval = f64;

    fn param_names(&self) -> &[String] {
        &self.names
    }

    fn evaluate(&self, theta: &[f64], _previous: Option<(&[f64], &f64)>) -> f64 {
        (self.f)(theta)
    }

    fn log_density(eval: &f64) -> f64 {
        *eval
    }
}

/// Accept/reject for a log acceptance ratio and a uniform `u ∈ [0, 1)`.
/// A NaN ratio is a rejection.
#[inline]
pub fn metropolis_accept(log_ratio: f64, u: f64) -> bool {
    log_ratio >= 0.0 || u.ln() < log_ratio
}

#[derive(Debug, Clone)]
pub struct StepOutcome<E> {
    pub theta: Vec<f64>,
    pub eval: E,
    pub accepted: bool,
}

/// One random-walk step: every component moves by `U(−h, h)` jointly, then
/// the move is accepted with probability `min(1, π(θ′)/π(θ))`. Each call
/// consumes exactly `dim + 1` uniforms.
pub fn mh_step<T: LogDensity, R: Rng + ?Sized>(
    target: &T,
    current: &[f64],
    current_eval: &T::Eval,
    half_width: f64,
    rng: &mut R,
) -> StepOutcome<T::Eval> {
    let proposal: Vec<f64> = current
        .iter()
        .map(|x| x + half_width * (2.0 * rng.random::<f64>() - 1.0))
        .collect();
    let u: f64 = rng.random();
    let eval = target.evaluate(&proposal, Some((current, current_eval)));
    let proposed = T::log_density(&eval);
    let log_ratio = proposed - T::log_density(current_eval);
    if proposed.is_finite() && metropolis_accept(log_ratio, u) {
        StepOutcome {
            theta: proposal,
            eval,
            accepted: true,
        }
    } else {
        StepOutcome {
            theta: current.to_vec(),
            eval: current_eval.clone(),
            accepted: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub n_iter: usize,
    pub half_width: f64,
    pub seed: u64,
    pub initial: Option<Vec<f64>>,
}

/// One chain of `n_iter` recorded states, the first being the initial value.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub seed: u64,
    pub draws: Vec<Vec<f64>>,
    pub accepted: usize,
}

impl Chain {
    pub fn acceptance_rate(&self) -> f64 {
        let steps = self.draws.len().saturating_sub(1);
        if steps == 0 {
            0.0
        } else {
            self.accepted as f64 / steps as f64
        }
    }

    /// States after burn-in, every `thin`-th.
    pub fn retained(&self, burn_in: usize, thin: usize) -> impl Iterator<Item = &[f64]> {
        self.draws
            .iter()
            .skip(burn_in)
            .step_by(thin.max(1))
            .map(Vec::as_slice)
    }
}

pub fn run_chain<T: LogDensity>(target: &T, config: &ChainConfig) -> Result<Chain> {
    if config.n_iter == 0 {
        return Err(Error::config("n_iter must be at least 1"));
    }
    if !(config.half_width > 0.0 && config.half_width.is_finite()) {
        return Err(Error::config(format!(
            "proposal half-width must be positive, got {}",
            config.half_width
        )));
    }
    let dim = target.param_names().len();
    let mut rng = rng_from_seed(config.seed);

    let (mut theta, mut eval) = match &config.initial {
        Some(init) => {
            if init.len() != dim {
                return Err(Error::config(format!(
                    "initial value has {} components, target has {dim}",
                    init.len()
                )));
            }
            let eval = target.evaluate(init, None);
            if !T::log_density(&eval).is_finite() {
                return Err(Error::numerical(format!(
                    "initial value {init:?} has non-finite log-posterior"
                )));
            }
            (init.clone(), eval)
        }
        None => {
            let mut found = None;
            for _ in 0..MAX_INIT_ATTEMPTS {
                let Some(init) = target.draw_initial(&mut rng) else {
                    return Err(Error::config(
                        "target cannot draw initial values; supply them explicitly",
                    ));
                };
                let eval = target.evaluate(&init, None);
                if T::log_density(&eval).is_finite() {
                    found = Some((init, eval));
                    break;
                }
            }
            found.ok_or_else(|| {
                Error::numerical(format!(
                    "no initial value with finite log-posterior after {MAX_INIT_ATTEMPTS} prior draws"
                ))
            })?
        }
    };

    let mut draws = Vec::with_capacity(config.n_iter);
    draws.push(theta.clone());
    let mut accepted = 0;
    for _ in 1..config.n_iter {
        let step = mh_step(target, &theta, &eval, config.half_width, &mut rng);
        accepted += usize::from(step.accepted);
        theta = step.theta;
        eval = step.eval;
        draws.push(theta.clone());
    }
    Ok(Chain {
        seed: config.seed,
        draws,
        accepted,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub n_chains: usize,
    pub n_iter: usize,
    pub burn_in: usize,
    pub half_width: f64,
    /// Root seed; chain `k` uses `derive_seed(seed, "chain", k)` unless
    /// `seeds` is given.
    pub seed: u64,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub initial: Option<Vec<Vec<f64>>>,
    #[serde(default = "one")]
    pub thin: usize,
    #[serde(default)]
    pub rhat: RhatKind,
}

fn one() -> usize {
    1
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            n_chains: 3,
            n_iter: 5000,
            burn_in: 2000,
            half_width: 0.5,
            seed: 0,
            seeds: None,
            initial: None,
            thin: 1,
            rhat: RhatKind::Classic,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_chains == 0 {
            return Err(Error::config("need at least one chain"));
        }
        if self.n_iter == 0 || self.burn_in >= self.n_iter {
            return Err(Error::config(format!(
                "burn-in ({}) must be smaller than n_iter ({})",
                self.burn_in, self.n_iter
            )));
        }
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return Err(Error::config("proposal half-width must be positive"));
        }
        if self.thin == 0 {
            return Err(Error::config("thin must be at least 1"));
        }
        if let Some(seeds) = &self.seeds {
            if seeds.len() != self.n_chains {
                return Err(Error::config(format!(
                    "{} seeds for {} chains",
                    seeds.len(),
                    self.n_chains
                )));
            }
            let mut sorted = seeds.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != seeds.len() {
                return Err(Error::config("chain seeds must be distinct"));
            }
        }
        if let Some(init) = &self.initial {
            if init.len() != self.n_chains {
                return Err(Error::config(format!(
                    "{} initial values for {} chains",
                    init.len(),
                    self.n_chains
                )));
            }
        }
        Ok(())
    }

    pub fn chain_seed(&self, k: usize) -> u64 {
        match &self.seeds {
            Some(s) => s[k],
            None => derive_seed(self.seed, "chain", k as u64),
        }
    }

    pub fn chain_config(&self, k: usize) -> ChainConfig {
        ChainConfig {
            n_iter: self.n_iter,
            half_width: self.half_width,
            seed: self.chain_seed(k),
            initial: self.initial.as_ref().map(|i| i[k].clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub catalog_id: String,
    pub family: String,
    pub config_hash: String,
}

/// Draws from all chains plus what is needed to interpret them.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    pub param_names: Vec<String>,
    pub chains: Vec<Chain>,
    pub burn_in: usize,
    pub thin: usize,
    pub provenance: Provenance,
}

impl PosteriorSamples {
    pub fn n_params(&self) -> usize {
        self.param_names.len()
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.param_names.iter().position(|n| n == name)
    }

    pub fn acceptance_rates(&self) -> Vec<f64> {
        self.chains.iter().map(Chain::acceptance_rate).collect()
    }

    /// Post-burn-in draws of parameter `j`, one vector per chain.
    pub fn retained_by_chain(&self, j: usize) -> Vec<Vec<f64>> {
        self.chains
            .iter()
            .map(|c| c.retained(self.burn_in, self.thin).map(|d| d[j]).collect())
            .collect()
    }

    /// Post-burn-in parameter vectors pooled in chain order.
    pub fn pooled(&self) -> Vec<&[f64]> {
        self.chains
            .iter()
            .flat_map(|c| c.retained(self.burn_in, self.thin))
            .collect()
    }
}

/// Runs `n_chains` independent chains (in parallel when enabled).
pub fn run_mcmc<T: LogDensity>(
    target: &T,
    config: &McmcConfig,
    provenance: Provenance,
) -> Result<PosteriorSamples> {
    config.validate()?;
    let results = par::map_range(config.n_chains, |k| run_chain(target, &config.chain_config(k)));
    let chains = results
        .into_iter()
        .enumerate()
        .map(|(k, r)| {
            r.map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("chain {k}: {m}")),
                Error::Numerical(m) => Error::Numerical(format!("chain {k}: {m}")),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PosteriorSamples {
        param_names: target.param_names().to_vec(),
        chains,
        burn_in: config.burn_in,
        thin: config.thin,
        provenance,
    })
}

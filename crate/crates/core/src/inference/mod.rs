//! Priors, Metropolis–Hastings sampling and convergence diagnostics for the
//! vulnerability parameters `(γ, β, σ²)` with exposure and hazards fixed.

mod diagnostics;
mod posterior;
mod priors;
mod sampler;

pub use diagnostics::{
    effective_sample_size, gelman_rubin, gelman_rubin_with, summarize, summarize_with,
    DiagnosticsReport,
    ParamSummary, RhatKind, RHAT_WARNING,
};
pub use posterior::{DamagePosterior, DamageEval, ModelFamily};
pub use priors::{log_prior, Prior, PriorSpec};
pub use sampler::{
    metropolis_accept, mh_step, run_chain, run_mcmc, Chain, ChainConfig, FnTarget, LogDensity,
    McmcConfig, PosteriorSamples, Provenance, StepOutcome, MAX_INIT_ATTEMPTS,
};

//! Multi-hazard Bayesian hierarchical damage model.
//!
//! Aggregated event damage is modelled as
//! `log D_i ~ N(log Σ_s E(s) · V(H_i(s)), σ²)` where `E` is gridded exposure,
//! `H_i` the per-event hazard intensities and `V` a vulnerability function.
//! The crate covers synthetic catalog generation from Gaussian random fields,
//! Metropolis–Hastings calibration of the logistic multi-hazard vulnerability,
//! posterior predictive damage, deterministic wind-only baselines and tail
//! risk metrics.
//!
//! Inner loops (per-event likelihood terms, chains, predictive draws) run on
//! rayon when the `parallel` feature is enabled and sequentially otherwise;
//! both builds produce bit-identical results.

pub mod cli;
pub mod damage;
pub mod error;
pub mod grids;
pub mod inference;
pub mod io;
pub mod par;
pub mod predict;
pub mod risk;
pub mod rng;
pub mod vulnerability;

pub use error::{Error, Result};

use serde::{Deserialize, Serialize};

use super::sampler::PosteriorSamples;
use crate::error::{Error, Result};
use crate::risk::quantile_sorted;

/// R̂ above this flags a parameter as not converged.
pub const RHAT_WARNING: f64 = 1.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhatKind {
    /// Between/within variance ratio on whole chains.
    #[default]
    Classic,
    /// Same formula with every chain split in half.
    Split,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// `R̂ = √(((n−1)/n · W + B/n) / W)` over equal-length chains.
fn rhat_of(chains: &[&[f64]]) -> f64 {
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = chains.iter().map(|c| sample_variance(c)).sum::<f64>() / chains.len() as f64;
    let b = n * sample_variance(&means);
    if w == 0.0 {
        return if b == 0.0 { 1.0 } else { f64::INFINITY };
    }
    (((n - 1.0) / n * w + b / n) / w).sqrt()
}

pub fn gelman_rubin(samples: &PosteriorSamples) -> Result<Vec<f64>> {
    gelman_rubin_with(samples, RhatKind::Classic)
}

/// Per-parameter R̂ on post-burn-in draws. Constant chains at different
/// values give `+inf`.
pub fn gelman_rubin_with(samples: &PosteriorSamples, kind: RhatKind) -> Result<Vec<f64>> {
    if samples.chains.len() < 2 {
        return Err(Error::config(format!(
            "Gelman-Rubin needs at least 2 chains, got {}; rerun with --chains 2 or more",
            samples.chains.len()
        )));
    }
    (0..samples.n_params())
        .map(|j| {
            let by_chain = samples.retained_by_chain(j);
            let n = by_chain.iter().map(Vec::len).min().unwrap_or(0);
            if n < 10 {
                return Err(Error::config(format!(
                    "Gelman-Rubin needs at least 10 post-burn-in draws per chain, got {n}"
                )));
            }
            let pieces: Vec<&[f64]> = match kind {
                RhatKind::Classic => by_chain.iter().map(|c| &c[..n]).collect(),
                RhatKind::Split => by_chain
                    .iter()
                    .flat_map(|c| {
                        let h = n / 2;
                        [&c[..h], &c[h..2 * h]]
                    })
                    .collect(),
            };
            Ok(rhat_of(&pieces))
        })
        .collect()
}

/// Multi-chain effective sample size: per-chain ESS from the initial
/// positive sequence of autocorrelations, summed over chains.
pub fn effective_sample_size(chains: &[Vec<f64>]) -> f64 {
    chains.iter().map(|c| chain_ess(c)).sum()
}

fn chain_ess(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return n as f64;
    }
    let m = mean(x);
    let c0 = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return n as f64;
    }
    let rho = |lag: usize| -> f64 {
        (0..n - lag)
            .map(|i| (x[i] - m) * (x[i + lag] - m))
            .sum::<f64>()
            / (n as f64 * c0)
    };
    // Geyer: sum pairs Γ_k = ρ_{2k} + ρ_{2k+1} while positive.
    let mut tau = -1.0;
    let mut lag = 0;
    let mut prev_pair = f64::INFINITY;
    while lag + 1 < n {
        let pair = (rho(lag) + rho(lag + 1)).min(prev_pair);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        prev_pair = pair;
        lag += 2;
    }
    (n as f64 / tau.max(1.0 / n as f64)).min(n as f64 * (n as f64).log10().max(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
    pub q025: f64,
    pub q975: f64,
    /// `None` with a single chain. An infinite value is written as `null`.
    pub rhat: Option<f64>,
    pub ess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub params: Vec<ParamSummary>,
    pub acceptance_rates: Vec<f64>,
    pub n_retained: usize,
    /// Any R̂ above [`RHAT_WARNING`] or not finite.
    pub rhat_warning: bool,
}

impl DiagnosticsReport {
    pub fn param(&self, name: &str) -> Option<&ParamSummary> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Plain-text table with mean, median, SD, 2.5%, 97.5% and R̂ columns.
    pub fn table(&self) -> String {
        self.table_with_truth(|_| None)
    }

    /// As [`Self::table`], with a true-value column when `truth` knows any
    /// parameter.
    pub fn table_with_truth(&self, truth: impl Fn(&str) -> Option<f64>) -> String {
        let truths: Vec<Option<f64>> = self.params.iter().map(|p| truth(&p.name)).collect();
        let show_truth = truths.iter().any(Option::is_some);
        let mut out = format!("{:<14}", "parameter");
        if show_truth {
            out.push_str(&format!(" {:>10}", "true"));
        }
        out.push_str(&format!(
            " {:>12} {:>12} {:>10} {:>12} {:>12} {:>8}\n",
            "mean", "median", "std dev", "2.5%", "97.5%", "rhat"
        ));
        for (p, t) in self.params.iter().zip(&truths) {
            out.push_str(&format!("{:<14}", p.name));
            if show_truth {
                let t = t.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
                out.push_str(&format!(" {t:>10}"));
            }
            let rhat = p.rhat.map_or_else(|| "-".to_string(), |r| format!("{r:.4}"));
            out.push_str(&format!(
                " {:>12.4} {:>12.4} {:>10.4} {:>12.4} {:>12.4} {:>8}\n",
                p.mean, p.median, p.sd, p.q025, p.q975, rhat
            ));
        }
        out
    }
}

/// Pooled post-burn-in summaries per parameter, with R̂ when there are at
/// least two chains.
pub fn summarize(samples: &PosteriorSamples) -> Result<DiagnosticsReport> {
    summarize_with(samples, RhatKind::Classic)
}

pub fn summarize_with(samples: &PosteriorSamples, kind: RhatKind) -> Result<DiagnosticsReport> {
    let pooled_len = samples.pooled().len();
    if pooled_len == 0 {
        return Err(Error::data("no post-burn-in draws to summarize"));
    }
    let rhat = if samples.chains.len() >= 2 {
        Some(gelman_rubin_with(samples, kind)?)
    } else {
        None
    };
    let mut params = Vec::with_capacity(samples.n_params());
    for (j, name) in samples.param_names.iter().enumerate() {
        let by_chain = samples.retained_by_chain(j);
        let mut all: Vec<f64> = by_chain.iter().flatten().copied().collect();
        let m = mean(&all);
        let sd = if all.len() > 1 {
            sample_variance(&all).sqrt()
        } else {
            0.0
        };
        all.sort_by(f64::total_cmp);
        params.push(ParamSummary {
            name: name.clone(),
            mean: m,
            median: quantile_sorted(&all, 0.5),
            sd,
            q025: quantile_sorted(&all, 0.025),
            q975: quantile_sorted(&all, 0.975),
            rhat: rhat.as_ref().map(|r| r[j]),
            ess: effective_sample_size(&by_chain),
        });
    }
    let rhat_warning = match &rhat {
        Some(r) => r.iter().any(|v| !(*v <= RHAT_WARNING)),
        None => false,
    };
    Ok(DiagnosticsReport {
        params,
        acceptance_rates: samples.acceptance_rates(),
        n_retained: pooled_len,
        rhat_warning,
    })
}

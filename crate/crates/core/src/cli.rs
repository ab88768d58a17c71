//! Command-line driver: `simulate`, `fit`, `diagnose`, `predict`, `metrics`
//! and `baseline`.
//!
//! Settings come from flags, then from the optional `--config` TOML file,
//! then from built-in defaults. Each command writes the settings it actually
//! used to `<command>.resolved.toml` next to its outputs. Failures print one
//! JSON line on stderr and exit with 2 (config), 3 (data) or 4 (numerical).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::damage::{generate_synthetic_catalog, EventCatalog, ScenarioSpec, SyntheticTruth};
use crate::error::{Error, Result};
use crate::inference::{
    run_mcmc, summarize_with, DamagePosterior, McmcConfig, ModelFamily, Prior, PriorSpec,
    Provenance, RhatKind,
};
use crate::io::{self, ChainMeta, PosteriorFile};
use crate::par;
use crate::predict::{
    baseline_predict, posterior_predict, summarize_predictive, truth_damage_sample,
    DeterministicBaseline, TrainingFrame,
};
use crate::risk::{build_risk_report, default_thresholds, Truth, DEFAULT_ALPHAS, DEFAULT_OVER_WEIGHT};
use crate::rng::derive_seed;
use crate::vulnerability::EmanuelParams;

#[derive(Debug, Parser)]
#[command(name = "mhbhm", version, about = "Multi-hazard Bayesian damage model toolkit")]
pub struct Cli {
    /// TOML run configuration; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads for data-parallel steps.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic event catalog.
    Simulate(SimulateArgs),
    /// Calibrate vulnerability parameters by Metropolis-Hastings.
    Fit(FitArgs),
    /// Summaries and Gelman-Rubin diagnostics of a fitted posterior.
    Diagnose(DiagnoseArgs),
    /// Posterior predictive damage for catalog events.
    Predict(PredictArgs),
    /// Risk metrics of predictive samples against a truth.
    Metrics(MetricsArgs),
    /// Deterministic Emanuel-curve damage for catalog events.
    Baseline(BaselineArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Preset `<wind>-<precip>` with levels low, medium or high.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Number of observed (training) events.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of held-out prediction targets.
    #[arg(long)]
    pub holdout: Option<usize>,
    /// Grid size as ROWSxCOLS, e.g. 20x20.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// `multi` or `<hazard>-only`.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub iter: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Half-width of the uniform random-walk proposal.
    #[arg(long)]
    pub half_width: Option<f64>,
    #[arg(long)]
    pub thin: Option<usize>,
    /// Use split-chain R̂.
    #[arg(long)]
    pub split_rhat: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub posterior: Option<PathBuf>,
    /// Use split-chain R̂.
    #[arg(long)]
    pub split_rhat: bool,
    /// Report path (default `<posterior>/diagnostics.json`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub posterior: Option<PathBuf>,
    /// Catalog holding the exposure and the event hazard files.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Event id; repeatable. Defaults to every event without observed damage.
    #[arg(long = "event")]
    pub events: Vec<String>,
    /// Use at most this many posterior draws (reproducible subsample).
    #[arg(long)]
    pub draws: Option<usize>,
    /// True damage of the (single) event, overriding `truth.json`.
    #[arg(long)]
    pub true_damage: Option<f64>,
    /// Also write `truth_<id>.csv` with this many draws from the true
    /// damage distribution (needs `truth.json`).
    #[arg(long)]
    pub truth_draws: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// `NAME=PATH` of a damage sample; repeatable.
    #[arg(long = "model")]
    pub models: Vec<String>,
    /// Sample of true damages.
    #[arg(long, conflicts_with = "true_damage")]
    pub truth_sample: Option<PathBuf>,
    /// Single observed damage.
    #[arg(long)]
    pub true_damage: Option<f64>,
    /// Confidence level; repeatable (default 0.90, 0.95, 0.99).
    #[arg(long = "alpha")]
    pub alphas: Vec<f64>,
    /// Number of exceedance thresholds spanning the pooled sample range.
    #[arg(long)]
    pub thresholds: Option<usize>,
    /// Over-estimation weight of the weighted deviation.
    #[arg(long)]
    pub over_weight: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Event id; repeatable. Defaults to every event.
    #[arg(long = "event")]
    pub events: Vec<String>,
    /// `baldwin` or `eberenz`; repeatable (default both).
    #[arg(long = "baseline")]
    pub baselines: Vec<String>,
    /// Custom curve threshold (with --v-half and --label).
    #[arg(long, requires = "v_half")]
    pub v_thresh: Option<f64>,
    #[arg(long, requires = "v_thresh")]
    pub v_half: Option<f64>,
    #[arg(long, default_value = "custom")]
    pub label: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Contents of a `--config` file. Every field is optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    #[serde(default)]
    pub simulate: SimulateBlock,
    #[serde(default)]
    pub fit: FitBlock,
    #[serde(default)]
    pub diagnose: DiagnoseBlock,
    #[serde(default)]
    pub predict: PredictBlock,
    #[serde(default)]
    pub metrics: MetricsBlock,
    #[serde(default)]
    pub baseline: BaselineBlock,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateBlock {
    pub scenario: Option<String>,
    /// Full scenario definition, used instead of a preset.
    pub spec: Option<ScenarioSpec>,
    pub n: Option<usize>,
    pub holdout: Option<usize>,
    pub grid: Option<[usize; 2]>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitBlock {
    pub catalog: Option<PathBuf>,
    pub family: Option<String>,
    pub chains: Option<usize>,
    pub iter: Option<usize>,
    pub burn_in: Option<usize>,
    pub half_width: Option<f64>,
    pub thin: Option<usize>,
    pub split_rhat: Option<bool>,
    /// Explicit per-chain seeds.
    pub seeds: Option<Vec<u64>>,
    /// Explicit per-chain initial values.
    pub initial: Option<Vec<Vec<f64>>>,
    /// Per-parameter prior overrides.
    pub priors: Option<BTreeMap<String, Prior>>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseBlock {
    pub posterior: Option<PathBuf>,
    pub split_rhat: Option<bool>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictBlock {
    pub posterior: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub events: Option<Vec<String>>,
    pub draws: Option<usize>,
    pub true_damage: Option<f64>,
    pub truth_draws: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsBlock {
    /// Model name to sample path.
    pub models: Option<BTreeMap<String, PathBuf>>,
    pub truth_sample: Option<PathBuf>,
    pub true_damage: Option<f64>,
    pub alphas: Option<Vec<f64>>,
    pub thresholds: Option<usize>,
    pub over_weight: Option<f64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineBlock {
    pub catalog: Option<PathBuf>,
    pub events: Option<Vec<String>>,
    pub baselines: Option<Vec<String>>,
    pub custom: Option<Vec<CustomBaseline>>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomBaseline {
    pub label: String,
    pub v_thresh: f64,
    pub v_half: f64,
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = io::read_text(p)?;
            toml::from_str(&text).map_err(|e| {
                let line = e
                    .span()
                    .map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() as u64 + 1);
                Error::config(format!("{}:{line}: {}", p.display(), e.message()))
            })
        }
    }
}

fn required<T>(value: Option<T>, what: &str) -> Result<T> {
    value.ok_or_else(|| Error::config(format!("missing {what}; pass --{what} or set it in --config")))
}

fn seed_of(flag: Option<u64>, block: Option<u64>, global: Option<u64>) -> Result<u64> {
    let seed = required(flag.or(block).or(global), "seed")?;
    if seed > i64::MAX as u64 {
        return Err(Error::config(format!("seed must be at most {}, got {seed}", i64::MAX)));
    }
    Ok(seed)
}

fn write_snapshot<T: Serialize>(dir: &Path, command: &str, value: &T) -> Result<()> {
    let text = toml::to_string(value)
        .map_err(|e| Error::config(format!("cannot serialize resolved config: {e}")))?;
    io::write_text(&dir.join(format!("{command}.resolved.toml")), &text)
}

/// Parses arguments and runs the chosen command.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            print!("{e}");
            return Ok(());
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            return Err(Error::config(first.trim_start_matches("error: ").to_string()));
        }
    };
    execute(cli)
}

pub fn execute(cli: Cli) -> Result<()> {
    let config = load_config(cli.config.as_deref())?;
    if let Some(n) = cli.threads.or(config.threads) {
        if n == 0 {
            return Err(Error::config("--threads must be at least 1"));
        }
        par::set_worker_count(n);
    }
    match cli.command {
        Command::Simulate(a) => cmd_simulate(a, &config),
        Command::Fit(a) => cmd_fit(a, &config),
        Command::Diagnose(a) => cmd_diagnose(a, &config),
        Command::Predict(a) => cmd_predict(a, &config),
        Command::Metrics(a) => cmd_metrics(a, &config),
        Command::Baseline(a) => cmd_baseline(a, &config),
    }
}

fn parse_grid(s: &str) -> Result<[usize; 2]> {
    let parse = |x: &str| x.trim().parse::<usize>().ok().filter(|v| *v > 0);
    match s.split_once(['x', 'X']) {
        Some((r, c)) => match (parse(r), parse(c)) {
            (Some(r), Some(c)) => Ok([r, c]),
            _ => Err(Error::config(format!("grid {s:?} must look like ROWSxCOLS"))),
        },
        None => Err(Error::config(format!("grid {s:?} must look like ROWSxCOLS"))),
    }
}

#[derive(Serialize)]
struct SimulateResolved {
    seed: u64,
    out: PathBuf,
    spec: ScenarioSpec,
}

fn cmd_simulate(a: SimulateArgs, cfg: &RunConfig) -> Result<()> {
    let b = &cfg.simulate;
    let seed = seed_of(a.seed, b.seed, cfg.seed)?;
    let out = required(a.out.or_else(|| b.out.clone()), "out")?;
    let mut spec = match (&a.scenario, &b.spec) {
        (Some(name), _) => ScenarioSpec::named(name)?,
        (None, Some(spec)) => spec.clone(),
        (None, None) => ScenarioSpec::named(b.scenario.as_deref().unwrap_or("medium-high"))?,
    };
    let grid = match &a.grid {
        Some(g) => Some(parse_grid(g)?),
        None => b.grid,
    };
    if let Some([r, c]) = grid {
        if r == 0 || c == 0 {
            return Err(Error::config("grid dimensions must be positive"));
        }
        spec = spec.resized(r, c);
    }
    if let Some(n) = a.n.or(b.n) {
        spec.n_events = n;
    }
    if let Some(k) = a.holdout.or(b.holdout) {
        spec.n_holdout = k;
    }
    spec.validate()?;
    let (catalog, truth) = generate_synthetic_catalog(&spec, seed)?;
    io::write_catalog(&out, &catalog, Some(&truth))?;
    write_snapshot(&out, "simulate", &SimulateResolved { seed, out: out.clone(), spec })?;
    println!(
        "wrote {} events ({} observed) to {}",
        catalog.len(),
        catalog.events().iter().filter(|e| e.observed_damage.is_some()).count(),
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct FitResolved {
    catalog: PathBuf,
    family: String,
    out: PathBuf,
    mcmc: McmcConfig,
    priors: PriorSpec,
}

fn cmd_fit(a: FitArgs, cfg: &RunConfig) -> Result<()> {
    let b = &cfg.fit;
    let catalog_dir = required(a.catalog.or_else(|| b.catalog.clone()), "catalog")?;
    let out = required(a.out.or_else(|| b.out.clone()), "out")?;
    let family = ModelFamily::parse(a.family.as_deref().or(b.family.as_deref()).unwrap_or("multi"))?;
    let defaults = McmcConfig::default();
    let mcmc = McmcConfig {
        n_chains: a.chains.or(b.chains).unwrap_or(defaults.n_chains),
        n_iter: a.iter.or(b.iter).unwrap_or(defaults.n_iter),
        burn_in: a.burn_in.or(b.burn_in).unwrap_or(defaults.burn_in),
        half_width: a.half_width.or(b.half_width).unwrap_or(defaults.half_width),
        seed: seed_of(a.seed, b.seed, cfg.seed)?,
        seeds: b.seeds.clone(),
        initial: b.initial.clone(),
        thin: a.thin.or(b.thin).unwrap_or(defaults.thin),
        rhat: if a.split_rhat || b.split_rhat.unwrap_or(false) {
            RhatKind::Split
        } else {
            RhatKind::Classic
        },
    };
    mcmc.validate()?;

    let catalog = io::read_catalog(&catalog_dir)?;
    let truth = io::read_truth(&catalog_dir)?;
    let mut priors = PriorSpec::tropical_cyclone(catalog.hazard_names());
    if let Some(over) = &b.priors {
        for (k, v) in over {
            v.validate()?;
            priors.priors.insert(k.clone(), *v);
        }
    }
    let observed = catalog.observed();
    let target = DamagePosterior::new(&observed, &family, &priors)?;

    let catalog_id = io::catalog_digest(&catalog_dir)?;
    let hash_input = serde_json::to_string(&(&catalog_id, family.to_string(), &mcmc, &priors))
        .map_err(|e| Error::config(e.to_string()))?;
    let provenance = Provenance {
        catalog_id,
        family: family.to_string(),
        config_hash: io::sha256_hex(hash_input.as_bytes()),
    };
    let samples = run_mcmc(&target, &mcmc, provenance.clone())?;
    let diagnostics = if samples.chains.len() >= 2 {
        Some(summarize_with(&samples, mcmc.rhat)?)
    } else {
        None
    };
    let priors_used = PriorSpec {
        priors: samples
            .param_names
            .iter()
            .map(|k| Ok((k.clone(), *priors.get(k)?)))
            .collect::<Result<_>>()?,
    };
    let file = PosteriorFile {
        family: family.to_string(),
        param_names: samples.param_names.clone(),
        config: mcmc.clone(),
        priors: priors_used.clone(),
        hazard_names: catalog.hazard_names().to_vec(),
        normalization: catalog.normalization().map(<[_]>::to_vec),
        provenance,
        chains: samples
            .chains
            .iter()
            .map(|c| ChainMeta { seed: c.seed, accepted: c.accepted, n_draws: c.draws.len() })
            .collect(),
        acceptance_rates: samples.acceptance_rates(),
        diagnostics: diagnostics.clone(),
    };
    io::write_posterior(&out, &file, &samples)?;
    write_snapshot(
        &out,
        "fit",
        &FitResolved {
            catalog: catalog_dir,
            family: family.to_string(),
            out: out.clone(),
            mcmc,
            priors: priors_used,
        },
    )?;

    let report = match diagnostics {
        Some(d) => d,
        None => summarize_with(&samples, RhatKind::Classic)?,
    };
    println!(
        "{} on {} events, {} chains, acceptance {}",
        family,
        target.n_events(),
        samples.chains.len(),
        fmt_rates(&report.acceptance_rates)
    );
    print!("{}", table_for(&report, truth.as_ref()));
    if report.rhat_warning {
        eprintln!("warning: R-hat above 1.1 for at least one parameter");
    }
    Ok(())
}

fn fmt_rates(rates: &[f64]) -> String {
    rates.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join("/")
}

fn table_for(report: &crate::inference::DiagnosticsReport, truth: Option<&SyntheticTruth>) -> String {
    match truth {
        Some(t) => report.table_with_truth(|n| t.parameter(n)),
        None => report.table(),
    }
}

#[derive(Serialize)]
struct DiagnoseResolved {
    posterior: PathBuf,
    out: PathBuf,
    rhat: RhatKind,
}

fn cmd_diagnose(a: DiagnoseArgs, cfg: &RunConfig) -> Result<()> {
    let b = &cfg.diagnose;
    let dir = required(a.posterior.or_else(|| b.posterior.clone()), "posterior")?;
    let kind = if a.split_rhat || b.split_rhat.unwrap_or(false) {
        RhatKind::Split
    } else {
        RhatKind::Classic
    };
    let (_, samples) = io::read_posterior(&dir)?;
    if samples.chains.len() < 2 {
        return Err(Error::config(format!(
            "R-hat needs at least 2 chains but the posterior has {}; refit with --chains 2 or more",
            samples.chains.len()
        )));
    }
    let report = summarize_with(&samples, kind)?;
    let out = a
        .out
        .or_else(|| b.out.clone())
        .unwrap_or_else(|| dir.join("diagnostics.json"));
    io::write_json(&out, &report)?;
    let snapshot_dir = out.parent().map(Path::to_path_buf).unwrap_or_default();
    write_snapshot(&snapshot_dir, "diagnose", &DiagnoseResolved { posterior: dir, out, rhat: kind })?;
    println!("acceptance {}", fmt_rates(&report.acceptance_rates));
    print!("{}", report.table());
    if report.rhat_warning {
        eprintln!("warning: R-hat above 1.1 for at least one parameter");
    }
    Ok(())
}

#[derive(Serialize)]
struct PredictResolved {
    posterior: PathBuf,
    catalog: PathBuf,
    events: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    draws: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    true_damage: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    truth_draws: Option<usize>,
    seed: u64,
    out: PathBuf,
}

fn event_seed(seed: u64, event_id: &str) -> u64 {
    derive_seed(seed, &format!("event/{event_id}"), 0)
}

fn select_events(catalog: &EventCatalog, requested: Vec<String>, default_unobserved: bool) -> Result<Vec<String>> {
    if requested.is_empty() {
        let ids: Vec<String> = catalog
            .events()
            .iter()
            .filter(|e| !default_unobserved || e.observed_damage.is_none())
            .map(|e| e.event_id.clone())
            .collect();
        if ids.is_empty() {
            return Err(Error::config("no events selected; pass --event"));
        }
        return Ok(ids);
    }
    for id in &requested {
        if catalog.event(id).is_none() {
            return Err(Error::data(format!("event {id:?} not found in catalog")));
        }
    }
    Ok(requested)
}

fn cmd_predict(a: PredictArgs, cfg: &RunConfig) -> Result<()> {
    let b = &cfg.predict;
    let post_dir = required(a.posterior.or_else(|| b.posterior.clone()), "posterior")?;
    let cat_dir = required(a.catalog.or_else(|| b.catalog.clone()), "catalog")?;
    let out = required(a.out.or_else(|| b.out.clone()), "out")?;
    let seed = seed_of(a.seed, b.seed, cfg.seed)?;
    let draws = a.draws.or(b.draws);
    if draws == Some(0) {
        return Err(Error::config("--draws must be at least 1"));
    }
    let true_damage = a.true_damage.or(b.true_damage);
    let truth_draws = a.truth_draws.or(b.truth_draws);

    let (file, samples) = io::read_posterior(&post_dir)?;
    let catalog = io::read_catalog(&cat_dir)?;
    let truth = io::read_truth(&cat_dir)?;
    let requested = if a.events.is_empty() { b.events.clone().unwrap_or_default() } else { a.events };
    let events = select_events(&catalog, requested, true)?;
    if true_damage.is_some() && events.len() != 1 {
        return Err(Error::config("--true-damage needs exactly one --event"));
    }
    let frame = TrainingFrame { hazard_names: file.hazard_names.clone(), normalization: file.normalization.clone() };

    for id in &events {
        let ev = catalog.event(id).expect("selected from catalog");
        let s = event_seed(seed, id);
        let sample = posterior_predict(&samples, &frame, catalog.exposure(), id, &ev.hazards, s, draws)?;
        let holdout = truth.as_ref().and_then(|t| t.holdout(id));
        let actual = true_damage.or(holdout.map(|h| h.damage)).or(ev.observed_damage);
        let summary = summarize_predictive(&sample, actual)?;
        let (csv_path, json_path) = io::predictive_paths(&out, id);
        io::write_damage_sample(&csv_path, &sample.damages)?;
        io::write_predictive_summary(&json_path, &summary)?;
        if let Some(n) = truth_draws {
            let (t, h) = match (truth.as_ref(), holdout) {
                (Some(t), Some(h)) => (t, h),
                _ => {
                    return Err(Error::data(format!(
                        "--truth-draws needs truth.json with a holdout entry for {id:?}"
                    )))
                }
            };
            let draws = truth_damage_sample(h.expected_damage, t.sigma2, n, derive_seed(s, "truth", 0))?;
            io::write_damage_sample(&out.join(format!("truth_{id}.csv")), &draws)?;
        }
        match summary.percentile_of_truth {
            Some(p) => println!(
                "{id}: median {} 90% [{}, {}] truth percentile {p:.4}",
                summary.median, summary.interval_90[0], summary.interval_90[1]
            ),
            None => println!(
                "{id}: median {} 90% [{}, {}]",
                summary.median, summary.interval_90[0], summary.interval_90[1]
            ),
        }
    }
    write_snapshot(
        &out,
        "predict",
        &PredictResolved {
            posterior: post_dir,
            catalog: cat_dir,
            events,
            draws,
            true_damage,
            truth_draws,
            seed,
            out: out.clone(),
        },
    )
}

#[derive(Serialize)]
struct MetricsResolved {
    models: BTreeMap<String, PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    truth_sample: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    true_damage: Option<f64>,
    alphas: Vec<f64>,
    thresholds: usize,
    over_weight: f64,
    out: PathBuf,
}

fn cmd_metrics(a: MetricsArgs, cfg: &RunConfig) -> Result<()> {
    let b = &cfg.metrics;
    let out = required(a.out.or_else(|| b.out.clone()), "out")?;
    // Flag order is kept; config-file models follow in name order.
    let mut models: Vec<(String, PathBuf)> = Vec::new();
    for m in &a.models {
        let (name, path) = m
            .split_once('=')
            .filter(|(n, p)| !n.is_empty() && !p.is_empty())
            .ok_or_else(|| Error::config(format!("--model {m:?} must look like NAME=PATH")))?;
        models.push((name.to_string(), PathBuf::from(path)));
    }
    if models.is_empty() {
        if let Some(m) = &b.models {
            models.extend(m.iter().map(|(k, v)| (k.clone(), v.clone())));
        }
    }
    if models.is_empty() {
        return Err(Error::config("metrics needs at least one --model NAME=PATH"));
    }
    let alphas = if a.alphas.is_empty() {
        b.alphas.clone().unwrap_or_else(|| DEFAULT_ALPHAS.to_vec())
    } else {
        a.alphas
    };
    let n_thresholds = a.thresholds.or(b.thresholds).unwrap_or(50);
    let over_weight = a.over_weight.or(b.over_weight).unwrap_or(DEFAULT_OVER_WEIGHT);
    let truth_sample = a.truth_sample.or_else(|| b.truth_sample.clone());
    let true_damage = a.true_damage.or(b.true_damage);

    let loaded = models
        .iter()
        .map(|(n, p)| Ok((n.clone(), io::read_damage_sample(p)?)))
        .collect::<Result<Vec<_>>>()?;
    let truth = match (&truth_sample, true_damage) {
        (Some(p), None) => Truth::Sample(io::read_damage_sample(p)?),
        (None, Some(y)) => Truth::Scalar(y),
        (Some(_), Some(_)) => return Err(Error::config("give either a truth sample or a true damage, not both")),
        (None, None) => return Err(Error::config("missing truth; pass --truth-sample or --true-damage")),
    };
    let mut pools: Vec<&[f64]> = loaded.iter().map(|(_, s)| s.as_slice()).collect();
    match &truth {
        Truth::Sample(s) => pools.push(s),
        Truth::Scalar(y) => pools.push(std::slice::from_ref(y)),
    }
    let thresholds = default_thresholds(&pools, n_thresholds);
    let report = build_risk_report(&loaded, &truth, &alphas, &thresholds, over_weight)?;
    io::write_risk_report(&out, &report)?;
    write_snapshot(
        &out,
        "metrics",
        &MetricsResolved {
            models: models.into_iter().collect(),
            truth_sample,
            true_damage,
            alphas,
            thresholds: n_thresholds,
            over_weight,
            out: out.clone(),
        },
    )?;
    for m in &report.models {
        let w = m.wasserstein.map(|w| format!(" W1 {w}")).unwrap_or_default();
        let levels: Vec<String> = m
            .levels
            .iter()
            .map(|l| format!("VaR{} {} TVaR {}", l.alpha, l.var, l.tvar))
            .collect();
        println!("{}:{w} {}", m.model, levels.join(" "));
    }
    Ok(())
}

#[derive(Serialize)]
struct BaselineResolved {
    catalog: PathBuf,
    events: Vec<String>,
    baselines: Vec<DeterministicBaseline>,
    out: PathBuf,
}

fn cmd_baseline(a: BaselineArgs, cfg: &RunConfig) -> Result<()> {
    let b = &cfg.baseline;
    let cat_dir = required(a.catalog.or_else(|| b.catalog.clone()), "catalog")?;
    let out = required(a.out.or_else(|| b.out.clone()), "out")?;
    let mut baselines = Vec::new();
    let names = if a.baselines.is_empty() { b.baselines.clone().unwrap_or_default() } else { a.baselines };
    for n in &names {
        baselines.push(DeterministicBaseline::named(n)?);
    }
    if let (Some(t), Some(h)) = (a.v_thresh, a.v_half) {
        baselines.push(DeterministicBaseline::custom(&a.label, EmanuelParams::new(t, h)?));
    }
    for c in b.custom.iter().flatten() {
        baselines.push(DeterministicBaseline::custom(&c.label, EmanuelParams::new(c.v_thresh, c.v_half)?));
    }
    if baselines.is_empty() {
        baselines = vec![DeterministicBaseline::baldwin(), DeterministicBaseline::eberenz()];
    }
    let catalog = io::read_catalog(&cat_dir)?;
    let requested = if a.events.is_empty() { b.events.clone().unwrap_or_default() } else { a.events };
    let events = select_events(&catalog, requested, false)?;
    let mut table = String::from("event_id,baseline,damage\n");
    for id in &events {
        let ev = catalog.event(id).expect("selected from catalog");
        for bl in &baselines {
            let d = baseline_predict(bl, catalog.exposure(), &ev.hazards)?;
            table.push_str(&format!("{id},{},{}\n", bl.label, io::fmt_f64(d)));
        }
    }
    io::write_text(&out.join("baseline.csv"), &table)?;
    write_snapshot(&out, "baseline", &BaselineResolved { catalog: cat_dir, events, baselines, out: out.clone() })?;
    print!("{table}");
    Ok(())
}

/// One-line JSON error record for stderr.
pub fn error_line(e: &Error) -> String {
    serde_json::json!({ "error": e.kind(), "code": e.exit_code(), "message": e.to_string() }).to_string()
}

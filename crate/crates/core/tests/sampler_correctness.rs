mod common;

use common::{conjugate_toy, three_state_frequencies, THREE_STATE_TARGET};
use mhbhm::damage::{generate_synthetic_catalog, ScenarioSpec};
use mhbhm::inference::{
    metropolis_accept, run_mcmc, DamagePosterior, McmcConfig, ModelFamily, PriorSpec, Provenance,
};
use mhbhm::rng::rng_from_seed;
use rand::Rng;

#[test]
fn conjugate_normal_posterior() {
    let o = conjugate_toy(31);
    assert!(
        (o.mc_mean - o.data_mean).abs() < 3.0 * o.mc_mean_se,
        "mean {} vs {} (se {})",
        o.mc_mean,
        o.data_mean,
        o.mc_mean_se
    );
    assert!(
        (o.mc_var - o.posterior_var).abs() < 3.0 * o.mc_var_se,
        "var {} vs {} (se {})",
        o.mc_var,
        o.posterior_var,
        o.mc_var_se
    );
}

#[test]
fn three_state_embedded_target() {
    let f = three_state_frequencies(12);
    for (got, want) in f.iter().zip(THREE_STATE_TARGET) {
        assert!((got - want).abs() < 0.02, "{f:?}");
    }
}

#[test]
fn three_state_discrete_chain() {
    // Symmetric proposal to one of the other two states, same accept rule.
    let mut rng = rng_from_seed(99);
    let mut state = 0usize;
    let mut counts = [0usize; 3];
    let steps = 200_000;
    for _ in 0..steps {
        let proposal = (state + rng.random_range(1..3)) % 3;
        let ratio = THREE_STATE_TARGET[proposal].ln() - THREE_STATE_TARGET[state].ln();
        if metropolis_accept(ratio, rng.random()) {
            state = proposal;
        }
        counts[state] += 1;
    }
    for (c, want) in counts.iter().zip(THREE_STATE_TARGET) {
        assert!((*c as f64 / steps as f64 - want).abs() < 0.02);
    }
}

fn small_catalog(seed: u64) -> mhbhm::damage::EventCatalog {
    let mut spec = ScenarioSpec::named("medium-high").unwrap().resized(8, 8);
    spec.n_events = 30;
    generate_synthetic_catalog(&spec, seed).unwrap().0
}

#[test]
fn damage_chains_respect_prior_support_and_are_deterministic() {
    let catalog = small_catalog(4);
    let family = ModelFamily::Multi;
    let priors = PriorSpec::tropical_cyclone(catalog.hazard_names());
    let target = DamagePosterior::new(&catalog, &family, &priors).unwrap();
    let config = McmcConfig { n_iter: 1500, burn_in: 500, seed: 8, ..McmcConfig::default() };
    let a = run_mcmc(&target, &config, Provenance::default()).unwrap();
    let b = run_mcmc(&target, &config, Provenance::default()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.chains.len(), 3);
    assert_ne!(a.chains[0].draws, a.chains[1].draws);
    for c in &a.chains {
        assert_eq!(c.draws.len(), 1500);
        for d in &c.draws {
            assert!((5.0..=15.0).contains(&d[0]), "gamma {}", d[0]);
            assert!(d[1] > 0.0 && d[2] > 0.0 && d[3] > 0.0, "{d:?}");
        }
        let rate = c.acceptance_rate();
        assert!((0.0..=1.0).contains(&rate));
    }
}

#[test]
fn single_hazard_family_drops_the_other_coefficient() {
    let catalog = small_catalog(5);
    let priors = PriorSpec::tropical_cyclone(catalog.hazard_names());
    let target =
        DamagePosterior::new(&catalog, &ModelFamily::parse("wind-only").unwrap(), &priors).unwrap();
    let config = McmcConfig { n_chains: 2, n_iter: 50, burn_in: 10, seed: 1, ..McmcConfig::default() };
    let s = run_mcmc(&target, &config, Provenance::default()).unwrap();
    assert_eq!(s.param_names, ["gamma", "beta_wind", "sigma2"]);
    assert!(s.chains.iter().all(|c| c.draws.iter().all(|d| d.len() == 3)));
}

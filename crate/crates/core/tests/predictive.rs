//! Posterior predictive behaviour on held-out synthetic events.

use mhbhm::damage::{generate_synthetic_catalog, ScenarioSpec};
use mhbhm::inference::{run_mcmc, DamagePosterior, McmcConfig, ModelFamily, PriorSpec, Provenance};
use mhbhm::predict::{
    posterior_predict, summarize_predictive, truth_damage_sample, TrainingFrame,
};
use mhbhm::risk::empirical_quantile;

#[test]
fn holdout_predictive_medians_sit_inside_true_damage_range() {
    let mut spec = ScenarioSpec::named("medium-high").unwrap();
    spec.n_holdout = 6;
    let (catalog, truth) = generate_synthetic_catalog(&spec, 17).unwrap();
    let training = catalog.observed();
    assert_eq!(training.len(), 113);
    let priors = PriorSpec::tropical_cyclone(training.hazard_names());
    let target = DamagePosterior::new(&training, &ModelFamily::Multi, &priors).unwrap();
    let config = McmcConfig { n_iter: 3000, burn_in: 1000, seed: 17, ..McmcConfig::default() };
    let posterior = run_mcmc(&target, &config, Provenance::default()).unwrap();
    let frame = TrainingFrame {
        hazard_names: catalog.hazard_names().to_vec(),
        normalization: catalog.normalization().map(<[_]>::to_vec),
    };

    for (i, h) in truth.holdout.iter().enumerate() {
        let event = catalog.event(&h.event_id).unwrap();
        assert!(event.observed_damage.is_none());
        let pred = posterior_predict(
            &posterior,
            &frame,
            catalog.exposure(),
            &h.event_id,
            &event.hazards,
            i as u64,
            Some(3000),
        )
        .unwrap();
        assert_eq!(pred.damages.len(), 3000);
        assert!(pred.damages.iter().all(|d| *d > 0.0 && d.is_finite()));

        let reference = truth_damage_sample(h.expected_damage, truth.sigma2, 20_000, 99).unwrap();
        let lo = empirical_quantile(&reference, 0.05).unwrap();
        let hi = empirical_quantile(&reference, 0.95).unwrap();
        let summary = summarize_predictive(&pred, Some(h.damage)).unwrap();
        assert!(
            lo < summary.median && summary.median < hi,
            "{}: median {} outside true 90% range [{lo}, {hi}]",
            h.event_id,
            summary.median
        );
        let p = summary.percentile_of_truth.unwrap();
        assert!((0.0..=1.0).contains(&p));
    }
}

#[test]
fn predictive_is_reproducible_and_seed_sensitive() {
    let mut spec = ScenarioSpec::named("low-high").unwrap().resized(10, 10);
    spec.n_events = 40;
    spec.n_holdout = 1;
    let (catalog, truth) = generate_synthetic_catalog(&spec, 3).unwrap();
    let training = catalog.observed();
    let priors = PriorSpec::tropical_cyclone(training.hazard_names());
    let target = DamagePosterior::new(&training, &ModelFamily::Multi, &priors).unwrap();
    let config = McmcConfig { n_iter: 600, burn_in: 200, seed: 3, ..McmcConfig::default() };
    let posterior = run_mcmc(&target, &config, Provenance::default()).unwrap();
    let frame = TrainingFrame {
        hazard_names: catalog.hazard_names().to_vec(),
        normalization: catalog.normalization().map(<[_]>::to_vec),
    };
    let h = &truth.holdout[0];
    let event = catalog.event(&h.event_id).unwrap();
    let run = |seed, draws| {
        posterior_predict(&posterior, &frame, catalog.exposure(), &h.event_id, &event.hazards, seed, draws)
            .unwrap()
            .damages
    };
    assert_eq!(run(1, Some(500)), run(1, Some(500)));
    assert_ne!(run(1, Some(500)), run(2, Some(500)));
    assert_eq!(run(1, None).len(), 3 * 400);
}

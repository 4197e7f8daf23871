mod common;

use common::{keys, load_fixture, random_model, random_observations};
use faultcorr::calculi::{Calculus, Cost};
use faultcorr::cli::report;
use faultcorr::explain::{Diagnosis, Observation};
use faultcorr::model::CauseId;
use faultcorr::sim::{simulate, Injection};
use faultcorr::temporal::TimePoint;
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn simulation_is_reproducible(model in 0u64..500, seed in any::<u64>(), t in 0i64..20) {
        let theory = random_model(model);
        let cause = CauseId(((seed as usize) % theory.model.causes.len()) as u32);
        let inj = [Injection { cause, time: t }];
        let a = simulate(&theory, &inj, seed, 200).unwrap();
        let b = simulate(&theory, &inj, seed, 200).unwrap();
        prop_assert_eq!(a.to_jsonl(), b.to_jsonl());
        prop_assert!(a.records.iter().all(|r| r.time >= t && r.time <= 200));
    }

    #[test]
    fn injected_cause_is_among_the_explanations(model in 0u64..500, seed in any::<u64>(), t in 0i64..20) {
        let theory = random_model(model);
        let cause = CauseId(((seed as usize) % theory.model.causes.len()) as u32);
        let log = simulate(&theory, &[Injection { cause, time: t }], seed, i64::MAX).unwrap();
        prop_assume!(!log.records.is_empty());
        let obs: Vec<Observation> = log.records.iter().map(|r| Observation::abnormal(r.port.clone(), r.time)).collect();
        for calculus in Calculus::ALL {
            let mut d = Diagnosis::new(&theory, &obs, calculus).unwrap();
            let set = d.explanations(Cost(f64::INFINITY));
            let covered = set.iter().any(|e| e.cause_ids().len() == 1 && e.window(cause).is_some_and(|w| w.contains(TimePoint::At(t))));
            prop_assert!(covered, "{calculus:?}: injection at {t} not explained by {:?}", set.explanations);
        }
    }

    #[test]
    fn results_ignore_observation_order(model in 0u64..500, seed in any::<u64>()) {
        let theory = random_model(model);
        let mut obs = random_observations(&theory, seed, true);
        let first = report::to_string(&report::explanations(&theory, &Diagnosis::new(&theory, &obs, Calculus::Probabilistic).unwrap().explanations(Cost(f64::INFINITY)).explanations));
        let k = seed as usize % obs.len();
        obs.rotate_left(k);
        let second = report::to_string(&report::explanations(&theory, &Diagnosis::new(&theory, &obs, Calculus::Probabilistic).unwrap().explanations(Cost(f64::INFINITY)).explanations));
        prop_assert_eq!(first, second);
    }

    #[test]
    fn bounded_results_are_a_prefix(model in 0u64..500, seed in any::<u64>(), lo in 0.0f64..6.0, extra in 0.0f64..6.0) {
        let theory = random_model(model);
        let obs = random_observations(&theory, seed, true);
        let calculus = Calculus::ALL[(seed % 3) as usize];
        let small = Diagnosis::new(&theory, &obs, calculus).unwrap().explanations(Cost(lo));
        let mut grown = Diagnosis::new(&theory, &obs, calculus).unwrap();
        let head = grown.raise_bound(Cost(lo)).unwrap();
        prop_assert_eq!(keys(head.iter()), keys(small.iter()));
        let delta = grown.raise_bound(Cost(lo + extra)).unwrap();
        let large = Diagnosis::new(&theory, &obs, calculus).unwrap().explanations(Cost(lo + extra));
        prop_assert!(keys(small.iter()).is_subset(&keys(large.iter())));
        prop_assert!(small.iter().all(|e| e.cost.0 <= lo));
        let mut union = keys(small.iter());
        for k in keys(delta.iter()) {
            prop_assert!(union.insert(k), "delta repeats an explanation");
        }
        prop_assert_eq!(union, keys(large.iter()));
    }
}

#[test]
fn symptom_frequency_matches_path_priors() {
    // a -> b (0.9) -> z (0.8)
    let theory = load_fixture("chain.fm");
    let a = CauseId(theory.model.causes.iter().position(|c| c.label.starts_with("a.")).unwrap() as u32);
    let runs = 10_000;
    let hits = (0..runs)
        .filter(|&seed| {
            let log = simulate(&theory, &[Injection { cause: a, time: 0 }], seed, i64::MAX).unwrap();
            log.records.iter().any(|r| r.port == "z.o")
        })
        .count();
    let freq = hits as f64 / runs as f64;
    assert!((freq - 0.72).abs() < 0.02, "z.o seen in {freq} of runs");
}

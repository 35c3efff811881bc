mod common;

use common::forward_checks::{algorithm1_check, death_binomial_pvalue, pulsed_network};
use guided_crn::forward::{next_reaction_thinning, NextReaction};
use guided_crn::{models, simulate_forward, Error, RngStream};
use proptest::prelude::*;

#[test]
fn death_endpoint_is_binomial() {
    let (p, dof) = death_binomial_pvalue(10_000, 101);
    assert!(dof >= 10, "{dof} degrees of freedom");
    assert!(p > 1e-3, "chi-square p = {p}");
}

#[test]
fn thinning_first_event_matches_integrated_hazard() {
    let c = algorithm1_check(10_000, 102);
    assert!(c.ks_pvalue > 0.01, "KS p = {}", c.ks_pvalue);
    assert!(c.fire_fraction_ok);
    assert!(c.reaction_split_ok);
}

#[test]
fn understated_bound_is_reported() {
    let net = pulsed_network();
    let mut rng = RngStream::new(1, 1);
    // The pulsed rate at x = 10 reaches 9, above the bound 1.
    let r = (0..100).find_map(|_| match next_reaction_thinning(&net, 0.0, &[10], &[1.0, 2.0], 1.0, &mut rng) {
        Err(e) => Some(e),
        Ok(_) => None,
    });
    assert!(matches!(r, Some(Error::InvalidBound { reaction: 0, .. })), "{r:?}");
}

#[test]
fn same_stream_same_path() {
    let net = models::gtt(100.0, 10.0, 25.0, 1.0);
    let a = simulate_forward(&net, &[1, 50, 10], 1.0, &mut RngStream::new(7, 3), 1_000_000).unwrap();
    let b = simulate_forward(&net, &[1, 50, 10], 1.0, &mut RngStream::new(7, 3), 1_000_000).unwrap();
    let c = simulate_forward(&net, &[1, 50, 10], 1.0, &mut RngStream::new(7, 4), 1_000_000).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn absorbed_death_path_stops() {
    let net = models::death(5.0);
    let p = simulate_forward(&net, &[3], 100.0, &mut RngStream::new(2, 0), 100).unwrap();
    assert_eq!(p.events.len(), 3);
    assert_eq!(p.final_state(&net), vec![0]);
}

#[test]
fn pulsed_first_event_is_absorbed_only_without_immigration() {
    let net = pulsed_network();
    let mut rng = RngStream::new(3, 0);
    let r = next_reaction_thinning(&net, 0.0, &[0], &[9.0, 0.0], 1.0, &mut rng).unwrap();
    assert_eq!(r, NextReaction::BeyondHorizon);
    let r = next_reaction_thinning(&net, 0.0, &[0], &[0.0, 0.0], 1.0, &mut rng).unwrap();
    assert_eq!(r, NextReaction::Absorbed);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn forward_paths_are_valid(seed in any::<u64>(), m in 0i64..80, p in 0i64..30) {
        let net = models::gtt(100.0, 10.0, 25.0, 1.0);
        let path = simulate_forward(&net, &[1, m, p], 1.0, &mut RngStream::new(seed, 0), 1_000_000).unwrap();
        prop_assert!(path.validate(&net).is_ok());
        let times: Vec<f64> = path.events.iter().map(|e| e.time).collect();
        prop_assert!(times.windows(2).all(|w| w[0] < w[1]));
        for (_, x) in path.replay(&net) {
            prop_assert!(x.iter().all(|&c| c >= 0));
            prop_assert_eq!(x[0], 1);
        }
    }

    #[test]
    fn isomerization_conserves_total(seed in any::<u64>(), a in 0i64..30, b in 0i64..30) {
        let net = models::isomerization(1.0, 0.5);
        let path = simulate_forward(&net, &[a, b], 2.0, &mut RngStream::new(seed, 1), 1_000_000).unwrap();
        for (_, x) in path.replay(&net) {
            prop_assert_eq!(x[0] + x[1], a + b);
        }
    }
}

//! Distributional checks of the guided simulator at frozen states.

use std::sync::Arc;

use nalgebra::DMatrix;

use guided_crn::guide::lna::MomentSolver;
use guided_crn::guide::{EpsilonGuide, FilterGuide, GuidingTerm, LnaRestartGuide, Noise, ObservationScheme, PoissonHybridGuide};
use guided_crn::guided::{simulate_guided, DeltaPolicy};
use guided_crn::{models, ReactionNetwork, RngStream};

use super::oracles::{isomerization_a, isomerization_scheme};
use super::{binomial_consistent, first_guided_jumps, guided_rate, ks_pvalue, ks_two_sample_pvalue, CumulativeHazard};

pub struct FrozenCase {
    pub name: &'static str,
    pub guide: Arc<dyn GuidingTerm>,
    pub net: Arc<ReactionNetwork>,
    pub x: Vec<i64>,
    pub t0: f64,
    pub end: f64,
}

pub fn death_epsilon_guide(v: i64, a: f64) -> EpsilonGuide {
    let s = ObservationScheme::single_full(1.0, &[v], Noise::Epsilon(1e-5)).unwrap();
    EpsilonGuide::new(s, &DMatrix::from_element(1, 1, a)).unwrap()
}

/// Frozen states covering increasing, decreasing and unknown trends of the
/// guided rate, and a multi-observation guide.
pub fn frozen_cases() -> Vec<FrozenCase> {
    let death = Arc::new(models::death(0.5));
    let scheme30 = ObservationScheme::single_full(1.0, &[30], Noise::Epsilon(1e-5)).unwrap();
    vec![
        FrozenCase { name: "epsilon_increasing", guide: Arc::new(death_epsilon_guide(30, 50.0)), net: death.clone(), x: vec![50], t0: 0.2, end: 0.95 },
        FrozenCase { name: "epsilon_decreasing", guide: Arc::new(death_epsilon_guide(30, 50.0)), net: death.clone(), x: vec![30], t0: 0.2, end: 0.95 },
        FrozenCase {
            name: "lna_unknown_trend",
            guide: Arc::new(LnaRestartGuide::new(death.clone(), scheme30.clone(), MomentSolver::death(0.5, 1.0)).unwrap()),
            net: death.clone(),
            x: vec![45],
            t0: 0.1,
            end: 0.9,
        },
        FrozenCase {
            name: "poisson_hybrid",
            guide: Arc::new(PoissonHybridGuide::new(scheme30, 0, false, &DMatrix::zeros(0, 0), 15.0).unwrap()),
            net: death,
            x: vec![40],
            t0: 0.3,
            end: 0.97,
        },
        FrozenCase {
            name: "filter_two_observations",
            guide: Arc::new(FilterGuide::new(isomerization_scheme(), &[isomerization_a()]).unwrap()),
            net: Arc::new(models::isomerization(1.0, 0.5)),
            x: vec![10, 9],
            t0: 0.05,
            end: 0.4,
        },
    ]
}

impl FrozenCase {
    /// Window rules that lead to different proposals; guides without a
    /// closed-form window always use half the remaining time.
    pub fn policies(&self) -> Vec<DeltaPolicy> {
        if self.name.starts_with("epsilon") {
            vec![DeltaPolicy::AnalyticEta(0.5), DeltaPolicy::HalfRemaining]
        } else {
            vec![DeltaPolicy::AnalyticEta(0.5)]
        }
    }
}

pub struct FrozenCheck {
    pub ks_pvalue: f64,
    pub fire_fraction_ok: bool,
}

/// First guided jump times from the frozen state against the cdf of the
/// integrated guided rate.
pub fn algorithm2_check(case: &FrozenCase, policy: DeltaPolicy, seed: u64, n: usize) -> FrozenCheck {
    let rate = |s: f64| guided_rate(&case.guide, &case.net, &case.x, s);
    let hazard = CumulativeHazard::new(rate, case.t0, case.end, 40_000);
    let draws = first_guided_jumps(&case.guide, &case.net, &case.x, case.t0, case.end, policy, seed, n);
    let times: Vec<f64> = draws.into_iter().flatten().collect();
    let p_fire = -(-hazard.total()).exp_m1();
    FrozenCheck {
        ks_pvalue: ks_pvalue(&times, |t| hazard.conditional_cdf(t)),
        fire_fraction_ok: binomial_consistent(times.len(), n, p_fire, 4.0),
    }
}

/// Time of the tenth event of guided death paths `50 -> 30` under `policy`.
pub fn tenth_event_times(policy: DeltaPolicy, seed: u64, n: usize) -> Vec<f64> {
    let net = models::death(0.5);
    let guide = death_epsilon_guide(30, 50.0);
    (0..n as u64)
        .map(|i| {
            let mut rng = RngStream::new(seed, i);
            let p = simulate_guided(&guide, &net, &[50], policy, &mut rng, 10_000).unwrap();
            p.path.events[9].time
        })
        .collect()
}

/// Smallest two-sample KS p-value between the closed-form window at
/// `eta = 0.5` and the alternative window rules.
pub fn delta_split_min_pvalue(seed: u64, n: usize) -> f64 {
    let base = tenth_event_times(DeltaPolicy::AnalyticEta(0.5), seed, n);
    let half = tenth_event_times(DeltaPolicy::HalfRemaining, seed + 1, n);
    let tight = tenth_event_times(DeltaPolicy::AnalyticEta(0.9), seed + 2, n);
    ks_two_sample_pvalue(&base, &half).min(ks_two_sample_pvalue(&base, &tight))
}

//! Distributional checks of the unconditioned simulator.

use guided_crn::experiment::run::binomial_pmf;
use guided_crn::forward::{next_reaction_thinning, thinning_bounds, NextReaction};
use guided_crn::{models, simulate_forward, Reaction, ReactionNetwork, RngStream};

use super::{binomial_consistent, chi_square_pvalue, ks_pvalue, pooled_chi_square, CumulativeHazard};

pub const DEATH_X0: i64 = 50;
pub const DEATH_C: f64 = 0.5;

/// Pooled chi-square p-value of `X(1)` from `n` forward death paths against
/// `Binomial(50, exp(-1/2))`.
pub fn death_binomial_pvalue(n: usize, seed: u64) -> (f64, usize) {
    let net = models::death(DEATH_C);
    let mut counts = vec![0u64; DEATH_X0 as usize + 1];
    for i in 0..n as u64 {
        let mut rng = RngStream::new(seed, i);
        let path = simulate_forward(&net, &[DEATH_X0], 1.0, &mut rng, 10_000).unwrap();
        counts[path.final_state(&net)[0] as usize] += 1;
    }
    let p = (-DEATH_C).exp();
    let expected: Vec<f64> = (0..=DEATH_X0).map(|k| n as f64 * binomial_pmf(DEATH_X0, p, k)).collect();
    let (stat, dof) = pooled_chi_square(&counts, &expected);
    (chi_square_pvalue(stat, dof), dof)
}

pub fn pulse(t: f64) -> f64 {
    1.0 + 0.8 * (2.0 * std::f64::consts::PI * t).sin()
}

/// Death at rate `c x pulse(t)` competing with immigration at rate 2.
pub fn pulsed_network() -> ReactionNetwork {
    ReactionNetwork::new(
        ["X"],
        vec![
            Reaction::custom("pulsed_death", vec![-1], true, Some(DEATH_C * 10.0 * 1.8), |t, z| DEATH_C * z[0] * pulse(t)),
            Reaction::mass_action("immigration", 2.0, vec![0], vec![1]),
        ],
    )
    .unwrap()
}

pub struct ThinningCheck {
    pub ks_pvalue: f64,
    pub fire_fraction_ok: bool,
    pub reaction_split_ok: bool,
}

/// First event from `x = 10` on `[0, 1]` by thinning, against the time
/// distribution from the integrated hazard.
pub fn algorithm1_check(n: usize, seed: u64) -> ThinningCheck {
    let net = pulsed_network();
    let x = [10i64];
    let rate = |s: f64| DEATH_C * 10.0 * pulse(s) + 2.0;
    let hazard = CumulativeHazard::new(rate, 0.0, 1.0, 20_000);
    let bounds = thinning_bounds(&net, 0.0, &x).unwrap();
    let (mut times, mut immigration) = (Vec::new(), 0usize);
    for i in 0..n as u64 {
        let mut rng = RngStream::new(seed, i);
        match next_reaction_thinning(&net, 0.0, &x, &bounds, 1.0, &mut rng).unwrap() {
            NextReaction::Fire { reaction, wait } => {
                times.push(wait);
                immigration += (reaction == 1) as usize;
            }
            NextReaction::BeyondHorizon => {}
            NextReaction::Absorbed => panic!("immigration keeps the state alive"),
        }
    }
    let p_fire = -(-hazard.total()).exp_m1();
    // P(immigration first) = int 2 S(s) ds over [0, 1].
    let grid = 20_000;
    let p_imm: f64 = (0..grid).map(|i| (i as f64 + 0.5) / grid as f64).map(|s| 2.0 * (-hazard.at(s)).exp() / grid as f64).sum();
    ThinningCheck {
        ks_pvalue: ks_pvalue(&times, |t| hazard.conditional_cdf(t)),
        fire_fraction_ok: binomial_consistent(times.len(), n, p_fire, 4.0),
        reaction_split_ok: binomial_consistent(immigration, times.len(), p_imm / p_fire, 4.0),
    }
}

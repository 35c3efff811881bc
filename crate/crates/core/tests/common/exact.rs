//! Exact transition probabilities of a finite-state network from the matrix
//! exponential of its generator.

use nalgebra::DMatrix;

use guided_crn::guide::{EpsilonGuide, Noise, Observation, ObservationScheme};
use guided_crn::weights::{run_replicates, summarize, EstimatorConfig, WeightSummary};
use guided_crn::models;

pub const K_FORWARD: f64 = 1.0;
pub const K_BACKWARD: f64 = 0.5;
pub const X0: [i64; 2] = [10, 9];
/// `a_CLE(0, x0)` restricted to `A`: `1.0 * 10 + 0.5 * 9`.
pub const A_AA: f64 = 14.5;
/// Terminal variance floor `a eps` of a quarter count squared.
pub const EPSILON: f64 = 0.25 / A_AA;

/// `P(A(1) = v)` for `v = 0..=19`, states indexed by the count of `A`.
pub fn isomerization_exact() -> Vec<f64> {
    let n = (X0[0] + X0[1]) as usize;
    let mut q = DMatrix::<f64>::zeros(n + 1, n + 1);
    for a in 0..=n {
        let b = n - a;
        let down = K_FORWARD * a as f64;
        let up = K_BACKWARD * b as f64;
        if a > 0 {
            q[(a, a - 1)] = down;
        }
        if a < n {
            q[(a, a + 1)] = up;
        }
        q[(a, a)] = -(down + up);
    }
    let p = q.exp();
    (0..=n).map(|v| p[(X0[0] as usize, v)]).collect()
}

/// Guided estimate of `P(A(1) = v)` from the component observation of `A`.
pub fn isomerization_guided(v: i64, replicates: usize, seed: u64) -> WeightSummary {
    let net = models::isomerization(K_FORWARD, K_BACKWARD);
    let scheme = ObservationScheme::new(2, vec![Observation::components(1.0, 2, &[0], &[v], Noise::Epsilon(EPSILON))]).unwrap();
    let a = DMatrix::from_diagonal_element(2, 2, A_AA);
    let guide = EpsilonGuide::new(scheme, &a).unwrap();
    let cfg = EstimatorConfig { replicates, seed, ..EstimatorConfig::default() };
    summarize(&run_replicates(&guide, &net, &X0, (v as u64) << 32, &cfg).unwrap()).unwrap()
}

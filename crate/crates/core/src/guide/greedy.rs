//! Exhaustive check that some active reaction always moves the state closer
//! to the next observation, which guarantees that the exact (`C = 0`) guide
//! hits every observation almost surely.

use nalgebra::DMatrix;

use super::{expand_a, to_real, ObservationScheme};
use crate::error::{Error, Result};
use crate::linalg;
use crate::network::ReactionNetwork;

#[derive(Clone, Debug, PartialEq)]
pub struct GreedyViolation {
    pub observation: usize,
    /// `[t_{k-1}, t_k)`.
    pub interval: (f64, f64),
    pub state: Vec<i64>,
}

/// States of `region` off the `k`-th target from which no active reaction
/// strictly decreases `d_k(v_k, L_k x)`, for every observation `k`.
pub fn check_greedy<'a>(
    net: &ReactionNetwork,
    scheme: &ObservationScheme,
    a: &[DMatrix<f64>],
    region: impl IntoIterator<Item = &'a [i64]> + Clone,
) -> Result<Vec<GreedyViolation>> {
    let a = expand_a(a, scheme.len(), scheme.dim())?;
    let mut out = Vec::new();
    for (k, obs) in scheme.observations().iter().enumerate() {
        let metric = linalg::spd_inverse(&(&obs.l * &a[k] * obs.l.transpose())).ok_or(Error::SingularMetric(k))?;
        let dist = |x: &[i64]| {
            let r = &obs.v - &obs.l * to_real(x);
            r.dot(&(&metric * &r))
        };
        let t0 = if k == 0 { 0.0 } else { scheme.times()[k - 1] };
        for x in region.clone() {
            if obs.is_hit(x) {
                continue;
            }
            let here = dist(x);
            let mut greedy = false;
            for l in 0..net.num_reactions() {
                if net.intensity(l, t0, x)? <= 0.0 {
                    continue;
                }
                let y: Vec<i64> = x.iter().zip(net.xi(l)).map(|(a, b)| a + b).collect();
                if dist(&y) < here {
                    greedy = true;
                    break;
                }
            }
            if !greedy {
                out.push(GreedyViolation { observation: k, interval: (t0, obs.time), state: x.to_vec() });
            }
        }
    }
    Ok(out)
}

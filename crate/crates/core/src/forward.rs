//! Exact simulation of the unconditioned jump process.
//!
//! Every reaction carries its own exponential clock. Time-homogeneous rates
//! are sampled directly; time-dependent rates go through Poisson thinning
//! against a per-reaction dominating constant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{IntensitySpec, ReactionNetwork};
use crate::rng::RngStream;

/// Default event budget per path.
pub const DEFAULT_MAX_EVENTS: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub reaction: usize,
}

/// Initial state plus ordered reaction events on `[0, horizon]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpPath {
    pub x0: Vec<i64>,
    pub events: Vec<Event>,
    pub horizon: f64,
}

impl JumpPath {
    pub fn new(x0: Vec<i64>, horizon: f64) -> Self {
        JumpPath { x0, events: Vec::new(), horizon }
    }

    /// Visits `(time, state)` after every event, starting with `(0, x0)`.
    pub fn replay<'a>(&'a self, net: &'a ReactionNetwork) -> impl Iterator<Item = (f64, Vec<i64>)> + 'a {
        let mut x = self.x0.clone();
        std::iter::once((0.0, x.clone())).chain(self.events.iter().map(move |e| {
            net.fire(e.reaction, &mut x);
            (e.time, x.clone())
        }))
    }

    /// Right-continuous state `X(t)`: events at exactly `t` are included.
    pub fn state_at(&self, net: &ReactionNetwork, t: f64) -> Vec<i64> {
        let mut x = self.x0.clone();
        for e in self.events.iter().take_while(|e| e.time <= t) {
            net.fire(e.reaction, &mut x);
        }
        x
    }

    /// Left limit `X(t-)`.
    pub fn state_before(&self, net: &ReactionNetwork, t: f64) -> Vec<i64> {
        let mut x = self.x0.clone();
        for e in self.events.iter().take_while(|e| e.time < t) {
            net.fire(e.reaction, &mut x);
        }
        x
    }

    pub fn final_state(&self, net: &ReactionNetwork) -> Vec<i64> {
        self.state_at(net, self.horizon)
    }

    /// Checks times are nondecreasing inside `[0, horizon]` and every
    /// visited state is nonnegative. Equal times occur when a guided rate is
    /// too large for the wait to be resolved in floating point.
    pub fn validate(&self, net: &ReactionNetwork) -> Result<()> {
        let mut prev = 0.0;
        for e in &self.events {
            if !(e.time >= prev && e.time <= self.horizon) {
                return Err(Error::Model(format!("event time {} out of order or outside [0, {}]", e.time, self.horizon)));
            }
            if e.reaction >= net.num_reactions() {
                return Err(Error::Model(format!("unknown reaction index {}", e.reaction)));
            }
            prev = e.time;
        }
        for (t, x) in self.replay(net) {
            if x.iter().any(|&c| c < 0) {
                return Err(Error::Model(format!("negative state at t={t}")));
            }
        }
        Ok(())
    }
}

/// Outcome of one next-reaction draw. `wait` is measured from the current time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NextReaction {
    Fire { reaction: usize, wait: f64 },
    /// Total intensity is zero; nothing can ever happen from this state.
    Absorbed,
    /// No proposal was accepted before the search horizon.
    BeyondHorizon,
}

/// Competing exponential clocks `tau_l ~ Exp(lambda_l(x))`.
pub fn next_reaction_homogeneous(net: &ReactionNetwork, t: f64, x: &[i64], rng: &mut RngStream) -> Result<NextReaction> {
    if let Some(reaction) = net.first_time_dependent() {
        return Err(Error::TimeDependentRate { reaction });
    }
    let mut best: Option<(usize, f64)> = None;
    for l in 0..net.num_reactions() {
        let rate = net.intensity(l, t, x)?;
        if rate <= 0.0 {
            continue;
        }
        let tau = rng.exp(rate);
        if best.is_none_or(|(_, b)| tau < b) {
            best = Some((l, tau));
        }
    }
    Ok(match best {
        Some((reaction, wait)) => NextReaction::Fire { reaction, wait },
        None => NextReaction::Absorbed,
    })
}

/// Poisson thinning with per-reaction constant bounds `bounds[l] >= sup_{s >= t} lambda_l(s, x)`.
///
/// Each reaction keeps a local clock: a rejected proposal at `s` restarts the
/// search from `s`. Clocks stop at `horizon` (absolute time) or once they pass
/// the earliest accepted time of another reaction, which cannot change the
/// minimum.
pub fn next_reaction_thinning(
    net: &ReactionNetwork,
    t: f64,
    x: &[i64],
    bounds: &[f64],
    horizon: f64,
    rng: &mut RngStream,
) -> Result<NextReaction> {
    if bounds.len() != net.num_reactions() {
        return Err(Error::Dimension(format!("{} bounds for {} reactions", bounds.len(), net.num_reactions())));
    }
    let mut best: Option<(usize, f64)> = None;
    let mut any_positive = false;
    for (l, &bound) in bounds.iter().enumerate() {
        if !(bound.is_finite() && bound >= 0.0) {
            return Err(Error::InvalidBound { reaction: l, time: t, value: f64::NAN, bound });
        }
        if bound == 0.0 {
            continue;
        }
        any_positive = true;
        let cap = best.map_or(horizon, |(_, b)| b.min(horizon));
        let mut s = t;
        loop {
            s += rng.exp(bound);
            if s > cap {
                break;
            }
            let value = net.intensity(l, s, x)?;
            if value > bound {
                return Err(Error::InvalidBound { reaction: l, time: s, value, bound });
            }
            if rng.uniform() * bound <= value {
                best = Some((l, s));
                break;
            }
        }
    }
    Ok(match best {
        Some((reaction, s)) => NextReaction::Fire { reaction, wait: s - t },
        None if !any_positive => NextReaction::Absorbed,
        None => NextReaction::BeyondHorizon,
    })
}

/// Thinning bounds at state `x`: the current rate for time-homogeneous
/// reactions, the declared uniform bound otherwise.
pub fn thinning_bounds(net: &ReactionNetwork, t: f64, x: &[i64]) -> Result<Vec<f64>> {
    net.reactions()
        .iter()
        .enumerate()
        .map(|(l, r)| match &r.intensity {
            IntensitySpec::Custom { time_dependent: true, bound, .. } => bound.ok_or(Error::MissingBound { reaction: l }),
            _ => net.intensity(l, t, x),
        })
        .collect()
}

/// Simulates until `horizon`, absorption, or the event budget runs out.
pub fn simulate_forward(
    net: &ReactionNetwork,
    x0: &[i64],
    horizon: f64,
    rng: &mut RngStream,
    max_events: usize,
) -> Result<JumpPath> {
    if x0.len() != net.dim() {
        return Err(Error::Dimension(format!("initial state has {} entries, network has {} species", x0.len(), net.dim())));
    }
    if x0.iter().any(|&c| c < 0) {
        return Err(Error::Model("initial state has negative counts".into()));
    }
    let homogeneous = net.is_time_homogeneous();
    let mut path = JumpPath::new(x0.to_vec(), horizon);
    let mut x = x0.to_vec();
    let mut t = 0.0;
    loop {
        let next = if homogeneous {
            next_reaction_homogeneous(net, t, &x, rng)?
        } else {
            let bounds = thinning_bounds(net, t, &x)?;
            next_reaction_thinning(net, t, &x, &bounds, horizon, rng)?
        };
        match next {
            NextReaction::Fire { reaction, wait } => {
                let s = t + wait;
                if s > horizon {
                    break;
                }
                if path.events.len() >= max_events {
                    return Err(Error::ExplosionGuard { max_events, partial: Box::new(path) });
                }
                net.fire(reaction, &mut x);
                path.events.push(Event { time: s, reaction });
                t = s;
            }
            NextReaction::Absorbed | NextReaction::BeyondHorizon => break,
        }
    }
    Ok(path)
}

//! Sampling the guided process.
//!
//! Reaction `l` fires at rate `lambda_l(x) alpha_l(t, x)`. With the state
//! frozen between jumps, each reaction's first firing time is drawn by
//! thinning:
//!
//! * a guided rate that decreases in time is dominated by its current value;
//! * an increasing or unknown rate is dominated on a window `[s, s + delta]`
//!   by its value at the right end (or by an exact supremum when the guiding
//!   term provides one, or by the larger endpoint otherwise). When no
//!   proposal lands in the window the search moves on to the next one.
//!
//! Windows are also shortened until the expected number of proposals in them
//! is moderate, so rates that blow up near an exact observation are handled
//! by progressively finer windows.

use crate::error::{Error, Result};
use crate::forward::{Event, JumpPath};
use crate::guide::{GuidingTerm, ObservationScheme, Trend};
use crate::network::ReactionNetwork;
use crate::rng::RngStream;

/// Log-rates above this are treated as immediate firing.
pub const LOG_RATE_MAX: f64 = 700.0;
/// Gap kept before each observation time; no event is placed closer.
pub const END_GUARD: f64 = 1e-12;
const MAX_WINDOW_PROPOSALS: f64 = 64.0;
/// Slack for rounding when checking a thinning bound.
const BOUND_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DeltaPolicy {
    /// Closed-form window keeping the acceptance ratio above `eta`, for
    /// guiding terms that provide one; half the remaining time otherwise.
    AnalyticEta(f64),
    /// `delta = (t_k - t) / 2`.
    HalfRemaining,
}

/// Counters collected while thinning.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThinningStats {
    pub proposals: u64,
    pub accepted: u64,
    pub window_advances: u64,
    /// Windows discarded because an endpoint bound was exceeded inside.
    pub bound_retries: u64,
    /// Smallest `log(lambda^g(proposal) / bound)` over proposals made in
    /// windows sized by the closed-form rule.
    pub min_log_ratio_analytic: f64,
}

impl Default for ThinningStats {
    fn default() -> Self {
        ThinningStats {
            proposals: 0,
            accepted: 0,
            window_advances: 0,
            bound_retries: 0,
            min_log_ratio_analytic: 0.0,
        }
    }
}

impl ThinningStats {
    pub fn merge(&mut self, other: &ThinningStats) {
        self.proposals += other.proposals;
        self.accepted += other.accepted;
        self.window_advances += other.window_advances;
        self.bound_retries += other.bound_retries;
        self.min_log_ratio_analytic = self.min_log_ratio_analytic.min(other.min_log_ratio_analytic);
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GuidedStep {
    Fire { reaction: usize, wait: f64 },
    /// No reaction fires before the end of the current observation interval.
    NoJumpBeforeEnd,
}

/// A guided path and whether it satisfies each observation.
#[derive(Clone, Debug, PartialEq)]
pub struct GuidedPath {
    pub path: JumpPath,
    pub hits: Vec<bool>,
}

impl GuidedPath {
    pub fn hit_all(&self) -> bool {
        self.hits.iter().all(|&h| h)
    }
}

/// Hit flags recomputed from the states at the observation times.
pub fn hits_from_path(path: &JumpPath, net: &ReactionNetwork, scheme: &ObservationScheme) -> Vec<bool> {
    scheme
        .times()
        .iter()
        .enumerate()
        .map(|(k, &tk)| scheme.is_hit(k, &path.state_at(net, tk)))
        .collect()
}

fn guarded_end(end: f64) -> f64 {
    end - END_GUARD * end.abs().max(1.0)
}

struct Clock<'a, G: ?Sized> {
    guide: &'a G,
    x: &'a [i64],
    xi: &'a [i64],
    ln_lam: f64,
    reaction: usize,
}

impl<G: GuidingTerm + ?Sized> Clock<'_, G> {
    fn log_rate(&self, s: f64) -> Result<f64> {
        Ok(self.ln_lam + self.guide.log_alpha(s, self.x, self.xi)?)
    }

    /// Log of a bound on the guided rate over `[s, w]`, and whether it is exact.
    fn window_bound(&self, trend: Trend, s: f64, w: f64) -> Result<(f64, bool)> {
        if let Some(sup) = self.guide.log_alpha_sup(s, w, self.x, self.xi) {
            return Ok((self.ln_lam + sup?, true));
        }
        match trend {
            Trend::Increasing => Ok((self.log_rate(w)?, true)),
            _ => Ok((self.log_rate(s)?.max(self.log_rate(w)?), false)),
        }
    }

    fn violation(&self, time: f64, value: f64, bound: f64) -> Error {
        Error::InvalidBound { reaction: self.reaction, time, value: value.exp(), bound: bound.exp() }
    }

    /// First firing time in `(t, cap)`, if any.
    #[allow(clippy::too_many_arguments)]
    fn sample(
        &self,
        t: f64,
        end: f64,
        cap: f64,
        trend: Trend,
        policy: DeltaPolicy,
        rng: &mut RngStream,
        stats: &mut ThinningStats,
    ) -> Result<Option<f64>> {
        let mut s = t;
        if trend == Trend::Decreasing {
            loop {
                if s >= cap {
                    return Ok(None);
                }
                let lb = self.log_rate(s)?;
                if lb == f64::NEG_INFINITY {
                    return Ok(None);
                }
                if lb > LOG_RATE_MAX {
                    return Ok(Some(s));
                }
                let prop = s + rng.exp(lb.exp());
                stats.proposals += 1;
                if prop >= cap {
                    return Ok(None);
                }
                let lv = self.log_rate(prop)?;
                if lv > lb + BOUND_TOL * lb.abs().max(1.0) {
                    return Err(self.violation(prop, lv, lb));
                }
                if rng.uniform().ln() <= lv - lb {
                    stats.accepted += 1;
                    return Ok(Some(prop));
                }
                s = prop;
            }
        }
        let mut scale = 1.0;
        loop {
            if s >= cap {
                return Ok(None);
            }
            let (delta, analytic) = match policy {
                DeltaPolicy::AnalyticEta(eta) if trend == Trend::Increasing => {
                    match self.guide.analytic_delta(s, self.x, self.xi, eta) {
                        Some(d) if d > 0.0 && d.is_finite() => (d, true),
                        _ => (0.5 * (end - s), false),
                    }
                }
                _ => (0.5 * (end - s), false),
            };
            let mut w = (s + scale * delta).min(cap);
            if w <= s {
                w = cap;
            }
            let (lb, exact) = loop {
                let (lb, exact) = self.window_bound(trend, s, w)?;
                if lb == f64::NEG_INFINITY {
                    break (lb, exact);
                }
                let crowded = lb + (w - s).ln() > MAX_WINDOW_PROPOSALS.ln();
                if lb > LOG_RATE_MAX || crowded {
                    let mid = s + 0.5 * (w - s);
                    if mid <= s || mid >= w {
                        // The rate is effectively infinite right after s.
                        return Ok(Some(s));
                    }
                    w = mid;
                    continue;
                }
                break (lb, exact);
            };
            if lb == f64::NEG_INFINITY {
                s = w;
                continue;
            }
            let prop = s + rng.exp(lb.exp());
            stats.proposals += 1;
            if prop > w {
                stats.window_advances += 1;
                s = w;
                continue;
            }
            let lv = self.log_rate(prop)?;
            if lv > lb + BOUND_TOL * lb.abs().max(1.0) {
                if exact {
                    return Err(self.violation(prop, lv, lb));
                }
                stats.bound_retries += 1;
                scale *= 0.5;
                continue;
            }
            if analytic && w < cap {
                stats.min_log_ratio_analytic = stats.min_log_ratio_analytic.min(lv - lb);
            }
            if rng.uniform().ln() <= lv - lb {
                stats.accepted += 1;
                return Ok(Some(prop));
            }
            s = prop;
        }
    }
}

/// Next guided reaction from `(t, x)` before `interval_end`.
#[allow(clippy::too_many_arguments)]
pub fn guided_next_reaction<G: GuidingTerm + ?Sized>(
    guide: &G,
    net: &ReactionNetwork,
    t: f64,
    x: &[i64],
    policy: DeltaPolicy,
    interval_end: f64,
    rng: &mut RngStream,
    stats: &mut ThinningStats,
) -> Result<GuidedStep> {
    if let Some(reaction) = net.first_time_dependent() {
        return Err(Error::TimeDependentRate { reaction });
    }
    let end = guarded_end(interval_end);
    if t >= end {
        return Ok(GuidedStep::NoJumpBeforeEnd);
    }
    let mut best: Option<(usize, f64)> = None;
    for l in 0..net.num_reactions() {
        let lam = net.intensity(l, t, x)?;
        if lam <= 0.0 {
            continue;
        }
        let xi = net.xi(l);
        let trend = guide.trend(t, x, xi);
        let clock = Clock { guide, x, xi, ln_lam: lam.ln(), reaction: l };
        let cap = best.map_or(end, |(_, b)| b.min(end));
        if let Some(time) = clock.sample(t, end, cap, trend, policy, rng, stats)? {
            if time < cap || best.is_none() && time <= cap {
                best = Some((l, time));
            }
        }
    }
    Ok(match best {
        Some((reaction, time)) => GuidedStep::Fire { reaction, wait: time - t },
        None => GuidedStep::NoJumpBeforeEnd,
    })
}

/// Simulates the guided process over every observation interval in turn.
pub fn simulate_guided<G: GuidingTerm + ?Sized>(
    guide: &G,
    net: &ReactionNetwork,
    x0: &[i64],
    policy: DeltaPolicy,
    rng: &mut RngStream,
    max_events: usize,
) -> Result<GuidedPath> {
    simulate_guided_with_stats(guide, net, x0, policy, rng, max_events, &mut ThinningStats::default())
}

pub fn simulate_guided_with_stats<G: GuidingTerm + ?Sized>(
    guide: &G,
    net: &ReactionNetwork,
    x0: &[i64],
    policy: DeltaPolicy,
    rng: &mut RngStream,
    max_events: usize,
    stats: &mut ThinningStats,
) -> Result<GuidedPath> {
    let scheme = guide.scheme();
    if x0.len() != net.dim() || scheme.dim() != net.dim() {
        return Err(Error::Dimension("initial state, scheme and network dimensions must agree".into()));
    }
    let mut path = JumpPath::new(x0.to_vec(), scheme.horizon());
    let mut hits = Vec::with_capacity(scheme.len());
    let mut x = x0.to_vec();
    let mut t = 0.0;
    for (k, &tk) in scheme.times().iter().enumerate() {
        loop {
            match guided_next_reaction(guide, net, t, &x, policy, tk, rng, stats)? {
                GuidedStep::Fire { reaction, wait } => {
                    if path.events.len() >= max_events {
                        return Err(Error::ExplosionGuard { max_events, partial: Box::new(path) });
                    }
                    t += wait;
                    net.fire(reaction, &mut x);
                    path.events.push(Event { time: t, reaction });
                }
                GuidedStep::NoJumpBeforeEnd => break,
            }
        }
        t = tk;
        hits.push(scheme.is_hit(k, &x));
    }
    Ok(GuidedPath { path, hits })
}

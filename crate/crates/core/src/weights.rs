//! Importance weights for guided paths and Monte Carlo estimates of
//! observation probabilities.
//!
//! For a guided path the likelihood ratio against the original process is
//!
//! `g(0, x0) Psi(X) / prod_k g(t_k, X(t_k))`, with
//! `log Psi = int (d/dt log g + sum_l lambda_l (alpha_l - 1))`
//!
//! taken along the path between jumps. On a path satisfying every
//! observation it collapses to
//!
//! `-sum_j log alpha_j(tau_j) + int sum_l lambda_l (alpha_l - 1)`,
//!
//! which needs no normalizing constant. Both forms are computed so each can
//! serve as a check on the other.

use std::cell::RefCell;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward::JumpPath;
use crate::guide::GuidingTerm;
use crate::guided::{hits_from_path, simulate_guided, DeltaPolicy};
use crate::network::ReactionNetwork;
use crate::quadrature::{integrate, QuadControl};
use crate::rng::RngStream;

/// Integration stops this far short of an observation time for guiding terms
/// that are singular there.
pub const DIVERGENCE_GAP: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsiEvaluation {
    pub log_g_initial: f64,
    /// `log g(t_n-, X(t_n-))`.
    pub log_g_terminal_left: f64,
    /// `log Psi`, with the time-derivative part integrated exactly.
    pub log_psi: f64,
    /// `-sum_j log alpha_j(tau_j)`.
    pub jump_term: f64,
    /// `int sum_l lambda_l (alpha_l - 1)`.
    pub rate_integral: f64,
    /// `jump_term + rate_integral`.
    pub log_combined: f64,
    /// The same quantity with `d/dt log g` integrated by quadrature, from
    /// [`log_psi_cross_checked`].
    pub log_combined_direct: Option<f64>,
}

/// Walks the path segment by segment between events and observation times.
pub fn log_psi<G: GuidingTerm + ?Sized>(guide: &G, net: &ReactionNetwork, path: &JumpPath, quad: &QuadControl) -> Result<PsiEvaluation> {
    psi_inner(guide, net, path, quad, false)
}

/// [`log_psi`] that also integrates `d/dt log g` along the path.
pub fn log_psi_cross_checked<G: GuidingTerm + ?Sized>(guide: &G, net: &ReactionNetwork, path: &JumpPath, quad: &QuadControl) -> Result<PsiEvaluation> {
    psi_inner(guide, net, path, quad, true)
}

fn psi_inner<G: GuidingTerm + ?Sized>(guide: &G, net: &ReactionNetwork, path: &JumpPath, quad: &QuadControl, direct: bool) -> Result<PsiEvaluation> {
    let scheme = guide.scheme();
    let diverges = guide.diverges_at_observations();
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let record = |r: Result<f64>| -> f64 {
        match r {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };

    let mut x = path.x0.clone();
    let mut t = 0.0;
    let mut events = path.events.iter().peekable();
    let log_g_initial = guide.log_g(0.0, &x)?;
    let mut log_g_terminal_left = f64::NAN;
    let (mut smooth, mut rate_integral, mut dt_integral, mut boundary, mut jump_term) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut lam = Vec::with_capacity(net.num_reactions());

    for &tk in scheme.times() {
        boundary += guide.log_g(t, &x)?;
        loop {
            let event = events.next_if(|e| e.time < tk);
            let b = event.map_or(tk, |e| e.time);
            let hi = if diverges && event.is_none() { (tk - DIVERGENCE_GAP).max(t) } else { b };
            net.intensities_into(t, &x, &mut lam)?;
            let rates = |s: f64| -> f64 {
                let mut acc = 0.0;
                for (l, &rate) in lam.iter().enumerate() {
                    if rate > 0.0 {
                        acc += rate * (record(guide.alpha(s, &x, net.xi(l))) - 1.0);
                    }
                }
                acc
            };
            let r = integrate(rates, t, hi, quad);
            let d = if direct { integrate(|s| record(guide.dt_log_g(s, &x)), t, hi, quad) } else { 0.0 };
            if let Some(e) = failure.borrow_mut().take() {
                return Err(e);
            }
            rate_integral += r;
            dt_integral += d;
            let start = guide.log_g(t, &x)?;
            match event {
                Some(e) => {
                    smooth += guide.log_g(b, &x)? - start;
                    jump_term -= guide.log_alpha(b, &x, net.xi(e.reaction))?;
                    net.fire(e.reaction, &mut x);
                    t = b;
                }
                None => {
                    let end = guide.log_g_left(tk, &x)?;
                    smooth += end - start;
                    boundary -= end;
                    log_g_terminal_left = end;
                    t = tk;
                    break;
                }
            }
        }
    }
    let eval = PsiEvaluation {
        log_g_initial,
        log_g_terminal_left,
        log_psi: smooth + rate_integral,
        jump_term,
        rate_integral,
        log_combined: jump_term + rate_integral,
        log_combined_direct: direct.then_some(boundary + dt_integral + rate_integral),
    };
    Ok(eval)
}

fn finite(v: f64, time: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteWeight(format!("log weight {v} at t={time}")))
    }
}

/// Weight of a path against a single observation; `None` on a miss.
pub fn log_weight_single<G: GuidingTerm + ?Sized>(guide: &G, net: &ReactionNetwork, path: &JumpPath, quad: &QuadControl) -> Result<Option<f64>> {
    let scheme = guide.scheme();
    if scheme.len() != 1 {
        return Err(Error::Scheme("a single-observation weight needs exactly one observation".into()));
    }
    if !hits_from_path(path, net, scheme)[0] {
        return Ok(None);
    }
    let psi = log_psi(guide, net, path, quad)?;
    finite(psi.log_g_initial + psi.log_psi - psi.log_g_terminal_left, scheme.horizon()).map(Some)
}

/// Weight of a path against every observation; `None` if any is missed.
pub fn log_weight_multi<G: GuidingTerm + ?Sized>(guide: &G, net: &ReactionNetwork, path: &JumpPath, quad: &QuadControl) -> Result<Option<f64>> {
    let scheme = guide.scheme();
    if !hits_from_path(path, net, scheme).iter().all(|&h| h) {
        return Ok(None);
    }
    let psi = log_psi(guide, net, path, quad)?;
    finite(psi.log_g_initial + psi.log_psi - guide.log_weight_constant(), scheme.horizon()).map(Some)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorConfig {
    pub replicates: usize,
    pub seed: u64,
    pub policy: DeltaPolicy,
    pub max_events: usize,
    pub quad: QuadControl,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            replicates: 1000,
            seed: 0,
            policy: DeltaPolicy::AnalyticEta(0.5),
            max_events: crate::forward::DEFAULT_MAX_EVENTS,
            quad: QuadControl::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Replicate {
    pub index: usize,
    pub events: usize,
    /// `None` if the path missed an observation.
    pub log_weight: Option<f64>,
}

/// Simulates `cfg.replicates` guided paths, replicate `i` on stream `stream_base + i`.
pub fn run_replicates<G: GuidingTerm + ?Sized>(
    guide: &G,
    net: &ReactionNetwork,
    x0: &[i64],
    stream_base: u64,
    cfg: &EstimatorConfig,
) -> Result<Vec<Replicate>> {
    if cfg.replicates == 0 {
        return Err(Error::InvalidReplicates);
    }
    (0..cfg.replicates)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(cfg.seed, stream_base.wrapping_add(i as u64));
            let p = simulate_guided(guide, net, x0, cfg.policy, &mut rng, cfg.max_events)?;
            let log_weight = if p.hit_all() { log_weight_multi(guide, net, &p.path, &cfg.quad)? } else { None };
            Ok(Replicate { index: i, events: p.path.events.len(), log_weight })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightSummary {
    pub estimate: f64,
    pub std_error: f64,
    pub log_estimate: f64,
    pub hits: usize,
    pub replicates: usize,
}

impl WeightSummary {
    pub fn hit_fraction(&self) -> f64 {
        self.hits as f64 / self.replicates as f64
    }
}

/// Sample mean and standard error of the weights, misses counting as zero.
pub fn summarize(reps: &[Replicate]) -> Result<WeightSummary> {
    let n = reps.len();
    if n == 0 {
        return Err(Error::InvalidReplicates);
    }
    let logs: Vec<f64> = reps.iter().filter_map(|r| r.log_weight).collect();
    let hits = logs.len();
    if hits == 0 {
        return Ok(WeightSummary { estimate: 0.0, std_error: 0.0, log_estimate: f64::NEG_INFINITY, hits, replicates: n });
    }
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s1: f64 = logs.iter().map(|w| (w - m).exp()).sum();
    let s2: f64 = logs.iter().map(|w| (2.0 * (w - m)).exp()).sum();
    let nf = n as f64;
    let mean_scaled = s1 / nf;
    let var_scaled = if n > 1 { (s2 / nf - mean_scaled * mean_scaled).max(0.0) * nf / (nf - 1.0) } else { 0.0 };
    let scale = m.exp();
    Ok(WeightSummary {
        estimate: mean_scaled * scale,
        std_error: (var_scaled / nf).sqrt() * scale,
        log_estimate: mean_scaled.ln() + m,
        hits,
        replicates: n,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PmfPoint {
    pub target: Vec<i64>,
    pub summary: WeightSummary,
}

/// Estimates `P(X(T) = v)` for each `v` in `support`, building one guiding
/// term per target.
pub fn estimate_pmf<F, G>(factory: F, net: &ReactionNetwork, x0: &[i64], support: &[Vec<i64>], cfg: &EstimatorConfig) -> Result<Vec<PmfPoint>>
where
    F: Fn(&[i64]) -> Result<G>,
    G: GuidingTerm,
{
    if cfg.replicates == 0 {
        return Err(Error::InvalidReplicates);
    }
    support
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let guide = factory(v)?;
            let reps = run_replicates(&guide, net, x0, (j as u64) << 32, cfg)?;
            Ok(PmfPoint { target: v.clone(), summary: summarize(&reps)? })
        })
        .collect()
}

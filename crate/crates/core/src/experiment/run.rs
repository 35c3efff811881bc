//! Seeded replicate runs behind the command-line subcommands.
//!
//! Replicate `i` always draws from stream `i` (or `(j << 32) + i` for the
//! `j`-th pmf target), and results are gathered in replicate order, so output
//! files depend only on the configuration and seed.

use std::collections::{HashSet, VecDeque};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{death_rate, ExperimentConfig, GuideKind, Reference};
use super::export;
use crate::error::{Error, Result};
use crate::forward::{simulate_forward, JumpPath};
use crate::guide::{check_greedy, GreedyViolation, GuidingTerm};
use crate::guided::{hits_from_path, simulate_guided, GuidedPath};
use crate::network::ReactionNetwork;
use crate::rng::RngStream;
use crate::weights::{estimate_pmf, log_weight_multi, summarize, EstimatorConfig, Replicate};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    /// `None` when no replicate hit.
    pub log_mean: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PmfRow {
    pub v: i64,
    pub estimate: f64,
    pub std_error: f64,
    pub hit_fraction: f64,
    pub zero_hits: bool,
    pub reference: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub command: String,
    pub guide: Option<String>,
    pub seed: u64,
    pub replicates: usize,
    pub observation_times: Vec<f64>,
    pub hit_fractions: Vec<f64>,
    pub all_hit_fraction: f64,
    pub mean_events: f64,
    pub estimate: Option<Estimate>,
    pub pmf: Vec<PmfRow>,
    /// Sum of squared errors against the reference pmf.
    pub sse: Option<f64>,
}

impl RunSummary {
    fn new(cfg: &ExperimentConfig, command: &str, guide: Option<&str>) -> Self {
        RunSummary {
            name: cfg.name.clone(),
            command: command.into(),
            guide: guide.map(String::from),
            seed: cfg.seed,
            replicates: cfg.replicates,
            observation_times: cfg.observations.iter().map(|o| o.time).collect(),
            hit_fractions: Vec::new(),
            all_hit_fraction: 0.0,
            mean_events: 0.0,
            estimate: None,
            pmf: Vec::new(),
            sse: None,
        }
    }

    fn set_hits(&mut self, hits: &[Vec<bool>], events: impl Iterator<Item = usize>) {
        let n = hits.len().max(1) as f64;
        let n_obs = self.observation_times.len();
        self.hit_fractions = (0..n_obs).map(|k| hits.iter().filter(|h| h[k]).count() as f64 / n).collect();
        self.all_hit_fraction = hits.iter().filter(|h| h.iter().all(|&b| b)).count() as f64 / n;
        self.mean_events = events.sum::<usize>() as f64 / n;
    }
}

/// Runs `f` on a pool of `threads` workers, or on the global pool.
pub fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| Error::Config(format!("threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

pub struct ForwardRun {
    pub summary: RunSummary,
    pub paths: Vec<JumpPath>,
}

/// Unconditioned paths up to the last observation time.
pub fn run_forward(cfg: &ExperimentConfig) -> Result<ForwardRun> {
    let net = cfg.network()?;
    let scheme = cfg.scheme()?;
    let paths = in_pool(cfg.threads, || {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|i| simulate_forward(&net, &cfg.x0, scheme.horizon(), &mut RngStream::new(cfg.seed, i as u64), cfg.max_events))
            .collect::<Result<Vec<_>>>()
    })??;
    let hits: Vec<Vec<bool>> = paths.iter().map(|p| hits_from_path(p, &net, &scheme)).collect();
    let mut summary = RunSummary::new(cfg, "forward", None);
    summary.set_hits(&hits, paths.iter().map(|p| p.events.len()));
    Ok(ForwardRun { summary, paths })
}

pub struct GuidedRun {
    pub summary: RunSummary,
    pub paths: Vec<GuidedPath>,
    pub replicates: Vec<Replicate>,
}

fn estimator_config(cfg: &ExperimentConfig) -> EstimatorConfig {
    EstimatorConfig { replicates: cfg.replicates, seed: cfg.seed, policy: cfg.delta_policy(), max_events: cfg.max_events, ..Default::default() }
}

fn guided_replicates(cfg: &ExperimentConfig, net: &ReactionNetwork, guide: &dyn GuidingTerm) -> Result<(Vec<GuidedPath>, Vec<Replicate>)> {
    let est = estimator_config(cfg);
    let out = in_pool(cfg.threads, || {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|i| {
                let mut rng = RngStream::new(cfg.seed, i as u64);
                let p = simulate_guided(guide, net, &cfg.x0, est.policy, &mut rng, est.max_events)?;
                let log_weight = if p.hit_all() { log_weight_multi(guide, net, &p.path, &est.quad)? } else { None };
                let rep = Replicate { index: i, events: p.path.events.len(), log_weight };
                Ok((p, rep))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(out.into_iter().unzip())
}

/// Guided paths through the configured observations, with their weights.
pub fn run_guided(cfg: &ExperimentConfig) -> Result<GuidedRun> {
    let net = Arc::new(cfg.network()?);
    let scheme = cfg.scheme()?;
    let a = cfg.a_matrix(&net)?;
    let guide = cfg.build_guide(&net, scheme, a)?;
    let (paths, replicates) = guided_replicates(cfg, &net, guide.as_ref())?;
    let hits: Vec<Vec<bool>> = paths.iter().map(|p| p.hits.clone()).collect();
    let mut summary = RunSummary::new(cfg, "guided", Some(cfg.guide.kind.as_str()));
    summary.set_hits(&hits, paths.iter().map(|p| p.path.events.len()));
    let s = summarize(&replicates)?;
    summary.estimate = Some(Estimate { mean: s.estimate, std_error: s.std_error, log_mean: s.log_estimate.is_finite().then_some(s.log_estimate) });
    Ok(GuidedRun { summary, paths, replicates })
}

pub fn binomial_pmf(n: i64, p: f64, k: i64) -> f64 {
    if k < 0 || k > n {
        return 0.0;
    }
    let ln_choose: f64 = (1..=k).map(|j| ((n - k + j) as f64).ln() - (j as f64).ln()).sum();
    let tail = if k == n { 0.0 } else { (n - k) as f64 * (1.0 - p).ln() };
    let head = if k == 0 { 0.0 } else { k as f64 * p.ln() };
    (ln_choose + head + tail).exp()
}

/// Estimated pmf of one component at the observation time, one guide per
/// target value.
pub fn run_pmf(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let p = cfg.pmf.as_ref().ok_or_else(|| Error::Config("pmf: section missing".into()))?;
    let net = Arc::new(cfg.network()?);
    let support: Vec<Vec<i64>> = (p.min..=p.max).map(|v| vec![v]).collect();
    let factory = |v: &[i64]| -> Result<Box<dyn GuidingTerm>> {
        let scheme = cfg.pmf_scheme(v[0])?;
        cfg.build_guide(&net, scheme, cfg.pmf_a_matrix(&net, v[0])?)
    };
    let points = in_pool(cfg.threads, || estimate_pmf(factory, &net, &cfg.x0, &support, &estimator_config(cfg)))??;
    let horizon = cfg.observations[0].time;
    let reference = match p.reference {
        Some(Reference::Binomial) => {
            let c = death_rate(&net).ok_or_else(|| Error::Config("pmf.reference: not a death network".into()))?;
            Some(move |v: i64| binomial_pmf(cfg.x0[0], (-c * horizon).exp(), v))
        }
        None => None,
    };
    let mut summary = RunSummary::new(cfg, "pmf", Some(cfg.guide.kind.as_str()));
    summary.pmf = points
        .iter()
        .map(|pt| PmfRow {
            v: pt.target[0],
            estimate: pt.summary.estimate,
            std_error: pt.summary.std_error,
            hit_fraction: pt.summary.hit_fraction(),
            zero_hits: pt.summary.hits == 0,
            reference: reference.as_ref().map(|f| f(pt.target[0])),
        })
        .collect();
    summary.hit_fractions = vec![summary.pmf.iter().map(|r| r.hit_fraction).sum::<f64>() / summary.pmf.len() as f64];
    summary.all_hit_fraction = summary.hit_fractions[0];
    summary.sse = reference.map(|_| summary.pmf.iter().map(|r| (r.estimate - r.reference.unwrap_or(0.0)).powi(2)).sum());
    Ok(summary)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneRow {
    pub multiplier: f64,
    pub a_trace: f64,
    /// `mean(log w | hit) + log(hit fraction)`, a lower bound on the log
    /// probability that is tight when the weights of hitting paths are
    /// constant; `-inf` without hits.
    pub criterion: f64,
    pub log_mean_weight: f64,
    pub hit_fraction: f64,
}

/// The tuning criterion for the `epsilon` guide at each multiple of `a`.
pub fn run_tune(cfg: &ExperimentConfig, multipliers: &[f64]) -> Result<Vec<TuneRow>> {
    if cfg.guide.kind != GuideKind::Epsilon {
        return Err(Error::Config("tune-a: needs guide.kind = \"epsilon\"".into()));
    }
    if multipliers.is_empty() || multipliers.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
        return Err(Error::Config("tune-a: multipliers must be positive".into()));
    }
    let net = Arc::new(cfg.network()?);
    let base = cfg.a_matrix(&net)?;
    multipliers
        .iter()
        .map(|&m| {
            let a = &base * m;
            let guide = cfg.build_guide(&net, cfg.scheme()?, a.clone())?;
            let (_, reps) = guided_replicates(cfg, &net, guide.as_ref())?;
            let s = summarize(&reps)?;
            let logs: Vec<f64> = reps.iter().filter_map(|r| r.log_weight).collect();
            let criterion = if logs.is_empty() {
                f64::NEG_INFINITY
            } else {
                logs.iter().sum::<f64>() / logs.len() as f64 + s.hit_fraction().ln()
            };
            Ok(TuneRow { multiplier: m, a_trace: a.trace(), criterion, log_mean_weight: s.log_estimate, hit_fraction: s.hit_fraction() })
        })
        .collect()
}

pub struct GreedyReport {
    pub states: usize,
    /// Whether exploration stopped at the state budget.
    pub truncated: bool,
    pub violations: Vec<GreedyViolation>,
}

/// States reachable from `x0` with every count at most `max_count`.
pub fn reachable_states(net: &ReactionNetwork, x0: &[i64], max_count: i64, max_states: usize) -> Result<(Vec<Vec<i64>>, bool)> {
    let mut seen: HashSet<Vec<i64>> = HashSet::new();
    let mut order = Vec::new();
    let mut queue = VecDeque::from([x0.to_vec()]);
    seen.insert(x0.to_vec());
    while let Some(x) = queue.pop_front() {
        if order.len() == max_states {
            return Ok((order, true));
        }
        for l in 0..net.num_reactions() {
            if net.intensity(l, 0.0, &x)? <= 0.0 {
                continue;
            }
            let y: Vec<i64> = x.iter().zip(net.xi(l)).map(|(a, b)| a + b).collect();
            if y.iter().all(|&c| c <= max_count) && seen.insert(y.clone()) {
                queue.push_back(y);
            }
        }
        order.push(x);
    }
    Ok((order, false))
}

pub fn run_greedy(cfg: &ExperimentConfig) -> Result<GreedyReport> {
    let net = cfg.network()?;
    let scheme = cfg.scheme()?;
    let a = cfg.a_matrix(&net)?;
    let largest = cfg.x0.iter().cloned().chain(cfg.observations.iter().flat_map(|o| o.v.iter().map(|v| v.round() as i64))).max().unwrap_or(0);
    let (max_count, max_states) = match &cfg.greedy {
        Some(g) => (g.max_count.unwrap_or(2 * largest + 10), g.max_states),
        None => (2 * largest + 10, 200_000),
    };
    let (states, truncated) = reachable_states(&net, &cfg.x0, max_count, max_states)?;
    let violations = check_greedy(&net, &scheme, &[a], states.iter().map(|x| x.as_slice()))?;
    Ok(GreedyReport { states: states.len(), truncated, violations })
}

pub fn save_forward(dir: &Path, cfg: &ExperimentConfig, run: &ForwardRun) -> Result<()> {
    if cfg.output.trajectories {
        export::write_paths(export::create(dir, "trajectories.csv")?, &cfg.network()?, &run.paths)?;
    }
    export::write_summary(&dir.join("summary.json"), &run.summary)
}

pub fn save_guided(dir: &Path, cfg: &ExperimentConfig, run: &GuidedRun) -> Result<()> {
    if cfg.output.trajectories {
        let paths: Vec<JumpPath> = run.paths.iter().map(|p| p.path.clone()).collect();
        export::write_paths(export::create(dir, "trajectories.csv")?, &cfg.network()?, &paths)?;
    }
    let hits: Vec<Vec<bool>> = run.paths.iter().map(|p| p.hits.clone()).collect();
    export::write_weights(export::create(dir, "weights.csv")?, &run.replicates, &hits)?;
    export::write_summary(&dir.join("summary.json"), &run.summary)
}

pub fn save_pmf(dir: &Path, summary: &RunSummary) -> Result<()> {
    export::write_pmf(export::create(dir, "pmf.csv")?, &summary.pmf)?;
    export::write_summary(&dir.join("summary.json"), summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_values() {
        let total: f64 = (0..=50).map(|k| binomial_pmf(50, 0.3, k)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((binomial_pmf(4, 0.5, 2) - 0.375).abs() < 1e-14);
        assert_eq!(binomial_pmf(4, 0.5, 5), 0.0);
    }

    #[test]
    fn reachable_death_states() {
        let net = crate::models::death(1.0);
        let (s, truncated) = reachable_states(&net, &[5], 100, 1000).unwrap();
        assert_eq!(s.len(), 6);
        assert!(!truncated);
        let (s, truncated) = reachable_states(&net, &[5], 100, 3).unwrap();
        assert_eq!(s.len(), 3);
        assert!(truncated);
    }
}

//! Experiment configuration, read from TOML.
//!
//! ```toml
//! seed = 7
//! replicates = 1000
//! x0 = [50]
//!
//! [network]
//! species = ["X"]
//! reactions = [{ name = "death", kappa = 0.5, orders = [1], xi = [-1] }]
//!
//! [[observations]]
//! time = 1.0
//! v = [30]
//! epsilon = 1e-5
//!
//! [guide]
//! kind = "epsilon"
//! a = [[50.0]]
//! ```

use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::guide::{
    default_a, g_epsilon, EulerCleGuide, FilterGuide, GuidingTerm, LnaRestartGuide, MBlockGuide, MomentSolver, Noise, Observation,
    ObservationScheme, PoissonHybridGuide,
};
use crate::guided::DeltaPolicy;
use crate::network::{IntensitySpec, Reaction, ReactionNetwork};
use crate::ode::OdeControl;

fn default_replicates() -> usize {
    1000
}
fn default_max_events() -> usize {
    crate::forward::DEFAULT_MAX_EVENTS
}
fn default_one() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}
fn default_eta() -> f64 {
    0.5
}
fn default_slope() -> f64 {
    2.5
}
fn default_max_states() -> usize {
    200_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default = "default_max_events")]
    pub max_events: usize,
    pub x0: Vec<i64>,
    pub network: NetworkConfig,
    pub observations: Vec<ObservationConfig>,
    #[serde(default)]
    pub guide: GuideConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pmf: Option<PmfConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tune: Option<TuneConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub greedy: Option<GreedyConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub species: Vec<String>,
    pub reactions: Vec<ReactionConfig>,
}

/// A mass-action reaction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionConfig {
    pub name: String,
    pub kappa: f64,
    pub orders: Vec<u32>,
    pub xi: Vec<i64>,
}

/// One observation. `L` is the identity unless `components` or `l` is given;
/// exactly one of `epsilon`, `covariance` and `exact = true` sets the noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationConfig {
    pub time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<Vec<Vec<f64>>>,
    pub v: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub exact: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuideKind {
    Epsilon,
    ZeroC,
    EulerCle,
    LnaRestart,
    PoissonHybrid,
}

impl GuideKind {
    pub const ALL: [GuideKind; 5] = [GuideKind::Epsilon, GuideKind::ZeroC, GuideKind::EulerCle, GuideKind::LnaRestart, GuideKind::PoissonHybrid];

    pub fn as_str(&self) -> &'static str {
        match self {
            GuideKind::Epsilon => "epsilon",
            GuideKind::ZeroC => "zero_c",
            GuideKind::EulerCle => "euler_cle",
            GuideKind::LnaRestart => "lna_restart",
            GuideKind::PoissonHybrid => "poisson_hybrid",
        }
    }
}

impl FromStr for GuideKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GuideKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown guide '{s}' (expected one of epsilon, zero_c, euler_cle, lna_restart, poisson_hybrid)")))
    }
}

/// `"auto"` for the floored CLE covariance at `(0, x0)`, or explicit rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AConfig {
    Keyword(String),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaRule {
    /// Total rate of the reactions moving the monotone component, at `x0`.
    InitialRate,
    /// The same rate with the monotone component set to its target.
    TargetRate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaMode {
    Analytic,
    Half,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentsMode {
    Ode,
    /// Closed-form moments, for the single-species death network only.
    DeathClosedForm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GuideConfig {
    pub kind: GuideKind,
    pub a: AConfig,
    #[serde(default = "default_one")]
    pub a_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_rule: Option<ThetaRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monotone: Option<usize>,
    #[serde(default = "default_true")]
    pub increasing: bool,
    #[serde(default = "default_eta")]
    pub eta: f64,
    pub delta: DeltaMode,
    pub moments: MomentsMode,
}

impl Default for GuideConfig {
    fn default() -> Self {
        GuideConfig {
            kind: GuideKind::Epsilon,
            a: AConfig::Keyword("auto".into()),
            a_scale: 1.0,
            theta: None,
            theta_rule: None,
            monotone: None,
            increasing: true,
            eta: 0.5,
            delta: DeltaMode::Analytic,
            moments: MomentsMode::Ode,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ARule {
    /// `a = max(a_slope (x0 - v), a_min) I`.
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// `Binomial(x0, exp(-c T))`, exact for the death network.
    Binomial,
}

/// Probability mass function of one component at the first observation time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmfConfig {
    #[serde(default)]
    pub component: usize,
    pub min: i64,
    pub max: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_rule: Option<ARule>,
    #[serde(default = "default_slope")]
    pub a_slope: f64,
    #[serde(default = "default_one")]
    pub a_min: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Reference>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneConfig {
    pub multipliers: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreedyConfig {
    /// Largest count explored per species.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_count: Option<i64>,
    #[serde(default = "default_max_states")]
    pub max_states: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_true")]
    pub trajectories: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { trajectories: true }
    }
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    if n == 0 || m == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(Error::Config(format!("{what}: rows must be non-empty and of equal length")));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Structural checks; building the network and scheme checks the rest.
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidReplicates);
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads: must be positive".into()));
        }
        let net = self.network()?;
        if self.x0.len() != net.dim() {
            return Err(Error::Config(format!("x0: has {} entries, network has {} species", self.x0.len(), net.dim())));
        }
        if self.x0.iter().any(|&c| c < 0) {
            return Err(Error::Config("x0: counts must be nonnegative".into()));
        }
        if self.observations.is_empty() {
            return Err(Error::Config("observations: at least one is required".into()));
        }
        self.scheme()?;
        let g = &self.guide;
        if !(g.eta > 0.0 && g.eta < 1.0) {
            return Err(Error::Config(format!("guide.eta: {} is not in (0, 1)", g.eta)));
        }
        if !(g.a_scale.is_finite() && g.a_scale > 0.0) {
            return Err(Error::Config(format!("guide.a_scale: {} must be positive", g.a_scale)));
        }
        match &g.a {
            AConfig::Keyword(k) if k != "auto" => return Err(Error::Config(format!("guide.a: expected \"auto\" or a matrix, got \"{k}\""))),
            AConfig::Matrix(rows) => {
                let a = matrix(rows, "guide.a")?;
                if a.nrows() != net.dim() || a.ncols() != net.dim() {
                    return Err(Error::Config(format!("guide.a: must be {0}x{0}", net.dim())));
                }
            }
            _ => {}
        }
        if g.kind == GuideKind::PoissonHybrid {
            match g.monotone {
                Some(m) if m < net.dim() => {}
                _ => return Err(Error::Config("guide.monotone: a valid species index is required by poisson_hybrid".into())),
            }
            if g.theta.is_some() == g.theta_rule.is_some() {
                return Err(Error::Config("guide: poisson_hybrid needs exactly one of theta and theta_rule".into()));
            }
        }
        if g.moments == MomentsMode::DeathClosedForm {
            death_rate(&net).ok_or_else(|| Error::Config("guide.moments: death_closed_form needs the one-species death network".into()))?;
        }
        if let Some(p) = &self.pmf {
            if p.component >= net.dim() {
                return Err(Error::Config(format!("pmf.component: {} out of range", p.component)));
            }
            if p.min > p.max || p.min < 0 {
                return Err(Error::Config("pmf: need 0 <= min <= max".into()));
            }
            if self.observations.len() != 1 {
                return Err(Error::Config("pmf: needs exactly one observation (its time and noise are used)".into()));
            }
            if p.reference == Some(Reference::Binomial) && death_rate(&net).is_none() {
                return Err(Error::Config("pmf.reference: binomial needs the one-species death network".into()));
            }
        }
        if let Some(t) = &self.tune {
            if t.multipliers.is_empty() || t.multipliers.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
                return Err(Error::Config("tune.multipliers: need positive values".into()));
            }
        }
        Ok(())
    }

    pub fn network(&self) -> Result<ReactionNetwork> {
        let reactions = self
            .network
            .reactions
            .iter()
            .map(|r| Reaction::mass_action(r.name.clone(), r.kappa, r.orders.clone(), r.xi.clone()))
            .collect();
        ReactionNetwork::new(self.network.species.iter().cloned(), reactions).map_err(|e| match e {
            Error::Model(m) => Error::Config(format!("network: {m}")),
            other => other,
        })
    }

    fn observation(&self, k: usize, o: &ObservationConfig, d: usize) -> Result<Observation> {
        let field = |f: &str| format!("observations[{k}].{f}");
        let noise = match (o.epsilon, &o.covariance, o.exact) {
            (Some(e), None, false) => Noise::Epsilon(e),
            (None, Some(c), false) => Noise::Covariance(matrix(c, &field("covariance"))?),
            (None, None, true) => Noise::Zero,
            _ => return Err(Error::Config(format!("observations[{k}]: give exactly one of epsilon, covariance, exact = true"))),
        };
        let l = match (&o.components, &o.l) {
            (Some(_), Some(_)) => return Err(Error::Config(format!("observations[{k}]: give at most one of components and l"))),
            (Some(c), None) => {
                if c.iter().any(|&j| j >= d) {
                    return Err(Error::Config(format!("{}: index out of range", field("components"))));
                }
                let mut l = DMatrix::zeros(c.len(), d);
                for (row, &j) in c.iter().enumerate() {
                    l[(row, j)] = 1.0;
                }
                l
            }
            (None, Some(rows)) => matrix(rows, &field("l"))?,
            (None, None) => DMatrix::identity(d, d),
        };
        if o.v.len() != l.nrows() {
            return Err(Error::Config(format!("{}: has {} entries, L has {} rows", field("v"), o.v.len(), l.nrows())));
        }
        Ok(Observation { time: o.time, l, v: DVector::from_column_slice(&o.v), noise })
    }

    pub fn scheme(&self) -> Result<ObservationScheme> {
        let d = self.network.species.len();
        let obs = self.observations.iter().enumerate().map(|(k, o)| self.observation(k, o, d)).collect::<Result<Vec<_>>>()?;
        ObservationScheme::new(d, obs).map_err(|e| match e {
            Error::Scheme(m) => Error::Config(format!("observations: {m}")),
            other => other,
        })
    }

    /// The single-observation scheme targeting `v` in the pmf component.
    pub fn pmf_scheme(&self, v: i64) -> Result<ObservationScheme> {
        let p = self.pmf.as_ref().ok_or_else(|| Error::Config("pmf: section missing".into()))?;
        let d = self.network.species.len();
        let base = self.observation(0, &self.observations[0], d)?;
        ObservationScheme::new(d, vec![Observation::components(base.time, d, &[p.component], &[v], base.noise)])
    }

    /// The diffusion matrix for the guide, before any per-target rule.
    pub fn a_matrix(&self, net: &ReactionNetwork) -> Result<DMatrix<f64>> {
        let a = match &self.guide.a {
            AConfig::Matrix(rows) => matrix(rows, "guide.a")?,
            AConfig::Keyword(_) => default_a(net, &self.x0),
        };
        Ok(a * self.guide.a_scale)
    }

    /// `a` for a pmf target, with the pmf rule applied if one is set.
    pub fn pmf_a_matrix(&self, net: &ReactionNetwork, v: i64) -> Result<DMatrix<f64>> {
        match self.pmf.as_ref().and_then(|p| p.a_rule.map(|r| (r, p))) {
            Some((ARule::Linear, p)) => {
                let scalar = (p.a_slope * (self.x0[p.component] - v) as f64).max(p.a_min) * self.guide.a_scale;
                Ok(DMatrix::identity(net.dim(), net.dim()) * scalar)
            }
            None => self.a_matrix(net),
        }
    }

    pub fn delta_policy(&self) -> DeltaPolicy {
        match self.guide.delta {
            DeltaMode::Analytic => DeltaPolicy::AnalyticEta(self.guide.eta),
            DeltaMode::Half => DeltaPolicy::HalfRemaining,
        }
    }

    fn theta(&self, net: &ReactionNetwork, target: &[i64]) -> Result<f64> {
        let g = &self.guide;
        let m = g.monotone.unwrap_or(0);
        let moving_rate = |x: &[i64]| -> Result<f64> {
            let mut total = 0.0;
            for l in 0..net.num_reactions() {
                if net.xi(l)[m] != 0 {
                    total += net.intensity(l, 0.0, x)?;
                }
            }
            Ok(total)
        };
        match (g.theta, g.theta_rule) {
            (Some(theta), _) => Ok(theta),
            (None, Some(ThetaRule::InitialRate)) => moving_rate(&self.x0),
            (None, Some(ThetaRule::TargetRate)) => {
                let mut x = self.x0.clone();
                x[m] = target[m];
                let rate = moving_rate(&x)?;
                if rate > 0.0 {
                    return Ok(rate);
                }
                // One step short of the target, on the side the component comes from.
                x[m] = target[m] + if g.increasing { -1 } else { 1 };
                if x[m] < 0 {
                    return Err(Error::Config("guide.theta_rule: target rate is zero".into()));
                }
                moving_rate(&x)
            }
            (None, None) => Err(Error::Config("guide: poisson_hybrid needs theta or theta_rule".into())),
        }
    }

    /// The configured guiding term for `scheme`, with diffusion matrix `a`.
    pub fn build_guide(&self, net: &Arc<ReactionNetwork>, scheme: ObservationScheme, a: DMatrix<f64>) -> Result<Box<dyn GuidingTerm>> {
        let g = &self.guide;
        match g.kind {
            GuideKind::Epsilon => {
                if scheme.observations().iter().all(|o| matches!(o.noise, Noise::Epsilon(_))) {
                    g_epsilon(scheme, &[a])
                } else {
                    Ok(Box::new(FilterGuide::new(scheme, &[a])?))
                }
            }
            GuideKind::ZeroC => Ok(Box::new(MBlockGuide::new(scheme.with_noise(Noise::Zero), &[a])?)),
            GuideKind::EulerCle => Ok(Box::new(EulerCleGuide::new(net.clone(), scheme)?)),
            GuideKind::LnaRestart => {
                let solver = match g.moments {
                    MomentsMode::Ode => MomentSolver::Ode(OdeControl::default()),
                    MomentsMode::DeathClosedForm => {
                        let c = death_rate(net).ok_or_else(|| Error::Config("guide.moments: not a death network".into()))?;
                        MomentSolver::death(c, scheme.horizon())
                    }
                };
                Ok(Box::new(LnaRestartGuide::new(net.clone(), scheme, solver)?))
            }
            GuideKind::PoissonHybrid => {
                let m = g.monotone.ok_or_else(|| Error::Config("guide.monotone: required by poisson_hybrid".into()))?;
                if scheme.len() != 1 {
                    return Err(Error::Config("guide: poisson_hybrid handles a single observation".into()));
                }
                let target: Vec<i64> = scheme.observations()[0].v.iter().map(|c| c.round() as i64).collect();
                let theta = self.theta(net, &target)?;
                let keep: Vec<usize> = (0..net.dim()).filter(|&j| j != m).collect();
                let a_sub = a.select_rows(&keep).select_columns(&keep);
                Ok(Box::new(PoissonHybridGuide::new(scheme, m, g.increasing, &a_sub, theta)?))
            }
        }
    }
}

/// `c` if the network is exactly `X -> 0` at rate `c x`.
pub fn death_rate(net: &ReactionNetwork) -> Option<f64> {
    if net.dim() != 1 || net.num_reactions() != 1 || net.xi(0) != [-1] {
        return None;
    }
    match &net.reactions()[0].intensity {
        IntensitySpec::MassAction { kappa, orders } if orders == &[1] => Some(*kappa),
        _ => None,
    }
}

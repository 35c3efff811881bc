//! Guiding terms `g(t, x)` and the observation schemes they condition on.
//!
//! A guiding term replaces the intractable conditional probability `h` of a
//! Doob h-transform. The guided process keeps the jumps of the original one
//! but fires reaction `l` at rate `alpha_l(t, x) lambda_l(x)` with
//! `alpha_l(t, x) = g(t, x + xi_l) / g(t, x)`.
//!
//! Everything is evaluated on the log scale. `g = 0` is `-inf`; a ratio with a
//! vanishing numerator is `-inf` (the reaction is switched off) and a ratio
//! with a vanishing denominator is [`Error::EvaluationAtMiss`].

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::network::ReactionNetwork;

pub mod epsilon;
pub mod euler;
pub mod filter;
pub mod greedy;
pub mod lna;
pub mod mblock;
pub mod poisson;

pub use epsilon::{g_epsilon, EpsilonGuide};
pub use euler::EulerCleGuide;
pub use filter::{BackwardFilter, FilterGuide};
pub use greedy::{check_greedy, GreedyViolation};
pub use lna::{LnaRestartGuide, MomentSolver};
pub use mblock::MBlockGuide;
pub use poisson::PoissonHybridGuide;

/// How the guided rate of one reaction moves in time at a frozen state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trend {
    Decreasing,
    Increasing,
    Unknown,
}

/// Noise model attached to one observation `v = L X(t) + N(0, C)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Noise {
    /// `C = eps * L a L'` for the diffusion-based guides; `C = eps * I` for the
    /// Gaussian-density guides.
    Epsilon(f64),
    Covariance(DMatrix<f64>),
    /// Exact observation.
    Zero,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub time: f64,
    pub l: DMatrix<f64>,
    pub v: DVector<f64>,
    pub noise: Noise,
}

impl Observation {
    /// Full observation `L = I` of an integer target.
    pub fn full(time: f64, target: &[i64], noise: Noise) -> Self {
        let d = target.len();
        Observation {
            time,
            l: DMatrix::identity(d, d),
            v: DVector::from_iterator(d, target.iter().map(|&c| c as f64)),
            noise,
        }
    }

    /// Observation of selected components, `L` a row selection of `I_d`.
    pub fn components(time: f64, d: usize, components: &[usize], values: &[i64], noise: Noise) -> Self {
        let mut l = DMatrix::zeros(components.len(), d);
        for (row, &c) in components.iter().enumerate() {
            l[(row, c)] = 1.0;
        }
        Observation {
            time,
            l,
            v: DVector::from_iterator(values.len(), values.iter().map(|&c| c as f64)),
            noise,
        }
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// `L x - v` for an integer state.
    pub fn residual(&self, x: &[i64]) -> DVector<f64> {
        let xv = DVector::from_iterator(x.len(), x.iter().map(|&c| c as f64));
        &self.l * xv - &self.v
    }

    pub fn is_hit(&self, x: &[i64]) -> bool {
        self.residual(x).iter().all(|r| r.abs() < 1e-9)
    }

    /// Noise covariance given the per-interval diffusion matrix `a`.
    pub fn covariance(&self, a: &DMatrix<f64>, diffusion_scaled: bool) -> DMatrix<f64> {
        let m = self.dim();
        match &self.noise {
            Noise::Epsilon(eps) if diffusion_scaled => (&self.l * a * self.l.transpose()) * *eps,
            Noise::Epsilon(eps) => DMatrix::identity(m, m) * *eps,
            Noise::Covariance(c) => c.clone(),
            Noise::Zero => DMatrix::zeros(m, m),
        }
    }
}

/// Ordered observations `0 < t_1 < ... < t_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationScheme {
    observations: Vec<Observation>,
    times: Vec<f64>,
    dim: usize,
}

impl ObservationScheme {
    pub fn new(dim: usize, observations: Vec<Observation>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::Scheme("at least one observation is required".into()));
        }
        let mut prev = 0.0;
        for (k, o) in observations.iter().enumerate() {
            if !(o.time > prev) || !o.time.is_finite() {
                return Err(Error::Scheme(format!("observation {k}: time {} is not after {prev}", o.time)));
            }
            prev = o.time;
            let m = o.l.nrows();
            if o.l.ncols() != dim || m == 0 || m > dim {
                return Err(Error::Scheme(format!("observation {k}: L is {}x{}, state dimension {dim}", m, o.l.ncols())));
            }
            if o.v.len() != m {
                return Err(Error::Scheme(format!("observation {k}: v has length {}, L has {m} rows", o.v.len())));
            }
            if m == dim && o.l != DMatrix::identity(dim, dim) {
                return Err(Error::Scheme(format!("observation {k}: a square observation matrix must be the identity")));
            }
            let gram_eig = linalg::eigenvalues_sym(&(&o.l * o.l.transpose()));
            if !(gram_eig.min() > 1e-10 * gram_eig.max()) {
                return Err(Error::Scheme(format!("observation {k}: L does not have full row rank")));
            }
            match &o.noise {
                Noise::Epsilon(eps) if !(eps.is_finite() && *eps > 0.0) => {
                    return Err(Error::Scheme(format!("observation {k}: epsilon must be positive")));
                }
                Noise::Covariance(c) if c.nrows() != m || c.ncols() != m => {
                    return Err(Error::Scheme(format!("observation {k}: C must be {m}x{m}")));
                }
                _ => {}
            }
        }
        let times = observations.iter().map(|o| o.time).collect();
        Ok(ObservationScheme { observations, times, dim })
    }

    /// Single full observation of `target` at time `t` with noise `noise`.
    pub fn single_full(t: f64, target: &[i64], noise: Noise) -> Result<Self> {
        ObservationScheme::new(target.len(), vec![Observation::full(t, target, noise)])
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("non-empty scheme")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_hit(&self, k: usize, x: &[i64]) -> bool {
        self.observations[k].is_hit(x)
    }

    /// Index `k` of the observation interval containing `t` under the
    /// right-continuous convention: `t in [t_{k-1}, t_k)`, and the last
    /// interval for `t >= t_n`.
    pub fn interval_of(&self, t: f64) -> usize {
        let n = self.times.len();
        self.times.partition_point(|&tk| tk <= t).min(n - 1)
    }

    /// Index of the interval whose right end is `t` when `t` is an observation time.
    pub fn observation_at(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&tk| tk == t)
    }

    /// Replaces every noise model, keeping times, `L` and `v`.
    pub fn with_noise(&self, noise: Noise) -> Self {
        let mut s = self.clone();
        for o in &mut s.observations {
            o.noise = noise.clone();
        }
        s
    }

    pub fn all_zero_noise(&self) -> bool {
        self.observations.iter().all(|o| matches!(o.noise, Noise::Zero))
    }
}

/// Per-interval diffusion matrices, one for each observation interval.
pub fn expand_a(a: &[DMatrix<f64>], n: usize, d: usize) -> Result<Vec<DMatrix<f64>>> {
    let list: Vec<DMatrix<f64>> = match a.len() {
        1 => vec![a[0].clone(); n],
        len if len == n => a.to_vec(),
        len => return Err(Error::Dimension(format!("{len} diffusion matrices for {n} observation intervals"))),
    };
    for m in &list {
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::Dimension(format!("diffusion matrix is {}x{}, expected {d}x{d}", m.nrows(), m.ncols())));
        }
    }
    Ok(list)
}

/// `a_CLE(0, x0)` with eigenvalues floored at `1e-3` of the largest one.
pub fn default_a(net: &ReactionNetwork, x0: &[i64]) -> DMatrix<f64> {
    linalg::floor_eigenvalues(&net.cle().covariance_at(0.0, x0), 1e-3)
}

/// Combines `log g(x + xi)` and `log g(x)` into `log alpha`.
pub fn log_ratio(num: f64, den: f64, t: f64) -> Result<f64> {
    if den == f64::NEG_INFINITY {
        return Err(Error::EvaluationAtMiss { time: t });
    }
    if num == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let r = num - den;
    if r.is_nan() {
        return Err(Error::NonFiniteWeight(format!("log alpha is NaN at t={t}")));
    }
    Ok(r)
}

pub(crate) fn shifted(x: &[i64], xi: &[i64]) -> Vec<i64> {
    x.iter().zip(xi).map(|(a, b)| a + b).collect()
}

pub(crate) fn to_real(x: &[i64]) -> DVector<f64> {
    DVector::from_iterator(x.len(), x.iter().map(|&c| c as f64))
}

/// Central difference of `log g` in time, kept inside the current interval.
pub(crate) fn finite_difference_dt<G: GuidingTerm + ?Sized>(g: &G, t: f64, x: &[i64]) -> Result<f64> {
    let k = g.scheme().interval_of(t);
    let lo = if k == 0 { 0.0 } else { g.scheme().times()[k - 1] };
    let hi = g.scheme().times()[k];
    let h = 1e-6 * (hi - lo).max(1e-300);
    let a = (t - h).max(lo);
    let b = (t + h).min(hi - 1e-3 * h);
    Ok((g.log_g(b, x)? - g.log_g(a, x)?) / (b - a))
}

/// The evaluation contract shared by every guiding term.
pub trait GuidingTerm: Send + Sync {
    fn name(&self) -> &str;

    fn scheme(&self) -> &ObservationScheme;

    fn horizon(&self) -> f64 {
        self.scheme().horizon()
    }

    /// `log g(t, x)`, right-continuous at observation times.
    fn log_g(&self, t: f64, x: &[i64]) -> Result<f64>;

    /// Left limit `log g(t-, x)`; differs from [`GuidingTerm::log_g`] only at
    /// observation times before the last one.
    fn log_g_left(&self, t: f64, x: &[i64]) -> Result<f64> {
        self.log_g(t, x)
    }

    /// `log alpha(t, x)` for the reaction with change vector `xi`.
    fn log_alpha(&self, t: f64, x: &[i64], xi: &[i64]) -> Result<f64> {
        let den = self.log_g(t, x)?;
        if den == f64::NEG_INFINITY {
            return Err(Error::EvaluationAtMiss { time: t });
        }
        let num = self.log_g(t, &shifted(x, xi))?;
        log_ratio(num, den, t)
    }

    fn alpha(&self, t: f64, x: &[i64], xi: &[i64]) -> Result<f64> {
        Ok(self.log_alpha(t, x, xi)?.exp())
    }

    fn trend(&self, _t: f64, _x: &[i64], _xi: &[i64]) -> Trend {
        Trend::Unknown
    }

    /// `d/dt log g(t, x)` away from observation times.
    fn dt_log_g(&self, t: f64, x: &[i64]) -> Result<f64> {
        finite_difference_dt(self, t, x)
    }

    /// Window length keeping the thinning acceptance ratio above `eta`, when
    /// the guide admits a closed form.
    fn analytic_delta(&self, _t: f64, _x: &[i64], _xi: &[i64], _eta: f64) -> Option<f64> {
        None
    }

    /// Exact `sup_{s in [t0, t1]} log alpha(s, x)` when available.
    fn log_alpha_sup(&self, _t0: f64, _t1: f64, _x: &[i64], _xi: &[i64]) -> Option<Result<f64>> {
        None
    }

    /// Whether guided rates may blow up when approaching an observation time.
    fn diverges_at_observations(&self) -> bool {
        false
    }

    /// Constant `c` with `log g(0, x0) + log Psi - c` equal to the log
    /// likelihood-ratio weight on paths hitting every observation.
    fn log_weight_constant(&self) -> f64;
}

impl<G: GuidingTerm + ?Sized> GuidingTerm for Arc<G> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn scheme(&self) -> &ObservationScheme {
        (**self).scheme()
    }
    fn log_g(&self, t: f64, x: &[i64]) -> Result<f64> {
        (**self).log_g(t, x)
    }
    fn log_g_left(&self, t: f64, x: &[i64]) -> Result<f64> {
        (**self).log_g_left(t, x)
    }
    fn log_alpha(&self, t: f64, x: &[i64], xi: &[i64]) -> Result<f64> {
        (**self).log_alpha(t, x, xi)
    }
    fn trend(&self, t: f64, x: &[i64], xi: &[i64]) -> Trend {
        (**self).trend(t, x, xi)
    }
    fn dt_log_g(&self, t: f64, x: &[i64]) -> Result<f64> {
        (**self).dt_log_g(t, x)
    }
    fn analytic_delta(&self, t: f64, x: &[i64], xi: &[i64], eta: f64) -> Option<f64> {
        (**self).analytic_delta(t, x, xi, eta)
    }
    fn log_alpha_sup(&self, t0: f64, t1: f64, x: &[i64], xi: &[i64]) -> Option<Result<f64>> {
        (**self).log_alpha_sup(t0, t1, x, xi)
    }
    fn diverges_at_observations(&self) -> bool {
        (**self).diverges_at_observations()
    }
    fn log_weight_constant(&self) -> f64 {
        (**self).log_weight_constant()
    }
}

impl<G: GuidingTerm + ?Sized> GuidingTerm for Box<G> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn scheme(&self) -> &ObservationScheme {
        (**self).scheme()
    }
    fn log_g(&self, t: f64, x: &[i64]) -> Result<f64> {
        (**self).log_g(t, x)
    }
    fn log_g_left(&self, t: f64, x: &[i64]) -> Result<f64> {
        (**self).log_g_left(t, x)
    }
    fn log_alpha(&self, t: f64, x: &[i64], xi: &[i64]) -> Result<f64> {
        (**self).log_alpha(t, x, xi)
    }
    fn trend(&self, t: f64, x: &[i64], xi: &[i64]) -> Trend {
        (**self).trend(t, x, xi)
    }
    fn dt_log_g(&self, t: f64, x: &[i64]) -> Result<f64> {
        (**self).dt_log_g(t, x)
    }
    fn analytic_delta(&self, t: f64, x: &[i64], xi: &[i64], eta: f64) -> Option<f64> {
        (**self).analytic_delta(t, x, xi, eta)
    }
    fn log_alpha_sup(&self, t0: f64, t1: f64, x: &[i64], xi: &[i64]) -> Option<Result<f64>> {
        (**self).log_alpha_sup(t0, t1, x, xi)
    }
    fn diverges_at_observations(&self) -> bool {
        (**self).diverges_at_observations()
    }
    fn log_weight_constant(&self) -> f64 {
        (**self).log_weight_constant()
    }
}

/// `g(t, x) * exp(kappa(t))`. The jump ratios do not see `kappa`, so they are
/// forwarded unchanged.
pub struct TimeScaled<G> {
    inner: G,
    kappa: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    dkappa: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl<G: GuidingTerm> TimeScaled<G> {
    pub fn new(
        inner: G,
        kappa: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dkappa: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        TimeScaled { inner, kappa: Arc::new(kappa), dkappa: Arc::new(dkappa) }
    }

    pub fn inner(&self) -> &G {
        &self.inner
    }
}

impl<G: GuidingTerm> GuidingTerm for TimeScaled<G> {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn scheme(&self) -> &ObservationScheme {
        self.inner.scheme()
    }
    fn log_g(&self, t: f64, x: &[i64]) -> Result<f64> {
        Ok(self.inner.log_g(t, x)? + (self.kappa)(t))
    }
    fn log_g_left(&self, t: f64, x: &[i64]) -> Result<f64> {
        Ok(self.inner.log_g_left(t, x)? + (self.kappa)(t))
    }
    fn log_alpha(&self, t: f64, x: &[i64], xi: &[i64]) -> Result<f64> {
        self.inner.log_alpha(t, x, xi)
    }
    fn trend(&self, t: f64, x: &[i64], xi: &[i64]) -> Trend {
        self.inner.trend(t, x, xi)
    }
    fn dt_log_g(&self, t: f64, x: &[i64]) -> Result<f64> {
        Ok(self.inner.dt_log_g(t, x)? + (self.dkappa)(t))
    }
    fn analytic_delta(&self, t: f64, x: &[i64], xi: &[i64], eta: f64) -> Option<f64> {
        self.inner.analytic_delta(t, x, xi, eta)
    }
    fn log_alpha_sup(&self, t0: f64, t1: f64, x: &[i64], xi: &[i64]) -> Option<Result<f64>> {
        self.inner.log_alpha_sup(t0, t1, x, xi)
    }
    fn diverges_at_observations(&self) -> bool {
        self.inner.diverges_at_observations()
    }
    fn log_weight_constant(&self) -> f64 {
        // The terminal left limit picks up kappa(t_n); the jumps at earlier
        // observation times do not.
        self.inner.log_weight_constant() + (self.kappa)(self.horizon())
    }
}

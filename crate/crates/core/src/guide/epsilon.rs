//! The scaled-Brownian guiding term for a single observation,
//! `log g(t, x) = -d(v, Lx)^2 / (2 (eps + T - t))`, with the metric
//! `d(v, w)^2 = (v - w)' (L a L')^{-1} (v - w)`.

use nalgebra::{DMatrix, DVector};

use super::{expand_a, FilterGuide, GuidingTerm, Noise, ObservationScheme, Trend};
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Clone, Debug)]
pub struct EpsilonGuide {
    scheme: ObservationScheme,
    eps: f64,
    horizon: f64,
    l: DMatrix<f64>,
    v: DVector<f64>,
    metric: DMatrix<f64>,
}

/// `g_eps` for a scheme whose noise is `Noise::Epsilon`: the closed form for
/// one observation, the backward filter with `C_k = eps L_k a_k L_k'` otherwise.
pub fn g_epsilon(scheme: ObservationScheme, a: &[DMatrix<f64>]) -> Result<Box<dyn GuidingTerm>> {
    if scheme.observations().iter().any(|o| !matches!(o.noise, Noise::Epsilon(_))) {
        return Err(Error::Scheme("g_eps needs epsilon noise on every observation".into()));
    }
    if scheme.len() == 1 {
        Ok(Box::new(EpsilonGuide::new(scheme, &a[0])?))
    } else {
        let a = expand_a(a, scheme.len(), scheme.dim())?;
        for (k, (o, ak)) in scheme.observations().iter().zip(&a).enumerate() {
            if linalg::spd_inverse(&(&o.l * ak * o.l.transpose())).is_none() {
                return Err(Error::SingularMetric(k));
            }
        }
        Ok(Box::new(FilterGuide::new(scheme, &a)?))
    }
}

impl EpsilonGuide {
    pub fn new(scheme: ObservationScheme, a: &DMatrix<f64>) -> Result<Self> {
        if scheme.len() != 1 {
            return Err(Error::Scheme("the closed-form g_eps handles exactly one observation".into()));
        }
        let obs = &scheme.observations()[0];
        let eps = match obs.noise {
            Noise::Epsilon(e) => e,
            _ => return Err(Error::Scheme("g_eps needs epsilon noise".into())),
        };
        if a.nrows() != scheme.dim() || a.ncols() != scheme.dim() {
            return Err(Error::Dimension("diffusion matrix does not match the state dimension".into()));
        }
        let metric = linalg::spd_inverse(&(&obs.l * a * obs.l.transpose())).ok_or(Error::SingularMetric(0))?;
        Ok(EpsilonGuide {
            eps,
            horizon: obs.time,
            l: obs.l.clone(),
            v: obs.v.clone(),
            metric,
            scheme,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.eps
    }

    fn residual(&self, x: &[i64]) -> DVector<f64> {
        let mut r = self.v.clone();
        for i in 0..self.l.nrows() {
            for (j, &xj) in x.iter().enumerate() {
                r[i] -= self.l[(i, j)] * xj as f64;
            }
        }
        r
    }

    /// `d(v, L x)^2`.
    pub fn dist_sq(&self, x: &[i64]) -> f64 {
        let r = self.residual(x);
        r.dot(&(&self.metric * &r))
    }

    /// `d(v, L(x + xi))^2 - d(v, L x)^2`.
    pub fn dist_sq_increment(&self, x: &[i64], xi: &[i64]) -> f64 {
        let r = self.residual(x);
        let mut lxi = DVector::zeros(self.l.nrows());
        for i in 0..self.l.nrows() {
            for (j, &e) in xi.iter().enumerate() {
                lxi[i] += self.l[(i, j)] * e as f64;
            }
        }
        let mlxi = &self.metric * &lxi;
        lxi.dot(&mlxi) - 2.0 * r.dot(&mlxi)
    }

    fn scale(&self, t: f64) -> f64 {
        self.eps + self.horizon - t
    }
}

impl GuidingTerm for EpsilonGuide {
    fn name(&self) -> &str {
        "epsilon"
    }

    fn scheme(&self) -> &ObservationScheme {
        &self.scheme
    }

    fn log_g(&self, t: f64, x: &[i64]) -> Result<f64> {
        Ok(-self.dist_sq(x) / (2.0 * self.scale(t)))
    }

    fn log_alpha(&self, t: f64, x: &[i64], xi: &[i64]) -> Result<f64> {
        Ok(-self.dist_sq_increment(x, xi) / (2.0 * self.scale(t)))
    }

    fn trend(&self, _t: f64, x: &[i64], xi: &[i64]) -> Trend {
        if self.dist_sq_increment(x, xi) >= 0.0 {
            Trend::Decreasing
        } else {
            Trend::Increasing
        }
    }

    fn dt_log_g(&self, t: f64, x: &[i64]) -> Result<f64> {
        let s = self.scale(t);
        Ok(-self.dist_sq(x) / (2.0 * s * s))
    }

    fn analytic_delta(&self, t: f64, x: &[i64], xi: &[i64], eta: f64) -> Option<f64> {
        let inc = self.dist_sq_increment(x, xi);
        delta_analytic(eta, self.eps, self.horizon, t, inc).ok()
    }

    fn log_alpha_sup(&self, t0: f64, t1: f64, x: &[i64], xi: &[i64]) -> Option<Result<f64>> {
        let inc = self.dist_sq_increment(x, xi);
        let t = if inc >= 0.0 { t0 } else { t1 };
        Some(Ok(-inc / (2.0 * self.scale(t))))
    }

    fn log_weight_constant(&self) -> f64 {
        0.0
    }
}

/// Largest window `delta` such that the guided rate of a reaction with
/// `d(v, L(x+xi))^2 - d(v, L x)^2 = dist_sq_increment < 0` keeps the thinning
/// acceptance ratio `lambda^g(t + tau) / lambda^g(t + delta)` above `eta` on
/// the whole window, clipped so that `t + delta < T`.
///
/// ```
/// use guided_crn::guide::epsilon::delta_analytic;
/// let d = delta_analytic(0.5, 0.0, 1.0, 0.0, -2.0).unwrap();
/// assert!((d - (1.0 - 1.0 / (2f64.ln() + 1.0))).abs() < 1e-12);
/// ```
pub fn delta_analytic(eta: f64, eps: f64, horizon: f64, t: f64, dist_sq_increment: f64) -> Result<f64> {
    if !(dist_sq_increment < 0.0) {
        return Err(Error::WrongTrend);
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Model(format!("acceptance target {eta} must lie in (0, 1)")));
    }
    let a = horizon + eps - t;
    let delta = a - 1.0 / (2.0 * eta.ln() / dist_sq_increment + 1.0 / a);
    let room = (horizon - t) * (1.0 - 1e-9);
    Ok(delta.min(room).max(0.0))
}

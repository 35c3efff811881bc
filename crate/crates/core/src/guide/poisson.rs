//! Guiding term for a fully observed network with one monotone component.
//!
//! The monotone count `y` is guided by a homogeneous Poisson process with
//! intensity `theta`, the remaining coordinates `z` by scaled Brownian motion:
//!
//! `log g = -d(z_T, z)^2 / (2s) + k log(theta s) - log k! - theta s`,
//!
//! where `s = T - t` and `k >= 0` is the number of monotone steps still
//! needed. `g = 0` once the monotone component has overshot its target.

use nalgebra::{DMatrix, DVector};

use super::{GuidingTerm, ObservationScheme, Trend};
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Clone, Debug)]
pub struct PoissonHybridGuide {
    scheme: ObservationScheme,
    horizon: f64,
    target: Vec<i64>,
    monotone: usize,
    /// `+1` if the monotone component only increases, `-1` if it only decreases.
    direction: i64,
    metric: DMatrix<f64>,
    theta: f64,
}

fn ln_factorial(k: i64) -> f64 {
    (2..=k).map(|j| (j as f64).ln()).sum()
}

impl PoissonHybridGuide {
    /// `a_sub` is the diffusion matrix of the non-monotone coordinates, in
    /// their original order with the monotone index removed.
    pub fn new(scheme: ObservationScheme, monotone: usize, increasing: bool, a_sub: &DMatrix<f64>, theta: f64) -> Result<Self> {
        if scheme.len() != 1 {
            return Err(Error::Scheme("the Poisson guiding term handles one observation".into()));
        }
        let d = scheme.dim();
        let obs = &scheme.observations()[0];
        if obs.l != DMatrix::identity(d, d) {
            return Err(Error::Scheme("the Poisson guiding term needs a full observation".into()));
        }
        if monotone >= d {
            return Err(Error::Dimension(format!("monotone index {monotone} out of range")));
        }
        if a_sub.nrows() != d - 1 || a_sub.ncols() != d - 1 {
            return Err(Error::Dimension(format!("a_sub must be {}x{}", d - 1, d - 1)));
        }
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::Model(format!("Poisson intensity {theta} must be positive")));
        }
        let metric = if d == 1 { DMatrix::zeros(0, 0) } else { linalg::spd_inverse(a_sub).ok_or(Error::SingularMetric(0))? };
        let target: Vec<i64> = obs.v.iter().map(|v| v.round() as i64).collect();
        Ok(PoissonHybridGuide {
            horizon: obs.time,
            target,
            monotone,
            direction: if increasing { 1 } else { -1 },
            metric,
            theta,
            scheme,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    fn remaining(&self, x: &[i64]) -> i64 {
        self.direction * (self.target[self.monotone] - x[self.monotone])
    }

    fn dist_sq(&self, x: &[i64]) -> f64 {
        if self.metric.nrows() == 0 {
            return 0.0;
        }
        let r: DVector<f64> = DVector::from_iterator(
            self.metric.nrows(),
            (0..x.len()).filter(|&j| j != self.monotone).map(|j| (self.target[j] - x[j]) as f64),
        );
        r.dot(&(&self.metric * &r))
    }

    fn log_poisson(&self, k: i64, s: f64) -> f64 {
        let ts = self.theta * s;
        let lead = if k == 0 { 0.0 } else { k as f64 * ts.ln() };
        lead - ln_factorial(k) - ts
    }

    /// `(d^2 increment, monotone count increment)` for a jump `xi`.
    fn increments(&self, x: &[i64], xi: &[i64]) -> (f64, i64) {
        let y: Vec<i64> = x.iter().zip(xi).map(|(a, b)| a + b).collect();
        (self.dist_sq(&y) - self.dist_sq(x), -self.direction * xi[self.monotone])
    }

    fn log_alpha_at(&self, s: f64, k: i64, dd: f64, dk: i64) -> f64 {
        -dd / (2.0 * s) + dk as f64 * (self.theta * s).ln() - (ln_factorial(k + dk) - ln_factorial(k))
    }
}

impl GuidingTerm for PoissonHybridGuide {
    fn name(&self) -> &str {
        "poisson_hybrid"
    }

    fn scheme(&self) -> &ObservationScheme {
        &self.scheme
    }

    fn log_g(&self, t: f64, x: &[i64]) -> Result<f64> {
        let k = self.remaining(x);
        if k < 0 {
            return Ok(f64::NEG_INFINITY);
        }
        let s = self.horizon - t;
        let d2 = self.dist_sq(x);
        if s <= 0.0 {
            return Ok(if k == 0 && d2 == 0.0 { 0.0 } else { f64::NEG_INFINITY });
        }
        Ok(-d2 / (2.0 * s) + self.log_poisson(k, s))
    }

    fn log_alpha(&self, t: f64, x: &[i64], xi: &[i64]) -> Result<f64> {
        let k = self.remaining(x);
        let s = self.horizon - t;
        if k < 0 || s <= 0.0 {
            let den = self.log_g(t, x)?;
            let num = self.log_g(t, &super::shifted(x, xi))?;
            return super::log_ratio(num, den, t);
        }
        let (dd, dk) = self.increments(x, xi);
        if k + dk < 0 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(self.log_alpha_at(s, k, dd, dk))
    }

    fn trend(&self, _t: f64, x: &[i64], xi: &[i64]) -> Trend {
        let (dd, dk) = self.increments(x, xi);
        // As t grows, 1/s grows and log s falls.
        let brownian = dd.partial_cmp(&0.0).unwrap_or(std::cmp::Ordering::Equal);
        let poisson = dk.cmp(&0);
        use std::cmp::Ordering::*;
        match (brownian, poisson) {
            (Greater | Equal, Greater | Equal) => Trend::Decreasing,
            (Less | Equal, Less | Equal) => Trend::Increasing,
            _ => Trend::Unknown,
        }
    }

    fn dt_log_g(&self, t: f64, x: &[i64]) -> Result<f64> {
        let k = self.remaining(x);
        let s = self.horizon - t;
        if k < 0 || s <= 0.0 {
            return Err(Error::EvaluationAtMiss { time: t });
        }
        let d2 = self.dist_sq(x);
        Ok(-d2 / (2.0 * s * s) - k as f64 / s + self.theta)
    }

    fn log_alpha_sup(&self, t0: f64, t1: f64, x: &[i64], xi: &[i64]) -> Option<Result<f64>> {
        let k = self.remaining(x);
        let (s_hi, s_lo) = (self.horizon - t0, self.horizon - t1);
        if k < 0 || s_lo <= 0.0 {
            return None;
        }
        let (dd, dk) = self.increments(x, xi);
        if k + dk < 0 {
            return Some(Ok(f64::NEG_INFINITY));
        }
        let mut best = self.log_alpha_at(s_hi, k, dd, dk).max(self.log_alpha_at(s_lo, k, dd, dk));
        if dk != 0 {
            let s_star = -dd / (2.0 * dk as f64);
            if s_star > s_lo && s_star < s_hi {
                best = best.max(self.log_alpha_at(s_star, k, dd, dk));
            }
        }
        Some(Ok(best))
    }

    fn log_weight_constant(&self) -> f64 {
        0.0
    }
}

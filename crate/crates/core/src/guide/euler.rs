//! Gaussian guiding term from one Euler step of the chemical Langevin equation:
//! `g(t, x) = N(v; L(x + b(t,x)(T-t)), L a(t,x) L' (T-t) + C)`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{finite_difference_dt, to_real, GuidingTerm, ObservationScheme};
use crate::error::{Error, Result};
use crate::linalg;
use crate::network::ReactionNetwork;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `log N(v; mean, cov)`, or `SingularCovariance` at time `t`.
pub(crate) fn log_normal_density(v: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>, t: f64) -> Result<f64> {
    if v.len() == 1 {
        return log_normal_density_scalar(v[0], mean[0], cov[(0, 0)], t);
    }
    let chol = linalg::spd_cholesky(cov).ok_or(Error::SingularCovariance { time: t })?;
    let r = v - mean;
    let m = v.len() as f64;
    Ok(-0.5 * (linalg::inv_quad_form(&chol, &r) + linalg::log_det_spd(&chol) + m * LN_2PI))
}

pub(crate) fn log_normal_density_scalar(v: f64, mean: f64, var: f64, t: f64) -> Result<f64> {
    if !(var > 0.0 && var.is_finite()) {
        return Err(Error::SingularCovariance { time: t });
    }
    let r = v - mean;
    Ok(-0.5 * (r * r / var + var.ln() + LN_2PI))
}

/// `log N(v; L z, L V L' + C)` and its rate of change when `z` and `V` move
/// with velocities `dz` and `dv`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn log_normal_density_rate(
    v: &DVector<f64>,
    l: &DMatrix<f64>,
    z: &DVector<f64>,
    var: &DMatrix<f64>,
    c: &DMatrix<f64>,
    dz: &DVector<f64>,
    dv: &DMatrix<f64>,
    t: f64,
) -> Result<(f64, f64)> {
    let cov = linalg::symmetrize(&(l * var * l.transpose() + c));
    let chol = linalg::spd_cholesky(&cov).ok_or(Error::SingularCovariance { time: t })?;
    let r = v - l * z;
    let w = chol.solve(&r);
    let m = v.len() as f64;
    let value = -0.5 * (r.dot(&w) + linalg::log_det_spd(&chol) + m * LN_2PI);
    let ds = l * dv * l.transpose();
    let rate = w.dot(&(l * dz)) + 0.5 * w.dot(&(&ds * &w)) - 0.5 * chol.solve(&ds).trace();
    Ok((value, rate))
}

/// Noise covariance for the Gaussian-density guides; `Epsilon(e)` means `e I`.
pub(crate) fn plain_covariance(scheme: &ObservationScheme) -> DMatrix<f64> {
    let obs = &scheme.observations()[0];
    obs.covariance(&DMatrix::zeros(scheme.dim(), scheme.dim()), false)
}

pub struct EulerCleGuide {
    scheme: ObservationScheme,
    net: Arc<ReactionNetwork>,
    c: DMatrix<f64>,
}

impl EulerCleGuide {
    pub fn new(net: Arc<ReactionNetwork>, scheme: ObservationScheme) -> Result<Self> {
        if scheme.len() != 1 {
            return Err(Error::Scheme("the Euler guiding term handles one observation".into()));
        }
        if scheme.dim() != net.dim() {
            return Err(Error::Dimension("scheme and network dimensions differ".into()));
        }
        let c = plain_covariance(&scheme);
        Ok(EulerCleGuide { scheme, net, c })
    }
}

impl GuidingTerm for EulerCleGuide {
    fn name(&self) -> &str {
        "euler_cle"
    }

    fn scheme(&self) -> &ObservationScheme {
        &self.scheme
    }

    fn log_g(&self, t: f64, x: &[i64]) -> Result<f64> {
        let obs = &self.scheme.observations()[0];
        let s = (obs.time - t).max(0.0);
        let xr = to_real(x);
        let cle = self.net.cle();
        let b = cle.drift(t, xr.as_slice());
        let a = cle.covariance(t, xr.as_slice());
        let mean = &obs.l * (xr + b * s);
        let cov = &obs.l * a * obs.l.transpose() * s + &self.c;
        log_normal_density(&obs.v, &mean, &cov, t)
    }

    fn dt_log_g(&self, t: f64, x: &[i64]) -> Result<f64> {
        if !self.net.is_time_homogeneous() {
            return finite_difference_dt(self, t, x);
        }
        let obs = &self.scheme.observations()[0];
        let s = (obs.time - t).max(0.0);
        let xr = to_real(x);
        let cle = self.net.cle();
        let b = cle.drift(t, xr.as_slice());
        let a = cle.covariance(t, xr.as_slice());
        let z = &xr + &b * s;
        let var = &a * s;
        Ok(log_normal_density_rate(&obs.v, &obs.l, &z, &var, &self.c, &(-b), &(-a), t)?.1)
    }

    fn log_weight_constant(&self) -> f64 {
        match linalg::spd_cholesky(&self.c) {
            Some(ch) => -0.5 * (linalg::log_det_spd(&ch) + self.c.nrows() as f64 * LN_2PI),
            None => 0.0,
        }
    }
}

impl std::fmt::Debug for EulerCleGuide {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EulerCleGuide").field("c", &self.c).finish_non_exhaustive()
    }
}

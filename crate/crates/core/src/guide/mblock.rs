//! Stacked-observation representation of the Brownian guiding term,
//! `log g(t, x) = -r' M(t)^{-1} r / 2` with `r = v(t) - L(t) x`, where `L(t)`
//! and `v(t)` stack every observation still ahead of `t` and
//! `M(t) = K_k + G_k (t_k - t)` on `[t_{k-1}, t_k)`.
//!
//! This form stays meaningful when the noise covariances vanish. With
//! `C_k = 0` the leading block of `M` degenerates at `t_k`, and the quadratic
//! form is split with a Schur complement:
//! `r' M^{-1} r = r_k' Lambda^{-1} r_k / s + u' S^{-1} u`, where `s = t_k - t`,
//! `Lambda = L_k a_k L_k'`, `u = r_rest - Gamma' Lambda^{-1} r_k`, and
//! `S = K_rest + s (G_rest - Gamma' Lambda^{-1} Gamma)`.

use nalgebra::{DMatrix, DVector};

use super::{expand_a, to_real, GuidingTerm, ObservationScheme, Trend};
use crate::error::{Error, Result};
use crate::guide::epsilon::delta_analytic;
use crate::linalg;

#[derive(Clone, Debug)]
enum Block {
    /// Current observation has positive definite noise.
    Direct { k_mat: DMatrix<f64>, g_mat: DMatrix<f64> },
    /// Current observation is exact.
    Schur {
        m: usize,
        lambda_inv: DMatrix<f64>,
        /// `Gamma' Lambda^{-1}`.
        gamma_t_lambda_inv: DMatrix<f64>,
        k_rest: DMatrix<f64>,
        q_rest: DMatrix<f64>,
    },
}

#[derive(Clone, Debug)]
struct Interval {
    t_end: f64,
    l: DMatrix<f64>,
    v: DVector<f64>,
    block: Block,
}

#[derive(Clone, Copy, Debug)]
struct Parts {
    /// `r_k' Lambda^{-1} r_k` (Schur) or `0` (direct).
    lead: f64,
    /// Remaining quadratic form, already divided appropriately.
    rest: f64,
}

impl Interval {
    fn residual(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.v - &self.l * x
    }

    fn parts(&self, t: f64, x: &DVector<f64>) -> Result<Parts> {
        let s = (self.t_end - t).max(0.0);
        let r = self.residual(x);
        match &self.block {
            Block::Direct { k_mat, g_mat } => {
                let m = k_mat + g_mat * s;
                let chol = linalg::spd_cholesky(&m).ok_or(Error::SingularCovariance { time: t })?;
                Ok(Parts { lead: 0.0, rest: linalg::inv_quad_form(&chol, &r) })
            }
            Block::Schur { m, lambda_inv, gamma_t_lambda_inv, k_rest, q_rest } => {
                let rk = r.rows(0, *m).into_owned();
                let lead = rk.dot(&(lambda_inv * &rk));
                let rest = if k_rest.nrows() == 0 {
                    0.0
                } else {
                    let u = r.rows(*m, r.len() - m) - gamma_t_lambda_inv * &rk;
                    let smat = k_rest + q_rest * s;
                    let chol = linalg::spd_cholesky(&smat).ok_or(Error::SingularCovariance { time: t })?;
                    linalg::inv_quad_form(&chol, &u)
                };
                Ok(Parts { lead, rest })
            }
        }
    }

    fn combine(&self, t: f64, p: Parts) -> f64 {
        let s = (self.t_end - t).max(0.0);
        if p.lead == 0.0 {
            return -0.5 * p.rest;
        }
        if s == 0.0 {
            return f64::NEG_INFINITY;
        }
        -0.5 * (p.lead / s + p.rest)
    }

    fn log_g(&self, t: f64, x: &DVector<f64>) -> Result<f64> {
        Ok(self.combine(t, self.parts(t, x)?))
    }

    fn is_exact(&self) -> bool {
        matches!(self.block, Block::Schur { .. })
    }

    fn is_last(&self) -> bool {
        match &self.block {
            Block::Schur { k_rest, .. } => k_rest.nrows() == 0,
            Block::Direct { .. } => false,
        }
    }

    fn dt_log_g(&self, t: f64, x: &DVector<f64>) -> Result<f64> {
        let s = (self.t_end - t).max(0.0);
        let r = self.residual(x);
        match &self.block {
            Block::Direct { k_mat, g_mat } => {
                let m = k_mat + g_mat * s;
                let chol = linalg::spd_cholesky(&m).ok_or(Error::SingularCovariance { time: t })?;
                let w = chol.solve(&r);
                Ok(-0.5 * w.dot(&(g_mat * &w)))
            }
            Block::Schur { m, lambda_inv, gamma_t_lambda_inv, k_rest, q_rest } => {
                let rk = r.rows(0, *m).into_owned();
                let lead = rk.dot(&(lambda_inv * &rk));
                let lead_term = if lead == 0.0 { 0.0 } else { lead / (s * s) };
                let rest_term = if k_rest.nrows() == 0 {
                    0.0
                } else {
                    let u = r.rows(*m, r.len() - m) - gamma_t_lambda_inv * &rk;
                    let smat = k_rest + q_rest * s;
                    let chol = linalg::spd_cholesky(&smat).ok_or(Error::SingularCovariance { time: t })?;
                    let w = chol.solve(&u);
                    w.dot(&(q_rest * &w))
                };
                Ok(-0.5 * (lead_term + rest_term))
            }
        }
    }
}

/// Guiding term in the stacked representation; handles exact (`C_k = 0`)
/// observations as well as noisy ones.
#[derive(Clone, Debug)]
pub struct MBlockGuide {
    scheme: ObservationScheme,
    intervals: Vec<Interval>,
    exact_any: bool,
}

impl MBlockGuide {
    pub fn new(scheme: ObservationScheme, a: &[DMatrix<f64>]) -> Result<Self> {
        let n = scheme.len();
        let d = scheme.dim();
        let a = expand_a(a, n, d)?;
        let obs = scheme.observations();
        let times = scheme.times();
        let covs: Vec<DMatrix<f64>> = obs.iter().zip(&a).map(|(o, ak)| o.covariance(ak, true)).collect();
        let exact: Vec<bool> = covs.iter().map(|c| c.iter().all(|&e| e == 0.0)).collect();
        for (k, (c, &ex)) in covs.iter().zip(&exact).enumerate() {
            if !ex && linalg::spd_cholesky(c).is_none() {
                return Err(Error::SingularC(k));
            }
            if linalg::spd_cholesky(&(&obs[k].l * &a[k] * obs[k].l.transpose())).is_none() {
                return Err(Error::SingularMetric(k));
            }
        }
        let mut intervals = Vec::with_capacity(n);
        for k in 0..n {
            let rows: usize = obs[k..].iter().map(|o| o.dim()).sum();
            let mut l = DMatrix::zeros(rows, d);
            let mut v = DVector::zeros(rows);
            let mut offsets = Vec::with_capacity(n - k);
            let mut off = 0;
            for o in &obs[k..] {
                l.view_mut((off, 0), (o.dim(), d)).copy_from(&o.l);
                v.rows_mut(off, o.dim()).copy_from(&o.v);
                offsets.push(off);
                off += o.dim();
            }
            // Accumulated covariance S_{k,j} = sum_{r=k+1}^{j} a_r (t_r - t_{r-1}).
            let mut s_acc: Vec<DMatrix<f64>> = Vec::with_capacity(n - k);
            let mut acc = DMatrix::zeros(d, d);
            for j in k..n {
                if j > k {
                    acc += &a[j] * (times[j] - times[j - 1]);
                }
                s_acc.push(acc.clone());
            }
            let mut k_mat = DMatrix::zeros(rows, rows);
            for i in k..n {
                for j in k..n {
                    let sij = &s_acc[i.min(j) - k];
                    let mut block = &obs[i].l * sij * obs[j].l.transpose();
                    if i == j {
                        block += &covs[i];
                    }
                    k_mat.view_mut((offsets[i - k], offsets[j - k]), (obs[i].dim(), obs[j].dim())).copy_from(&block);
                }
            }
            let g_mat = &l * &a[k] * l.transpose();
            let block = if exact[k] {
                let m = obs[k].dim();
                let rest = rows - m;
                let lambda = g_mat.view((0, 0), (m, m)).into_owned();
                let lambda_inv = linalg::spd_inverse(&lambda).ok_or(Error::SingularMetric(k))?;
                let gamma = g_mat.view((0, m), (m, rest)).into_owned();
                let gamma_t_lambda_inv = gamma.transpose() * &lambda_inv;
                let g_rest = g_mat.view((m, m), (rest, rest)).into_owned();
                let q_rest = linalg::symmetrize(&(g_rest - &gamma_t_lambda_inv * &gamma));
                let k_rest = k_mat.view((m, m), (rest, rest)).into_owned();
                Block::Schur { m, lambda_inv, gamma_t_lambda_inv, k_rest, q_rest }
            } else {
                Block::Direct { k_mat, g_mat }
            };
            intervals.push(Interval { t_end: times[k], l, v, block });
        }
        let exact_any = exact.iter().any(|&e| e);
        Ok(MBlockGuide { scheme, intervals, exact_any })
    }

    fn interval(&self, t: f64) -> &Interval {
        &self.intervals[self.scheme.interval_of(t)]
    }

    fn interval_left(&self, t: f64) -> &Interval {
        let n = self.intervals.len();
        let k = self.scheme.times().partition_point(|&tk| tk < t).min(n - 1);
        &self.intervals[k]
    }

    /// `d_k(v_k, L_k (x + xi))^2 - d_k(v_k, L_k x)^2` for the current observation.
    fn lead_increment(&self, iv: &Interval, x: &[i64], xi: &[i64]) -> Option<f64> {
        if let Block::Schur { m, lambda_inv, .. } = &iv.block {
            let xr = to_real(x);
            let xir = to_real(xi);
            let r = iv.residual(&xr).rows(0, *m).into_owned();
            let lxi = (&iv.l * xir).rows(0, *m).into_owned();
            let mlxi = lambda_inv * &lxi;
            Some(lxi.dot(&mlxi) - 2.0 * r.dot(&mlxi))
        } else {
            None
        }
    }
}

impl GuidingTerm for MBlockGuide {
    fn name(&self) -> &str {
        if self.exact_any {
            "zero_c"
        } else {
            "mblock"
        }
    }

    fn scheme(&self) -> &ObservationScheme {
        &self.scheme
    }

    fn log_g(&self, t: f64, x: &[i64]) -> Result<f64> {
        self.interval(t).log_g(t, &to_real(x))
    }

    fn log_g_left(&self, t: f64, x: &[i64]) -> Result<f64> {
        self.interval_left(t).log_g(t, &to_real(x))
    }

    fn log_alpha(&self, t: f64, x: &[i64], xi: &[i64]) -> Result<f64> {
        let iv = self.interval(t);
        let p0 = iv.parts(t, &to_real(x))?;
        let den = iv.combine(t, p0);
        if den == f64::NEG_INFINITY {
            return Err(Error::EvaluationAtMiss { time: t });
        }
        let xr: Vec<i64> = x.iter().zip(xi).map(|(a, b)| a + b).collect();
        let p1 = iv.parts(t, &to_real(&xr))?;
        if iv.combine(t, p1) == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        let s = (iv.t_end - t).max(0.0);
        let lead = if p1.lead == p0.lead { 0.0 } else { (p1.lead - p0.lead) / s };
        Ok(-0.5 * (lead + (p1.rest - p0.rest)))
    }

    fn trend(&self, t: f64, x: &[i64], xi: &[i64]) -> Trend {
        let iv = self.interval(t);
        if !iv.is_last() {
            return Trend::Unknown;
        }
        match self.lead_increment(iv, x, xi) {
            Some(inc) if inc >= 0.0 => Trend::Decreasing,
            Some(_) => Trend::Increasing,
            None => Trend::Unknown,
        }
    }

    fn dt_log_g(&self, t: f64, x: &[i64]) -> Result<f64> {
        self.interval(t).dt_log_g(t, &to_real(x))
    }

    fn analytic_delta(&self, t: f64, x: &[i64], xi: &[i64], eta: f64) -> Option<f64> {
        let iv = self.interval(t);
        if !iv.is_last() {
            return None;
        }
        let inc = self.lead_increment(iv, x, xi)?;
        delta_analytic(eta, 0.0, iv.t_end, t, inc).ok()
    }

    fn log_alpha_sup(&self, t0: f64, t1: f64, x: &[i64], xi: &[i64]) -> Option<Result<f64>> {
        let iv = self.interval(t0);
        if !iv.is_last() || t1 > iv.t_end {
            return None;
        }
        let inc = self.lead_increment(iv, x, xi)?;
        Some(self.log_alpha(if inc >= 0.0 { t0 } else { t1 }, x, xi))
    }

    fn diverges_at_observations(&self) -> bool {
        self.exact_any
    }

    fn log_weight_constant(&self) -> f64 {
        0.0
    }
}

impl MBlockGuide {
    /// Whether every observation is exact.
    pub fn is_exact(&self) -> bool {
        self.intervals.iter().all(Interval::is_exact)
    }
}

//! Backward filtering with Brownian-motion dynamics between observations.
//!
//! On the interval `(t_{k-1}, t_k]` the guiding term is
//! `log g(t, x) = -x' H(t) x / 2 + F(t)' x` where `H, F` solve
//! `dH/dt = H a_k H`, `dF/dt = H a_k F` backwards from
//! `H(t_k) = L_k' C_k^{-1} L_k + H(t_k+)`, `F(t_k) = L_k' C_k^{-1} v_k + F(t_k+)`.
//! The solution is `H(t) = z(t) H(t_k)`, `F(t) = z(t) F(t_k)` with
//! `z(t) = (I + H(t_k) a_k (t_k - t))^{-1}`.
//!
//! Writing `a_k = P^2` and `P H(t_k) P = Q diag(mu) Q'`, the resolvent is
//! `z = P^{-1} Q diag(1 / (1 + mu s)) Q' P`, so each evaluation is a handful
//! of length-`d` dot products.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{expand_a, GuidingTerm, ObservationScheme};
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Clone, Debug)]
struct Interval {
    t_end: f64,
    h_end: DMatrix<f64>,
    f_end: DVector<f64>,
    a: DMatrix<f64>,
    mu: Vec<f64>,
    /// `P^{-1} Q`, stored transposed so rows are contiguous.
    ut: DMatrix<f64>,
    /// `Q' P H(t_k)`.
    b: DMatrix<f64>,
    /// `Q' P F(t_k)`.
    c: DVector<f64>,
}

impl Interval {
    fn new(t_end: f64, h_end: DMatrix<f64>, f_end: DVector<f64>, a: DMatrix<f64>) -> Result<Self> {
        let eig = SymmetricEigen::new(linalg::symmetrize(&a));
        if eig.eigenvalues.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::Dimension("diffusion matrix a must be positive definite".into()));
        }
        let q_a = &eig.eigenvectors;
        let sqrt = q_a * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt)) * q_a.transpose();
        let inv_sqrt = q_a * DMatrix::from_diagonal(&eig.eigenvalues.map(|e| 1.0 / e.sqrt())) * q_a.transpose();
        let php = linalg::symmetrize(&(&sqrt * &h_end * &sqrt));
        let inner = SymmetricEigen::new(php);
        let q = inner.eigenvectors;
        let mu: Vec<f64> = inner.eigenvalues.iter().map(|&m| m.max(0.0)).collect();
        let w = q.transpose() * &sqrt;
        let ut = (&inv_sqrt * &q).transpose();
        let b = &w * &h_end;
        let c = &w * &f_end;
        Ok(Interval { t_end, h_end, f_end, a, mu, ut, b, c })
    }

    fn damping(&self, t: f64) -> impl Iterator<Item = f64> + '_ {
        let s = (self.t_end - t).max(0.0);
        self.mu.iter().map(move |m| 1.0 / (1.0 + m * s))
    }

    fn h(&self, t: f64) -> DMatrix<f64> {
        let dvec = DVector::from_iterator(self.mu.len(), self.damping(t));
        let h = self.ut.transpose() * DMatrix::from_diagonal(&dvec) * &self.b;
        linalg::symmetrize(&h)
    }

    fn f(&self, t: f64) -> DVector<f64> {
        let dvec = DVector::from_iterator(self.mu.len(), self.damping(t));
        self.ut.transpose() * dvec.component_mul(&self.c)
    }

    /// `(U' x)_i` and `(B x)_i` for an integer vector.
    fn project(&self, x: &[i64], i: usize) -> (f64, f64) {
        let mut p = 0.0;
        let mut q = 0.0;
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0 {
                let xf = xj as f64;
                p += self.ut[(i, j)] * xf;
                q += self.b[(i, j)] * xf;
            }
        }
        (p, q)
    }

    fn log_g(&self, t: f64, x: &[i64]) -> f64 {
        let mut total = 0.0;
        for (i, di) in self.damping(t).enumerate() {
            let (p, q) = self.project(x, i);
            total += di * (p * (self.c[i] - 0.5 * q));
        }
        total
    }

    fn log_alpha(&self, t: f64, x: &[i64], xi: &[i64]) -> f64 {
        let mut total = 0.0;
        for (i, di) in self.damping(t).enumerate() {
            let (_, qx) = self.project(x, i);
            let (pxi, qxi) = self.project(xi, i);
            total += di * pxi * (self.c[i] - qx - 0.5 * qxi);
        }
        total
    }

    fn dt_log_g(&self, t: f64, x: &[i64]) -> f64 {
        let mut total = 0.0;
        for (i, di) in self.damping(t).enumerate() {
            let (_, q) = self.project(x, i);
            let e = q - self.c[i];
            total += di * di * (e * e - self.c[i] * self.c[i]);
        }
        -0.5 * total
    }
}

/// Closed-form backward filter over all observation intervals.
#[derive(Clone, Debug)]
pub struct BackwardFilter {
    times: Vec<f64>,
    intervals: Vec<Interval>,
    log_constant: f64,
}

impl BackwardFilter {
    /// Requires every noise covariance `C_k` to be positive definite.
    pub fn new(scheme: &ObservationScheme, a: &[DMatrix<f64>]) -> Result<Self> {
        let n = scheme.len();
        let d = scheme.dim();
        let a = expand_a(a, n, d)?;
        let mut intervals: Vec<Interval> = Vec::with_capacity(n);
        let mut h_next = DMatrix::zeros(d, d);
        let mut f_next = DVector::zeros(d);
        let mut log_constant = 0.0;
        for k in (0..n).rev() {
            let obs = &scheme.observations()[k];
            let c = obs.covariance(&a[k], true);
            let c_inv = linalg::spd_inverse(&c).ok_or(Error::SingularC(k))?;
            let lt = obs.l.transpose();
            let h_end = linalg::symmetrize(&(&lt * &c_inv * &obs.l + &h_next));
            let f_end = &lt * &c_inv * &obs.v + &f_next;
            log_constant += 0.5 * obs.v.dot(&(&c_inv * &obs.v));
            let iv = Interval::new(obs.time, h_end, f_end, a[k].clone())?;
            if k > 0 {
                let t_prev = scheme.times()[k - 1];
                h_next = iv.h(t_prev);
                f_next = iv.f(t_prev);
            }
            intervals.push(iv);
        }
        intervals.reverse();
        Ok(BackwardFilter { times: scheme.times().to_vec(), intervals, log_constant })
    }

    fn interval(&self, t: f64) -> &Interval {
        let n = self.times.len();
        let k = self.times.partition_point(|&tk| tk <= t).min(n - 1);
        &self.intervals[k]
    }

    fn interval_left(&self, t: f64) -> &Interval {
        let n = self.times.len();
        let k = self.times.partition_point(|&tk| tk < t).min(n - 1);
        &self.intervals[k]
    }

    /// `(H(t), F(t))`, right-continuous at observation times.
    pub fn h_f(&self, t: f64) -> (DMatrix<f64>, DVector<f64>) {
        let iv = self.interval(t);
        (iv.h(t), iv.f(t))
    }

    /// Left limits `(H(t-), F(t-))`.
    pub fn h_f_left(&self, t: f64) -> (DMatrix<f64>, DVector<f64>) {
        let iv = self.interval_left(t);
        (iv.h(t), iv.f(t))
    }

    /// Terminal values `(H(t_k), F(t_k))` on interval `k` and its matrix `a_k`.
    pub fn terminal(&self, k: usize) -> (&DMatrix<f64>, &DVector<f64>, &DMatrix<f64>) {
        let iv = &self.intervals[k];
        (&iv.h_end, &iv.f_end, &iv.a)
    }

    pub fn log_g(&self, t: f64, x: &[i64]) -> f64 {
        self.interval(t).log_g(t, x)
    }

    pub fn log_g_left(&self, t: f64, x: &[i64]) -> f64 {
        self.interval_left(t).log_g(t, x)
    }

    pub fn log_alpha(&self, t: f64, x: &[i64], xi: &[i64]) -> f64 {
        self.interval(t).log_alpha(t, x, xi)
    }

    pub fn dt_log_g(&self, t: f64, x: &[i64]) -> f64 {
        self.interval(t).dt_log_g(t, x)
    }

    /// `sum_k v_k' C_k^{-1} v_k / 2`.
    pub fn log_constant(&self) -> f64 {
        self.log_constant
    }
}

/// Guiding term `g(t, x) = exp(-x' H(t) x / 2 + F(t)' x)` from a [`BackwardFilter`].
#[derive(Clone, Debug)]
pub struct FilterGuide {
    scheme: ObservationScheme,
    filter: BackwardFilter,
}

impl FilterGuide {
    pub fn new(scheme: ObservationScheme, a: &[DMatrix<f64>]) -> Result<Self> {
        let filter = BackwardFilter::new(&scheme, a)?;
        Ok(FilterGuide { scheme, filter })
    }

    pub fn filter(&self) -> &BackwardFilter {
        &self.filter
    }
}

impl GuidingTerm for FilterGuide {
    fn name(&self) -> &str {
        "filter"
    }

    fn scheme(&self) -> &ObservationScheme {
        &self.scheme
    }

    fn log_g(&self, t: f64, x: &[i64]) -> Result<f64> {
        Ok(self.filter.log_g(t, x))
    }

    fn log_g_left(&self, t: f64, x: &[i64]) -> Result<f64> {
        Ok(self.filter.log_g_left(t, x))
    }

    fn log_alpha(&self, t: f64, x: &[i64], xi: &[i64]) -> Result<f64> {
        Ok(self.filter.log_alpha(t, x, xi))
    }

    fn dt_log_g(&self, t: f64, x: &[i64]) -> Result<f64> {
        Ok(self.filter.dt_log_g(t, x))
    }

    fn log_weight_constant(&self) -> f64 {
        self.filter.log_constant()
    }
}

//! Linear noise approximation restarted at the current state.
//!
//! From `(t, x)` the mean and covariance solve
//! `z' = b(s, z)`, `V' = V J' + J V + a(s, z)` on `[t, T]` with `z(t) = x`,
//! `V(t) = 0`, and `g(t, x) = N(v; L z(T), L V(T) L' + C)`.
//!
//! For time-homogeneous networks the moments depend on `t` only through
//! `T - t`, so each state is integrated once over the whole horizon and
//! later evaluations interpolate the stored solution.

use std::cell::RefCell;
use std::collections::VecDeque;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::euler::{log_normal_density, log_normal_density_rate, log_normal_density_scalar, plain_covariance};
use super::{finite_difference_dt, to_real, GuidingTerm, ObservationScheme};
use crate::error::{Error, Result};
use crate::linalg;
use crate::network::ReactionNetwork;
use crate::ode::{self, DenseSolution, OdeControl, Workspace};

/// Closed-form moments `(t, x) -> (z(T), V(T))`.
pub type MomentFn = Arc<dyn Fn(f64, &[f64]) -> (DVector<f64>, DMatrix<f64>) + Send + Sync>;

#[derive(Clone)]
pub enum MomentSolver {
    Ode(OdeControl),
    Closed(MomentFn),
}

impl MomentSolver {
    /// Exact moments of the pure death process with rate `c x`, observed at `horizon`.
    pub fn death(c: f64, horizon: f64) -> Self {
        MomentSolver::Closed(Arc::new(move |t, x| {
            let s = horizon - t;
            let e1 = (-c * s).exp();
            let e2 = (-2.0 * c * s).exp();
            (DVector::from_element(1, x[0] * e1), DMatrix::from_element(1, 1, x[0] * (e1 - e2)))
        }))
    }
}

static NEXT_ID: AtomicU64 = AtomicU64::new(1);
const VALUE_CACHE_SIZE: usize = 32;
const TRAJECTORY_CACHE_SIZE: usize = 64;

struct ValueEntry {
    id: u64,
    t: u64,
    x: Vec<i64>,
    value: f64,
}

struct TrajectoryEntry {
    id: u64,
    x: Vec<i64>,
    solution: Rc<DenseSolution>,
}

thread_local! {
    static VALUES: RefCell<VecDeque<ValueEntry>> = const { RefCell::new(VecDeque::new()) };
    static TRAJECTORIES: RefCell<VecDeque<TrajectoryEntry>> = const { RefCell::new(VecDeque::new()) };
    static WORKSPACE: RefCell<Workspace> = RefCell::new(Workspace::default());
}

pub struct LnaRestartGuide {
    id: u64,
    scheme: ObservationScheme,
    net: Arc<ReactionNetwork>,
    c: DMatrix<f64>,
    solver: MomentSolver,
}

impl LnaRestartGuide {
    pub fn new(net: Arc<ReactionNetwork>, scheme: ObservationScheme, solver: MomentSolver) -> Result<Self> {
        if scheme.len() != 1 {
            return Err(Error::Scheme("the LNA guiding term handles one observation".into()));
        }
        if scheme.dim() != net.dim() {
            return Err(Error::Dimension("scheme and network dimensions differ".into()));
        }
        let c = plain_covariance(&scheme);
        Ok(LnaRestartGuide { id: NEXT_ID.fetch_add(1, Ordering::Relaxed), scheme, net, c, solver })
    }

    fn rhs(&self, s: f64, y: &[f64], dy: &mut [f64]) {
        let d = self.net.dim();
        let cle = self.net.cle();
        let z = &y[..d];
        let b = cle.drift(s, z);
        let jac = cle.drift_jacobian(s, z);
        let a = cle.covariance(s, z);
        let v = DMatrix::from_column_slice(d, d, &y[d..]);
        let jv = &jac * &v;
        let dv = &jv + jv.transpose() + a;
        dy[..d].copy_from_slice(b.as_slice());
        dy[d..].copy_from_slice(dv.as_slice());
    }

    fn split(&self, y: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let d = self.net.dim();
        (DVector::from_column_slice(&y[..d]), linalg::symmetrize(&DMatrix::from_column_slice(d, d, &y[d..])))
    }

    fn initial(x: &[f64]) -> Vec<f64> {
        let d = x.len();
        let mut y = vec![0.0; d + d * d];
        y[..d].copy_from_slice(x);
        y
    }

    /// `(z(T), V(T))` started from `(t, x)`.
    pub fn moments(&self, t: f64, x: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        match &self.solver {
            MomentSolver::Closed(f) => Ok(f(t, x)),
            MomentSolver::Ode(ctrl) => {
                let mut y = Self::initial(x);
                let rhs = |s: f64, y: &[f64], dy: &mut [f64]| self.rhs(s, y, dy);
                WORKSPACE.with(|ws| ode::integrate(rhs, t, self.scheme.horizon(), &mut y, ctrl, &mut ws.borrow_mut()))?;
                Ok(self.split(&y))
            }
        }
    }

    /// Moments over elapsed durations `[0, T]` from `x`, integrated once per state.
    fn trajectory(&self, x: &[i64], ctrl: &OdeControl) -> Result<Rc<DenseSolution>> {
        let found = TRAJECTORIES.with(|c| {
            let mut c = c.borrow_mut();
            let pos = c.iter().position(|e| e.id == self.id && e.x == x)?;
            let entry = c.remove(pos)?;
            let solution = entry.solution.clone();
            c.push_back(entry);
            Some(solution)
        });
        if let Some(s) = found {
            return Ok(s);
        }
        let mut y = Self::initial(to_real(x).as_slice());
        let rhs = |s: f64, y: &[f64], dy: &mut [f64]| self.rhs(s, y, dy);
        let solution = WORKSPACE.with(|ws| ode::integrate_dense(rhs, 0.0, self.scheme.horizon(), &mut y, ctrl, &mut ws.borrow_mut()))?;
        let solution = Rc::new(solution);
        TRAJECTORIES.with(|c| {
            let mut c = c.borrow_mut();
            if c.len() == TRAJECTORY_CACHE_SIZE {
                c.pop_front();
            }
            c.push_back(TrajectoryEntry { id: self.id, x: x.to_vec(), solution: solution.clone() });
        });
        Ok(solution)
    }

    fn state_moments(&self, t: f64, x: &[i64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        match &self.solver {
            MomentSolver::Ode(ctrl) if self.net.is_time_homogeneous() => {
                let sol = self.trajectory(x, ctrl)?;
                let mut y = vec![0.0; sol.dim()];
                sol.eval((self.scheme.horizon() - t).max(0.0), &mut y);
                Ok(self.split(&y))
            }
            _ => self.moments(t, to_real(x).as_slice()),
        }
    }

    fn evaluate(&self, t: f64, x: &[i64]) -> Result<f64> {
        let obs = &self.scheme.observations()[0];
        if let (MomentSolver::Closed(f), 1) = (&self.solver, x.len()) {
            let (z, v) = f(t, &[x[0] as f64]);
            let l = obs.l[(0, 0)];
            return log_normal_density_scalar(obs.v[0], l * z[0], l * l * v[(0, 0)] + self.c[(0, 0)], t);
        }
        let (z, v) = self.state_moments(t, x)?;
        let mean = &obs.l * z;
        let cov = &obs.l * v * obs.l.transpose() + &self.c;
        log_normal_density(&obs.v, &mean, &cov, t)
    }
}

impl GuidingTerm for LnaRestartGuide {
    fn name(&self) -> &str {
        "lna_restart"
    }

    fn scheme(&self) -> &ObservationScheme {
        &self.scheme
    }

    fn log_g(&self, t: f64, x: &[i64]) -> Result<f64> {
        if matches!(self.solver, MomentSolver::Closed(_)) || self.net.is_time_homogeneous() {
            return self.evaluate(t, x);
        }
        let key_t = t.to_bits();
        let hit = VALUES.with(|c| c.borrow().iter().find(|e| e.id == self.id && e.t == key_t && e.x == x).map(|e| e.value));
        if let Some(v) = hit {
            return Ok(v);
        }
        let value = self.evaluate(t, x)?;
        VALUES.with(|c| {
            let mut c = c.borrow_mut();
            if c.len() == VALUE_CACHE_SIZE {
                c.pop_front();
            }
            c.push_back(ValueEntry { id: self.id, t: key_t, x: x.to_vec(), value });
        });
        Ok(value)
    }

    /// Moving the start time forward shortens the remaining duration, so the
    /// moments at `T` change by minus the moment vector field evaluated there.
    fn dt_log_g(&self, t: f64, x: &[i64]) -> Result<f64> {
        if !self.net.is_time_homogeneous() {
            return finite_difference_dt(self, t, x);
        }
        let d = self.net.dim();
        let (z, v) = self.state_moments(t, x)?;
        let mut y = Self::initial(z.as_slice());
        y[d..].copy_from_slice(v.as_slice());
        let mut dy = vec![0.0; y.len()];
        self.rhs(self.scheme.horizon(), &y, &mut dy);
        let (dz, dv) = self.split(&dy);
        let obs = &self.scheme.observations()[0];
        Ok(log_normal_density_rate(&obs.v, &obs.l, &z, &v, &self.c, &(-dz), &(-dv), t)?.1)
    }

    fn log_weight_constant(&self) -> f64 {
        match linalg::spd_cholesky(&self.c) {
            Some(ch) => -0.5 * (linalg::log_det_spd(&ch) + self.c.nrows() as f64 * (2.0 * std::f64::consts::PI).ln()),
            None => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guide::Noise;
    use crate::models;

    #[test]
    fn terminal_evaluation_is_noise_density() {
        let net = Arc::new(models::death(0.5));
        let s = ObservationScheme::single_full(1.0, &[10], Noise::Epsilon(0.5)).unwrap();
        let g = LnaRestartGuide::new(net, s, MomentSolver::Ode(OdeControl::default())).unwrap();
        let expect = -0.5 * 4.0 / 0.5 - 0.5 * (2.0 * std::f64::consts::PI * 0.5).ln();
        assert!((g.log_g(1.0, &[12]).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn death_moments_match_closed_form() {
        let net = Arc::new(models::death(0.5));
        let s = ObservationScheme::single_full(1.0, &[10], Noise::Epsilon(1e-5)).unwrap();
        let ode = LnaRestartGuide::new(net.clone(), s.clone(), MomentSolver::Ode(OdeControl::default())).unwrap();
        let closed = LnaRestartGuide::new(net, s, MomentSolver::death(0.5, 1.0)).unwrap();
        for &(t, x) in &[(0.0, 50.0), (0.3, 31.0), (0.9, 12.0)] {
            let (z1, v1) = ode.moments(t, &[x]).unwrap();
            let (z2, v2) = closed.moments(t, &[x]).unwrap();
            assert!((z1[0] - z2[0]).abs() <= 1e-8 * z2[0].abs());
            assert!((v1[(0, 0)] - v2[(0, 0)]).abs() <= 1e-8 * v2[(0, 0)].abs());
        }
        for &(t, x) in &[(0.1, 40), (0.7, 11)] {
            let a = ode.log_g(t, &[x]).unwrap();
            let b = closed.log_g(t, &[x]).unwrap();
            assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0));
        }
    }

    #[test]
    fn enzyme_moments_are_finite() {
        let net = Arc::new(models::enzyme(5.0, 5.0, 3.0));
        let s = ObservationScheme::single_full(1.0, &[0, 20, 0, 32], Noise::Epsilon(1e-5)).unwrap();
        let g = LnaRestartGuide::new(net, s, MomentSolver::Ode(OdeControl::default())).unwrap();
        let (z, v) = g.moments(0.0, &[12.0, 10.0, 10.0, 10.0]).unwrap();
        assert!(z.iter().all(|c| c.is_finite()));
        // S + SE + P and E + SE are conserved by the mean flow.
        assert!((z[0] + z[2] + z[3] - 32.0).abs() < 1e-6);
        assert!((z[1] + z[2] - 20.0).abs() < 1e-6);
        assert!(linalg::eigenvalues_sym(&v).min() > -1e-8);
        assert!(g.log_g(0.5, &[3, 12, 8, 21]).unwrap().is_finite());
    }

    #[test]
    fn cached_trajectory_matches_direct_integration() {
        let net = Arc::new(models::enzyme(5.0, 5.0, 3.0));
        let s = ObservationScheme::single_full(1.0, &[0, 20, 0, 32], Noise::Epsilon(1e-5)).unwrap();
        let g = LnaRestartGuide::new(net, s, MomentSolver::Ode(OdeControl::default())).unwrap();
        let x = [3, 12, 8, 21];
        for t in [0.0, 0.25, 0.6, 0.95] {
            let (z1, v1) = g.state_moments(t, &x).unwrap();
            let (z2, v2) = g.moments(t, to_real(&x).as_slice()).unwrap();
            assert!((z1 - z2).amax() < 1e-7);
            assert!((v1 - v2).amax() < 1e-7);
        }
    }

    #[test]
    fn time_derivative_matches_difference_quotient() {
        let enzyme = Arc::new(models::enzyme(5.0, 5.0, 3.0));
        let s = ObservationScheme::single_full(1.0, &[0, 20, 0, 32], Noise::Epsilon(1.0)).unwrap();
        let g = LnaRestartGuide::new(enzyme, s, MomentSolver::Ode(OdeControl::default())).unwrap();
        let x = [3, 12, 8, 21];
        for t in [0.1, 0.5, 0.9] {
            let h = 1e-4;
            let fd = (g.moments_log_g(t + h, &x) - g.moments_log_g(t - h, &x)) / (2.0 * h);
            let exact = g.dt_log_g(t, &x).unwrap();
            assert!((fd - exact).abs() < 1e-5 * exact.abs().max(1.0), "t={t} fd={fd} exact={exact}");
        }
        let death = Arc::new(models::death(0.5));
        let s = ObservationScheme::single_full(1.0, &[10], Noise::Epsilon(1e-5)).unwrap();
        let g = LnaRestartGuide::new(death, s, MomentSolver::death(0.5, 1.0)).unwrap();
        for t in [0.1, 0.5, 0.9] {
            let h = 1e-5;
            let fd = (g.log_g(t + h, &[25]).unwrap() - g.log_g(t - h, &[25]).unwrap()) / (2.0 * h);
            let exact = g.dt_log_g(t, &[25]).unwrap();
            assert!((fd - exact).abs() < 1e-5 * exact.abs().max(1.0), "t={t} fd={fd} exact={exact}");
        }
    }

    impl LnaRestartGuide {
        fn moments_log_g(&self, t: f64, x: &[i64]) -> f64 {
            let (z, v) = self.moments(t, to_real(x).as_slice()).unwrap();
            let obs = &self.scheme.observations()[0];
            log_normal_density(&obs.v, &(&obs.l * z), &(&obs.l * v * obs.l.transpose() + &self.c), t).unwrap()
        }
    }
}

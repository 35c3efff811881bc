//! Adaptive Dormand-Prince 5(4) integrator for small dense systems.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeControl {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeControl {
    fn default() -> Self {
        OdeControl { rtol: 1e-8, atol: 1e-10, max_steps: 100_000 }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Scratch buffers, reusable across solves of the same dimension.
#[derive(Clone, Debug, Default)]
pub struct Workspace {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
}

impl Workspace {
    fn ensure(&mut self, n: usize) {
        for k in &mut self.k {
            k.resize(n, 0.0);
        }
        self.tmp.resize(n, 0.0);
        self.y_new.resize(n, 0.0);
    }
}

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Integrates `y' = f(t, y)` from `t0` to `t1` in place. `t1 < t0` is allowed.
pub fn integrate<F>(f: F, t0: f64, t1: f64, y: &mut [f64], ctrl: &OdeControl, ws: &mut Workspace) -> Result<()>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    integrate_inner(f, t0, t1, y, ctrl, ws, None)
}

/// Piecewise quartic interpolant of an accepted solution.
#[derive(Clone, Debug, Default)]
pub struct DenseSolution {
    n: usize,
    /// Step start times followed by the final time.
    times: Vec<f64>,
    /// Five coefficient vectors per step.
    coef: Vec<f64>,
}

impl DenseSolution {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Solution at `t` inside the integrated span (clamped to it).
    pub fn eval(&self, t: f64, out: &mut [f64]) {
        let steps = self.times.len() - 1;
        let forward = self.t_end() >= self.t_start();
        let i = if forward {
            self.times[1..steps].partition_point(|&s| s <= t)
        } else {
            self.times[1..steps].partition_point(|&s| s >= t)
        };
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let theta = if t1 == t0 { 1.0 } else { ((t - t0) / (t1 - t0)).clamp(0.0, 1.0) };
        let theta1 = 1.0 - theta;
        let n = self.n;
        let c = &self.coef[5 * n * i..5 * n * (i + 1)];
        for j in 0..n {
            out[j] = c[j] + theta * (c[n + j] + theta1 * (c[2 * n + j] + theta * (c[3 * n + j] + theta1 * c[4 * n + j])));
        }
    }
}

/// Like [`integrate`], also returning a dense interpolant over `[t0, t1]`.
pub fn integrate_dense<F>(f: F, t0: f64, t1: f64, y: &mut [f64], ctrl: &OdeControl, ws: &mut Workspace) -> Result<DenseSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let mut dense = DenseSolution { n: y.len(), times: vec![t0], coef: Vec::new() };
    if t1 == t0 {
        dense.times.push(t1);
        dense.coef.extend_from_slice(y);
        dense.coef.resize(5 * y.len(), 0.0);
        return Ok(dense);
    }
    integrate_inner(f, t0, t1, y, ctrl, ws, Some(&mut dense))?;
    Ok(dense)
}

fn integrate_inner<F>(mut f: F, t0: f64, t1: f64, y: &mut [f64], ctrl: &OdeControl, ws: &mut Workspace, mut dense: Option<&mut DenseSolution>) -> Result<()>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    ws.ensure(n);
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(());
    }
    let dir = span.signum();
    let mut t = t0;
    f(t, y, &mut ws.k[0]);
    let mut h = initial_step(y, &ws.k[0], span.abs(), ctrl) * dir;
    let mut steps = 0;
    while (t1 - t) * dir > 0.0 {
        if steps >= ctrl.max_steps {
            return Err(Error::OdeFailure(format!("step budget of {} exhausted at t={t}", ctrl.max_steps)));
        }
        steps += 1;
        if (t + h - t1) * dir > 0.0 {
            h = t1 - t;
        }
        let [k1, k2, k3, k4, k5, k6, k7] = &mut ws.k;
        let tmp = &mut ws.tmp;
        for i in 0..n {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        f(t + C2 * h, tmp, k2);
        for i in 0..n {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + C3 * h, tmp, k3);
        for i in 0..n {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + C4 * h, tmp, k4);
        for i in 0..n {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + C5 * h, tmp, k5);
        for i in 0..n {
            tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        f(t + h, tmp, k6);
        let y_new = &mut ws.y_new;
        for i in 0..n {
            y_new[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        f(t + h, y_new, k7);
        let mut err = 0.0;
        for i in 0..n {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = ctrl.atol + ctrl.rtol * y[i].abs().max(y_new[i].abs());
            err += (e / sc) * (e / sc);
        }
        let err = (err / n.max(1) as f64).sqrt();
        if !err.is_finite() {
            h *= 0.1;
            if h.abs() < 1e-14 * t.abs().max(1.0) {
                return Err(Error::OdeFailure(format!("non-finite derivative near t={t}")));
            }
            continue;
        }
        if err <= 1.0 {
            if let Some(d) = dense.as_deref_mut() {
                for i in 0..n {
                    d.coef.push(y[i]);
                }
                for i in 0..n {
                    d.coef.push(y_new[i] - y[i]);
                }
                for i in 0..n {
                    d.coef.push(h * k1[i] - (y_new[i] - y[i]));
                }
                for i in 0..n {
                    let ydiff = y_new[i] - y[i];
                    d.coef.push(ydiff - h * k7[i] - (h * k1[i] - ydiff));
                }
                for i in 0..n {
                    d.coef.push(h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]));
                }
                d.times.push(t + h);
            }
            t += h;
            y.copy_from_slice(y_new);
            std::mem::swap(k1, k7);
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h.abs() < 1e-14 * t.abs().max(1.0) {
            return Err(Error::OdeFailure(format!("step size underflow at t={t}")));
        }
    }
    Ok(())
}

fn initial_step(y: &[f64], dy: &[f64], span: f64, ctrl: &OdeControl) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..y.len() {
        let sc = ctrl.atol + ctrl.rtol * y[i].abs();
        d0 += (y[i] / sc).powi(2);
        d1 += (dy[i] / sc).powi(2);
    }
    let h = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * (d0 / d1).sqrt() };
    h.min(span)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let mut y = [1.0];
        let mut ws = Workspace::default();
        integrate(|_, y, dy| dy[0] = -2.0 * y[0], 0.0, 1.5, &mut y, &OdeControl::default(), &mut ws).unwrap();
        assert!((y[0] - (-3.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn harmonic_oscillator_backwards() {
        let mut y = [1.0, 0.0];
        let mut ws = Workspace::default();
        let ctrl = OdeControl::default();
        integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            2.0,
            0.0,
            &mut y,
            &ctrl,
            &mut ws,
        )
        .unwrap();
        // y(t) = cos(t - 2)
        assert!((y[0] - (-2.0f64).cos()).abs() < 1e-8);
        assert!((y[1] + (-2.0f64).sin()).abs() < 1e-8);
    }

    #[test]
    fn zero_span_is_identity() {
        let mut y = [3.0];
        integrate(|_, _, dy| dy[0] = 1.0, 1.0, 1.0, &mut y, &OdeControl::default(), &mut Workspace::default()).unwrap();
        assert_eq!(y[0], 3.0);
    }

    #[test]
    fn dense_output_matches_solution() {
        let mut y = [1.0, 0.0];
        let d = integrate_dense(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            -3.0,
            &mut y,
            &OdeControl::default(),
            &mut Workspace::default(),
        )
        .unwrap();
        let mut out = [0.0; 2];
        for i in 0..=30 {
            let t = -0.1 * i as f64;
            d.eval(t, &mut out);
            assert!((out[0] - t.cos()).abs() < 1e-7, "t={t}");
            assert!((out[1] + t.sin()).abs() < 1e-7, "t={t}");
        }
    }
}

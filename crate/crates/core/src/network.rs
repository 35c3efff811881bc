//! Reaction networks: species, stoichiometry and intensity functions.
//!
//! A network with species `S_1..S_d` and reactions `l = 1..p` is described by
//! the net change vectors `xi_l` and the intensities `lambda_l(t, x)`. Mass-action
//! intensities use falling factorials, `kappa * prod_k x_k (x_k - 1) ... (x_k - nu_k + 1)`,
//! which is the usual stochastic convention and coincides with `kappa * prod x_k`
//! whenever every reactant order is at most one.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Custom intensity evaluated on real-valued coordinates so that the same
/// function serves the jump process and the Langevin coefficients.
pub type RateFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Species {
    pub name: String,
    pub index: usize,
}

/// Molecule counts, one entry per species. Entries are never negative.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State(Vec<i64>);

impl State {
    pub fn new(counts: Vec<i64>) -> Result<Self> {
        if let Some(bad) = counts.iter().find(|&&c| c < 0) {
            return Err(Error::Model(format!("state has negative count {bad}")));
        }
        Ok(State(counts))
    }

    pub fn counts(&self) -> &[i64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<i64> {
        self.0
    }

    pub fn to_real(&self) -> DVector<f64> {
        DVector::from_iterator(self.0.len(), self.0.iter().map(|&c| c as f64))
    }
}

impl From<State> for Vec<i64> {
    fn from(s: State) -> Self {
        s.0
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

#[derive(Clone)]
pub enum IntensitySpec {
    MassAction {
        kappa: f64,
        orders: Vec<u32>,
    },
    Custom {
        evaluator: RateFn,
        /// Uniform upper bound over time, needed to thin time-dependent rates.
        bound: Option<f64>,
        time_dependent: bool,
    },
}

impl fmt::Debug for IntensitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntensitySpec::MassAction { kappa, orders } => f
                .debug_struct("MassAction")
                .field("kappa", kappa)
                .field("orders", orders)
                .finish(),
            IntensitySpec::Custom { bound, time_dependent, .. } => f
                .debug_struct("Custom")
                .field("bound", bound)
                .field("time_dependent", time_dependent)
                .finish_non_exhaustive(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Reaction {
    pub name: String,
    pub xi: Vec<i64>,
    pub intensity: IntensitySpec,
}

impl Reaction {
    pub fn mass_action(name: impl Into<String>, kappa: f64, orders: Vec<u32>, xi: Vec<i64>) -> Self {
        Reaction {
            name: name.into(),
            xi,
            intensity: IntensitySpec::MassAction { kappa, orders },
        }
    }

    pub fn custom(
        name: impl Into<String>,
        xi: Vec<i64>,
        time_dependent: bool,
        bound: Option<f64>,
        evaluator: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Reaction {
            name: name.into(),
            xi,
            intensity: IntensitySpec::Custom {
                evaluator: Arc::new(evaluator),
                bound,
                time_dependent,
            },
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self.intensity, IntensitySpec::Custom { time_dependent: true, .. })
    }
}

/// Falling factorial `x (x-1) ... (x-n+1)` on integers; zero when `x < n`.
fn falling_factorial(x: i64, n: u32) -> f64 {
    let mut acc = 1.0;
    for j in 0..n as i64 {
        let f = x - j;
        if f <= 0 {
            return 0.0;
        }
        acc *= f as f64;
    }
    acc
}

/// Continuous extension used for the Langevin coefficients; each factor is
/// clipped at zero so the intensity stays nonnegative off the lattice.
fn falling_factorial_real(z: f64, n: u32) -> f64 {
    let mut acc = 1.0;
    for j in 0..n {
        acc *= (z - j as f64).max(0.0);
    }
    acc
}

fn falling_factorial_real_derivative(z: f64, n: u32) -> f64 {
    let mut total = 0.0;
    for skip in 0..n {
        if z - (skip as f64) <= 0.0 {
            continue;
        }
        let mut prod = 1.0;
        for j in 0..n {
            if j != skip {
                prod *= (z - j as f64).max(0.0);
            }
        }
        total += prod;
    }
    total
}

/// Stochastic mass-action intensity `kappa * prod_k FF(x_k, nu_k)`.
///
/// ```
/// use guided_crn::network::mass_action_intensity;
/// assert_eq!(mass_action_intensity(5.0, &[1, 1, 0, 0], &[12, 10, 10, 10]), 600.0);
/// assert_eq!(mass_action_intensity(7.0, &[2], &[1]), 0.0);
/// ```
pub fn mass_action_intensity(kappa: f64, orders: &[u32], x: &[i64]) -> f64 {
    let mut acc = kappa;
    for (&xk, &nk) in x.iter().zip(orders) {
        if nk == 0 {
            continue;
        }
        let ff = falling_factorial(xk, nk);
        if ff == 0.0 {
            return 0.0;
        }
        acc *= ff;
    }
    acc
}

#[derive(Clone, Debug)]
pub struct ReactionNetwork {
    species: Vec<Species>,
    reactions: Vec<Reaction>,
}

impl ReactionNetwork {
    pub fn new<S: Into<String>>(species: impl IntoIterator<Item = S>, reactions: Vec<Reaction>) -> Result<Self> {
        let species: Vec<Species> = species
            .into_iter()
            .enumerate()
            .map(|(index, name)| Species { name: name.into(), index })
            .collect();
        let d = species.len();
        if d == 0 {
            return Err(Error::Model("network needs at least one species".into()));
        }
        for (i, s) in species.iter().enumerate() {
            if species[..i].iter().any(|o| o.name == s.name) {
                return Err(Error::Model(format!("duplicate species name '{}'", s.name)));
            }
        }
        for (l, r) in reactions.iter().enumerate() {
            if r.xi.len() != d {
                return Err(Error::Model(format!(
                    "reaction {l} ('{}'): change vector has length {}, expected {d}",
                    r.name,
                    r.xi.len()
                )));
            }
            match &r.intensity {
                IntensitySpec::MassAction { kappa, orders } => {
                    if !(kappa.is_finite() && *kappa >= 0.0) {
                        return Err(Error::Model(format!("reaction {l} ('{}'): rate constant {kappa} is not a nonnegative number", r.name)));
                    }
                    if orders.len() != d {
                        return Err(Error::Model(format!(
                            "reaction {l} ('{}'): reactant orders have length {}, expected {d}",
                            r.name,
                            orders.len()
                        )));
                    }
                    // lambda > 0 forces x_k >= nu_k, so x + xi stays nonnegative
                    // exactly when xi_k >= -nu_k.
                    if let Some(k) = (0..d).find(|&k| r.xi[k] < -(orders[k] as i64)) {
                        return Err(Error::Model(format!(
                            "reaction {l} ('{}') consumes more of species {k} than its reactant order",
                            r.name
                        )));
                    }
                }
                IntensitySpec::Custom { bound, .. } => {
                    if let Some(b) = bound {
                        if !(b.is_finite() && *b >= 0.0) {
                            return Err(Error::Model(format!("reaction {l} ('{}'): invalid bound {b}", r.name)));
                        }
                    }
                }
            }
        }
        Ok(ReactionNetwork { species, reactions })
    }

    pub fn dim(&self) -> usize {
        self.species.len()
    }

    pub fn num_reactions(&self) -> usize {
        self.reactions.len()
    }

    pub fn species(&self) -> &[Species] {
        &self.species
    }

    pub fn species_names(&self) -> impl Iterator<Item = &str> {
        self.species.iter().map(|s| s.name.as_str())
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn xi(&self, l: usize) -> &[i64] {
        &self.reactions[l].xi
    }

    pub fn is_time_homogeneous(&self) -> bool {
        !self.reactions.iter().any(Reaction::is_time_dependent)
    }

    /// First reaction whose intensity depends on time, if any.
    pub fn first_time_dependent(&self) -> Option<usize> {
        self.reactions.iter().position(Reaction::is_time_dependent)
    }

    pub fn intensity(&self, l: usize, t: f64, x: &[i64]) -> Result<f64> {
        let value = match &self.reactions[l].intensity {
            IntensitySpec::MassAction { kappa, orders } => return Ok(mass_action_intensity(*kappa, orders, x)),
            IntensitySpec::Custom { evaluator, .. } => {
                let z: Vec<f64> = x.iter().map(|&c| c as f64).collect();
                evaluator(t, &z)
            }
        };
        if value.is_finite() && value >= 0.0 {
            Ok(value)
        } else {
            Err(Error::NegativeIntensity { reaction: l, value })
        }
    }

    /// Fills `out` with every intensity at `(t, x)`.
    pub fn intensities_into(&self, t: f64, x: &[i64], out: &mut Vec<f64>) -> Result<()> {
        out.clear();
        for l in 0..self.reactions.len() {
            out.push(self.intensity(l, t, x)?);
        }
        Ok(())
    }

    pub fn intensities(&self, t: f64, x: &[i64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.reactions.len());
        self.intensities_into(t, x, &mut out)?;
        Ok(out)
    }

    /// `sum_l lambda_l(t, x)`; zero exactly at absorbing states.
    ///
    /// ```
    /// use guided_crn::models;
    /// let death = models::death(0.5);
    /// assert_eq!(death.total_intensity(0.0, &[50]).unwrap(), 25.0);
    /// ```
    pub fn total_intensity(&self, t: f64, x: &[i64]) -> Result<f64> {
        let mut total = 0.0;
        for l in 0..self.reactions.len() {
            total += self.intensity(l, t, x)?;
        }
        Ok(total)
    }

    /// Intensity on real coordinates (continuous extension for mass action).
    pub fn intensity_real(&self, l: usize, t: f64, z: &[f64]) -> f64 {
        match &self.reactions[l].intensity {
            IntensitySpec::MassAction { kappa, orders } => {
                let mut acc = *kappa;
                for (&zk, &nk) in z.iter().zip(orders) {
                    if nk > 0 {
                        acc *= falling_factorial_real(zk, nk);
                    }
                }
                acc
            }
            IntensitySpec::Custom { evaluator, .. } => evaluator(t, z).max(0.0),
        }
    }

    /// Gradient of `lambda_l(t, .)` at `z`: analytic for mass action, central
    /// differences with step `1e-6 (1 + |z_j|)` otherwise.
    pub fn intensity_gradient(&self, l: usize, t: f64, z: &[f64], grad: &mut [f64]) {
        match &self.reactions[l].intensity {
            IntensitySpec::MassAction { kappa, orders } => {
                for j in 0..z.len() {
                    if orders[j] == 0 {
                        grad[j] = 0.0;
                        continue;
                    }
                    let mut acc = *kappa * falling_factorial_real_derivative(z[j], orders[j]);
                    for k in 0..z.len() {
                        if k != j && orders[k] > 0 {
                            acc *= falling_factorial_real(z[k], orders[k]);
                        }
                    }
                    grad[j] = acc;
                }
            }
            IntensitySpec::Custom { .. } => {
                let mut zp = z.to_vec();
                for j in 0..z.len() {
                    let h = 1e-6 * (1.0 + z[j].abs());
                    zp[j] = z[j] + h;
                    let up = self.intensity_real(l, t, &zp);
                    zp[j] = z[j] - h;
                    let down = self.intensity_real(l, t, &zp);
                    zp[j] = z[j];
                    grad[j] = (up - down) / (2.0 * h);
                }
            }
        }
    }

    pub fn cle(&self) -> CleCoefficients<'_> {
        CleCoefficients { net: self }
    }

    /// Apply reaction `l` to `x` in place.
    pub fn fire(&self, l: usize, x: &mut [i64]) {
        for (xk, dk) in x.iter_mut().zip(&self.reactions[l].xi) {
            *xk += dk;
        }
    }

    /// Exhaustively checks that every active reaction keeps the state
    /// nonnegative on the given states. Returns the offending `(reaction, state)` pairs.
    pub fn check_nonnegative_jumps<'a>(
        &self,
        t: f64,
        states: impl IntoIterator<Item = &'a [i64]>,
    ) -> Result<Vec<(usize, Vec<i64>)>> {
        let mut bad = Vec::new();
        for x in states {
            for l in 0..self.reactions.len() {
                if self.intensity(l, t, x)? > 0.0 && x.iter().zip(self.xi(l)).any(|(a, b)| a + b < 0) {
                    bad.push((l, x.to_vec()));
                }
            }
        }
        Ok(bad)
    }
}

/// Drift and diffusion of the chemical Langevin equation,
/// `b(t,x) = sum_l lambda_l xi_l`, `sigma = [xi_1 .. xi_p] diag(sqrt lambda)`,
/// `a = sigma sigma' = sum_l lambda_l xi_l xi_l'`.
#[derive(Clone, Copy)]
pub struct CleCoefficients<'a> {
    net: &'a ReactionNetwork,
}

impl<'a> CleCoefficients<'a> {
    pub fn network(&self) -> &'a ReactionNetwork {
        self.net
    }

    pub fn drift(&self, t: f64, z: &[f64]) -> DVector<f64> {
        let d = self.net.dim();
        let mut b = DVector::zeros(d);
        for (l, r) in self.net.reactions.iter().enumerate() {
            let lam = self.net.intensity_real(l, t, z);
            if lam == 0.0 {
                continue;
            }
            for k in 0..d {
                b[k] += lam * r.xi[k] as f64;
            }
        }
        b
    }

    pub fn diffusion(&self, t: f64, z: &[f64]) -> DMatrix<f64> {
        let d = self.net.dim();
        let p = self.net.num_reactions();
        DMatrix::from_fn(d, p, |k, l| self.net.reactions[l].xi[k] as f64 * self.net.intensity_real(l, t, z).sqrt())
    }

    pub fn covariance(&self, t: f64, z: &[f64]) -> DMatrix<f64> {
        let d = self.net.dim();
        let mut a = DMatrix::zeros(d, d);
        for (l, r) in self.net.reactions.iter().enumerate() {
            let lam = self.net.intensity_real(l, t, z);
            if lam == 0.0 {
                continue;
            }
            for i in 0..d {
                for j in 0..d {
                    a[(i, j)] += lam * (r.xi[i] * r.xi[j]) as f64;
                }
            }
        }
        a
    }

    /// Jacobian `J_ij = d b_i / d z_j`.
    pub fn drift_jacobian(&self, t: f64, z: &[f64]) -> DMatrix<f64> {
        let d = self.net.dim();
        let mut jac = DMatrix::zeros(d, d);
        let mut grad = vec![0.0; d];
        for (l, r) in self.net.reactions.iter().enumerate() {
            self.net.intensity_gradient(l, t, z, &mut grad);
            for i in 0..d {
                if r.xi[i] == 0 {
                    continue;
                }
                for j in 0..d {
                    jac[(i, j)] += r.xi[i] as f64 * grad[j];
                }
            }
        }
        jac
    }

    /// Covariance at an integer state.
    pub fn covariance_at(&self, t: f64, x: &[i64]) -> DMatrix<f64> {
        let z: Vec<f64> = x.iter().map(|&c| c as f64).collect();
        self.covariance(t, &z)
    }
}

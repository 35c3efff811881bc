#![allow(dead_code)]

pub mod exact;
pub mod forward_checks;
pub mod guided_checks;
pub mod oracles;

use guided_crn::guide::GuidingTerm;
use guided_crn::guided::{guided_next_reaction, DeltaPolicy, GuidedStep, ThinningStats};
use guided_crn::{ReactionNetwork, RngStream};

/// Asymptotic Kolmogorov tail probability `P(sqrt(n) D > lambda)`, with the
/// small-sample correction of Stephens.
pub fn kolmogorov_pvalue(d: f64, n_eff: f64) -> f64 {
    let sn = n_eff.sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        p += if k as i64 % 2 == 1 { 2.0 * term } else { -2.0 * term };
        if term < 1e-16 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

/// One-sample KS statistic against a continuous cdf.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

pub fn ks_pvalue(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    kolmogorov_pvalue(ks_statistic(samples, cdf), samples.len() as f64)
}

pub fn ks_two_sample_pvalue(a: &[f64], b: &[f64]) -> f64 {
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    kolmogorov_pvalue(d, (n * m) as f64 / (n + m) as f64)
}

/// Cumulative hazard `int_t0^t rate` on a uniform grid by composite Simpson.
pub struct CumulativeHazard {
    t0: f64,
    h: f64,
    values: Vec<f64>,
}

impl CumulativeHazard {
    pub fn new(rate: impl Fn(f64) -> f64, t0: f64, t1: f64, cells: usize) -> Self {
        let h = (t1 - t0) / cells as f64;
        let mut values = Vec::with_capacity(cells + 1);
        values.push(0.0);
        let mut acc = 0.0;
        for i in 0..cells {
            let a = t0 + i as f64 * h;
            acc += h / 6.0 * (rate(a) + 4.0 * rate(a + 0.5 * h) + rate(a + h));
            values.push(acc);
        }
        CumulativeHazard { t0, h, values }
    }

    pub fn at(&self, t: f64) -> f64 {
        let u = ((t - self.t0) / self.h).clamp(0.0, (self.values.len() - 1) as f64);
        let i = (u.floor() as usize).min(self.values.len() - 2);
        let w = u - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    pub fn total(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Cdf of the first event time given that one occurs before the grid end.
    pub fn conditional_cdf(&self, t: f64) -> f64 {
        -(-self.at(t)).exp_m1() / -(-self.total()).exp_m1()
    }
}

/// Total guided rate at a frozen state.
pub fn guided_rate<G: GuidingTerm + ?Sized>(guide: &G, net: &ReactionNetwork, x: &[i64], t: f64) -> f64 {
    (0..net.num_reactions())
        .map(|l| {
            let lam = net.intensity(l, t, x).unwrap();
            if lam > 0.0 {
                lam * guide.alpha(t, x, net.xi(l)).unwrap()
            } else {
                0.0
            }
        })
        .sum()
}

/// First guided jump times from `(t0, x)` before `end`; `None` when nothing fires.
pub fn first_guided_jumps<G: GuidingTerm + ?Sized>(
    guide: &G,
    net: &ReactionNetwork,
    x: &[i64],
    t0: f64,
    end: f64,
    policy: DeltaPolicy,
    seed: u64,
    n: usize,
) -> Vec<Option<f64>> {
    let mut stats = ThinningStats::default();
    (0..n as u64)
        .map(|i| {
            let mut rng = RngStream::new(seed, i);
            match guided_next_reaction(guide, net, t0, x, policy, end, &mut rng, &mut stats).unwrap() {
                GuidedStep::Fire { wait, .. } => Some(t0 + wait),
                GuidedStep::NoJumpBeforeEnd => None,
            }
        })
        .collect()
}

/// Probability that a Binomial(n, p) count of `hits` or fewer is observed,
/// two-sided at level `alpha` via the normal approximation.
pub fn binomial_consistent(hits: usize, n: usize, p: f64, z: f64) -> bool {
    let mean = n as f64 * p;
    let sd = (n as f64 * p * (1.0 - p)).sqrt().max(0.5);
    (hits as f64 - mean).abs() <= z * sd + 0.5
}

/// Pearson statistic after merging neighbouring bins until each expected
/// count is at least 5. Returns the statistic and the degrees of freedom.
pub fn pooled_chi_square(observed: &[u64], expected: &[f64]) -> (f64, usize) {
    let mut groups: Vec<(f64, f64)> = Vec::new();
    let mut cur = (0.0, 0.0);
    for (&o, &e) in observed.iter().zip(expected) {
        cur.0 += o as f64;
        cur.1 += e;
        if cur.1 >= 5.0 {
            groups.push(cur);
            cur = (0.0, 0.0);
        }
    }
    if cur.1 > 0.0 || cur.0 > 0.0 {
        match groups.last_mut() {
            Some(last) => {
                last.0 += cur.0;
                last.1 += cur.1;
            }
            None => groups.push(cur),
        }
    }
    let stat = groups.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    (stat, groups.len().saturating_sub(1))
}

pub fn chi_square_pvalue(stat: f64, dof: usize) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    ChiSquared::new(dof as f64).unwrap().sf(stat)
}

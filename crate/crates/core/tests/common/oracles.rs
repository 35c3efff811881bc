//! Equivalence checks between independent evaluations of guiding terms and
//! path weights.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use guided_crn::experiment::config::{ExperimentConfig, GuideKind};
use guided_crn::experiment::presets;
use guided_crn::guide::{FilterGuide, GuidingTerm, MBlockGuide, Noise, Observation, ObservationScheme, TimeScaled};
use guided_crn::guided::{simulate_guided, DeltaPolicy};
use guided_crn::ode::{self, OdeControl, Workspace};
use guided_crn::quadrature::QuadControl;
use guided_crn::weights::{log_psi, log_psi_cross_checked, log_weight_multi};
use guided_crn::{models, JumpPath, ReactionNetwork, RngStream};

pub struct Case {
    pub name: String,
    pub net: Arc<ReactionNetwork>,
    pub x0: Vec<i64>,
    pub guide: Arc<dyn GuidingTerm>,
    pub policy: DeltaPolicy,
}

fn from_config(name: &str, cfg: &ExperimentConfig, pmf_target: Option<i64>) -> Case {
    let net = Arc::new(cfg.network().unwrap());
    let (scheme, a) = match pmf_target {
        Some(v) => (cfg.pmf_scheme(v).unwrap(), cfg.pmf_a_matrix(&net, v).unwrap()),
        None => (cfg.scheme().unwrap(), cfg.a_matrix(&net).unwrap()),
    };
    let guide: Arc<dyn GuidingTerm> = Arc::from(cfg.build_guide(&net, scheme, a).unwrap());
    Case { name: name.into(), net, x0: cfg.x0.clone(), guide, policy: cfg.delta_policy() }
}

/// Two observations of the isomerisation network, the first one partial.
pub fn isomerization_scheme() -> ObservationScheme {
    ObservationScheme::new(
        2,
        vec![
            Observation::components(0.4, 2, &[0], &[8], Noise::Epsilon(1e-2)),
            Observation::full(1.0, &[12, 7], Noise::Epsilon(1e-2)),
        ],
    )
    .unwrap()
}

pub fn isomerization_a() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0])
}

fn isomerization_case(name: &str, guide: Arc<dyn GuidingTerm>) -> Case {
    Case {
        name: name.into(),
        net: Arc::new(models::isomerization(1.0, 0.5)),
        x0: vec![10, 9],
        guide,
        policy: DeltaPolicy::AnalyticEta(0.5),
    }
}

/// Every guiding-term family with strictly positive observation noise.
pub fn positive_noise_cases(include_slow: bool) -> Vec<Case> {
    let mut euler = presets::death_pmf(GuideKind::Epsilon, 1);
    euler.guide.kind = GuideKind::EulerCle;
    let mut cases = vec![
        from_config("epsilon_death", &presets::death_pmf(GuideKind::Epsilon, 1), Some(30)),
        from_config("lna_death_closed_form", &presets::death_pmf(GuideKind::LnaRestart, 1), Some(30)),
        from_config("poisson_death", &presets::death_pmf(GuideKind::PoissonHybrid, 1), Some(30)),
        from_config("euler_cle_death", &euler, Some(30)),
        from_config("epsilon_gtt", &presets::gtt_bridge(presets::GTT_TARGET), None),
        from_config("poisson_enzyme_b", &presets::enzyme_scenario('B', GuideKind::PoissonHybrid).unwrap(), None),
        isomerization_case("filter_isomerization", Arc::new(FilterGuide::new(isomerization_scheme(), &[isomerization_a()]).unwrap())),
        isomerization_case("mblock_isomerization", Arc::new(MBlockGuide::new(isomerization_scheme(), &[isomerization_a()]).unwrap())),
    ];
    if include_slow {
        cases.push(from_config("lna_ode_enzyme_b", &presets::enzyme_scenario('B', GuideKind::LnaRestart).unwrap(), None));
        cases.push(from_config("filter_gtt_15", &presets::gtt_bridge_15(2).unwrap(), None));
    }
    cases
}

/// Up to `count` guided paths hitting every observation, from streams `(seed, 0..max_tries)`.
pub fn hitting_paths(case: &Case, seed: u64, count: usize, max_tries: u64) -> Vec<JumpPath> {
    (0..max_tries)
        .filter_map(|i| {
            let mut rng = RngStream::new(seed, i);
            let p = simulate_guided(&case.guide, &case.net, &case.x0, case.policy, &mut rng, 1_000_000).unwrap();
            p.hit_all().then_some(p.path)
        })
        .take(count)
        .collect()
}

pub fn tight_quad() -> QuadControl {
    QuadControl { abs_tol: 1e-11, rel_tol: 1e-13, max_depth: 60, max_evals: 200_000 }
}

/// Largest disagreement, in log weight, between the weight through `Psi`
/// and `g`, the jump-and-rate form, and the form with `d/dt log g` integrated
/// numerically, relative to `1 + |log g0| + |log g(t_n-)| + |log Psi|`.
pub fn route_discrepancy(case: &Case, path: &JumpPath) -> f64 {
    let quad = tight_quad();
    let psi = log_psi_cross_checked(&case.guide, &case.net, path, &quad).unwrap();
    let via_g = log_weight_multi(&case.guide, &case.net, path, &quad).unwrap().expect("path hits");
    let direct = psi.log_combined_direct.unwrap();
    let scale = 1.0 + psi.log_g_initial.abs() + psi.log_g_terminal_left.abs() + psi.log_psi.abs();
    (via_g - psi.log_combined).abs().max((psi.log_combined - direct).abs()) / scale
}

/// Largest error of `log alpha` against `log g(x + xi) - log g(x)`, relative
/// to `1 + |log g(x)| + |log g(x + xi)|`, over the reactions at the states a
/// path visits and a few times in each holding interval.
pub fn alpha_discrepancy(case: &Case, path: &JumpPath) -> f64 {
    let horizon = case.guide.horizon();
    let net = &case.net;
    let states: Vec<(f64, Vec<i64>)> = path.replay(net).collect();
    let mut worst = 0.0f64;
    for (i, (t0, x)) in states.iter().enumerate() {
        let t1 = states.get(i + 1).map_or(horizon, |s| s.0);
        for frac in [0.0, 0.3, 0.7] {
            let t = t0 + frac * (t1 - t0);
            if t >= horizon {
                continue;
            }
            let Ok(base) = case.guide.log_g(t, x) else { continue };
            if !base.is_finite() {
                continue;
            }
            for l in 0..net.num_reactions() {
                let xi = net.xi(l);
                let y: Vec<i64> = x.iter().zip(xi).map(|(a, b)| a + b).collect();
                if y.iter().any(|&c| c < 0) {
                    continue;
                }
                let num = case.guide.log_g(t, &y).unwrap();
                if num == f64::NEG_INFINITY {
                    continue;
                }
                let ratio = num - base;
                if ratio.abs() > 50.0 {
                    continue;
                }
                let la = case.guide.log_alpha(t, x, xi).unwrap();
                worst = worst.max((la - ratio).abs() / (1.0 + base.abs() + num.abs()));
            }
        }
    }
    worst
}

/// `|log w(g exp(kappa)) - log w(g)|` for a nonconstant smooth `kappa`,
/// relative to `1 + |log g(0, x0)| + |log Psi| + |c|`, the terms the weight is
/// assembled from.
pub fn time_rescaling_discrepancy(case: &Case, path: &JumpPath) -> f64 {
    let quad = tight_quad();
    let psi = log_psi(&case.guide, &case.net, path, &quad).unwrap();
    let scale = 1.0 + psi.log_g_initial.abs() + psi.log_psi.abs() + case.guide.log_weight_constant().abs();
    let scaled = TimeScaled::new(case.guide.clone(), |t| 0.7 * (3.0 * t).sin() + t * t - 2.0, |t| 2.1 * (3.0 * t).cos() + 2.0 * t);
    let w0 = log_weight_multi(&case.guide, &case.net, path, &quad).unwrap().expect("path hits");
    let w1 = log_weight_multi(&scaled, &case.net, path, &quad).unwrap().expect("path hits");
    (w1 - w0).abs() / scale
}

/// Spread over integer states of `log g_filter - log g_mblock`, maximised over
/// a grid of times. The two differ by a time-dependent normalisation only.
pub fn filter_mblock_spread() -> f64 {
    let f = FilterGuide::new(isomerization_scheme(), &[isomerization_a()]).unwrap();
    let m = MBlockGuide::new(isomerization_scheme(), &[isomerization_a()]).unwrap();
    let mut worst = 0.0f64;
    for t in [0.0, 0.1, 0.25, 0.39, 0.4, 0.55, 0.8, 0.95, 0.999] {
        let diffs: Vec<f64> = (0..=20)
            .flat_map(|a| (0..=20).map(move |b| vec![a, b]))
            .map(|x| f.log_g(t, &x).unwrap() - m.log_g(t, &x).unwrap())
            .collect();
        let lo = diffs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = diffs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max(hi - lo);
    }
    worst
}

fn pack(h: &DMatrix<f64>, f: &DVector<f64>) -> Vec<f64> {
    h.iter().chain(f.iter()).cloned().collect()
}

fn unpack(y: &[f64], d: usize) -> (DMatrix<f64>, DVector<f64>) {
    (DMatrix::from_column_slice(d, d, &y[..d * d]), DVector::from_column_slice(&y[d * d..]))
}

fn rel_diff(h: &DMatrix<f64>, f: &DVector<f64>, h_ref: &DMatrix<f64>, f_ref: &DVector<f64>) -> f64 {
    let dh = (h - h_ref).abs().max() / h_ref.abs().max().max(1e-300);
    let df = (f - f_ref).abs().max() / f_ref.abs().max().max(1e-300);
    dh.max(df)
}

/// Closed-form `(H, F)` against a numerical solution of
/// `dH/dt = H a H`, `dF/dt = H a F` run backwards from the last observation,
/// with the update `H += L' C^-1 L`, `F += L' C^-1 v` at each earlier one.
pub fn filter_ode_discrepancy() -> f64 {
    let scheme = isomerization_scheme();
    let a = isomerization_a();
    let guide = FilterGuide::new(scheme.clone(), &[a.clone()]).unwrap();
    let filter = guide.filter();
    let d = 2;
    let ctrl = OdeControl { rtol: 1e-12, atol: 1e-14, max_steps: 1_000_000 };
    let mut ws = Workspace::default();
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
        let (h, f) = unpack(y, d);
        let ha = &h * &a;
        dy.copy_from_slice(&pack(&(&ha * &h), &(&ha * &f)));
    };
    let obs = scheme.observations();
    let mut h = DMatrix::zeros(d, d);
    let mut f = DVector::zeros(d);
    let mut worst = 0.0f64;
    let mut t = scheme.horizon();
    for k in (0..obs.len()).rev() {
        let c_inv = obs[k].covariance(&a, true).try_inverse().unwrap();
        let lt = obs[k].l.transpose();
        h += &lt * &c_inv * &obs[k].l;
        f += &lt * &c_inv * &obs[k].v;
        let (fh, ff) = filter.h_f_left(obs[k].time);
        worst = worst.max(rel_diff(&fh, &ff, &h, &f));
        let t_prev = if k > 0 { obs[k - 1].time } else { 0.0 };
        let mut y = pack(&h, &f);
        for step in 1..=8 {
            let s = obs[k].time - (obs[k].time - t_prev) * step as f64 / 8.0;
            ode::integrate(&rhs, t, s, &mut y, &ctrl, &mut ws).unwrap();
            t = s;
            let (hn, fnn) = unpack(&y, d);
            let (fh, ff) = filter.h_f(s);
            worst = worst.max(rel_diff(&fh, &ff, &hn, &fnn));
            if step == 8 && k > 0 {
                // The left limit at the earlier observation adds its update.
                let (lh, lf) = filter.h_f_left(s);
                let c = obs[k - 1].covariance(&a, true).try_inverse().unwrap();
                let lt = obs[k - 1].l.transpose();
                let (jh, jf) = (&lt * &c * &obs[k - 1].l, &lt * &c * &obs[k - 1].v);
                worst = worst.max(rel_diff(&(lh - jh), &(lf - jf), &hn, &fnn));
            }
        }
        let (hn, fnn) = unpack(&y, d);
        h = hn;
        f = fnn;
    }
    worst
}

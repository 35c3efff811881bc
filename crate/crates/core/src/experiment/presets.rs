//! Built-in configurations for the death-process, gene transcription and
//! translation, and enzyme kinetics studies.

use super::config::{
    ARule, ExperimentConfig, GuideConfig, GuideKind, MomentsMode, NetworkConfig, ObservationConfig, OutputConfig, PmfConfig,
    ReactionConfig, Reference, ThetaRule,
};
use crate::error::{Error, Result};
use crate::forward::simulate_forward;
use crate::network::{IntensitySpec, ReactionNetwork};
use crate::models;
use crate::rng::RngStream;

pub const DEATH_X0: i64 = 50;
pub const DEATH_RATE: f64 = 0.5;
pub const GTT_X0: [i64; 3] = [1, 50, 10];
pub const GTT_TARGET: [i64; 3] = [1, 10, 50];
pub const GTT_TARGET_ALT: [i64; 3] = [1, 11, 56];
pub const ENZYME_X0: [i64; 4] = [12, 10, 10, 10];
pub const ENZYME_TARGETS: [(char, [i64; 4]); 3] = [('A', [0, 15, 5, 27]), ('B', [0, 19, 1, 31]), ('C', [0, 20, 0, 32])];
pub const EPSILON: f64 = 1e-5;

/// Group and single preset names accepted by [`preset`].
pub const PRESET_NAMES: &[&str] = &[
    "death_pmf",
    "death_pmf_lna",
    "death_pmf_epsilon",
    "death_pmf_poisson",
    "gtt_bridge",
    "gtt_bridge_alt",
    "gtt_bridge_15",
    "enzyme_scenarios",
    "enzyme_A_epsilon",
    "enzyme_A_lna",
    "enzyme_A_poisson",
    "enzyme_B_epsilon",
    "enzyme_B_lna",
    "enzyme_B_poisson",
    "enzyme_C_epsilon",
    "enzyme_C_lna",
    "enzyme_C_poisson",
];

/// Mass-action network section mirroring a library model.
pub fn network_config(net: &ReactionNetwork) -> NetworkConfig {
    NetworkConfig {
        species: net.species_names().map(String::from).collect(),
        reactions: net
            .reactions()
            .iter()
            .map(|r| match &r.intensity {
                IntensitySpec::MassAction { kappa, orders } => {
                    ReactionConfig { name: r.name.clone(), kappa: *kappa, orders: orders.clone(), xi: r.xi.clone() }
                }
                IntensitySpec::Custom { .. } => unreachable!("built-in models are mass action"),
            })
            .collect(),
    }
}

fn full_observation(time: f64, target: &[i64]) -> ObservationConfig {
    ObservationConfig {
        time,
        components: None,
        l: None,
        v: target.iter().map(|&c| c as f64).collect(),
        epsilon: Some(EPSILON),
        covariance: None,
        exact: false,
    }
}

fn base(name: &str, net: &ReactionNetwork, x0: &[i64], observations: Vec<ObservationConfig>, guide: GuideConfig, replicates: usize) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        seed: 1,
        replicates,
        threads: None,
        max_events: crate::forward::DEFAULT_MAX_EVENTS,
        x0: x0.to_vec(),
        network: network_config(net),
        observations,
        guide,
        pmf: None,
        tune: None,
        greedy: None,
        output: OutputConfig::default(),
    }
}

fn guide(kind: GuideKind) -> GuideConfig {
    GuideConfig { kind, ..Default::default() }
}

/// Pmf of the death process at `T = 1` from `x0 = 50`, `c = 1/2`, over the
/// full support, for one of `lna_restart`, `epsilon` and `poisson_hybrid`.
pub fn death_pmf(kind: GuideKind, replicates: usize) -> ExperimentConfig {
    let net = models::death(DEATH_RATE);
    let mut g = guide(kind);
    let mut pmf = PmfConfig { component: 0, min: 0, max: DEATH_X0, a_rule: None, a_slope: 2.5, a_min: 1.0, reference: Some(Reference::Binomial) };
    match kind {
        GuideKind::LnaRestart => g.moments = MomentsMode::DeathClosedForm,
        GuideKind::Epsilon => pmf.a_rule = Some(ARule::Linear),
        GuideKind::PoissonHybrid => {
            g.monotone = Some(0);
            g.increasing = false;
            g.theta_rule = Some(ThetaRule::TargetRate);
        }
        _ => {}
    }
    let name = format!("death_pmf_{}", short(kind));
    let mut cfg = base(&name, &net, &[DEATH_X0], vec![full_observation(1.0, &[0])], g, replicates);
    cfg.pmf = Some(pmf);
    cfg.output.trajectories = false;
    cfg
}

fn short(kind: GuideKind) -> &'static str {
    match kind {
        GuideKind::LnaRestart => "lna",
        GuideKind::PoissonHybrid => "poisson",
        other => other.as_str(),
    }
}

fn gtt_net() -> ReactionNetwork {
    models::gtt(100.0, 10.0, 25.0, 1.0)
}

/// Single full observation of the gene transcription and translation model.
pub fn gtt_bridge(target: [i64; 3]) -> ExperimentConfig {
    let name = if target == GTT_TARGET { "gtt_bridge" } else { "gtt_bridge_alt" };
    base(name, &gtt_net(), &GTT_X0, vec![full_observation(1.0, &target)], guide(GuideKind::Epsilon), 1000)
}

/// Fifteen partial observations read off one forward path: random times in
/// `(0, 1)`, each observing a random nonempty subset of the species.
pub fn gtt_bridge_15(seed: u64) -> Result<ExperimentConfig> {
    let net = gtt_net();
    let mut rng = RngStream::new(seed, u64::MAX);
    let path = simulate_forward(&net, &GTT_X0, 1.0, &mut rng, crate::forward::DEFAULT_MAX_EVENTS)?;
    let mut times: Vec<f64> = (0..15).map(|_| rng.uniform()).collect();
    times.sort_by(|a, b| a.total_cmp(b));
    if times.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("gtt_bridge_15: repeated observation time".into()));
    }
    let observations = times
        .iter()
        .map(|&t| {
            let comps = loop {
                let c: Vec<usize> = (0..3).filter(|_| rng.uniform() < 0.5).collect();
                if !c.is_empty() {
                    break c;
                }
            };
            let x = path.state_at(&net, t);
            ObservationConfig {
                time: t,
                v: comps.iter().map(|&j| x[j] as f64).collect(),
                components: Some(comps),
                l: None,
                epsilon: Some(EPSILON),
                covariance: None,
                exact: false,
            }
        })
        .collect();
    Ok(base("gtt_bridge_15", &net, &GTT_X0, observations, guide(GuideKind::Epsilon), 1000))
}

/// Enzyme kinetics conditioned on a full state at `T = 1`.
pub fn enzyme_scenario(scenario: char, kind: GuideKind) -> Result<ExperimentConfig> {
    let target = ENZYME_TARGETS
        .iter()
        .find(|(s, _)| *s == scenario)
        .map(|(_, t)| *t)
        .ok_or_else(|| Error::Config(format!("unknown enzyme scenario '{scenario}'")))?;
    let net = models::enzyme(5.0, 5.0, 3.0);
    let mut g = guide(kind);
    if kind == GuideKind::PoissonHybrid {
        g.monotone = Some(3);
        g.increasing = true;
        g.theta_rule = Some(ThetaRule::InitialRate);
    }
    let name = format!("enzyme_{scenario}_{}", short(kind));
    Ok(base(&name, &net, &ENZYME_X0, vec![full_observation(1.0, &target)], g, 100))
}

/// Every configuration in a group, or the single named one.
pub fn preset(name: &str) -> Result<Vec<ExperimentConfig>> {
    let death_kinds = [GuideKind::LnaRestart, GuideKind::Epsilon, GuideKind::PoissonHybrid];
    let enzyme_kinds = [GuideKind::Epsilon, GuideKind::LnaRestart, GuideKind::PoissonHybrid];
    let all: Vec<ExperimentConfig> = match name {
        "death_pmf" => death_kinds.iter().map(|&k| death_pmf(k, 15000)).collect(),
        "gtt_bridge" => vec![gtt_bridge(GTT_TARGET)],
        "gtt_bridge_alt" => vec![gtt_bridge(GTT_TARGET_ALT)],
        "gtt_bridge_15" => vec![gtt_bridge_15(2)?],
        "enzyme_scenarios" => {
            let mut v = Vec::new();
            for (s, _) in ENZYME_TARGETS {
                for k in enzyme_kinds {
                    v.push(enzyme_scenario(s, k)?);
                }
            }
            v
        }
        _ => {
            let mut pool: Vec<ExperimentConfig> = death_kinds.iter().map(|&k| death_pmf(k, 15000)).collect();
            pool.extend(preset("enzyme_scenarios")?);
            let found: Vec<ExperimentConfig> = pool.into_iter().filter(|c| c.name == name).collect();
            if found.is_empty() {
                return Err(Error::Config(format!("unknown preset '{name}' (known: {})", PRESET_NAMES.join(", "))));
            }
            found
        }
    };
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        for name in PRESET_NAMES {
            let cfgs = preset(name).unwrap();
            assert!(!cfgs.is_empty());
            for c in cfgs {
                c.validate().unwrap();
                let again = ExperimentConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
                assert_eq!(again, c);
            }
        }
        assert!(preset("nope").is_err());
    }

    #[test]
    fn fifteen_partial_observations() {
        let c = gtt_bridge_15(2).unwrap();
        assert_eq!(c.observations.len(), 15);
        assert!(c.observations.windows(2).all(|w| w[0].time < w[1].time));
        assert!(c.observations.iter().all(|o| o.components.as_ref().is_some_and(|c| !c.is_empty())));
        assert_eq!(gtt_bridge_15(2).unwrap(), c);
    }
}

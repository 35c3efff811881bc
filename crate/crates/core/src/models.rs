//! Ready-made networks used throughout the examples and experiments.

use crate::network::{Reaction, ReactionNetwork};

/// Pure death process `X -> 0` with intensity `c x`.
pub fn death(c: f64) -> ReactionNetwork {
    ReactionNetwork::new(["X"], vec![Reaction::mass_action("death", c, vec![1], vec![-1])])
        .expect("death network is well formed")
}

/// Gene transcription and translation on species `(G, M, P)`.
pub fn gtt(kappa1: f64, kappa2: f64, d_m: f64, d_p: f64) -> ReactionNetwork {
    ReactionNetwork::new(
        ["G", "M", "P"],
        vec![
            Reaction::mass_action("transcription", kappa1, vec![1, 0, 0], vec![0, 1, 0]),
            Reaction::mass_action("translation", kappa2, vec![0, 1, 0], vec![0, 0, 1]),
            Reaction::mass_action("mrna_decay", d_m, vec![0, 1, 0], vec![0, -1, 0]),
            Reaction::mass_action("protein_decay", d_p, vec![0, 0, 1], vec![0, 0, -1]),
        ],
    )
    .expect("GTT network is well formed")
}

/// Michaelis-Menten enzyme kinetics on species `(S, E, SE, P)`:
/// `S + E <-> SE -> P + E`.
pub fn enzyme(kappa1: f64, kappa2: f64, kappa3: f64) -> ReactionNetwork {
    ReactionNetwork::new(
        ["S", "E", "SE", "P"],
        vec![
            Reaction::mass_action("binding", kappa1, vec![1, 1, 0, 0], vec![-1, -1, 1, 0]),
            Reaction::mass_action("unbinding", kappa2, vec![0, 0, 1, 0], vec![1, 1, -1, 0]),
            Reaction::mass_action("catalysis", kappa3, vec![0, 0, 1, 0], vec![0, 1, -1, 1]),
        ],
    )
    .expect("enzyme network is well formed")
}

/// Reversible isomerisation `A <-> B`; `A + B` is conserved.
pub fn isomerization(k_forward: f64, k_backward: f64) -> ReactionNetwork {
    ReactionNetwork::new(
        ["A", "B"],
        vec![
            Reaction::mass_action("forward", k_forward, vec![1, 0], vec![-1, 1]),
            Reaction::mass_action("backward", k_backward, vec![0, 1], vec![1, -1]),
        ],
    )
    .expect("isomerisation network is well formed")
}

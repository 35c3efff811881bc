//! Simulation of chemical reaction networks conditioned on exact partial
//! observations, via guided jump processes and importance weights.

pub mod error;
pub mod experiment;
pub mod forward;
pub mod guide;
pub mod guided;
pub mod linalg;
pub mod models;
pub mod network;
pub mod ode;
pub mod quadrature;
pub mod rng;
pub mod weights;

pub use error::{Error, Result};
pub use forward::{simulate_forward, Event, JumpPath, NextReaction};
pub use network::{Reaction, ReactionNetwork, State};
pub use rng::RngStream;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/networks.md")]
    mod networks {}
    #[doc = include_str!("../../../book/src/forward.md")]
    mod forward {}
    #[doc = include_str!("../../../book/src/guiding.md")]
    mod guiding {}
    #[doc = include_str!("../../../book/src/guided.md")]
    mod guided {}
    #[doc = include_str!("../../../book/src/weights.md")]
    mod weights {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

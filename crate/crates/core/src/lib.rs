//! Replica-symmetric analysis and joint BP simulation of regular LDPC
//! ensembles over binary-input finite-state channels.
//!
//! The guide in `book/` walks through each module; its examples run as
//! doc-tests of this crate.

pub mod bp;
pub mod channel;
pub mod dec;
pub mod ensemble;
pub mod error;
pub mod gf2;
pub mod graph;
pub mod markov;
pub mod population;
pub mod rng;
pub mod stats;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/ensembles.md")]
    mod ensembles {}
    #[doc = include_str!("../../../book/src/channels.md")]
    mod channels {}
    #[doc = include_str!("../../../book/src/dec.md")]
    mod dec {}
    #[doc = include_str!("../../../book/src/population.md")]
    mod population {}
    #[doc = include_str!("../../../book/src/markov.md")]
    mod markov {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

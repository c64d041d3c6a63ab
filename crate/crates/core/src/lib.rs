//! Empirical game-theoretic analysis: games, empirical games, equilibrium
//! solvers, meta-strategy solvers, the PSRO loop and backward profile
//! search.

pub mod bps;
pub mod empirical;
pub mod error;
pub mod factory;
pub mod game;
pub mod meta;
pub mod psro;
pub mod solvers;

pub use error::{Error, Result};

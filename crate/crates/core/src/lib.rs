//! Nonlinear dynamic pricing mechanisms on a binomial Brownian lattice.
//!
//! * [`lattice`]: time grid, recombining Brownian tree, one-step operators.
//! * [`generator`]: price generating functions `g(t, y, z)` and their
//!   sampled structural checks.
//! * [`bsde`]: implicit backward induction, the pricing operator
//!   `E^g_{s,t}[X; K]`, black-box mechanisms, pasting, comparison and
//!   domination verdicts.
//! * [`analysis`]: axiom checks, supermartingale decomposition, driver
//!   representation, probes and recovery of `g` from a black box.
//! * [`market`]: option-chain ingestion and the four-family domination audit.
//! * [`cli`]: the `gmech` command surface.

pub mod analysis;
pub mod bsde;
pub mod cli;
pub mod error;
pub mod generator;
pub mod lattice;
pub mod market;
pub mod sampling;

pub use error::{Error, Result};

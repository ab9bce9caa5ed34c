//! Scheduling of imperfectly observed Markov projects.
//!
//! `N` projects evolve as independent hidden Markov chains sharing one
//! transition matrix `A` and one observation matrix `B`. Each slot exactly
//! one project is worked: it earns `R(state)`, moves through `A` and emits
//! an observation through `B`; every other project moves silently. The
//! scheduler sees only beliefs (posterior state distributions).
//!
//! The crate provides belief filtering, stochastic-order predicates, the
//! myopic rule, exact finite-horizon dynamic programming, structural
//! condition checks under which the myopic rule is optimal, sensitivity
//! bound checks, Monte Carlo simulation and random instance generation.
//!
//! Indices in the API are zero-based; human-readable messages are one-based.

pub mod assumptions;
pub mod belief;
pub mod bounds;
pub mod dp;
pub mod error;
pub mod filter;
pub mod generate;
pub mod orders;
pub mod policy;
pub mod simulate;
pub mod spectral;
pub mod sweep;

pub use error::{Error, Result};

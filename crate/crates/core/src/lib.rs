//! Welfare-maximizing pooled testing under a budget.
//!
//! A population of individuals, each with a utility for returning to
//! in-person activities and an independent probability of being healthy, is
//! to be covered by at most `B` pooled tests of at most `G` samples each.
//! A test is negative exactly when all its members are healthy, and anyone
//! in a negative test returns to in-person activities and earns their
//! utility. This crate computes allocations that maximize the expected total
//! utility:
//!
//! - exhaustive oracles for single tests, disjoint regimes and
//!   overlap-capped regimes ([`oracle`]);
//! - a (1 - epsilon)-approximation scheme for the optimal single pooled
//!   test ([`fptas`]) and a greedy allocator built on top of it
//!   ([`greedy`]);
//! - exact and greedy allocators for identical utilities ([`identical`]);
//! - a mixed-integer linear program over clustered populations with a
//!   piecewise-linear exp approximation and LP-file export ([`milp`],
//!   [`pwl`]);
//! - measurement of the welfare gain overlapping tests can offer
//!   ([`gain`]) and re-optimization over submitted samples ([`repool`]).

pub mod error;
pub mod fptas;
pub mod gain;
pub mod greedy;
pub mod identical;
pub mod milp;
pub mod oracle;
pub mod population;
pub mod pwl;
pub mod regime;
pub mod repool;
pub mod welfare;

pub use error::{Error, Result};
pub use population::{Cluster, ClusteredPopulation, Individual, Population};
pub use regime::{Regime, Test};
pub use welfare::{
    regime_welfare_exact, regime_welfare_nonoverlapping, test_welfare, WelfareReport,
};

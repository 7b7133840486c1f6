//! Self-regulating random walks: populations of lazy random walkers on a
//! graph that fork or terminate based on how long ago their current node was
//! last visited.
//!
//! The crate is organised bottom-up:
//!
//! - [`graph`] and [`kernel`]: connected graphs, the lazy walk and its
//!   stationary law.
//! - [`mixing`] and [`return_time`]: mixing curves, spectral gaps, return
//!   time samples and the per-node age clock.
//! - [`envelopes`]: two-sided exponential envelopes on return tails, their
//!   Laplace transforms and the effective-age interval.
//! - [`policy`] and [`population`]: the age-based fork/terminate controller
//!   and the multi-walker engine with traps.
//! - [`analysis`]: feasibility checks, block drift, corridor statistics.
//! - [`config`] and [`runner`]: JSON configuration and the command
//!   implementations behind the `srrw` binary.

// `!(x > 0.0)` is deliberate: NaN fails the check along with the bound.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod envelopes;
pub mod error;
pub mod graph;
pub mod kernel;
pub mod mixing;
pub mod policy;
pub mod population;
pub mod return_time;
pub mod runner;

pub use error::{Error, Result};
pub use graph::Graph;
pub use kernel::{StationaryDistribution, TransitionKernel};

//! Planning library for a UAV-mounted edge information hub (EIH) that relays
//! ground-sensor data to a satellite under a hard upload deadline.
//!
//! The crate computes the cost-minimal amount of user bandwidth, satellite
//! backhaul rate, compute and storage to provision on the hub, and where to
//! hover it. Module map:
//!
//! - [`scenario`]: sensors, global parameters, validation, random generation
//!   and the scenario file format.
//! - [`channel`]: air-to-ground large-scale gain and ergodic spectral
//!   efficiency (deterministic-equivalent approximation, Monte Carlo, and the
//!   exact exponential-integral form).
//! - [`dataflow`]: piecewise upload latency / storage of the concurrent
//!   receive-compute-upload pipeline plus an event-driven fluid simulator.
//! - [`scheduling`]: optimal compute/upload data split.
//! - [`config_opt`]: closed-form optimal resource configuration at a fixed
//!   location, the solution-normalization map and an LP oracle.
//! - [`placement`]: hub placement by grid search, heuristics and successive
//!   convex approximation with a log-barrier subproblem solver.
//! - [`bench`]: comparison schemes and experiment reproduction.
//!
//! Data-parallel loops (Monte Carlo chunks, grid nodes, experiment seeds) run
//! on rayon when the `parallel` feature is enabled and sequentially otherwise.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod channel;
pub mod config_opt;
pub mod dataflow;
mod error;
pub mod exec;
pub mod placement;
pub mod report;
pub mod scenario;
pub mod scheduling;
pub mod special;
pub mod units;

pub use error::{Error, Result};
pub use exec::Execution;
pub use scenario::{Location, Scenario, Sensor};

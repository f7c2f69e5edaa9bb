//! Hierarchical federated-learning aggregation over a wireless edge network.
//!
//! The crate is split along the pipeline of one learning round:
//!
//! * [`fl`] holds the plain federated-learning math (loss, local SGD step,
//!   star aggregation at the cloud).
//! * [`ina`] implements in-network aggregation: edge nodes combine the
//!   messages of their users and forward one weighted message each.
//! * [`network`] is the topology and the uplink/downlink latency model.
//! * [`routing`] chooses which edge each user uploads to: an LP relaxation
//!   solved by a built-in simplex, randomized rounding, baselines and an
//!   exhaustive oracle.
//! * [`harness`] generates scenarios and runs the experiment sweeps.

pub mod error;
pub mod fl;
pub mod harness;
pub mod ina;
pub mod network;
pub mod routing;

pub use error::{Error, Result};

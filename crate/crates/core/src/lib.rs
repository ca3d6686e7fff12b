//! Simulation and analysis of over-the-air ratio consensus.
//!
//! Agents on a wireless network estimate the average of their initial
//! values. Transmissions superpose on reciprocal fading channels, so each
//! receiver only observes a gain-weighted sum of its neighbours' signals.
//! Normalizing every reception by the node's own incoming gain sum (its
//! pilot measurement) turns the channel matrix into a column-stochastic
//! one, and the ratio of a numerator and a denominator iteration then
//! converges to the exact average without any channel knowledge.
//!
//! * [`topology`]: communication digraphs and (ε, B) joint connectivity.
//! * [`channel`]: reciprocal fading realizations and receiver noise.
//! * [`protocol`]: the per-node state machines and the classical baseline.
//! * [`simulator`]: end-to-end runs with convergence detection.
//! * [`analysis`]: the matrix-form oracle and invariant audits.
//! * [`config`], [`report`], [`cli`]: configuration files, output files and
//!   the subcommands of the `ota-consensus` binary.

pub mod analysis;
pub mod channel;
pub mod cli;
pub mod config;
pub mod error;
pub mod matrix;
pub mod protocol;
pub mod report;
pub mod rng;
pub mod simulator;
pub mod topology;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use topology::{Digraph, NodeId};

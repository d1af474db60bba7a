//! Self-organizing symbiotic agents.
//!
//! The crate is layered bottom-up:
//!
//! - [`hyperstruct`]: ordered structures, interaction and dependency edges,
//!   observation and emergence.
//! - [`population`]: the roster of solvers with the break operator, its
//!   reverse, the stall trigger and the goal predicate.
//! - [`envs`]: small episodic environments.
//! - [`symbio`]: symbiotic neuro-evolution driving the population.
//! - [`harness`]: configuration, metrics, checkpoints and verification.

pub mod config;
pub mod envs;
pub mod harness;
pub mod hyperstruct;
pub mod population;
pub mod rng;
pub mod symbio;

//! Resilient leader-follower consensus in discrete time.
//!
//! Leaders publish a time-varying reference; followers only act on a value
//! once `F + 1` in-neighbors agree on it and then relay it, so up to `F`
//! misbehaving neighbors per agent cannot inject false values. This crate
//! simulates that protocol over static digraphs with configurable
//! adversaries, certifies the graph conditions it relies on, and computes
//! the tracking metrics that show whether followers lock onto the leaders.
//!
//! * [`graph`]: digraphs, k-circulant generators, F-local / F-total sets and
//!   strong r-robustness certificates.
//! * [`signal`]: reference signals and their step bounds.
//! * [`protocol`]: per-agent transition rules, normal and misbehaving.
//! * [`engine`]: scenarios, hypothesis validation, the round scheduler and
//!   traces.
//! * [`metrics`]: tracking error, spread, finite-time bound, monotonicity.
//! * [`scenario_file`], [`export`], [`bundled`]: TOML scenarios and CSV
//!   output.
//! * [`batch`]: many independent runs at once.

pub mod batch;
pub mod bundled;
pub mod engine;
mod error;
pub mod export;
pub mod graph;
pub mod metrics;
pub mod protocol;
pub mod rng;
pub mod scenario_file;
pub mod signal;

pub use engine::{replay_check, run, validate, Scenario, Trace, ValidationReport};
pub use error::{Error, Result};
pub use graph::{AgentId, Digraph};
pub use protocol::{Misbehavior, ProtocolParams, ValueSource};
pub use signal::ReferenceSignal;

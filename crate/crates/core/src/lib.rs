//! Discrete-event simulator comparing LTE and 5G mmWave uplinks for
//! construction-site video streams.
//!
//! The crate is layered bottom-up: [`engine`] (clock, event queue, RNG
//! substreams), [`channel`] (raster, propagation, SNR), [`phy`] (numerology,
//! link abstraction, schedulers, HARQ), [`traffic`] and [`mobility`] feed
//! the per-run cell model in [`sim`]; [`metrics`] and [`scenario`] turn runs
//! into sweep results, and [`cli`] exposes everything on the command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod cli;
pub mod config;
pub mod engine;
pub mod metrics;
pub mod mobility;
pub mod phy;
pub mod scenario;
pub mod sim;
pub mod traffic;

pub use channel::{RadioConfig, Rat};
pub use config::{parse_config, ScenarioConfig};
pub use metrics::{AggregateResult, FlowStats, RunResult};
pub use scenario::{run_scenario, run_scenario_with, RunOptions, ScenarioOutput};

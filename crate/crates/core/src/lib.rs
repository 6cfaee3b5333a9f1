//! Deterministic, seedable simulation of randomized work stealing with an
//! explicit communication latency, together with the theoretical makespan
//! bound it is measured against and a replication/sweep harness.
//!
//! The model: p identical processors, W unit tasks all starting on
//! processor 0, every message (steal request, fail response, work
//! transfer) in flight for exactly λ ticks. An idle processor requests
//! work from a uniformly random peer; a victim serves at most one transfer
//! at a time, splits its load so thief and victim are balanced once the
//! transfer lands, and refuses requests when too little work remains.
//!
//! - [`engine`]: the protocol itself, as a literal tick-by-tick reference
//!   engine and a bit-identical event-driven one.
//! - [`analysis`]: the bound formulas (γ, expectation, tails, request
//!   bound) and empirical probes for the potential-function argument.
//! - [`experiments`]: seeded sweeps, quartile statistics, overhead ratios
//!   and the fitted overhead constant.
//! - [`model`]: shared configuration and trace types.
//!
//! ```
//! use ws_sim_core::{run, RunOptions, SimConfig};
//!
//! // 4 units, 2 processors, latency 1: the steal request sent at t = 0
//! // lands at t = 1, one unit travels back, both drain by t = 3.
//! let trace = run(&SimConfig::new(4, 2, 1, 1), &RunOptions::default());
//! assert_eq!(trace.makespan, 3);
//! assert_eq!(trace.steals_success, 1);
//! ```

pub mod analysis;
pub mod engine;
pub mod experiments;
pub mod format;
mod mix;
pub mod model;
pub mod stats;

pub use engine::{divide_work, run, run_event, run_reference, RunOptions, Snapshot, WorkDivision};
pub use model::{
    ConfigError, EngineKind, Message, MessageKind, OverheadLogArg, ProcId, ProcessorState,
    RunTrace, SimConfig, Status, StealEvent, StealOutcome, Time,
};

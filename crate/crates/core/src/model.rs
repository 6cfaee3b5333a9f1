//! Domain types shared by the engines, the analysis layer and the
//! experiment harness.
//!
//! All quantities (work, latency, time) are integers: work is counted in
//! unit tasks, one unit of work takes one tick to execute, and every
//! message spends exactly `latency` ticks in flight. Keeping everything
//! integral makes conservation checkable exactly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Simulation time, in ticks.
pub type Time = u64;

/// Processor index in `0..p`. Processor 0 holds all work at t = 0.
pub type ProcId = u32;

/// Which engine executes a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    /// Literal tick-by-tick loop. The semantic reference.
    Reference,
    /// Jumps between message arrivals and work-exhaustion instants.
    /// Produces bit-identical traces to [`EngineKind::Reference`].
    Event,
}

/// Argument of the logarithm in the overhead-ratio numerator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OverheadLogArg {
    /// log2(W/λ) — the form used by the published overhead-ratio figure.
    #[serde(rename = "W_over_lambda")]
    WOverLambda,
    /// log2(W/2λ) — the form appearing in the makespan theorem.
    #[serde(rename = "W_over_2lambda")]
    WOver2Lambda,
}

/// Full parameterization of a run (and, with `replications`, of a
/// replicated experiment). Two runs with identical `SimConfig` produce
/// bit-identical [`RunTrace`]s.
///
/// The JSON form mirrors the field names exactly; unknown keys are
/// rejected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Total amount of work W, in unit tasks. All of it starts on
    /// processor 0.
    pub total_work: u64,
    /// Number of processors p ≥ 1.
    pub processors: u32,
    /// One-way communication latency λ ≥ 1, in ticks.
    pub latency: u64,
    /// Seed of the per-run deterministic PRNG stream.
    pub seed: u64,
    /// Engine selection.
    #[serde(default = "default_engine")]
    pub engine: EngineKind,
    /// Log-argument convention for overhead ratios.
    #[serde(default = "default_overhead_log_arg")]
    pub overhead_log_arg: OverheadLogArg,
    /// Replication count for replicated experiments; ≥ 1.
    #[serde(default = "default_replications")]
    pub replications: u32,
}

fn default_engine() -> EngineKind {
    EngineKind::Event
}

fn default_overhead_log_arg() -> OverheadLogArg {
    OverheadLogArg::WOverLambda
}

fn default_replications() -> u32 {
    1
}

impl SimConfig {
    /// Config with the default engine (event), default overhead form and a
    /// single replication.
    pub fn new(total_work: u64, processors: u32, latency: u64, seed: u64) -> Self {
        Self {
            total_work,
            processors,
            latency,
            seed,
            engine: default_engine(),
            overhead_log_arg: default_overhead_log_arg(),
            replications: default_replications(),
        }
    }

    /// Checks the field invariants: p ≥ 1, λ ≥ 1, replications ≥ 1.
    /// W = 0 (empty workload) is legal.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.latency == 0 {
            return Err(ConfigError::NonPositiveLatency);
        }
        if self.processors == 0 {
            return Err(ConfigError::NonPositiveProcessors);
        }
        if self.replications == 0 {
            return Err(ConfigError::NonPositiveReplications);
        }
        Ok(())
    }
}

/// Rejected [`SimConfig`] field values.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    /// λ = 0 leaves the model undefined (messages would arrive when sent).
    #[error("lambda must be ≥ 1")]
    NonPositiveLatency,
    #[error("p must be ≥ 1")]
    NonPositiveProcessors,
    #[error("replications must be ≥ 1")]
    NonPositiveReplications,
}

/// What a processor is doing, as observable at the end of a tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// Holds work and executes one unit per tick.
    Working,
    /// Idle with exactly one steal request (or its response) in flight.
    IdleAwaitingResponse,
    /// Idle with no outstanding request (transient within a tick; a free
    /// idle processor emits a new request in the same tick).
    IdleFree,
    /// Sending a work transfer that completes at `until`. The transfer
    /// channel is busy: any steal request is refused until then.
    Transferring { until: Time },
}

/// Per-processor state.
///
/// Invariants maintained by the engines:
/// - `in_transit > 0` iff `status` is [`Status::Transferring`], and the
///   transfer completes exactly λ ticks after the division.
/// - `status == IdleAwaitingResponse` implies `work == 0` and exactly one
///   outstanding request.
/// - At most one transfer is in flight per processor at any time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessorState {
    /// Local work w_i, in unit tasks.
    pub work: u64,
    /// Work in transit FROM this processor (victim side), s_i.
    pub in_transit: u64,
    pub status: Status,
    /// Victim this processor currently has a steal request out to.
    pub outstanding_request_target: Option<ProcId>,
}

impl ProcessorState {
    pub fn idle() -> Self {
        Self {
            work: 0,
            in_transit: 0,
            status: Status::IdleFree,
            outstanding_request_target: None,
        }
    }

    pub fn with_work(work: u64) -> Self {
        Self {
            work,
            in_transit: 0,
            status: if work > 0 { Status::Working } else { Status::IdleFree },
            outstanding_request_target: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    StealRequest,
    WorkTransfer { amount: u64 },
    FailResponse,
}

/// A message in flight. Every message arrives exactly λ ticks after it was
/// sent: `arrives_at == sent_at + λ`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub kind: MessageKind,
    pub src: ProcId,
    pub dst: ProcId,
    pub sent_at: Time,
    pub arrives_at: Time,
}

/// Outcome of one processed steal request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StealOutcome {
    Success,
    Fail,
}

/// One record per steal request processed by a victim (the optional
/// per-run trace export).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StealEvent {
    /// Tick at which the victim processed the request.
    pub t: Time,
    pub victim: ProcId,
    pub thief: ProcId,
    pub outcome: StealOutcome,
    /// Transferred amount; 0 on failure.
    pub amount: u64,
}

/// Everything observable about one run.
///
/// `r_series`, `phi_series` and `max_w_series` are indexed by the interval
/// index k and sampled at t = kλ (entry 0 is the initial state); they are
/// populated only when series recording is enabled. `tau` and
/// `r_until_tau` are always computed, online.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunTrace {
    /// C_max: the first tick at which Σw = Σs = 0 with no transfer in
    /// flight.
    pub makespan: Time,
    /// Steal requests emitted by thieves.
    pub steals_sent: u64,
    /// Requests answered with a work transfer.
    pub steals_success: u64,
    /// Requests answered with a fail response.
    pub steals_failed: u64,
    /// r_k: steal requests arriving in ((k−1)λ, kλ].
    pub r_series: Vec<u64>,
    /// φ(k) = Σ_i w_i(kλ)² + 2·s_i(kλ)².
    pub phi_series: Vec<u128>,
    /// max_i w_i(kλ); lets τ be recomputed from a recorded trace.
    pub max_w_series: Vec<u64>,
    /// τ: first interval index at which every processor holds ≤ 3λ work.
    pub tau: u64,
    /// R = Σ_{s=0}^{τ−1} r_s.
    pub r_until_tau: u64,
    /// Unit tasks executed; equals W at termination.
    pub executed_total: u64,
    /// Ticks at which Σw + Σs + executed ≠ W was observed (always 0).
    pub conservation_violations: u64,
    /// Interval boundaries at which φ increased (always 0).
    pub phi_violations: u64,
    /// Per-steal events; populated only when steal logging is enabled.
    pub steal_events: Vec<StealEvent>,
}

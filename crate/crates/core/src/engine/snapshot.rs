//! Frozen engine states, used by the Lemma-1 probe and the CLI's
//! `--snapshot-at` flag.
//!
//! A snapshot is the complete state at an interval boundary t = kλ:
//! processors, in-flight messages and the PRNG position. Restoring it and
//! stepping resumes the run exactly; replacing the stream gives an
//! independent continuation of the same frozen state.

use serde::{Deserialize, Serialize};

use rand_chacha::ChaCha8Rng;

use crate::model::{Message, MessageKind, ProcessorState, SimConfig, Time};

use super::core::{Core, SeriesRecorder};
use super::reference::ReferenceSim;

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Snapshot {
    pub version: u32,
    pub config: SimConfig,
    /// Interval index of the boundary this state was frozen at.
    pub k: u64,
    /// The boundary tick, kλ.
    pub time: Time,
    pub processors: Vec<ProcessorState>,
    /// Messages in flight, in arrival order. All arrive in (time, time+λ].
    pub in_flight: Vec<Message>,
    /// Word position of the ChaCha stream seeded from `config.seed`.
    pub rng_word_pos: u128,
    pub executed: u64,
    pub steals_sent: u64,
    pub steals_success: u64,
    pub steals_failed: u64,
    /// φ(k) of the frozen state.
    pub phi: u128,
}

impl Snapshot {
    pub(crate) fn capture(sim: &ReferenceSim, k: u64) -> Self {
        Self {
            version: SNAPSHOT_VERSION,
            config: sim.config().clone(),
            k,
            time: sim.now,
            processors: sim.core.procs.clone(),
            in_flight: sim.in_flight(),
            rng_word_pos: sim.core.rng.get_word_pos(),
            executed: sim.core.executed,
            steals_sent: sim.core.steals_sent,
            steals_success: sim.core.steals_success,
            steals_failed: sim.core.steals_failed,
            phi: sim.core.phi(),
        }
    }

    /// Steal requests still in flight. These are exactly the requests that
    /// will arrive during the next interval (everything in flight at a
    /// boundary was sent within the previous λ ticks).
    pub fn in_flight_requests(&self) -> u64 {
        self.in_flight
            .iter()
            .filter(|m| m.kind == MessageKind::StealRequest)
            .count() as u64
    }

    pub fn validate(&self) -> Result<(), SnapshotError> {
        if self.version != SNAPSHOT_VERSION {
            return Err(SnapshotError::Version {
                found: self.version,
                expected: SNAPSHOT_VERSION,
            });
        }
        if self.processors.len() != self.config.processors as usize {
            return Err(SnapshotError::Inconsistent(
                "processor count does not match config".into(),
            ));
        }
        if self.time != self.k * self.config.latency {
            return Err(SnapshotError::Inconsistent(
                "time is not the k-th interval boundary".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SnapshotError {
    #[error("snapshot version {found} not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("inconsistent snapshot: {0}")]
    Inconsistent(String),
}

impl Core {
    /// Rebuild engine internals from a frozen state with the given stream.
    pub(crate) fn resume(snapshot: &Snapshot, rng: ChaCha8Rng) -> Self {
        let opts = super::RunOptions::default();
        let mut core = Core::new(&snapshot.config, &opts, rng);
        core.procs = snapshot.processors.clone();
        core.total_w = core.procs.iter().map(|p| p.work).sum();
        core.total_s = core.procs.iter().map(|p| p.in_transit).sum();
        core.transfers_in_flight = snapshot
            .in_flight
            .iter()
            .filter(|m| matches!(m.kind, MessageKind::WorkTransfer { .. }))
            .count() as u32;
        core.executed = snapshot.executed;
        core.steals_sent = snapshot.steals_sent;
        core.steals_success = snapshot.steals_success;
        core.steals_failed = snapshot.steals_failed;
        core.recorder = SeriesRecorder::resume(snapshot.config.latency, snapshot.k + 1, snapshot.phi);
        core
    }
}

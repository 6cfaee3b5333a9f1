//! The literal tick-by-tick engine. One iteration per tick, messages kept
//! in a ring of λ+1 slots keyed by arrival tick.

use std::mem;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{Message, RunTrace, SimConfig, Time};

use super::core::{Core, Outbox};
use super::snapshot::Snapshot;
use super::RunOptions;

pub(crate) struct ReferenceSim {
    pub(crate) core: Core,
    config: SimConfig,
    ring: Vec<Vec<Message>>,
    pub(crate) now: Time,
    outbox: Outbox,
    scratch: Vec<Message>,
}

impl ReferenceSim {
    pub(crate) fn new(config: &SimConfig, opts: &RunOptions) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Self {
            core: Core::new(config, opts, rng),
            config: config.clone(),
            ring: vec![Vec::new(); config.latency as usize + 1],
            now: 0,
            outbox: Vec::new(),
            scratch: Vec::new(),
        }
    }

    /// Rebuild a simulator from a frozen boundary state. `rng` replaces
    /// the frozen stream (the probe substitutes fresh per-continuation
    /// streams; passing the snapshot's own position resumes the original
    /// run exactly).
    pub(crate) fn restore(snapshot: &Snapshot, rng: ChaCha8Rng) -> Self {
        let core = Core::resume(snapshot, rng);
        let mut ring = vec![Vec::new(); snapshot.config.latency as usize + 1];
        let modulus = ring.len() as u64;
        for msg in &snapshot.in_flight {
            debug_assert!(msg.arrives_at > snapshot.time);
            debug_assert!(msg.arrives_at <= snapshot.time + snapshot.config.latency);
            ring[(msg.arrives_at % modulus) as usize].push(msg.clone());
        }
        Self {
            core,
            config: snapshot.config.clone(),
            ring,
            now: snapshot.time,
            outbox: Vec::new(),
            scratch: Vec::new(),
        }
    }

    fn route_outbox(&mut self) {
        let modulus = self.ring.len() as u64;
        for msg in self.outbox.drain(..) {
            self.ring[(msg.arrives_at % modulus) as usize].push(msg);
        }
    }

    /// Advance one tick. Returns true if the run terminated at it.
    pub(crate) fn step(&mut self) -> bool {
        self.now += 1;
        let slot = (self.now % self.ring.len() as u64) as usize;
        mem::swap(&mut self.scratch, &mut self.ring[slot]);
        let terminated = self
            .core
            .process_tick(self.now, &mut self.scratch, &mut self.outbox);
        self.route_outbox();
        terminated
    }

    /// Run at most `ticks` further ticks (the probe's one-interval
    /// continuation); stops early on termination.
    pub(crate) fn run_ticks(&mut self, ticks: u64) {
        for _ in 0..ticks {
            if self.step() {
                break;
            }
        }
    }

    pub(crate) fn run(mut self, snapshot_at: Option<u64>) -> (RunTrace, Option<Snapshot>) {
        let mut snap = None;
        if self.core.start(&mut self.outbox) {
            if snapshot_at == Some(0) {
                snap = Some(Snapshot::capture(&self, 0));
            }
            self.core.finish(0);
            return (self.core.into_trace(0), snap);
        }
        self.route_outbox();
        if snapshot_at == Some(0) {
            snap = Some(Snapshot::capture(&self, 0));
        }
        loop {
            let terminated = self.step();
            if let Some(k) = snapshot_at {
                if snap.is_none() && self.now == k * self.core.lambda {
                    snap = Some(Snapshot::capture(&self, k));
                }
            }
            if terminated {
                let makespan = self.now;
                self.core.finish(makespan);
                return (self.core.into_trace(makespan), snap);
            }
        }
    }

    pub(crate) fn config(&self) -> &SimConfig {
        &self.config
    }

    /// In-flight messages in arrival-tick order (insertion order within a
    /// tick), as serialized into snapshots.
    pub(crate) fn in_flight(&self) -> Vec<Message> {
        let modulus = self.ring.len() as u64;
        let mut out = Vec::new();
        for a in self.now + 1..=self.now + self.core.lambda {
            for msg in &self.ring[(a % modulus) as usize] {
                debug_assert_eq!(msg.arrives_at, a);
                out.push(msg.clone());
            }
        }
        out
    }
}

/// Simulate with the tick-by-tick reference engine.
pub fn run_reference(config: &SimConfig, opts: &RunOptions) -> RunTrace {
    debug_assert!(config.validate().is_ok(), "engines require a validated config");
    ReferenceSim::new(config, opts).run(None).0
}

/// Reference run that also freezes the full engine state at interval
/// boundary `k` (t = kλ). The snapshot is `None` when the run terminates
/// before that boundary.
pub fn run_reference_with_snapshot(
    config: &SimConfig,
    opts: &RunOptions,
    snapshot_at: u64,
) -> (RunTrace, Option<Snapshot>) {
    debug_assert!(config.validate().is_ok(), "engines require a validated config");
    ReferenceSim::new(config, opts).run(Some(snapshot_at))
}

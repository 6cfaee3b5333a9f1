//! Event-driven engine. Jumps straight to the next message arrival or
//! work-exhaustion instant; the ticks in between are pure execution and
//! are applied in bulk.
//!
//! Everything observable — including the PRNG consumption order and the
//! per-interval series — matches the reference engine exactly: random
//! draws only ever happen at ticks with an arrival or a freshly exhausted
//! processor, and both are "active" ticks here; interval boundaries
//! skipped by a jump are reconstructed in closed form (busy processors
//! lose one unit per tick, in-transit amounts are constant).

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{Message, RunTrace, SimConfig, Time};

use super::core::{Core, Outbox};
use super::RunOptions;

pub(crate) struct EventSim {
    core: Core,
    arrivals: BTreeMap<Time, Vec<Message>>,
    now: Time,
    outbox: Outbox,
    scratch: Vec<Message>,
}

impl EventSim {
    pub(crate) fn new(config: &SimConfig, opts: &RunOptions) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Self {
            core: Core::new(config, opts, rng),
            arrivals: BTreeMap::new(),
            now: 0,
            outbox: Vec::new(),
            scratch: Vec::new(),
        }
    }

    fn route_outbox(&mut self) {
        for msg in self.outbox.drain(..) {
            self.arrivals.entry(msg.arrives_at).or_default().push(msg);
        }
    }

    fn next_active_tick(&self) -> Time {
        let next_arrival = self.arrivals.keys().next().copied();
        let next_exhaust = self
            .core
            .procs
            .iter()
            .filter(|pr| pr.work > 0)
            .map(|pr| self.now + pr.work)
            .min();
        match (next_arrival, next_exhaust) {
            (Some(a), Some(e)) => a.min(e),
            (Some(a), None) => a,
            (None, Some(e)) => e,
            (None, None) => unreachable!("non-terminated state with no pending event"),
        }
    }

    /// Apply `gap` ticks of pure execution and emit the interval-boundary
    /// samples that fall inside them.
    fn skip_quiet_ticks(&mut self, gap: u64) {
        let lambda = self.core.lambda;
        let mut k = self.core.recorder.next_boundary();
        while k * lambda <= self.now + gap {
            debug_assert!(k * lambda > self.now);
            let elapsed = k * lambda - self.now;
            let mut phi: u128 = 0;
            let mut max_w: u64 = 0;
            for pr in &self.core.procs {
                let w = if pr.work > 0 { pr.work - elapsed } else { 0 };
                let s = pr.in_transit as u128;
                phi += (w as u128) * (w as u128) + 2 * s * s;
                max_w = max_w.max(w);
            }
            self.core.recorder.sample(k, phi, max_w);
            k += 1;
        }
        let mut busy: u64 = 0;
        for pr in &mut self.core.procs {
            if pr.work > 0 {
                // No processor exhausts strictly inside the gap: the next
                // exhaustion instant bounds the jump.
                debug_assert!(pr.work > gap);
                pr.work -= gap;
                busy += 1;
            }
        }
        self.core.total_w -= gap * busy;
        self.core.executed += gap * busy;
    }

    pub(crate) fn run(mut self) -> RunTrace {
        if self.core.start(&mut self.outbox) {
            self.core.finish(0);
            return self.core.into_trace(0);
        }
        self.route_outbox();
        loop {
            let t_next = self.next_active_tick();
            let gap = t_next - self.now - 1;
            if gap > 0 {
                self.skip_quiet_ticks(gap);
            }
            self.now = t_next;
            if let Some(bucket) = self.arrivals.remove(&self.now) {
                self.scratch = bucket;
            }
            let terminated = self
                .core
                .process_tick(self.now, &mut self.scratch, &mut self.outbox);
            self.route_outbox();
            if terminated {
                let makespan = self.now;
                self.core.finish(makespan);
                return self.core.into_trace(makespan);
            }
        }
    }
}

/// Simulate with the event-driven engine. Produces a [`RunTrace`]
/// bit-identical to [`run_reference`](super::run_reference) for the same
/// config.
pub fn run_event(config: &SimConfig, opts: &RunOptions) -> RunTrace {
    debug_assert!(config.validate().is_ok(), "engines require a validated config");
    EventSim::new(config, opts).run()
}

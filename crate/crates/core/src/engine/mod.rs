//! The work-stealing protocol engines.
//!
//! Two engines share one implementation of the tick phases:
//! [`run_reference`] walks every tick, [`run_event`] jumps between message
//! arrivals and exhaustion instants. For one config they produce
//! bit-identical [`RunTrace`]s.

mod core;
mod event;
mod reference;
mod snapshot;

pub use event::run_event;
pub use reference::{run_reference, run_reference_with_snapshot};
pub use snapshot::{Snapshot, SnapshotError, SNAPSHOT_VERSION};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{EngineKind, RunTrace, SimConfig};

/// Per-run instrumentation switches. Series and steal-event recording are
/// off by default; τ, R-until-τ and the invariant checks always run.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Record `r_series`, `phi_series` and `max_w_series`.
    pub record_series: bool,
    /// Record one [`crate::model::StealEvent`] per processed request.
    pub record_steal_events: bool,
}

impl RunOptions {
    pub fn with_series() -> Self {
        Self {
            record_series: true,
            record_steal_events: false,
        }
    }

    pub fn full() -> Self {
        Self {
            record_series: true,
            record_steal_events: true,
        }
    }
}

/// Simulate one run with the engine selected in the config.
pub fn run(config: &SimConfig, opts: &RunOptions) -> RunTrace {
    match config.engine {
        EngineKind::Reference => run_reference(config, opts),
        EngineKind::Event => run_event(config, opts),
    }
}

/// One interval of continuation from a frozen boundary state, with the
/// given PRNG stream replacing the frozen one. Returns φ at the next
/// boundary (0 if the run terminates inside the interval).
pub(crate) fn continue_one_interval(snapshot: &Snapshot, rng: ChaCha8Rng) -> u128 {
    let mut sim = reference::ReferenceSim::restore(snapshot, rng);
    sim.run_ticks(snapshot.config.latency);
    sim.core.phi()
}

/// Resume the exact PRNG stream a snapshot was frozen with.
pub fn snapshot_rng(snapshot: &Snapshot) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(snapshot.config.seed);
    rng.set_word_pos(snapshot.rng_word_pos);
    rng
}

/// How a victim splits its work when it accepts a steal at tick t.
///
/// `victim_keep = ⌈(w−1+λ)/2⌉` counts the unit the victim executes at t;
/// `transfer = (w−1) − victim_keep` travels to the thief. The parity rule
/// rounds in the victim's favor, so `victim_keep + transfer = w − 1`
/// exactly and `transfer ≤ victim_keep − λ + 1`. A `transfer < 1` tells
/// the caller to refuse the steal (the victim is below the threshold
/// w ≥ λ + 3).
///
/// ```
/// use ws_sim_core::{divide_work, WorkDivision};
///
/// assert_eq!(divide_work(101, 10), WorkDivision { victim_keep: 55, transfer: 45 });
/// assert!(divide_work(12, 10).transfer < 1); // below threshold: refuse
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorkDivision {
    pub victim_keep: u64,
    pub transfer: i64,
}

pub fn divide_work(w_before: u64, lambda: u64) -> WorkDivision {
    debug_assert!(w_before >= 1);
    let after_exec = (w_before - 1) as i128;
    let keep = (after_exec + lambda as i128 + 1).div_euclid(2);
    WorkDivision {
        victim_keep: keep as u64,
        transfer: (after_exec - keep) as i64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SimConfig;

    #[test]
    fn divide_work_examples() {
        assert_eq!(
            divide_work(101, 10),
            WorkDivision { victim_keep: 55, transfer: 45 }
        );
        assert_eq!(
            divide_work(4, 1),
            WorkDivision { victim_keep: 2, transfer: 1 }
        );
        // odd numerator: the victim takes the ceiling, 6 + 3 = 10 − 1
        assert_eq!(
            divide_work(10, 2),
            WorkDivision { victim_keep: 6, transfer: 3 }
        );
    }

    #[test]
    fn divide_work_threshold_boundary() {
        for lambda in [1u64, 2, 5, 17, 262] {
            // w = λ+3 is the smallest accepted victim load
            assert_eq!(divide_work(lambda + 3, lambda).transfer, 1);
            assert!(divide_work(lambda + 2, lambda).transfer < 1);
            assert!(divide_work(1, lambda).transfer < 1);
        }
    }

    #[test]
    fn divide_work_conservation_and_balance() {
        for lambda in [1u64, 2, 7, 33] {
            for w in 1..500u64 {
                let d = divide_work(w, lambda);
                assert_eq!(d.victim_keep as i64 + d.transfer, w as i64 - 1);
                assert!(d.transfer <= d.victim_keep as i64 - lambda as i64 + 1);
                // when w−1−λ is even the split is exact: the victim ends
                // the transfer with exactly the transferred amount left
                if d.transfer >= 1 && (w - 1 - lambda) % 2 == 0 {
                    assert_eq!(d.victim_keep as i64 - lambda as i64, d.transfer);
                }
            }
        }
    }

    #[test]
    fn hand_trace_w4_p2_l1() {
        // request sent at t=0 arrives t=1; division keeps 2, transfers 1
        // arriving t=2; both processors drain by t=3
        let cfg = SimConfig::new(4, 2, 1, 1);
        for trace in [
            run_reference(&cfg, &RunOptions::full()),
            run_event(&cfg, &RunOptions::full()),
        ] {
            assert_eq!(trace.makespan, 3);
            assert_eq!(trace.steals_sent, 1);
            assert_eq!(trace.steals_success, 1);
            assert_eq!(trace.steals_failed, 0);
            assert_eq!(trace.executed_total, 4);
        }
    }

    #[test]
    fn hand_trace_w2_p2_l1() {
        // the only request finds w=2 < λ+3 and fails; P0 finishes alone
        let cfg = SimConfig::new(2, 2, 1, 1);
        let trace = run_reference(&cfg, &RunOptions::default());
        assert_eq!(trace.makespan, 2);
        assert_eq!(trace.steals_sent, 1);
        assert_eq!(trace.steals_success, 0);
        assert_eq!(trace.steals_failed, 1);
    }

    #[test]
    fn single_processor_never_steals() {
        let cfg = SimConfig::new(1000, 1, 7, 1);
        let trace = run_reference(&cfg, &RunOptions::with_series());
        assert_eq!(trace.makespan, 1000);
        assert_eq!(trace.steals_sent, 0);
        assert_eq!(trace.executed_total, 1000);
        // φ(k) = (W − kλ)² until exhaustion
        for (k, &phi) in trace.phi_series.iter().enumerate() {
            let w = 1000i128 - 7 * k as i128;
            let w = w.max(0) as u128;
            assert_eq!(phi, w * w);
        }
    }

    #[test]
    fn empty_workload_terminates_at_zero() {
        let cfg = SimConfig::new(0, 8, 5, 3);
        for trace in [
            run_reference(&cfg, &RunOptions::with_series()),
            run_event(&cfg, &RunOptions::with_series()),
        ] {
            assert_eq!(trace.makespan, 0);
            assert_eq!(trace.steals_sent, 0);
            assert_eq!(trace.phi_series, vec![0]);
            assert_eq!(trace.tau, 0);
        }
    }

    #[test]
    fn engines_bit_identical_spot() {
        let mut cfg = SimConfig::new(100_000, 32, 262, 99);
        cfg.engine = EngineKind::Reference;
        let a = run(&cfg, &RunOptions::full());
        cfg.engine = EngineKind::Event;
        let b = run(&cfg, &RunOptions::full());
        assert_eq!(a, b);
        assert_eq!(a.conservation_violations, 0);
        assert_eq!(a.phi_violations, 0);
    }

    #[test]
    fn no_transfer_below_one_unit() {
        let cfg = SimConfig::new(3000, 8, 11, 5);
        let trace = run_event(&cfg, &RunOptions::full());
        for ev in &trace.steal_events {
            match ev.outcome {
                crate::model::StealOutcome::Success => assert!(ev.amount >= 1),
                crate::model::StealOutcome::Fail => assert_eq!(ev.amount, 0),
            }
        }
        assert_eq!(
            trace.steal_events.len() as u64,
            trace.steals_success + trace.steals_failed
        );
    }

    #[test]
    fn snapshot_resume_reproduces_run() {
        let cfg = SimConfig::new(5000, 4, 9, 21);
        let (full, snap) = run_reference_with_snapshot(&cfg, &RunOptions::default(), 3);
        let snap = snap.expect("boundary 3 is reached");
        assert!(snap.validate().is_ok());
        let mut resumed = super::reference::ReferenceSim::restore(&snap, snapshot_rng(&snap));
        loop {
            if resumed.step() {
                break;
            }
        }
        assert_eq!(resumed.now, full.makespan);
        assert_eq!(resumed.core.steals_sent, full.steals_sent);
        assert_eq!(resumed.core.steals_success, full.steals_success);
        assert_eq!(resumed.core.executed, full.executed_total);
    }

    fn restore_probe_state(
        procs: Vec<crate::model::ProcessorState>,
        in_flight: Vec<crate::model::Message>,
        total_work: u64,
        executed: u64,
    ) -> super::reference::ReferenceSim {
        use crate::model::ProcessorState;
        let w_sum: u64 = procs.iter().map(|p| p.work).sum();
        let s_sum: u64 = procs.iter().map(|p| p.in_transit).sum();
        assert_eq!(w_sum + s_sum + executed, total_work);
        let config = SimConfig::new(total_work, procs.len() as u32, 5, 3);
        let phi = procs
            .iter()
            .map(|p: &ProcessorState| {
                (p.work as u128).pow(2) + 2 * (p.in_transit as u128).pow(2)
            })
            .sum();
        let snap = Snapshot {
            version: SNAPSHOT_VERSION,
            config,
            k: 2,
            time: 10,
            processors: procs,
            in_flight,
            rng_word_pos: 0,
            executed,
            steals_sent: 0,
            steals_success: 0,
            steals_failed: 0,
            phi,
        };
        super::reference::ReferenceSim::restore(&snap, snapshot_rng(&snap))
    }

    /// A victim whose outgoing transfer is delivered at tick t may accept
    /// a steal request arriving at the same t: the channel is free again.
    #[test]
    fn victim_channel_frees_on_delivery_tick() {
        use crate::model::{Message, MessageKind, ProcessorState, Status};
        let procs = vec![
            ProcessorState {
                work: 100,
                in_transit: 40,
                status: Status::Transferring { until: 12 },
                outstanding_request_target: None,
            },
            ProcessorState {
                work: 0,
                in_transit: 0,
                status: Status::IdleAwaitingResponse,
                outstanding_request_target: Some(0),
            },
            ProcessorState {
                work: 0,
                in_transit: 0,
                status: Status::IdleAwaitingResponse,
                outstanding_request_target: Some(0),
            },
        ];
        let in_flight = vec![
            Message {
                kind: MessageKind::WorkTransfer { amount: 40 },
                src: 0,
                dst: 1,
                sent_at: 7,
                arrives_at: 12,
            },
            Message {
                kind: MessageKind::StealRequest,
                src: 2,
                dst: 0,
                sent_at: 7,
                arrives_at: 12,
            },
        ];
        let mut sim = restore_probe_state(procs, in_flight, 140, 0);
        sim.run_ticks(2); // ticks 11 and 12
        // tick 11: victim executes (99); tick 12: transfer delivered, new
        // request accepted with w_before = 99 → keep 52, send 46
        assert_eq!(sim.core.steals_success, 1);
        assert_eq!(sim.core.procs[0].work, 52);
        assert_eq!(sim.core.procs[0].in_transit, 46);
        assert_eq!(
            sim.core.procs[0].status,
            crate::model::Status::Transferring { until: 17 }
        );
        // the thief's work lands the same tick the channel frees
        assert_eq!(sim.core.procs[1].work, 40);
        assert_eq!(sim.core.procs[1].status, crate::model::Status::Working);
    }

    /// A thief whose stolen work arrives at tick t still holds w = 0 in
    /// the steal phase, so a request reaching it that tick fails.
    #[test]
    fn arriving_work_cannot_be_stolen_same_tick() {
        use crate::model::{Message, MessageKind, ProcessorState, Status};
        let procs = vec![
            ProcessorState {
                work: 100,
                in_transit: 40,
                status: Status::Transferring { until: 12 },
                outstanding_request_target: None,
            },
            ProcessorState {
                work: 0,
                in_transit: 0,
                status: Status::IdleAwaitingResponse,
                outstanding_request_target: Some(0),
            },
            ProcessorState {
                work: 0,
                in_transit: 0,
                status: Status::IdleAwaitingResponse,
                outstanding_request_target: Some(1),
            },
        ];
        let in_flight = vec![
            Message {
                kind: MessageKind::WorkTransfer { amount: 40 },
                src: 0,
                dst: 1,
                sent_at: 7,
                arrives_at: 12,
            },
            Message {
                kind: MessageKind::StealRequest,
                src: 2,
                dst: 1,
                sent_at: 7,
                arrives_at: 12,
            },
        ];
        let mut sim = restore_probe_state(procs, in_flight, 140, 0);
        sim.run_ticks(2);
        // the request at the arriving thief fails; its 40 units land in
        // phase D untouched
        assert_eq!(sim.core.steals_failed, 1);
        assert_eq!(sim.core.steals_success, 0);
        assert_eq!(sim.core.procs[1].work, 40);
    }

    #[test]
    fn snapshot_resume_agrees_for_various_boundaries() {
        for (w, p, lambda, seed, k) in
            [(5000u64, 4u32, 9u64, 21u64, 7u64), (900, 2, 30, 5, 1), (2500, 8, 3, 0, 40)]
        {
            let cfg = SimConfig::new(w, p, lambda, seed);
            let (full, snap) = run_reference_with_snapshot(&cfg, &RunOptions::default(), k);
            let Some(snap) = snap else { continue };
            let mut resumed = super::reference::ReferenceSim::restore(&snap, snapshot_rng(&snap));
            while !resumed.step() {}
            assert_eq!(resumed.now, full.makespan, "config {w} {p} {lambda} {seed} k={k}");
            assert_eq!(resumed.core.steals_sent, full.steals_sent);
            assert_eq!(resumed.core.executed, full.executed_total);
        }
    }

    #[test]
    fn snapshot_json_round_trip() {
        let cfg = SimConfig::new(400, 3, 6, 7);
        let (_, snap) = run_reference_with_snapshot(&cfg, &RunOptions::default(), 2);
        let snap = snap.unwrap();
        let text = serde_json::to_string(&snap).unwrap();
        let back: Snapshot = serde_json::from_str(&text).unwrap();
        assert_eq!(snap, back);
    }
}

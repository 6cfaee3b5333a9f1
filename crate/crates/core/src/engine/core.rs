//! Tick-phase machinery shared by the reference and event engines.
//!
//! Both engines process a tick through the same fixed phase order:
//!
//!   A. deliver every message with `arrives_at == t`
//!   B. steal processing: each non-transferring processor with arrivals
//!      elects one request (uniform among this tick's arrivals, a PRNG
//!      draw only when two or more arrived), accepts it iff the division
//!      yields a transfer ≥ 1 (equivalently w ≥ λ+3), fails the rest
//!   C. execution: one unit on every processor with work, except a victim
//!      whose division in B already embeds this tick's unit
//!   D. transfer completion: a transfer delivered in A sets the thief's w
//!   E. request emission: every idle processor without an outstanding
//!      request picks a victim uniformly among the other p−1 and sends a
//!      steal request arriving at t+λ
//!
//! Termination is checked between D and E, so no requests are emitted at
//! the makespan tick. The engines differ only in which ticks they visit;
//! PRNG draws happen exclusively in B (elections, ascending victim id) and
//! E (victim choices, ascending thief id), which is what makes the two
//! engines consume the stream in the same order.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::model::{
    Message, MessageKind, ProcId, ProcessorState, SimConfig, Status, StealEvent, StealOutcome,
    Time,
};

use super::{divide_work, RunOptions};

/// Potential/interval bookkeeping, sampled at every boundary t = kλ.
///
/// The recorder only ever sees the `(k, φ, max_w)` triples handed to it;
/// it never reads live engine state. The event engine exploits this to
/// feed interpolated samples for boundaries it jumps over.
pub(crate) struct SeriesRecorder {
    lambda: u64,
    store: bool,
    pub r_series: Vec<u64>,
    pub phi_series: Vec<u128>,
    pub max_w_series: Vec<u64>,
    interval_arrivals: u64,
    cum_r: u64,
    pub tau: Option<u64>,
    pub r_until_tau: u64,
    prev_phi: u128,
    pub phi_violations: u64,
    next_k: u64,
}

impl SeriesRecorder {
    fn new(lambda: u64, store: bool) -> Self {
        Self {
            lambda,
            store,
            r_series: Vec::new(),
            phi_series: Vec::new(),
            max_w_series: Vec::new(),
            interval_arrivals: 0,
            cum_r: 0,
            tau: None,
            r_until_tau: 0,
            prev_phi: 0,
            phi_violations: 0,
            next_k: 0,
        }
    }

    /// Recorder for a simulator resumed from a boundary-k snapshot: the
    /// next sample is k+1 and series storage stays off (continuations only
    /// need φ and termination bookkeeping).
    pub(crate) fn resume(lambda: u64, next_k: u64, prev_phi: u128) -> Self {
        let mut rec = Self::new(lambda, false);
        rec.next_k = next_k;
        rec.prev_phi = prev_phi;
        rec
    }

    fn on_request_arrival(&mut self) {
        self.interval_arrivals += 1;
    }

    /// Record the boundary sample for interval k. Must be called for
    /// k = 0, 1, 2, ... in order, exactly once each.
    pub(crate) fn sample(&mut self, k: u64, phi: u128, max_w: u64) {
        debug_assert_eq!(k, self.next_k, "boundary samples must be consecutive");
        self.next_k = k + 1;
        let r_k = self.interval_arrivals;
        self.interval_arrivals = 0;
        if self.store {
            self.r_series.push(r_k);
            self.phi_series.push(phi);
            self.max_w_series.push(max_w);
        }
        if k > 0 && phi > self.prev_phi {
            self.phi_violations += 1;
        }
        self.prev_phi = phi;
        // R counts requests of intervals strictly before τ.
        if self.tau.is_none() && max_w <= 3 * self.lambda {
            self.tau = Some(k);
            self.r_until_tau = self.cum_r;
        }
        self.cum_r += r_k;
    }

    pub(crate) fn next_boundary(&self) -> u64 {
        self.next_k
    }
}

/// Messages a tick wants to send; the engine owning the transport routes
/// them after the tick completes.
pub(crate) type Outbox = Vec<Message>;

pub(crate) struct Core {
    pub p: u32,
    pub lambda: u64,
    pub total_work: u64,
    pub rng: ChaCha8Rng,
    pub procs: Vec<ProcessorState>,
    pub executed: u64,
    pub total_w: u64,
    pub total_s: u64,
    pub transfers_in_flight: u32,
    pub steals_sent: u64,
    pub steals_success: u64,
    pub steals_failed: u64,
    pub recorder: SeriesRecorder,
    pub conservation_violations: u64,
    record_steals: bool,
    pub steal_events: Vec<StealEvent>,
    // per-tick scratch, reused across ticks
    incoming: Vec<Vec<ProcId>>,
    touched: Vec<ProcId>,
    pending_transfers: Vec<(ProcId, u64)>,
    divided_this_tick: Vec<bool>,
}

impl Core {
    pub(crate) fn new(config: &SimConfig, opts: &RunOptions, rng: ChaCha8Rng) -> Self {
        let p = config.processors;
        let mut procs = vec![ProcessorState::idle(); p as usize];
        procs[0] = ProcessorState::with_work(config.total_work);
        Self {
            p,
            lambda: config.latency,
            total_work: config.total_work,
            rng,
            procs,
            executed: 0,
            total_w: config.total_work,
            total_s: 0,
            transfers_in_flight: 0,
            steals_sent: 0,
            steals_success: 0,
            steals_failed: 0,
            recorder: SeriesRecorder::new(config.latency, opts.record_series),
            conservation_violations: 0,
            record_steals: opts.record_steal_events,
            steal_events: Vec::new(),
            incoming: vec![Vec::new(); p as usize],
            touched: Vec::new(),
            pending_transfers: Vec::new(),
            divided_this_tick: vec![false; p as usize],
        }
    }

    pub(crate) fn terminated(&self) -> bool {
        self.total_w == 0 && self.total_s == 0 && self.transfers_in_flight == 0
    }

    pub(crate) fn phi(&self) -> u128 {
        self.procs
            .iter()
            .map(|pr| {
                let w = pr.work as u128;
                let s = pr.in_transit as u128;
                w * w + 2 * s * s
            })
            .sum()
    }

    pub(crate) fn max_w(&self) -> u64 {
        self.procs.iter().map(|pr| pr.work).max().unwrap_or(0)
    }

    fn choose_victim(&mut self, thief: ProcId) -> ProcId {
        let v = self.rng.gen_range(0..self.p - 1);
        if v >= thief {
            v + 1
        } else {
            v
        }
    }

    /// Phase E for one processor (also used for the t = 0 emissions).
    fn maybe_emit(&mut self, id: ProcId, t: Time, outbox: &mut Outbox) {
        {
            let pr = &self.procs[id as usize];
            if pr.work != 0 || pr.in_transit != 0 || pr.outstanding_request_target.is_some() {
                return;
            }
        }
        if self.p < 2 {
            return;
        }
        let victim = self.choose_victim(id);
        outbox.push(Message {
            kind: MessageKind::StealRequest,
            src: id,
            dst: victim,
            sent_at: t,
            arrives_at: t + self.lambda,
        });
        self.steals_sent += 1;
        let pr = &mut self.procs[id as usize];
        pr.outstanding_request_target = Some(victim);
        pr.status = Status::IdleAwaitingResponse;
    }

    /// Initial state: the boundary-0 sample, then the first requests from
    /// processors 1..p (sent at t = 0, arriving at λ). Returns true if the
    /// run is already over (W = 0).
    pub(crate) fn start(&mut self, outbox: &mut Outbox) -> bool {
        let (phi, max_w) = (self.phi(), self.max_w());
        self.recorder.sample(0, phi, max_w);
        if self.terminated() {
            return true;
        }
        for id in 0..self.p {
            self.maybe_emit(id, 0, outbox);
        }
        false
    }

    /// Run the full phase order for tick `t` with the given arrivals.
    /// Returns true if the run terminated at `t`.
    pub(crate) fn process_tick(
        &mut self,
        t: Time,
        arrivals: &mut Vec<Message>,
        outbox: &mut Outbox,
    ) -> bool {
        let lambda = self.lambda;

        // Phase A: deliveries.
        let mut requests_this_tick: u32 = 0;
        for msg in arrivals.drain(..) {
            debug_assert_eq!(msg.arrives_at, t);
            debug_assert_eq!(msg.arrives_at, msg.sent_at + lambda);
            match msg.kind {
                MessageKind::StealRequest => {
                    // one outstanding request per idle processor, so at
                    // most p−1 can land in one tick
                    requests_this_tick += 1;
                    debug_assert!(requests_this_tick < self.p);
                    self.recorder.on_request_arrival();
                    let dst = msg.dst as usize;
                    if self.incoming[dst].is_empty() {
                        self.touched.push(msg.dst);
                    }
                    self.incoming[dst].push(msg.src);
                }
                MessageKind::WorkTransfer { amount } => {
                    // The thief's work is set in phase D; the victim's
                    // channel frees up now, so it may accept again in B.
                    self.pending_transfers.push((msg.dst, amount));
                    {
                        let victim = &mut self.procs[msg.src as usize];
                        debug_assert_eq!(victim.in_transit, amount);
                        debug_assert!(
                            matches!(victim.status, Status::Transferring { until } if until == t)
                        );
                        victim.in_transit = 0;
                        victim.status = Status::Working;
                    }
                    self.total_s -= amount;
                    self.transfers_in_flight -= 1;
                }
                MessageKind::FailResponse => {
                    let thief = &mut self.procs[msg.dst as usize];
                    // one outstanding request per thief, so the response
                    // always finds it idle and waiting
                    debug_assert_eq!(thief.work, 0);
                    debug_assert_eq!(thief.status, Status::IdleAwaitingResponse);
                    thief.outstanding_request_target = None;
                    thief.status = Status::IdleFree;
                }
            }
        }

        // Phase B: steal processing, victims in ascending id order.
        self.touched.sort_unstable();
        let touched = std::mem::take(&mut self.touched);
        for &dst in &touched {
            let thieves = std::mem::take(&mut self.incoming[dst as usize]);
            if matches!(self.procs[dst as usize].status, Status::Transferring { .. }) {
                // Busy channel: fail everyone, no election.
                for &thief in &thieves {
                    self.reply_fail(dst, thief, t, outbox);
                }
            } else {
                let elected = if thieves.len() == 1 {
                    0
                } else {
                    self.rng.gen_range(0..thieves.len())
                };
                let w_before = self.procs[dst as usize].work;
                // an idle victim (w = 0) has nothing to divide
                let division = if w_before >= 1 {
                    Some(divide_work(w_before, lambda))
                } else {
                    None
                };
                if let Some(division) = division.filter(|d| d.transfer >= 1) {
                    let amount = division.transfer as u64;
                    {
                        let victim = &mut self.procs[dst as usize];
                        // Division embeds this tick's executed unit (the −1).
                        victim.work = division.victim_keep;
                        victim.in_transit = amount;
                        victim.status = Status::Transferring { until: t + lambda };
                    }
                    self.total_w -= w_before - division.victim_keep;
                    self.total_s += amount;
                    self.executed += 1;
                    self.transfers_in_flight += 1;
                    self.divided_this_tick[dst as usize] = true;
                    self.steals_success += 1;
                    for (i, &thief) in thieves.iter().enumerate() {
                        if i == elected {
                            outbox.push(Message {
                                kind: MessageKind::WorkTransfer { amount },
                                src: dst,
                                dst: thief,
                                sent_at: t,
                                arrives_at: t + lambda,
                            });
                            if self.record_steals {
                                self.steal_events.push(StealEvent {
                                    t,
                                    victim: dst,
                                    thief,
                                    outcome: StealOutcome::Success,
                                    amount,
                                });
                            }
                        } else {
                            self.reply_fail(dst, thief, t, outbox);
                        }
                    }
                } else {
                    // Too little work: below the steal threshold.
                    for &thief in &thieves {
                        self.reply_fail(dst, thief, t, outbox);
                    }
                }
            }
            let mut thieves = thieves;
            thieves.clear();
            self.incoming[dst as usize] = thieves;
        }
        let mut touched = touched;
        touched.clear();
        self.touched = touched;

        // Phase C: execution.
        for i in 0..self.procs.len() {
            if self.divided_this_tick[i] {
                self.divided_this_tick[i] = false;
                continue;
            }
            let pr = &mut self.procs[i];
            if pr.work > 0 {
                pr.work -= 1;
                self.total_w -= 1;
                self.executed += 1;
            }
        }

        // Phase D: transfer completion on the thief side.
        for (dst, amount) in self.pending_transfers.drain(..) {
            {
                let thief = &mut self.procs[dst as usize];
                debug_assert_eq!(thief.work, 0);
                thief.work = amount;
                thief.status = Status::Working;
                thief.outstanding_request_target = None;
            }
            self.total_w += amount;
        }

        let terminated = self.terminated();

        // Phase E: emissions (skipped once the run is over).
        if !terminated {
            for id in 0..self.p {
                self.maybe_emit(id, t, outbox);
            }
        }

        self.check_conservation();
        if t.is_multiple_of(lambda) {
            let (phi, max_w) = (self.phi(), self.max_w());
            self.recorder.sample(t / lambda, phi, max_w);
        }
        terminated
    }

    fn reply_fail(&mut self, victim: ProcId, thief: ProcId, t: Time, outbox: &mut Outbox) {
        outbox.push(Message {
            kind: MessageKind::FailResponse,
            src: victim,
            dst: thief,
            sent_at: t,
            arrives_at: t + self.lambda,
        });
        self.steals_failed += 1;
        if self.record_steals {
            self.steal_events.push(StealEvent {
                t,
                victim,
                thief,
                outcome: StealOutcome::Fail,
                amount: 0,
            });
        }
    }

    /// Σw + Σs + executed must equal W at the end of every processed tick.
    /// Recomputed from the processor states, not from the running totals.
    pub(crate) fn check_conservation(&mut self) {
        let w: u64 = self.procs.iter().map(|pr| pr.work).sum();
        let s: u64 = self.procs.iter().map(|pr| pr.in_transit).sum();
        if w != self.total_w || s != self.total_s || w + s + self.executed != self.total_work {
            self.conservation_violations += 1;
            debug_assert!(
                false,
                "conservation violated: w={w} s={s} executed={}",
                self.executed
            );
        }
    }

    /// Boundary sample for a terminal state whose makespan is not a
    /// multiple of λ (the partial last interval).
    pub(crate) fn finish(&mut self, makespan: Time) {
        if !makespan.is_multiple_of(self.lambda) {
            let k = makespan.div_ceil(self.lambda);
            let (phi, max_w) = (self.phi(), self.max_w());
            self.recorder.sample(k, phi, max_w);
        }
    }

    pub(crate) fn into_trace(self, makespan: Time) -> crate::model::RunTrace {
        crate::model::RunTrace {
            makespan,
            steals_sent: self.steals_sent,
            steals_success: self.steals_success,
            steals_failed: self.steals_failed,
            r_series: self.recorder.r_series,
            phi_series: self.recorder.phi_series,
            max_w_series: self.recorder.max_w_series,
            tau: self
                .recorder
                .tau
                .expect("terminal state has all w = 0 ≤ 3λ, so τ is always set"),
            r_until_tau: self.recorder.r_until_tau,
            executed_total: self.executed,
            conservation_violations: self.conservation_violations,
            phi_violations: self.recorder.phi_violations,
            steal_events: self.steal_events,
        }
    }
}

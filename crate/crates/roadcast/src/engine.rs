//! Discrete-event engine: simulation clock, event queue, cancellation
//! tickets, and seeded random-number streams.
//!
//! Events are processed in strict `(time, seq)` order, where `seq` is a
//! monotone sequence number assigned at scheduling time. Two events at the
//! same instant therefore fire in the order they were scheduled, which makes
//! whole runs reproducible from a seed alone.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::protocols::{Packet, PacketId};
use crate::NodeId;

/// Simulation time in seconds. Comparisons are exact; no tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimTime(f64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0.0);

    /// A time value must be finite and non-negative.
    ///
    /// # Panics
    /// Panics on negative or non-finite input.
    pub fn from_secs(secs: f64) -> SimTime {
        assert!(
            secs.is_finite() && secs >= 0.0,
            "SimTime must be finite and non-negative, got {secs}"
        );
        SimTime(secs)
    }

    pub fn secs(self) -> f64 {
        self.0
    }

    /// This time plus `delta` seconds. `delta` must not push the result
    /// below zero.
    pub fn offset(self, delta: f64) -> SimTime {
        SimTime::from_secs(self.0 + delta)
    }
}

impl Eq for SimTime {}

impl Ord for SimTime {
    fn cmp(&self, other: &Self) -> Ordering {
        // Values are always finite, so total_cmp agrees with the usual order.
        self.0.total_cmp(&other.0)
    }
}

impl PartialOrd for SimTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// What happened. Payloads carry exactly what the handler needs.
#[derive(Debug, Clone)]
pub enum EventKind {
    /// A node starts transmitting a packet.
    TxStart { node: NodeId, packet: Packet },
    /// A transmission leaves the air.
    TxEnd { node: NodeId, packet_id: PacketId },
    /// A frame arrives at a node.
    Rx { node: NodeId, packet: Packet },
    /// A protocol defer timer fires.
    TimerExpiry { node: NodeId, packet_id: PacketId },
    /// Advance vehicle positions by one mobility step.
    MobilityTick,
    /// The traffic source originates its next packet.
    TrafficSource { seq: u32 },
}

impl EventKind {
    fn name(&self) -> &'static str {
        match self {
            EventKind::TxStart { .. } => "TxStart",
            EventKind::TxEnd { .. } => "TxEnd",
            EventKind::Rx { .. } => "Rx",
            EventKind::TimerExpiry { .. } => "TimerExpiry",
            EventKind::MobilityTick => "MobilityTick",
            EventKind::TrafficSource { .. } => "TrafficSource",
        }
    }

    fn payload_summary(&self) -> String {
        match self {
            EventKind::TxStart { node, packet } => {
                format!("node={} packet={} from={}", node, packet.id, packet.hop_sender)
            }
            EventKind::TxEnd { node, packet_id } => {
                format!("node={node} packet={packet_id}")
            }
            EventKind::Rx { node, packet } => {
                format!("node={} packet={} from={}", node, packet.id, packet.hop_sender)
            }
            EventKind::TimerExpiry { node, packet_id } => {
                format!("node={node} packet={packet_id}")
            }
            EventKind::MobilityTick => String::new(),
            EventKind::TrafficSource { seq } => format!("seq={seq}"),
        }
    }
}

/// A timestamped occurrence. Ordering is a strict total order by
/// `(time, seq)`; `seq` is unique per run.
#[derive(Debug, Clone)]
pub struct Event {
    pub time: SimTime,
    pub seq: u64,
    pub kind: EventKind,
}

impl Event {
    /// One tab-separated trace line: `time<TAB>seq<TAB>kind<TAB>payload`.
    pub fn trace_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}",
            self.time,
            self.seq,
            self.kind.name(),
            self.kind.payload_summary()
        )
    }
}

/// Handle for cancelling a scheduled event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Ticket(u64);

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("cannot schedule event at {at} before current clock {clock}")]
    SchedulingInPast { at: SimTime, clock: SimTime },
}

struct HeapEntry(Event);

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.0.seq == other.0.seq
    }
}
impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed so the BinaryHeap pops the earliest (time, seq) first.
        (other.0.time, other.0.seq).cmp(&(self.0.time, self.0.seq))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Pending-event queue plus the simulation clock.
#[derive(Default)]
pub struct EventQueue {
    clock: SimTime,
    next_seq: u64,
    heap: BinaryHeap<HeapEntry>,
    /// Seqs of events that are scheduled and not yet fired or cancelled.
    /// Cancelled events stay in the heap as tombstones and are skipped.
    live: HashSet<u64>,
}

impl EventQueue {
    pub fn new() -> EventQueue {
        EventQueue::default()
    }

    pub fn clock(&self) -> SimTime {
        self.clock
    }

    pub fn pending(&self) -> usize {
        self.live.len()
    }

    /// Enqueue `kind` at `time`. Scheduling at exactly the current clock is
    /// allowed; the event fires after everything already scheduled for that
    /// instant.
    pub fn schedule(&mut self, time: SimTime, kind: EventKind) -> Result<Ticket, EngineError> {
        if time < self.clock {
            return Err(EngineError::SchedulingInPast {
                at: time,
                clock: self.clock,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.live.insert(seq);
        self.heap.push(HeapEntry(Event { time, seq, kind }));
        Ok(Ticket(seq))
    }

    /// Remove a pending event. Returns false if it already fired or was
    /// already cancelled; cancelling twice is harmless.
    pub fn cancel(&mut self, ticket: Ticket) -> bool {
        self.live.remove(&ticket.0)
    }

    fn pop_due(&mut self, t_end: SimTime) -> Option<Event> {
        while let Some(entry) = self.heap.peek() {
            if entry.0.time > t_end {
                return None;
            }
            let ev = self.heap.pop().expect("peeked entry").0;
            if self.live.remove(&ev.seq) {
                debug_assert!(ev.time >= self.clock);
                self.clock = ev.time;
                return Some(ev);
            }
            // Tombstone of a cancelled event; skip.
        }
        None
    }

    /// Process every event with `time <= t_end` in `(time, seq)` order,
    /// invoking `handler` for each. The handler may schedule and cancel
    /// further events. Returns the number of events processed; the clock
    /// ends at exactly `t_end`.
    pub fn run_until(
        &mut self,
        t_end: SimTime,
        mut handler: impl FnMut(&mut EventQueue, Event),
    ) -> u64 {
        assert!(t_end >= self.clock, "run_until target is in the past");
        let mut processed = 0;
        while let Some(ev) = self.pop_due(t_end) {
            handler(self, ev);
            processed += 1;
        }
        self.clock = t_end;
        processed
    }
}

/// Named, seed-derived random streams. Each consumer (mobility, medium,
/// wpbm) gets its own substream so adding draws to one never perturbs the
/// others.
#[derive(Debug, Clone, Copy)]
pub struct RngHub {
    seed: u64,
}

impl RngHub {
    pub fn new(seed: u64) -> RngHub {
        RngHub { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Substream for `label`. Identical (seed, label) yields an identical
    /// draw sequence on every platform.
    pub fn stream(&self, label: &str) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ fnv1a(label))
    }
}

fn fnv1a(s: &str) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for b in s.as_bytes() {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tick() -> EventKind {
        EventKind::MobilityTick
    }

    #[test]
    fn schedule_at_current_clock_is_accepted() {
        let mut q = EventQueue::new();
        q.run_until(SimTime::from_secs(5.0), |_, _| {});
        assert!(q.schedule(SimTime::from_secs(5.0), tick()).is_ok());
    }

    #[test]
    fn schedule_in_past_is_rejected() {
        let mut q = EventQueue::new();
        q.run_until(SimTime::from_secs(5.0), |_, _| {});
        let err = q.schedule(SimTime::from_secs(4.9), tick()).unwrap_err();
        assert!(matches!(err, EngineError::SchedulingInPast { .. }));
    }

    #[test]
    fn same_time_events_fire_in_scheduling_order() {
        let mut q = EventQueue::new();
        let t = SimTime::from_secs(7.0);
        q.schedule(t, EventKind::TrafficSource { seq: 1 }).unwrap();
        q.schedule(t, EventKind::TrafficSource { seq: 2 }).unwrap();
        let mut seen = Vec::new();
        q.run_until(t, |_, ev| {
            if let EventKind::TrafficSource { seq } = ev.kind {
                seen.push(seq);
            }
        });
        assert_eq!(seen, vec![1, 2]);
    }

    #[test]
    fn cancel_is_idempotent_and_cancelled_events_never_fire() {
        let mut q = EventQueue::new();
        let t1 = q.schedule(SimTime::from_secs(1.0), tick()).unwrap();
        let t2 = q.schedule(SimTime::from_secs(2.0), tick()).unwrap();
        assert!(q.cancel(t1));
        assert!(!q.cancel(t1));
        let mut fired = 0;
        q.run_until(SimTime::from_secs(3.0), |_, _| fired += 1);
        assert_eq!(fired, 1);
        // Cancel after expiry returns false.
        assert!(!q.cancel(t2));
    }

    #[test]
    fn run_until_processes_only_due_events() {
        let mut q = EventQueue::new();
        for t in [1.0, 2.0, 3.0] {
            q.schedule(SimTime::from_secs(t), tick()).unwrap();
        }
        let n = q.run_until(SimTime::from_secs(2.0), |_, _| {});
        assert_eq!(n, 2);
        assert_eq!(q.clock(), SimTime::from_secs(2.0));
        let n = q.run_until(SimTime::from_secs(10.0), |_, _| {});
        assert_eq!(n, 1);
        assert_eq!(q.clock(), SimTime::from_secs(10.0));
    }

    #[test]
    fn empty_queue_run_until_advances_clock() {
        let mut q = EventQueue::new();
        assert_eq!(q.run_until(SimTime::from_secs(10.0), |_, _| {}), 0);
        assert_eq!(q.clock(), SimTime::from_secs(10.0));
    }

    #[test]
    fn handler_may_schedule_followups() {
        let mut q = EventQueue::new();
        q.schedule(SimTime::from_secs(1.0), tick()).unwrap();
        let mut times = Vec::new();
        q.run_until(SimTime::from_secs(4.0), |q, ev| {
            times.push(ev.time.secs());
            if ev.time.secs() < 3.0 {
                q.schedule(ev.time.offset(1.0), tick()).unwrap();
            }
        });
        assert_eq!(times, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn processing_order_equals_sort_by_time_then_seq() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut q = EventQueue::new();
        for _ in 0..500 {
            // Coarse times force plenty of ties.
            let t = f64::from(rng.gen_range(0..20u32)) * 0.25;
            q.schedule(SimTime::from_secs(t), tick()).unwrap();
        }
        let mut processed = Vec::new();
        q.run_until(SimTime::from_secs(100.0), |_, ev| {
            processed.push((ev.time, ev.seq));
        });
        let mut sorted = processed.clone();
        sorted.sort();
        assert_eq!(processed, sorted);
        assert_eq!(processed.len(), 500);
    }

    #[test]
    fn rng_streams_are_stable_and_independent() {
        use rand::Rng;
        let hub = RngHub::new(42);
        let mut m1 = hub.stream("mobility");
        let mut m2 = hub.stream("mobility");
        for _ in 0..100 {
            assert_eq!(m1.gen::<u64>(), m2.gen::<u64>());
        }
        let mut w = hub.stream("wpbm");
        let mut m3 = hub.stream("mobility");
        let draws: Vec<u64> = (0..8).map(|_| w.gen()).collect();
        let again: Vec<u64> = (0..8).map(|_| m3.gen()).collect();
        assert_ne!(draws, again);
    }
}

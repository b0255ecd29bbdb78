use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::probing::ProbeOutcome;
use crate::sim::traffic::Demand;
use crate::topology::LinkId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConnectionId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    Arrival(Demand),
    Departure(ConnectionId),
    /// Closes the connection's probe windows, re-ranks its backups and opens
    /// the next round.
    ProbeRound(ConnectionId),
    ProbeSend {
        conn: ConnectionId,
        path: usize,
        seq: u64,
    },
    FeedbackArrive {
        conn: ConnectionId,
        path: usize,
        seq: u64,
        outcome: ProbeOutcome,
    },
    LinkFailure(LinkId),
    LinkRepair(LinkId),
    SampleTick,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: f64,
    pub seq: u64,
    pub kind: EventKind,
}

#[derive(Debug)]
struct Entry(Event);

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .time
            .total_cmp(&other.0.time)
            .then(self.0.seq.cmp(&other.0.seq))
    }
}

/// Future event list ordered by `(time, insertion sequence)`.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Entry>>,
    next_seq: u64,
    /// Pending events other than sample ticks.
    pending_work: usize,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, time: f64, kind: EventKind) -> u64 {
        debug_assert!(time.is_finite(), "event time must be finite");
        let seq = self.next_seq;
        self.next_seq += 1;
        if kind != EventKind::SampleTick {
            self.pending_work += 1;
        }
        self.heap.push(Reverse(Entry(Event { time, seq, kind })));
        seq
    }

    pub fn pop(&mut self) -> Option<Event> {
        let Reverse(Entry(ev)) = self.heap.pop()?;
        if ev.kind != EventKind::SampleTick {
            self.pending_work -= 1;
        }
        Some(ev)
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|Reverse(Entry(e))| e.time)
    }

    /// Pending events in no particular order.
    pub fn pending(&self) -> impl Iterator<Item = &Event> {
        self.heap.iter().map(|Reverse(Entry(e))| e)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Whether anything besides sample ticks is still scheduled.
    pub fn has_work(&self) -> bool {
        self.pending_work > 0
    }
}

//! Deterministic discrete-event substrate: virtual clock, the global event
//! queue, link and partition models, and the node behavior taxonomy.

pub mod world;

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ledger::{Block, Digest, NodeId};
use crate::rng::splitmix64;

/// Virtual time in milliseconds. Never decreases during a run.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
pub struct SimTime(pub u64);

impl SimTime {
    pub fn plus(self, ms: u64) -> SimTime {
        SimTime(self.0 + ms)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TimerTag {
    /// Fires when an out-of-turn PoA sealer may propose for `slot`.
    OutOfTurnPropose { slot: u64 },
    /// Re-attempt insertion of a block whose parent was unknown, pulling the
    /// missing ancestor from the original sender.
    Pull {
        block: Block,
        from: NodeId,
        retries: u8,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventPayload {
    BlockArrival { block: Block, from: NodeId },
    SlotTick { slot: u64 },
    MiningComplete { attempt: u64 },
    Timer(TimerTag),
}

impl EventPayload {
    pub fn kind(&self) -> &'static str {
        match self {
            EventPayload::BlockArrival { .. } => "block_arrival",
            EventPayload::SlotTick { .. } => "slot_tick",
            EventPayload::MiningComplete { .. } => "mining_complete",
            EventPayload::Timer(_) => "timer",
        }
    }

    fn kind_code(&self) -> u64 {
        match self {
            EventPayload::BlockArrival { .. } => 1,
            EventPayload::SlotTick { .. } => 2,
            EventPayload::MiningComplete { .. } => 3,
            EventPayload::Timer(_) => 4,
        }
    }

    fn digest_word(&self) -> u64 {
        match self {
            EventPayload::BlockArrival { block, .. } => block.digest.0,
            EventPayload::Timer(TimerTag::Pull { block, .. }) => block.digest.0,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimEvent {
    pub at: SimTime,
    pub seq: u64,
    pub target: NodeId,
    pub payload: EventPayload,
}

impl SimEvent {
    /// One line of the optional event log: time, seq, target, payload kind,
    /// block digest (zero when the payload carries none).
    pub fn log_line(&self) -> String {
        format!(
            "{} {} {} {} {:016x}",
            self.at,
            self.seq,
            self.target,
            self.payload.kind(),
            self.payload.digest_word()
        )
    }

    /// Folds this event into a running 64-bit log digest.
    pub fn fold_into(&self, digest: u64) -> u64 {
        let words = [
            self.at.0,
            self.seq,
            self.target.0,
            self.payload.kind_code(),
            self.payload.digest_word(),
        ];
        let mut h = digest;
        for w in words {
            h = splitmix64(h ^ w);
        }
        h
    }
}

struct HeapEntry(SimEvent);

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.0.at == other.0.at && self.0.seq == other.0.seq
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    // reversed so the BinaryHeap pops the earliest (at, seq) first
    fn cmp(&self, other: &Self) -> Ordering {
        (other.0.at, other.0.seq).cmp(&(self.0.at, self.0.seq))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScheduleError {
    #[error("event at {at} scheduled in the past (now {now})")]
    TimeTravel { at: SimTime, now: SimTime },
}

/// Time-ordered event queue with a global issuance counter breaking ties.
pub struct EventQueue {
    heap: BinaryHeap<HeapEntry>,
    next_seq: u64,
    now: SimTime,
}

impl EventQueue {
    pub fn new() -> Self {
        Self {
            heap: BinaryHeap::new(),
            next_seq: 0,
            now: SimTime(0),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn schedule(
        &mut self,
        at: SimTime,
        target: NodeId,
        payload: EventPayload,
    ) -> Result<u64, ScheduleError> {
        if at < self.now {
            return Err(ScheduleError::TimeTravel { at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(HeapEntry(SimEvent {
            at,
            seq,
            target,
            payload,
        }));
        Ok(seq)
    }

    /// Pops the next event if it is due at or before `horizon`, advancing the
    /// clock to its timestamp.
    pub fn pop_within(&mut self, horizon: SimTime) -> Option<SimEvent> {
        match self.heap.peek() {
            Some(entry) if entry.0.at <= horizon => {
                let ev = self.heap.pop().unwrap().0;
                self.now = ev.at;
                Some(ev)
            }
            _ => None,
        }
    }

    /// Jumps the clock forward once all events up to `horizon` have been
    /// dispatched.
    pub fn advance_to(&mut self, horizon: SimTime) {
        debug_assert!(horizon >= self.now);
        self.now = horizon;
    }
}

impl Default for EventQueue {
    fn default() -> Self {
        Self::new()
    }
}

/// Point-to-point delivery model: fixed base latency, uniform integer jitter
/// in `[-jitter, +jitter]` (clamped at zero), independent drop probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkModel {
    pub base_latency_ms: u64,
    pub jitter_ms: u64,
    pub drop_probability: f64,
}

impl Default for LinkModel {
    fn default() -> Self {
        Self {
            base_latency_ms: 200,
            jitter_ms: 0,
            drop_probability: 0.0,
        }
    }
}

/// A network partition active within `[from_ms, until_ms)`. Nodes listed in
/// different groups cannot exchange messages while the partition holds;
/// nodes not listed in any group keep talking to everyone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSpec {
    pub groups: Vec<Vec<u64>>,
    pub from_ms: u64,
    pub until_ms: u64,
}

impl PartitionSpec {
    fn group_of(&self, node: NodeId) -> Option<usize> {
        self.groups
            .iter()
            .position(|g| g.contains(&node.0))
    }

    pub fn blocks(&self, a: NodeId, b: NodeId, now: SimTime) -> bool {
        if now.0 < self.from_ms || now.0 >= self.until_ms {
            return false;
        }
        match (self.group_of(a), self.group_of(b)) {
            (Some(ga), Some(gb)) => ga != gb,
            _ => false,
        }
    }
}

/// How a node behaves on the wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeBehavior {
    Honest,
    /// When in turn, produces two distinct blocks for the same slot and
    /// sends each to a different half of its peers (split by node-id
    /// parity, so every equivocator divides the audience the same way).
    Equivocator,
    /// Seals only empty blocks.
    Censor,
    /// One operator running several authorized sealer identities, sealing
    /// whenever any controlled identity is in turn.
    SybilCloner { controlled: Vec<usize> },
}

impl NodeBehavior {
    pub fn is_honest(&self) -> bool {
        matches!(self, NodeBehavior::Honest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tick(slot: u64) -> EventPayload {
        EventPayload::SlotTick { slot }
    }

    #[test]
    fn schedule_then_pop_returns_same_event() {
        let mut q = EventQueue::new();
        q.schedule(SimTime(5), NodeId(1), tick(0)).unwrap();
        let ev = q.pop_within(SimTime(100)).unwrap();
        assert_eq!(ev.at, SimTime(5));
        assert_eq!(ev.target, NodeId(1));
        assert_eq!(ev.payload, tick(0));
        assert!(q.pop_within(SimTime(100)).is_none());
        assert_eq!(q.now(), SimTime(5));
    }

    #[test]
    fn equal_time_events_pop_in_issuance_order() {
        let mut q = EventQueue::new();
        let s0 = q.schedule(SimTime(7), NodeId(0), tick(0)).unwrap();
        let s1 = q.schedule(SimTime(7), NodeId(1), tick(1)).unwrap();
        assert!(s0 < s1);
        assert_eq!(q.pop_within(SimTime(7)).unwrap().seq, s0);
        assert_eq!(q.pop_within(SimTime(7)).unwrap().seq, s1);
    }

    #[test]
    fn scheduling_in_the_past_is_time_travel() {
        let mut q = EventQueue::new();
        q.schedule(SimTime(10), NodeId(0), tick(0)).unwrap();
        q.pop_within(SimTime(10)).unwrap();
        assert_eq!(
            q.schedule(SimTime(3), NodeId(0), tick(1)),
            Err(ScheduleError::TimeTravel {
                at: SimTime(3),
                now: SimTime(10)
            })
        );
    }

    #[test]
    fn pop_respects_horizon() {
        let mut q = EventQueue::new();
        q.schedule(SimTime(50), NodeId(0), tick(0)).unwrap();
        assert!(q.pop_within(SimTime(49)).is_none());
        assert!(q.pop_within(SimTime(50)).is_some());
    }

    #[test]
    fn partition_blocks_only_listed_cross_group_pairs() {
        let p = PartitionSpec {
            groups: vec![vec![0, 1], vec![2]],
            from_ms: 10,
            until_ms: 20,
        };
        let t = SimTime(15);
        assert!(p.blocks(NodeId(0), NodeId(2), t));
        assert!(p.blocks(NodeId(2), NodeId(1), t));
        assert!(!p.blocks(NodeId(0), NodeId(1), t));
        // node 3 is unlisted: it bridges both groups
        assert!(!p.blocks(NodeId(3), NodeId(0), t));
        assert!(!p.blocks(NodeId(3), NodeId(2), t));
        // outside the window nothing is blocked
        assert!(!p.blocks(NodeId(0), NodeId(2), SimTime(20)));
        assert!(!p.blocks(NodeId(0), NodeId(2), SimTime(9)));
    }

    #[test]
    fn log_line_format() {
        let ev = SimEvent {
            at: SimTime(12),
            seq: 3,
            target: NodeId(2),
            payload: tick(1),
        };
        assert_eq!(ev.log_line(), "12 3 2 slot_tick 0000000000000000");
        assert_ne!(ev.fold_into(0), 0);
    }
}

//! Proof-of-Authority consensus rules: the fixed authority set, slot-based
//! rotation, in-turn/out-of-turn sealing, seal validation against the
//! recent-signer window, the Byzantine tolerance bound and the reputation
//! system.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ledger::{Block, ChainStore, Digest, NodeId};

/// A sealer identity: its fixed position in the rotation roster plus a label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SealerId {
    pub index: usize,
    pub label: String,
}

impl fmt::Display for SealerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SealerRecord {
    pub id: SealerId,
    pub reputation: i64,
    pub active: bool,
    /// Slot of the event that ejected this sealer. Blocks sealed at or before
    /// this slot stay valid so that every node reaches the same verdict no
    /// matter when a block arrives.
    pub ejected_at_slot: Option<u64>,
}

/// The fixed set of n sealers. Ejection deactivates a record but never
/// removes it, so rotation indices stay stable for the whole run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthoritySet {
    sealers: Vec<SealerRecord>,
    pub ejection_threshold: i64,
}

/// Score deltas applied per reputation event. The defaults satisfy the
/// non-monotonicity requirement: both signs are present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReputationDeltas {
    pub in_turn_seal: i64,
    pub out_of_turn_seal: i64,
    pub missed_slot: i64,
    pub invalid_block: i64,
    pub equivocation: i64,
}

impl Default for ReputationDeltas {
    fn default() -> Self {
        Self {
            in_turn_seal: 2,
            out_of_turn_seal: 1,
            missed_slot: -1,
            invalid_block: -5,
            equivocation: -10,
        }
    }
}

pub const DEFAULT_EJECTION_THRESHOLD: i64 = -10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReputationEventKind {
    InTurnSeal,
    OutOfTurnSeal,
    Equivocation,
    InvalidBlock,
    MissedSlot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReputationEvent {
    pub kind: ReputationEventKind,
    pub slot: u64,
}

/// Verdict of [`validate_seal`].
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SealError {
    #[error("proposer {0} is not an authorized sealer")]
    NotAuthorized(NodeId),
    #[error("sealer {0} signed within the recent-signer window")]
    SignedRecently(NodeId),
    #[error("seal weight {got} inconsistent with rotation (expected {expected})")]
    WrongWeight { got: u64, expected: u64 },
}

/// Proposers a block must not repeat: the sealers of the last `floor(n/2)`
/// blocks of the chain being extended. This window is what makes a p < n/2
/// coalition unable to outpace the honest majority.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RecentSignerWindow {
    window: Vec<(u64, NodeId)>,
}

impl RecentSignerWindow {
    /// Builds the window for a block extending `parent`, walking back
    /// `floor(n/2)` blocks from it (genesis excluded).
    pub fn for_parent(store: &ChainStore, parent: Digest, n: usize) -> Self {
        let window = store
            .last_blocks(parent, n / 2)
            .iter()
            .map(|b| (b.header.slot, b.header.proposer))
            .collect();
        Self { window }
    }

    pub fn contains(&self, proposer: NodeId) -> bool {
        self.window.iter().any(|&(_, p)| p == proposer)
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }
}

/// Largest p with p < n/2: the number of Byzantine sealers the network
/// tolerates.
pub fn max_byzantine(n: usize) -> usize {
    (n - 1) / 2
}

impl AuthoritySet {
    pub fn new(n: usize, ejection_threshold: i64) -> Self {
        assert!(n >= 1, "authority set must hold at least one sealer");
        let sealers = (0..n)
            .map(|index| SealerRecord {
                id: SealerId {
                    index,
                    label: format!("sealer-{index}"),
                },
                reputation: 0,
                active: true,
                ejected_at_slot: None,
            })
            .collect();
        Self {
            sealers,
            ejection_threshold,
        }
    }

    pub fn len(&self) -> usize {
        self.sealers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sealers.is_empty()
    }

    pub fn sealer(&self, index: usize) -> Option<&SealerRecord> {
        self.sealers.get(index)
    }

    /// Record for the sealer identity a block's proposer field names.
    pub fn sealer_by_proposer(&self, proposer: NodeId) -> Option<&SealerRecord> {
        self.sealers.get(proposer.0 as usize)
    }

    /// The sealer designated to seal `slot` under round-robin rotation.
    /// Ejected sealers keep their rotation position; their turns are missed.
    pub fn in_turn_sealer(&self, slot: u64) -> &SealerId {
        &self.sealers[(slot % self.sealers.len() as u64) as usize].id
    }

    /// 2 if `proposer` is the in-turn sealer for `slot`, 1 otherwise.
    pub fn seal_weight(&self, slot: u64, proposer: NodeId) -> u64 {
        if self.in_turn_sealer(slot).index as u64 == proposer.0 {
            2
        } else {
            1
        }
    }

    /// Applies a reputation event to the sealer at `index`. Scores are
    /// unbounded below; crossing the ejection threshold deactivates the
    /// sealer permanently.
    pub fn update_reputation(
        &mut self,
        index: usize,
        event: ReputationEvent,
        deltas: &ReputationDeltas,
    ) -> &SealerRecord {
        let delta = match event.kind {
            ReputationEventKind::InTurnSeal => deltas.in_turn_seal,
            ReputationEventKind::OutOfTurnSeal => deltas.out_of_turn_seal,
            ReputationEventKind::Equivocation => deltas.equivocation,
            ReputationEventKind::InvalidBlock => deltas.invalid_block,
            ReputationEventKind::MissedSlot => deltas.missed_slot,
        };
        let record = &mut self.sealers[index];
        record.reputation += delta;
        if record.active && record.reputation < self.ejection_threshold {
            record.active = false;
            record.ejected_at_slot = Some(event.slot);
        }
        record
    }

    /// Global read-only view of every sealer's standing, identical for every
    /// observer at a given simulated instant.
    pub fn reputation_snapshot(&self) -> Vec<(SealerId, i64, bool)> {
        self.sealers
            .iter()
            .map(|r| (r.id.clone(), r.reputation, r.active))
            .collect()
    }

    /// Full PoA seal validation: authorization (ejection is slot-aware),
    /// recent-signer window, and weight consistency with the rotation.
    pub fn validate_seal(
        &self,
        block: &Block,
        recent: &RecentSignerWindow,
    ) -> Result<(), SealError> {
        let proposer = block.header.proposer;
        let record = self
            .sealer_by_proposer(proposer)
            .ok_or(SealError::NotAuthorized(proposer))?;
        let authorized = match record.ejected_at_slot {
            None => true,
            Some(ejected) => block.header.slot <= ejected,
        };
        if !authorized {
            return Err(SealError::NotAuthorized(proposer));
        }
        if recent.contains(proposer) {
            return Err(SealError::SignedRecently(proposer));
        }
        let expected = self.seal_weight(block.header.slot, proposer);
        if block.header.seal_weight != expected {
            return Err(SealError::WrongWeight {
                got: block.header.seal_weight,
                expected,
            });
        }
        Ok(())
    }
}

/// Delay before an out-of-turn sealer may propose for a slot: half the slot
/// plus a per-sealer stagger, so backups rarely collide while the chain
/// stays live when the in-turn sealer is down.
pub fn out_of_turn_delay(slot_duration_ms: u64, sealer_index: usize, n: usize) -> u64 {
    let idx = (sealer_index % n) as u64;
    slot_duration_ms / 2 + idx * slot_duration_ms / (4 * n as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{BlockHeader, InsertOutcome};

    fn set(n: usize) -> AuthoritySet {
        AuthoritySet::new(n, DEFAULT_EJECTION_THRESHOLD)
    }

    #[test]
    fn in_turn_rotation() {
        assert_eq!(set(4).in_turn_sealer(0).index, 0);
        assert_eq!(set(4).in_turn_sealer(5).index, 1);
        assert_eq!(set(3).in_turn_sealer(7).index, 1);
    }

    #[test]
    fn seal_weight_by_turn() {
        let s = set(4);
        assert_eq!(s.seal_weight(5, NodeId(1)), 2);
        assert_eq!(s.seal_weight(5, NodeId(2)), 1);
        // degenerate single-sealer set is always in turn
        assert_eq!(set(1).seal_weight(123, NodeId(0)), 2);
    }

    #[test]
    fn max_byzantine_bound() {
        assert_eq!(max_byzantine(7), 3);
        assert_eq!(max_byzantine(4), 1);
        assert_eq!(max_byzantine(1), 0);
        for n in 1..=50 {
            let p = max_byzantine(n);
            assert!(2 * p < n);
            assert!(2 * (p + 1) >= n);
        }
    }

    fn sealed_block(store: &ChainStore, parent: Digest, slot: u64, sealer: usize, weight: u64) -> Block {
        let height = store.get(parent).unwrap().header.height + 1;
        Block::new(BlockHeader {
            parent,
            height,
            slot,
            proposer: NodeId(sealer as u64),
            seal_weight: weight,
            payload_count: 100,
        })
    }

    #[test]
    fn validate_seal_accepts_in_turn() {
        let authority = set(7);
        let store = ChainStore::new();
        let block = sealed_block(&store, store.genesis(), 0, 0, 2);
        let window = RecentSignerWindow::for_parent(&store, store.genesis(), 7);
        assert!(window.is_empty());
        assert_eq!(authority.validate_seal(&block, &window), Ok(()));
    }

    #[test]
    fn validate_seal_rejects_recent_signer() {
        let authority = set(7);
        let mut store = ChainStore::new();
        // sealer 0 seals slot 0, then tries again at slot 2 while still in
        // the floor(7/2) = 3 deep window.
        let first = sealed_block(&store, store.genesis(), 0, 0, 2);
        assert_eq!(store.extend(first).unwrap(), InsertOutcome::Inserted);
        let again = sealed_block(&store, first.digest, 2, 0, 1);
        let window = RecentSignerWindow::for_parent(&store, first.digest, 7);
        assert_eq!(window.len(), 1);
        assert_eq!(
            authority.validate_seal(&again, &window),
            Err(SealError::SignedRecently(NodeId(0)))
        );
    }

    #[test]
    fn validate_seal_rejects_ejected() {
        let mut authority = set(3);
        let deltas = ReputationDeltas::default();
        authority.update_reputation(
            1,
            ReputationEvent {
                kind: ReputationEventKind::Equivocation,
                slot: 4,
            },
            &deltas,
        );
        authority.update_reputation(
            1,
            ReputationEvent {
                kind: ReputationEventKind::Equivocation,
                slot: 9,
            },
            &deltas,
        );
        assert!(!authority.sealer(1).unwrap().active);
        let store = ChainStore::new();
        let window = RecentSignerWindow::default();
        // sealed after ejection: rejected
        let late = sealed_block(&store, store.genesis(), 10, 1, 2);
        assert_eq!(
            authority.validate_seal(&late, &window),
            Err(SealError::NotAuthorized(NodeId(1)))
        );
        // sealed at or before the ejection slot: still valid
        let earlier = sealed_block(&store, store.genesis(), 7, 1, 2);
        assert_eq!(authority.validate_seal(&earlier, &window), Ok(()));
    }

    #[test]
    fn validate_seal_rejects_wrong_weight() {
        let authority = set(4);
        let store = ChainStore::new();
        let window = RecentSignerWindow::default();
        let block = sealed_block(&store, store.genesis(), 1, 1, 1);
        assert_eq!(
            authority.validate_seal(&block, &window),
            Err(SealError::WrongWeight { got: 1, expected: 2 })
        );
        let outsider = sealed_block(&store, store.genesis(), 1, 9, 1);
        assert_eq!(
            authority.validate_seal(&outsider, &window),
            Err(SealError::NotAuthorized(NodeId(9)))
        );
    }

    #[test]
    fn reputation_deltas_apply() {
        let mut authority = set(3);
        let deltas = ReputationDeltas::default();
        let rec = authority.update_reputation(
            0,
            ReputationEvent {
                kind: ReputationEventKind::InTurnSeal,
                slot: 0,
            },
            &deltas,
        );
        assert_eq!(rec.reputation, 2);
        assert!(rec.active);
    }

    // Ejection boundary fixture: -6 - 10 = -16 < -10.
    #[test]
    fn equivocation_crosses_ejection_threshold() {
        let mut authority = set(3);
        let deltas = ReputationDeltas::default();
        authority.sealers[2].reputation = -6;
        let rec = authority.update_reputation(
            2,
            ReputationEvent {
                kind: ReputationEventKind::Equivocation,
                slot: 11,
            },
            &deltas,
        );
        assert_eq!(rec.reputation, -16);
        assert!(!rec.active);
        assert_eq!(rec.ejected_at_slot, Some(11));
    }

    #[test]
    fn misbehavior_always_damages_reputation() {
        let mut authority = set(1);
        let deltas = ReputationDeltas::default();
        authority.sealers[0].reputation = -1_000_000;
        let rec = authority.update_reputation(
            0,
            ReputationEvent {
                kind: ReputationEventKind::MissedSlot,
                slot: 3,
            },
            &deltas,
        );
        assert_eq!(rec.reputation, -1_000_001);
    }

    #[test]
    fn snapshot_is_complete_and_stable() {
        let mut authority = set(3);
        let deltas = ReputationDeltas::default();
        let fresh = authority.reputation_snapshot();
        assert_eq!(fresh.len(), 3);
        assert!(fresh.iter().all(|(_, rep, active)| *rep == 0 && *active));
        authority.update_reputation(
            0,
            ReputationEvent {
                kind: ReputationEventKind::InTurnSeal,
                slot: 0,
            },
            &deltas,
        );
        let snap = authority.reputation_snapshot();
        assert_eq!(snap[0].1, 2);
        // two observers at the same instant see identical bytes
        assert_eq!(snap, authority.reputation_snapshot());
    }

    #[test]
    fn window_capacity_follows_set_size() {
        let mut store = ChainStore::new();
        let mut parent = store.genesis();
        for slot in 0..6u64 {
            let block = sealed_block(&store, parent, slot, (slot % 7) as usize, 1);
            store.extend(block).unwrap();
            parent = block.digest;
        }
        assert_eq!(RecentSignerWindow::for_parent(&store, parent, 7).len(), 3);
        assert_eq!(RecentSignerWindow::for_parent(&store, parent, 1).len(), 0);
    }

    #[test]
    fn out_of_turn_delay_staggers() {
        let d = 5000;
        let base = out_of_turn_delay(d, 0, 7);
        assert_eq!(base, 2500);
        let later = out_of_turn_delay(d, 6, 7);
        assert!(later > base);
        assert!(later < d);
    }
}

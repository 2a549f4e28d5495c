//! Baseline consensus models: the stochastic PoW mining race and the
//! stake-weighted PoS leader lottery. Both run on the same ledger and
//! network substrate as the PoA engine.

use crate::ledger::NodeId;
use crate::rng::{splitmix64, DeterministicRng};

/// A mining node: abstract hashes per millisecond.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinerSpec {
    pub id: NodeId,
    pub hashrate: f64,
}

/// Expected hashes per block. Constant within a run; there is no retargeting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifficultyParam {
    pub difficulty: f64,
}

/// Stake per node, iterated in table order for cumulative sampling.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StakeTable {
    pub entries: Vec<(NodeId, f64)>,
}

impl StakeTable {
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, s)| s).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StakeError {
    #[error("node {0} is not in the stake table")]
    UnknownNode(NodeId),
}

/// Inverse-CDF of the exponential law: puzzle solving is memoryless, so the
/// time to the next block is `-ln(u) * difficulty / hashrate`.
pub fn exponential_delay(u: f64, hashrate: f64, difficulty: f64) -> f64 {
    -u.ln() * difficulty / hashrate
}

/// Samples the miner's time-to-block in milliseconds. Advances the rng state
/// exactly once.
pub fn pow_time_to_block(
    rng: &mut DeterministicRng,
    miner: &MinerSpec,
    diff: &DifficultyParam,
) -> f64 {
    let u = rng.next_unit_open_closed();
    exponential_delay(u, miner.hashrate, diff.difficulty)
}

/// The stake-proportional selection probability `s_i / sum(s_j)`.
pub fn selection_probability(id: NodeId, stakes: &StakeTable) -> Result<f64, StakeError> {
    let stake = stakes
        .entries
        .iter()
        .find(|(node, _)| *node == id)
        .map(|(_, s)| *s)
        .ok_or(StakeError::UnknownNode(id))?;
    Ok(stake / stakes.total())
}

/// Slot leader lottery. The draw comes from a slot-scoped stream seeded with
/// `splitmix64(seed ^ slot)`, so every node computes the same leader without
/// exchanging messages. Table order and the strict inequality fix the tie
/// behavior at stake boundaries.
pub fn pos_select_leader(seed: u64, slot: u64, stakes: &StakeTable) -> NodeId {
    assert!(!stakes.entries.is_empty(), "stake table must not be empty");
    let mut rng = DeterministicRng::from_seed(splitmix64(seed ^ slot));
    let u = rng.next_unit();
    let total = stakes.total();
    let mut cumulative = 0.0;
    for &(node, stake) in &stakes.entries {
        cumulative += stake;
        if cumulative / total > u {
            return node;
        }
    }
    // float rounding can leave the final cumulative fraction a hair under 1
    stakes.entries[stakes.entries.len() - 1].0
}

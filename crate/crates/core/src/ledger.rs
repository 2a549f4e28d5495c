//! Block and chain data model shared by every consensus engine: canonical
//! hashing, the block store, fork choice and fork accounting.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rng::splitmix64;

/// Identifier of a simulated node. For PoA blocks the proposer field carries
/// the sealer identity number, which may differ from the physical node that
/// produced the block (identity forgery is the point of the Sybil model).
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// 64-bit block identifier produced by [`hash_block`].
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
pub struct Digest(pub u64);

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockHeader {
    pub parent: Digest,
    pub height: u64,
    /// Discrete slot index for PoA/PoS; creation time in ms for PoW blocks
    /// (which have no slots but need a uniqueness word).
    pub slot: u64,
    pub proposer: NodeId,
    /// 2 for an in-turn PoA seal, 1 otherwise, 0 only on genesis.
    pub seal_weight: u64,
    /// Abstract transaction count carried by the block.
    pub payload_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub header: BlockHeader,
    pub digest: Digest,
}

impl Block {
    pub fn new(header: BlockHeader) -> Self {
        Self {
            digest: hash_block(&header),
            header,
        }
    }

    /// The canonical genesis block: the all-zero header at height 0.
    pub fn genesis() -> Self {
        Self::new(BlockHeader {
            parent: Digest(0),
            height: 0,
            slot: 0,
            proposer: NodeId(0),
            seal_weight: 0,
            payload_count: 0,
        })
    }
}

/// Canonical header digest: the six header fields, in declaration order, as
/// 64-bit words folded with `h := splitmix64(h ^ w)` starting from zero.
pub fn hash_block(header: &BlockHeader) -> Digest {
    let words = [
        header.parent.0,
        header.height,
        header.slot,
        header.proposer.0,
        header.seal_weight,
        header.payload_count,
    ];
    let mut h = 0u64;
    for w in words {
        h = splitmix64(h ^ w);
    }
    Digest(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    Inserted,
    /// The block was already present; insertion is a no-op.
    Duplicate,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum LedgerError {
    #[error("unknown parent {0}")]
    UnknownParent(Digest),
    #[error("bad height {got}, expected {expected}")]
    BadHeight { got: u64, expected: u64 },
    #[error("cached digest {cached} does not match header hash {computed}")]
    BadDigest { cached: Digest, computed: Digest },
}

#[derive(Debug, Clone)]
struct StoredBlock {
    block: Block,
    /// Sum of seal weights from genesis to this block inclusive.
    total_weight: u64,
}

/// Append-only block DAG with tip tracking. Orphans are rejected, not
/// buffered; the network layer re-requests missing parents.
#[derive(Debug, Clone)]
pub struct ChainStore {
    blocks: HashMap<Digest, StoredBlock>,
    children: HashMap<Digest, Vec<Digest>>,
    tips: BTreeSet<Digest>,
    genesis: Digest,
}

impl ChainStore {
    /// Creates a store holding only the canonical genesis block.
    pub fn new() -> Self {
        let genesis = Block::genesis();
        let digest = genesis.digest;
        let mut blocks = HashMap::new();
        blocks.insert(
            digest,
            StoredBlock {
                block: genesis,
                total_weight: 0,
            },
        );
        let mut tips = BTreeSet::new();
        tips.insert(digest);
        Self {
            blocks,
            children: HashMap::new(),
            tips,
            genesis,
        }
    }

    pub fn genesis(&self) -> Digest {
        self.genesis
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        false // genesis is always present
    }

    pub fn contains(&self, digest: Digest) -> bool {
        self.blocks.contains_key(&digest)
    }

    pub fn get(&self, digest: Digest) -> Option<&Block> {
        self.blocks.get(&digest).map(|s| &s.block)
    }

    /// Total seal weight of the chain from genesis to `digest` inclusive.
    pub fn total_weight(&self, digest: Digest) -> Option<u64> {
        self.blocks.get(&digest).map(|s| s.total_weight)
    }

    pub fn children_of(&self, digest: Digest) -> &[Digest] {
        self.children.get(&digest).map_or(&[], Vec::as_slice)
    }

    pub fn tips(&self) -> impl Iterator<Item = Digest> + '_ {
        self.tips.iter().copied()
    }

    pub fn tip_count(&self) -> usize {
        self.tips.len()
    }

    pub fn extend(&mut self, block: Block) -> Result<InsertOutcome, LedgerError> {
        let computed = hash_block(&block.header);
        if computed != block.digest {
            return Err(LedgerError::BadDigest {
                cached: block.digest,
                computed,
            });
        }
        if self.blocks.contains_key(&block.digest) {
            return Ok(InsertOutcome::Duplicate);
        }
        let parent = match self.blocks.get(&block.header.parent) {
            Some(p) => p,
            None => return Err(LedgerError::UnknownParent(block.header.parent)),
        };
        let expected = parent.block.header.height + 1;
        if block.header.height != expected {
            return Err(LedgerError::BadHeight {
                got: block.header.height,
                expected,
            });
        }
        let total_weight = parent.total_weight + block.header.seal_weight;
        let parent_digest = block.header.parent;
        let digest = block.digest;
        self.blocks.insert(digest, StoredBlock {
            block,
            total_weight,
        });
        self.children.entry(parent_digest).or_default().push(digest);
        self.tips.remove(&parent_digest);
        self.tips.insert(digest);
        Ok(InsertOutcome::Inserted)
    }

    /// The canonical tip: maximum total chain weight, ties broken by greater
    /// height, then numerically smaller digest.
    pub fn fork_choice(&self) -> Digest {
        let mut best: Option<(u64, u64, Digest)> = None;
        for &tip in &self.tips {
            let stored = &self.blocks[&tip];
            let key = (stored.total_weight, stored.block.header.height, tip);
            best = Some(match best {
                None => key,
                Some(cur) => {
                    if key.0 > cur.0
                        || (key.0 == cur.0 && key.1 > cur.1)
                        || (key.0 == cur.0 && key.1 == cur.1 && key.2 < cur.2)
                    {
                        key
                    } else {
                        cur
                    }
                }
            });
        }
        best.expect("store always holds genesis").2
    }

    /// Number of stored blocks not on the canonical chain.
    pub fn fork_count(&self) -> u64 {
        let canonical_len = self.blocks[&self.fork_choice()].block.header.height + 1;
        self.blocks.len() as u64 - canonical_len
    }

    /// Digests from genesis to `tip` inclusive, in ascending height order.
    pub fn path_from_genesis(&self, tip: Digest) -> Vec<Digest> {
        let mut path = Vec::new();
        let mut cur = tip;
        loop {
            path.push(cur);
            if cur == self.genesis {
                break;
            }
            cur = self.blocks[&cur].block.header.parent;
        }
        path.reverse();
        path
    }

    /// Block at `height` on the chain ending at `tip`.
    pub fn ancestor_at(&self, tip: Digest, height: u64) -> Option<Digest> {
        let mut cur = self.get(tip)?;
        if cur.header.height < height {
            return None;
        }
        while cur.header.height > height {
            cur = self.get(cur.header.parent)?;
        }
        Some(cur.digest)
    }

    /// Height of the deepest common ancestor of two stored blocks.
    pub fn common_ancestor_height(&self, a: Digest, b: Digest) -> u64 {
        let mut a = &self.blocks[&a].block;
        let mut b = &self.blocks[&b].block;
        while a.header.height > b.header.height {
            a = &self.blocks[&a.header.parent].block;
        }
        while b.header.height > a.header.height {
            b = &self.blocks[&b.header.parent].block;
        }
        while a.digest != b.digest {
            a = &self.blocks[&a.header.parent].block;
            b = &self.blocks[&b.header.parent].block;
        }
        a.header.height
    }

    /// Walks back from `tip` and returns up to `count` blocks, newest first.
    pub fn last_blocks(&self, tip: Digest, count: usize) -> Vec<&Block> {
        let mut out = Vec::with_capacity(count);
        let mut cur = tip;
        while out.len() < count && cur != self.genesis {
            let block = &self.blocks[&cur].block;
            out.push(block);
            cur = block.header.parent;
        }
        out
    }
}

impl Default for ChainStore {
    fn default() -> Self {
        Self::new()
    }
}

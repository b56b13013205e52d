//! Nim ground truth: positions, Grundy values, winning-move enumeration,
//! and the trit board encoding used to feed game states to the model.
//!
//! Two independent evaluation routes are kept side by side: [`grundy`] is
//! the XOR-of-heaps shortcut, and [`grundy_oracle`] is the brute-force mex
//! recursion over the move tree. Tests pin them against each other.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bitstring::Bitstring;
use crate::error::{Error, Result};

/// Total-counter cap for the mex recursion.
pub const ORACLE_BUDGET: u32 = 24;

/// A Nim position: one entry per heap, counting the counters left in it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NimPosition {
    heaps: Vec<u32>,
}

impl NimPosition {
    pub fn new(heaps: Vec<u32>) -> Self {
        Self { heaps }
    }

    pub fn heaps(&self) -> &[u32] {
        &self.heaps
    }

    /// True when no counters remain (the player to move has lost).
    pub fn is_terminal(&self) -> bool {
        self.heaps.iter().all(|&h| h == 0)
    }

    pub fn total_counters(&self) -> u32 {
        self.heaps.iter().sum()
    }

    /// Applies a move, removing `take` counters from heap `heap`.
    pub fn apply_move(&self, heap: usize, take: u32) -> NimPosition {
        let mut heaps = self.heaps.clone();
        heaps[heap] -= take;
        NimPosition { heaps }
    }
}

/// Grundy value by the XOR rule: the nim-sum of the heap sizes.
pub fn grundy(pos: &NimPosition) -> u32 {
    pos.heaps.iter().fold(0, |acc, &h| acc ^ h)
}

/// True iff the player to move can force a win under normal play.
pub fn is_winning(pos: &NimPosition) -> bool {
    grundy(pos) != 0
}

/// Grundy value by the mex recursion over all reachable children.
///
/// Deliberately ignorant of the XOR rule so it can serve as an
/// independent check of it. Memoizes on the sorted heap multiset; the
/// cache lives for one call, so concurrent callers never share state.
/// Positions with more than [`ORACLE_BUDGET`] counters are rejected.
pub fn grundy_oracle(pos: &NimPosition) -> Result<u32> {
    let total = pos.total_counters();
    if total > ORACLE_BUDGET {
        return Err(Error::OracleBudget {
            total,
            limit: ORACLE_BUDGET,
        });
    }
    let mut memo: HashMap<Vec<u32>, u32> = HashMap::new();
    Ok(mex_recurse(&pos.heaps, &mut memo))
}

fn mex_recurse(heaps: &[u32], memo: &mut HashMap<Vec<u32>, u32>) -> u32 {
    let mut key: Vec<u32> = heaps.iter().copied().filter(|&h| h > 0).collect();
    key.sort_unstable();
    if let Some(&v) = memo.get(&key) {
        return v;
    }
    let mut child_values = Vec::new();
    for (i, &h) in heaps.iter().enumerate() {
        for take in 1..=h {
            let mut child = heaps.to_vec();
            child[i] -= take;
            child_values.push(mex_recurse(&child, memo));
        }
    }
    let value = mex(&mut child_values);
    memo.insert(key, value);
    value
}

/// Minimum excludant: the smallest nonnegative integer not in the set.
fn mex(values: &mut [u32]) -> u32 {
    values.sort_unstable();
    let mut current = 0;
    for &v in values.iter() {
        if v > current {
            break;
        }
        if v == current {
            current += 1;
        }
    }
    current
}

/// All moves `(heap index, counters removed)` that leave the opponent in
/// a Grundy-0 position. Empty exactly when the position itself is
/// Grundy-0. Errors on terminal positions, which have no moves at all.
pub fn winning_moves(pos: &NimPosition) -> Result<Vec<(usize, u32)>> {
    if pos.is_terminal() {
        return Err(Error::NoMoves);
    }
    let g = grundy(pos);
    let mut moves = Vec::new();
    if g == 0 {
        return Ok(moves);
    }
    for (i, &h) in pos.heaps.iter().enumerate() {
        let target = g ^ h; // nim-sum of the other heaps
        if target < h {
            moves.push((i, h - target));
        }
    }
    Ok(moves)
}

/// A position rendered as a trit string: 1 = counter on the board,
/// 0 = counter removed, -1 = heap separator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoardEncoding {
    capacity: u32,
    bits: Bitstring,
}

impl BoardEncoding {
    /// Reassembles an encoding from stored bits, validating the block
    /// structure against the stated capacity.
    pub fn from_bits(capacity: u32, bits: Bitstring) -> Result<Self> {
        let enc = BoardEncoding { capacity, bits };
        decode_board(&enc)?;
        Ok(enc)
    }

    pub fn capacity(&self) -> u32 {
        self.capacity
    }

    pub fn bits(&self) -> &Bitstring {
        &self.bits
    }

    pub fn into_bits(self) -> Bitstring {
        self.bits
    }
}

/// Renders a position at a fixed per-heap capacity, in canonical form:
/// each heap block is its counters' worth of 1s followed by 0s, and
/// blocks are joined by single -1 separators.
pub fn encode_board(pos: &NimPosition, capacity: u32) -> Result<BoardEncoding> {
    if pos.heaps.is_empty() {
        return Err(Error::EmptyPosition);
    }
    for (index, &count) in pos.heaps.iter().enumerate() {
        if count > capacity {
            return Err(Error::CapacityExceeded {
                index,
                count,
                capacity,
            });
        }
    }
    let k = pos.heaps.len();
    let mut values = Vec::with_capacity(k * capacity as usize + k - 1);
    for (i, &count) in pos.heaps.iter().enumerate() {
        if i > 0 {
            values.push(-1);
        }
        for slot in 0..capacity {
            values.push(if slot < count { 1 } else { 0 });
        }
    }
    Ok(BoardEncoding {
        capacity,
        bits: Bitstring::new(values)?,
    })
}

/// Recovers the heap sizes by counting 1s per separator-delimited block.
/// Works on scrambled encodings too, since only counts matter.
pub fn decode_board(enc: &BoardEncoding) -> Result<NimPosition> {
    let cap = enc.capacity as usize;
    let mut heaps = Vec::new();
    for block in enc.bits.values().split(|&v| v == -1) {
        if block.len() != cap {
            return Err(Error::MalformedEncoding(format!(
                "heap block of length {} does not match capacity {}",
                block.len(),
                cap
            )));
        }
        heaps.push(block.iter().filter(|&&v| v == 1).count() as u32);
    }
    Ok(NimPosition::new(heaps))
}

/// Permutes the 1s and 0s within each heap block, leaving separators and
/// per-heap counts intact. Canonical encodings are convenient for golden
/// tests; scrambled ones look like boards with arbitrary counters removed.
pub fn scramble_blocks<R: Rng>(enc: &BoardEncoding, rng: &mut R) -> BoardEncoding {
    let mut values = enc.bits.values().to_vec();
    let mut block_start = 0;
    for i in 0..=values.len() {
        if i == values.len() || values[i] == -1 {
            // Fisher-Yates within [block_start, i)
            let block = &mut values[block_start..i];
            for j in (1..block.len()).rev() {
                block.swap(j, rng.gen_range(0..=j));
            }
            block_start = i + 1;
        }
    }
    BoardEncoding {
        capacity: enc.capacity,
        bits: Bitstring::new(values).expect("same trits, still valid"),
    }
}

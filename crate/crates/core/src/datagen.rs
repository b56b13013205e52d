//! Seeded samplers for every bitstring distribution under study, plus
//! labeled-batch assembly against the ground-truth oracles.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bitstring::Bitstring;
use crate::error::{Error, Result};
use crate::nim::{self, BoardEncoding, NimPosition};

/// Which distribution a batch is drawn from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplerSpec {
    /// Each of the `n` positions independently 0 or 1.
    Uniform01 { n: usize },
    /// k ~ U{1..n} positions set to ±1, the rest 0. Every batch mixes
    /// sparse and dense strings, which is what makes parity learnable.
    LatentCurriculum { n: usize },
    /// Length uniform in {1..max_n}, then uniform 0/1 fill.
    VariableLength { max_n: usize },
    /// States along random playouts from a fixed starting position.
    NimTrajectory {
        heaps: Vec<u32>,
        capacity: u32,
        scrambled: bool,
    },
}

impl SamplerSpec {
    /// Sequence length of every sample, or `None` for ragged kinds.
    pub fn fixed_length(&self) -> Option<usize> {
        match self {
            SamplerSpec::Uniform01 { n } | SamplerSpec::LatentCurriculum { n } => Some(*n),
            SamplerSpec::VariableLength { .. } => None,
            SamplerSpec::NimTrajectory {
                heaps, capacity, ..
            } => Some(heaps.len() * *capacity as usize + heaps.len().saturating_sub(1)),
        }
    }

    /// The same distribution family at a different length. Length sweeps
    /// are only meaningful for the bitstring kinds; a Nim board's length
    /// is fixed by its heap structure.
    pub fn with_length(&self, n: usize) -> Result<SamplerSpec> {
        match self {
            SamplerSpec::Uniform01 { .. } => Ok(SamplerSpec::Uniform01 { n }),
            SamplerSpec::LatentCurriculum { .. } => Ok(SamplerSpec::LatentCurriculum { n }),
            SamplerSpec::VariableLength { .. } => Ok(SamplerSpec::VariableLength { max_n: n }),
            SamplerSpec::NimTrajectory { .. } => Err(Error::NoSweepLength("nim_trajectory")),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SamplerSpec::Uniform01 { n } | SamplerSpec::LatentCurriculum { n } => {
                if *n == 0 {
                    return Err(Error::InvalidConfig("sampler length must be >= 1".into()));
                }
            }
            SamplerSpec::VariableLength { max_n } => {
                if *max_n == 0 {
                    return Err(Error::InvalidConfig("max length must be >= 1".into()));
                }
            }
            SamplerSpec::NimTrajectory {
                heaps, capacity, ..
            } => {
                if heaps.is_empty() {
                    return Err(Error::EmptyPosition);
                }
                for (index, &count) in heaps.iter().enumerate() {
                    if count > *capacity {
                        return Err(Error::CapacityExceeded {
                            index,
                            count,
                            capacity: *capacity,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// A training or evaluation example. `label` is the oracle's answer until
/// the noise model flips it, which also sets the flag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub bits: Bitstring,
    pub label: u8,
    pub label_is_corrupted: bool,
}

/// Uniform draw from {0,1}^n.
pub fn sample_uniform01<R: Rng>(n: usize, rng: &mut R) -> Bitstring {
    let values: Vec<i8> = (0..n).map(|_| rng.gen_range(0..2i8)).collect();
    Bitstring::new(values).expect("n >= 1 and trits in range")
}

/// Latent-curriculum draw: weight k uniform in {1..n}, positions chosen
/// by partial Fisher-Yates (exactly uniform over k-subsets), each set to
/// ±1 equiprobably.
pub fn sample_latent_curriculum<R: Rng>(n: usize, rng: &mut R) -> Bitstring {
    let k = rng.gen_range(1..=n);
    let mut indices: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.gen_range(i..n);
        indices.swap(i, j);
    }
    let mut values = vec![0i8; n];
    for &pos in &indices[..k] {
        values[pos] = if rng.gen::<bool>() { 1 } else { -1 };
    }
    Bitstring::new(values).expect("n >= 1 and trits in range")
}

/// Uniform 0/1 draw at a length itself uniform in {1..max_n}.
pub fn sample_variable_length<R: Rng>(max_n: usize, rng: &mut R) -> Bitstring {
    let n = rng.gen_range(1..=max_n);
    sample_uniform01(n, rng)
}

/// One uniformly random playout from `start` to the terminal position,
/// every visited state encoded at the given capacity. A terminal start
/// yields the single-element list of itself.
pub fn sample_nim_trajectory<R: Rng>(
    start: &NimPosition,
    capacity: u32,
    rng: &mut R,
) -> Result<Vec<BoardEncoding>> {
    let mut out = vec![nim::encode_board(start, capacity)?];
    let mut pos = start.clone();
    while !pos.is_terminal() {
        let mut moves = Vec::new();
        for (i, &h) in pos.heaps().iter().enumerate() {
            for take in 1..=h {
                moves.push((i, take));
            }
        }
        let (heap, take) = moves[rng.gen_range(0..moves.len())];
        pos = pos.apply_move(heap, take);
        out.push(nim::encode_board(&pos, capacity)?);
    }
    Ok(out)
}

/// Draws `size` examples from `spec` and labels each with the ground
/// truth: string parity for the bitstring kinds, win/loss of the decoded
/// position for Nim boards. Never sets the corruption flag.
pub fn make_labeled_batch<R: Rng>(
    spec: &SamplerSpec,
    size: usize,
    rng: &mut R,
) -> Result<Vec<LabeledExample>> {
    if size == 0 {
        return Err(Error::EmptyBatch);
    }
    spec.validate()?;
    let mut batch = Vec::with_capacity(size);
    match spec {
        SamplerSpec::Uniform01 { n } => {
            while batch.len() < size {
                push_parity_example(&mut batch, sample_uniform01(*n, rng));
            }
        }
        SamplerSpec::LatentCurriculum { n } => {
            while batch.len() < size {
                push_parity_example(&mut batch, sample_latent_curriculum(*n, rng));
            }
        }
        SamplerSpec::VariableLength { max_n } => {
            while batch.len() < size {
                push_parity_example(&mut batch, sample_variable_length(*max_n, rng));
            }
        }
        SamplerSpec::NimTrajectory {
            heaps,
            capacity,
            scrambled,
        } => {
            let start = NimPosition::new(heaps.clone());
            while batch.len() < size {
                for enc in sample_nim_trajectory(&start, *capacity, rng)? {
                    if batch.len() == size {
                        break;
                    }
                    let label = u8::from(nim::is_winning(&nim::decode_board(&enc)?));
                    let enc = if *scrambled {
                        nim::scramble_blocks(&enc, rng)
                    } else {
                        enc
                    };
                    batch.push(LabeledExample {
                        bits: enc.into_bits(),
                        label,
                        label_is_corrupted: false,
                    });
                }
            }
        }
    }
    Ok(batch)
}

fn push_parity_example(batch: &mut Vec<LabeledExample>, bits: Bitstring) {
    let label = bits.parity();
    batch.push(LabeledExample {
        bits,
        label,
        label_is_corrupted: false,
    });
}

//! Trit sequences and the parity target function.
//!
//! A [`Bitstring`] is an immutable sequence over {-1, 0, 1}. The parity
//! label counts only the elements equal to 1, so -1 separator tokens and
//! removed counters (0) never influence it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Immutable sequence of trits in {-1, 0, 1}, length >= 1.
///
/// Stored as one signed byte per trit; samplers hand out fresh instances
/// rather than mutating shared ones.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct Bitstring {
    values: Vec<i8>,
}

impl Bitstring {
    /// Validates that every element is -1, 0, or 1 and that the sequence
    /// is nonempty.
    pub fn new(values: Vec<i8>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyBitstring);
        }
        for (index, &v) in values.iter().enumerate() {
            if !(-1..=1).contains(&v) {
                return Err(Error::InvalidTrit {
                    index,
                    value: v as i64,
                });
            }
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false // length >= 1 by construction
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    /// Parity of the count of elements equal to 1. Elements equal to 0 or
    /// -1 never affect the result.
    pub fn parity(&self) -> u8 {
        (self.values.iter().filter(|&&v| v == 1).count() % 2) as u8
    }

    /// Number of nonzero elements (1s and -1s).
    pub fn hamming_weight(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0).count()
    }
}

/// Literal form: `1` for 1, `0` for 0, `m` for -1 (e.g. `110m0`).
impl FromStr for Bitstring {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::EmptyBitstring);
        }
        let mut values = Vec::with_capacity(s.len());
        for (index, chr) in s.chars().enumerate() {
            values.push(match chr {
                '1' => 1,
                '0' => 0,
                'm' => -1,
                _ => return Err(Error::InvalidLiteral { index, chr }),
            });
        }
        Ok(Self { values })
    }
}

impl fmt::Display for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &v in &self.values {
            f.write_str(match v {
                1 => "1",
                0 => "0",
                _ => "m",
            })?;
        }
        Ok(())
    }
}

impl TryFrom<Vec<i8>> for Bitstring {
    type Error = Error;
    fn try_from(values: Vec<i8>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<Bitstring> for Vec<i8> {
    fn from(b: Bitstring) -> Vec<i8> {
        b.values
    }
}

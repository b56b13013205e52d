//! Accuracy-coupled label corruption. The corruption rate starts at rho0
//! and decays linearly to zero as measured accuracy climbs from 1/2 to 1,
//! so the noise pressure relaxes exactly as the model improves.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::LabeledExample;
use crate::error::{Error, Result};

/// The single knob of the corruption schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    rho0: f64,
}

impl NoiseSchedule {
    pub fn new(rho0: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho0) {
            return Err(Error::NoiseOutOfRange(rho0));
        }
        Ok(Self { rho0 })
    }

    pub fn rho0(&self) -> f64 {
        self.rho0
    }
}

/// How flips are allocated within a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Exactly round(rho * batch) labels flipped, chosen without
    /// replacement. The default: an exact rho-fraction mixture with
    /// minimal run-to-run variance.
    Exact,
    /// Each label independently flipped with probability rho.
    Bernoulli,
}

/// The corruption rate at a given measured accuracy: rho0 while accuracy
/// is at or below chance, then 2 * rho0 * (1 - accuracy), which meets the
/// first branch continuously at 1/2 and reaches zero at perfect accuracy.
pub fn noise_rate(schedule: NoiseSchedule, accuracy: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&accuracy) {
        return Err(Error::AccuracyOutOfRange(accuracy));
    }
    if accuracy <= 0.5 {
        Ok(schedule.rho0)
    } else {
        Ok(2.0 * schedule.rho0 * (1.0 - accuracy))
    }
}

/// Flips exactly `round_ties_even(rho * |batch|)` labels in place, chosen
/// uniformly without replacement. Bits are never touched; flipped
/// examples get their corruption flag toggled, so the operation is an
/// involution for a fixed rng seed. Returns the flip count.
pub fn corrupt_labels<R: Rng>(
    batch: &mut [LabeledExample],
    rho: f64,
    rng: &mut R,
) -> Result<usize> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::NoiseOutOfRange(rho));
    }
    let flips = (rho * batch.len() as f64).round_ties_even() as usize;
    let mut indices: Vec<usize> = (0..batch.len()).collect();
    for i in 0..flips {
        let j = rng.gen_range(i..indices.len());
        indices.swap(i, j);
    }
    for &idx in &indices[..flips] {
        let ex = &mut batch[idx];
        ex.label ^= 1;
        ex.label_is_corrupted = !ex.label_is_corrupted;
    }
    Ok(flips)
}

/// Per-example Bernoulli variant: each label flips with probability rho.
/// Used only for sensitivity studies; the exact-count form is the default.
pub fn corrupt_labels_bernoulli<R: Rng>(
    batch: &mut [LabeledExample],
    rho: f64,
    rng: &mut R,
) -> Result<usize> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::NoiseOutOfRange(rho));
    }
    let mut flips = 0;
    for ex in batch.iter_mut() {
        if rng.gen::<f64>() < rho {
            ex.label ^= 1;
            ex.label_is_corrupted = !ex.label_is_corrupted;
            flips += 1;
        }
    }
    Ok(flips)
}

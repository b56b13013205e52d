//! Parity learning over trit strings and Nim board encodings.
//!
//! The crate studies when a small from-scratch LSTM can learn the parity
//! function (the count of 1s mod 2) from sampled bitstrings whose labels
//! are corrupted at a rate coupled to the model's own measured accuracy.
//! Nim enters through Sprague-Grundy theory: boards rendered as trit
//! strings, labeled win/loss by the Grundy value, give the same training
//! harness a game-derived data source.
//!
//! Module map:
//! - [`bitstring`]: trit strings, parity, Hamming weight.
//! - [`nim`]: positions, Grundy values two independent ways, winning
//!   moves, board encoding/decoding.
//! - [`rng`]: master-seed substreams; every random choice in the crate
//!   flows from one of these.
//! - [`datagen`]: the sampled distributions and labeled-batch assembly.
//! - [`noise`]: the accuracy-coupled label-corruption schedule.
//! - [`lstm`]: the classifier, BPTT, SGD, batched evaluation.
//! - [`gradcheck`]: finite-difference verification of BPTT.
//! - [`trainer`]: the single-run protocol and its records.
//! - [`experiment`]: multi-seed sweeps and the maximum-noise search.
//! - [`export`]: CSV and JSONL emission.
//! - [`checkpoint`]: versioned parameter persistence.

pub mod bitstring;
pub mod checkpoint;
pub mod datagen;
pub mod error;
pub mod experiment;
pub mod export;
pub mod gradcheck;
pub mod lstm;
pub mod math;
pub mod nim;
pub mod noise;
pub mod rng;
pub mod trainer;

pub use bitstring::Bitstring;
pub use datagen::{LabeledExample, SamplerSpec};
pub use error::{Error, Result};
pub use experiment::{NoiseSearchOutcome, NoiseSearchSpec, SweepSpec};
pub use lstm::{InputEncoding, LstmParams};
pub use noise::{NoiseMode, NoiseSchedule};
pub use trainer::{Outcome, RunRecord, TrainConfig};

//! Versioned JSON checkpoints. Weights are stored as named arrays in
//! layout order; f64 values survive the JSON round trip bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lstm::{Gate, InputEncoding, LstmParams};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GateArrays {
    wx: Vec<f64>,
    wh: Vec<f64>,
    bias: Vec<f64>,
}

/// On-disk form of a parameter set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub hidden_size: usize,
    pub input_encoding: InputEncoding,
    pub master_seed: u64,
    input_gate: GateArrays,
    forget_gate: GateArrays,
    output_gate: GateArrays,
    candidate: GateArrays,
    head_weights: Vec<f64>,
    head_bias: f64,
}

fn gate_arrays(params: &LstmParams, gate: Gate) -> GateArrays {
    GateArrays {
        wx: params.wx(gate).to_vec(),
        wh: params.wh(gate).to_vec(),
        bias: params.bias(gate).to_vec(),
    }
}

impl Checkpoint {
    pub fn from_params(params: &LstmParams, master_seed: u64) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            hidden_size: params.hidden_size(),
            input_encoding: params.encoding(),
            master_seed,
            input_gate: gate_arrays(params, Gate::Input),
            forget_gate: gate_arrays(params, Gate::Forget),
            output_gate: gate_arrays(params, Gate::Output),
            candidate: gate_arrays(params, Gate::Candidate),
            head_weights: params.head_weights().to_vec(),
            head_bias: params.head_bias(),
        }
    }

    pub fn into_params(self) -> Result<LstmParams> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::CheckpointVersion {
                found: self.version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let mut params = LstmParams::zeros(self.hidden_size, self.input_encoding)?;
        let gates = [
            (Gate::Input, &self.input_gate),
            (Gate::Forget, &self.forget_gate),
            (Gate::Output, &self.output_gate),
            (Gate::Candidate, &self.candidate),
        ];
        for (gate, arrays) in gates {
            copy_exact(params.wx_mut(gate), &arrays.wx)?;
            copy_exact(params.wh_mut(gate), &arrays.wh)?;
            copy_exact(params.bias_mut(gate), &arrays.bias)?;
        }
        copy_exact(params.head_weights_mut(), &self.head_weights)?;
        params.set_head_bias(self.head_bias);
        params.assert_finite()?;
        Ok(params)
    }
}

fn copy_exact(dst: &mut [f64], src: &[f64]) -> Result<()> {
    if dst.len() != src.len() {
        return Err(Error::ShapeMismatch {
            expected: dst.len(),
            actual: src.len(),
        });
    }
    dst.copy_from_slice(src);
    Ok(())
}

pub fn save(params: &LstmParams, master_seed: u64, path: &Path) -> Result<()> {
    let checkpoint = Checkpoint::from_params(params, master_seed);
    fs::write(path, serde_json::to_string_pretty(&checkpoint)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(LstmParams, u64)> {
    let checkpoint: Checkpoint = serde_json::from_str(&fs::read_to_string(path)?)?;
    let master_seed = checkpoint.master_seed;
    Ok((checkpoint.into_params()?, master_seed))
}

//! From-scratch single-layer LSTM binary classifier: forward unrolling
//! over trit sequences, BCE loss, exact backpropagation-through-time,
//! and SGD updates.
//!
//! Parameters live in one flat buffer so updates, checkpoints, and
//! finite-difference probes all address the same storage. The training
//! path runs batch-major ([hidden x batch] rows) so every inner loop is
//! an elementwise op or an `axpy` over the batch dimension, which the
//! compiler can vectorize without reassociating float sums; results stay
//! bit-identical for a given (params, batch).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bitstring::Bitstring;
use crate::datagen::LabeledExample;
use crate::error::{Error, Result};
use crate::math;

/// How a trit enters the network at each timestep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputEncoding {
    /// The trit value itself as one input feature. The default.
    Scalar,
    /// Three indicator features, one per symbol. Ablation option.
    OneHot3,
}

impl InputEncoding {
    pub fn dim(self) -> usize {
        match self {
            InputEncoding::Scalar => 1,
            InputEncoding::OneHot3 => 3,
        }
    }

    fn write_features(self, trit: i8, out: &mut [f64]) {
        match self {
            InputEncoding::Scalar => out[0] = trit as f64,
            InputEncoding::OneHot3 => {
                out[0] = f64::from(trit == -1);
                out[1] = f64::from(trit == 0);
                out[2] = f64::from(trit == 1);
            }
        }
    }
}

/// The four LSTM gates, in parameter-layout order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input,
    Forget,
    Output,
    Candidate,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Output, Gate::Candidate];
}

/// Flat-buffer offsets for one (hidden_size, input_dim) shape.
/// Per gate: input weights [h x d], recurrent weights [h x h] row-major,
/// bias [h]; then the output head weights [h] and scalar bias.
#[derive(Debug, Clone, Copy)]
struct Layout {
    h: usize,
    d: usize,
}

impl Layout {
    fn gate_block(&self) -> usize {
        self.h * self.d + self.h * self.h + self.h
    }

    fn wx(&self, gate: Gate) -> std::ops::Range<usize> {
        let start = gate as usize * self.gate_block();
        start..start + self.h * self.d
    }

    fn wh(&self, gate: Gate) -> std::ops::Range<usize> {
        let start = gate as usize * self.gate_block() + self.h * self.d;
        start..start + self.h * self.h
    }

    fn bias(&self, gate: Gate) -> std::ops::Range<usize> {
        let start = gate as usize * self.gate_block() + self.h * self.d + self.h * self.h;
        start..start + self.h
    }

    fn head_w(&self) -> std::ops::Range<usize> {
        let start = 4 * self.gate_block();
        start..start + self.h
    }

    fn head_b(&self) -> usize {
        4 * self.gate_block() + self.h
    }

    fn len(&self) -> usize {
        4 * self.gate_block() + self.h + 1
    }
}

/// All trainable parameters of the classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    hidden_size: usize,
    encoding: InputEncoding,
    data: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(hidden_size: usize, encoding: InputEncoding) -> Result<Self> {
        if hidden_size == 0 {
            return Err(Error::InvalidConfig("hidden size must be >= 1".into()));
        }
        let layout = Layout {
            h: hidden_size,
            d: encoding.dim(),
        };
        Ok(Self {
            hidden_size,
            encoding,
            data: vec![0.0; layout.len()],
        })
    }

    fn layout(&self) -> Layout {
        Layout {
            h: self.hidden_size,
            d: self.encoding.dim(),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden_size
    }

    pub fn encoding(&self) -> InputEncoding {
        self.encoding
    }

    pub fn num_params(&self) -> usize {
        self.data.len()
    }

    /// The whole parameter vector in layout order.
    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn wx(&self, gate: Gate) -> &[f64] {
        &self.data[self.layout().wx(gate)]
    }

    pub fn wx_mut(&mut self, gate: Gate) -> &mut [f64] {
        let r = self.layout().wx(gate);
        &mut self.data[r]
    }

    pub fn wh(&self, gate: Gate) -> &[f64] {
        &self.data[self.layout().wh(gate)]
    }

    pub fn wh_mut(&mut self, gate: Gate) -> &mut [f64] {
        let r = self.layout().wh(gate);
        &mut self.data[r]
    }

    pub fn bias(&self, gate: Gate) -> &[f64] {
        &self.data[self.layout().bias(gate)]
    }

    pub fn bias_mut(&mut self, gate: Gate) -> &mut [f64] {
        let r = self.layout().bias(gate);
        &mut self.data[r]
    }

    pub fn head_weights(&self) -> &[f64] {
        &self.data[self.layout().head_w()]
    }

    pub fn head_weights_mut(&mut self) -> &mut [f64] {
        let r = self.layout().head_w();
        &mut self.data[r]
    }

    pub fn head_bias(&self) -> f64 {
        self.data[self.layout().head_b()]
    }

    pub fn set_head_bias(&mut self, value: f64) {
        let i = self.layout().head_b();
        self.data[i] = value;
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn assert_finite(&self) -> Result<()> {
        if self.all_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(
                "parameter vector contains NaN or Inf".into(),
            ))
        }
    }
}

/// Fresh parameters: weights i.i.d. uniform on [-0.1, 0.1], biases zero
/// except the forget gate's, which starts at 1.0 so early gradients flow
/// through the cell state.
pub fn init_params<R: Rng>(
    hidden_size: usize,
    encoding: InputEncoding,
    rng: &mut R,
) -> Result<LstmParams> {
    let mut params = LstmParams::zeros(hidden_size, encoding)?;
    for gate in Gate::ALL {
        for w in params.wx_mut(gate) {
            *w = rng.gen_range(-0.1..=0.1);
        }
        for w in params.wh_mut(gate) {
            *w = rng.gen_range(-0.1..=0.1);
        }
    }
    for w in params.head_weights_mut() {
        *w = rng.gen_range(-0.1..=0.1);
    }
    for b in params.bias_mut(Gate::Forget) {
        *b = 1.0;
    }
    Ok(params)
}

/// Post-activation state of one unroll step.
#[derive(Debug, Clone)]
pub struct StepState {
    pub input_gate: Vec<f64>,
    pub forget_gate: Vec<f64>,
    pub output_gate: Vec<f64>,
    pub candidate: Vec<f64>,
    pub cell: Vec<f64>,
    pub hidden: Vec<f64>,
}

/// Everything `forward` computes, kept for inspection and BPTT.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub steps: Vec<StepState>,
    pub probability: f64,
}

fn step_cell(params: &LstmParams, features: &[f64], prev: Option<&StepState>) -> StepState {
    let h = params.hidden_size;
    let zero = vec![0.0; h];
    let (h_prev, c_prev) = match prev {
        Some(s) => (&s.hidden, &s.cell),
        None => (&zero, &zero),
    };
    let pre = |gate: Gate, j: usize| -> f64 {
        let d = params.encoding.dim();
        params.bias(gate)[j]
            + math::dot(&params.wx(gate)[j * d..(j + 1) * d], features)
            + math::dot(&params.wh(gate)[j * h..(j + 1) * h], h_prev)
    };
    let input_gate: Vec<f64> = (0..h).map(|j| math::sigmoid(pre(Gate::Input, j))).collect();
    let forget_gate: Vec<f64> = (0..h)
        .map(|j| math::sigmoid(pre(Gate::Forget, j)))
        .collect();
    let output_gate: Vec<f64> = (0..h)
        .map(|j| math::sigmoid(pre(Gate::Output, j)))
        .collect();
    let candidate: Vec<f64> = (0..h)
        .map(|j| math::tanh(pre(Gate::Candidate, j)))
        .collect();
    let cell: Vec<f64> = (0..h)
        .map(|j| forget_gate[j] * c_prev[j] + input_gate[j] * candidate[j])
        .collect();
    let hidden: Vec<f64> = (0..h)
        .map(|j| output_gate[j] * math::tanh(cell[j]))
        .collect();
    StepState {
        input_gate,
        forget_gate,
        output_gate,
        candidate,
        cell,
        hidden,
    }
}

fn head_probability(params: &LstmParams, hidden: &[f64]) -> f64 {
    math::sigmoid(math::dot(params.head_weights(), hidden) + params.head_bias())
}

/// Unrolls the cell over `bits` from zero initial state and reads the
/// class probability off the final hidden state.
pub fn forward(params: &LstmParams, bits: &Bitstring) -> Result<ForwardTrace> {
    params.assert_finite()?;
    let d = params.encoding.dim();
    let mut features = [0.0; 3];
    let mut steps = Vec::with_capacity(bits.len());
    for &trit in bits.values() {
        params.encoding.write_features(trit, &mut features[..d]);
        let state = step_cell(params, &features[..d], steps.last());
        steps.push(state);
    }
    let probability = head_probability(params, &steps.last().expect("bits nonempty").hidden);
    if !probability.is_finite() {
        return Err(Error::NonFinite(format!(
            "forward produced probability {probability}"
        )));
    }
    Ok(ForwardTrace { steps, probability })
}

/// The final probability alone. Same arithmetic as [`forward`], so the
/// two agree bit for bit.
pub fn probability(params: &LstmParams, bits: &Bitstring) -> Result<f64> {
    Ok(forward(params, bits)?.probability)
}

/// Probability clamp for the loss; keeps log() off the -inf rail when a
/// saturated sigmoid rounds to exactly 0 or 1.
pub const BCE_EPSILON: f64 = 1e-7;

/// Binary cross entropy of probability `p` against bit label `y`.
pub fn bce_loss(p: f64, y: u8) -> f64 {
    let p = p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
    if y == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Mean BCE over a batch via the per-example forward path. Diagnostic
/// and gradient-check companion to [`backward`], which differentiates
/// exactly this quantity.
pub fn mean_bce(params: &LstmParams, batch: &[LabeledExample]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut total = 0.0;
    for ex in batch {
        total += bce_loss(probability(params, &ex.bits)?, ex.label);
    }
    Ok(total / batch.len() as f64)
}

/// Gradient of the mean batch BCE, shaped and laid out like the
/// parameter vector it differentiates.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmGrads {
    hidden_size: usize,
    encoding: InputEncoding,
    data: Vec<f64>,
}

impl LstmGrads {
    fn zeros(hidden_size: usize, encoding: InputEncoding) -> Self {
        let layout = Layout {
            h: hidden_size,
            d: encoding.dim(),
        };
        Self {
            hidden_size,
            encoding,
            data: vec![0.0; layout.len()],
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden_size
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    fn add(&mut self, other: &LstmGrads) {
        math::axpy(&mut self.data, 1.0, &other.data);
    }

    fn scale(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }
}

/// BPTT gradient of the mean batch BCE, exact to rounding. Equal-length
/// batches take the batch-major kernel; ragged batches fall back to
/// averaging single-example gradients.
pub fn backward(params: &LstmParams, batch: &[LabeledExample]) -> Result<LstmGrads> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    params.assert_finite()?;
    let n = batch[0].bits.len();
    if batch.iter().all(|ex| ex.bits.len() == n) {
        return Ok(batched_kernel(params, batch));
    }
    let mut acc = LstmGrads::zeros(params.hidden_size, params.encoding);
    for ex in batch {
        acc.add(&batched_kernel(params, std::slice::from_ref(ex)));
    }
    acc.scale(1.0 / batch.len() as f64);
    Ok(acc)
}

/// Fills the four gate preactivation buffers (each [h x b], row j
/// holding unit j across the batch) for one timestep.
fn gate_preactivations(
    params: &LstmParams,
    xs_t: &[f64],
    h_prev: &[f64],
    b: usize,
    z: &mut [Vec<f64>; 4],
) {
    let layout = params.layout();
    let h = layout.h;
    let d = layout.d;
    for (zg, gate) in z.iter_mut().zip(Gate::ALL) {
        let wx = &params.data[layout.wx(gate)];
        let wh = &params.data[layout.wh(gate)];
        let bias = &params.data[layout.bias(gate)];
        for j in 0..h {
            let row = &mut zg[j * b..(j + 1) * b];
            row.fill(bias[j]);
            for di in 0..d {
                math::axpy(row, wx[j * d + di], &xs_t[di * b..(di + 1) * b]);
            }
            for k in 0..h {
                math::axpy(row, wh[j * h + k], &h_prev[k * b..(k + 1) * b]);
            }
        }
    }
}

fn map_sigmoid(buf: &mut [f64]) {
    for v in buf {
        *v = math::sigmoid(*v);
    }
}

fn map_tanh(buf: &mut [f64]) {
    for v in buf {
        *v = math::tanh(*v);
    }
}

/// Gathers timestep features into [d x b] batch-major rows.
fn gather_features(encoding: InputEncoding, examples: &[&Bitstring], n: usize) -> Vec<Vec<f64>> {
    let d = encoding.dim();
    let b = examples.len();
    let mut xs = vec![vec![0.0; d * b]; n];
    let mut features = [0.0; 3];
    for (bi, bits) in examples.iter().enumerate() {
        for (t, &trit) in bits.values().iter().enumerate() {
            encoding.write_features(trit, &mut features[..d]);
            for (di, &f) in features[..d].iter().enumerate() {
                xs[t][di * b + bi] = f;
            }
        }
    }
    xs
}

/// Forward + BPTT over one equal-length batch in batch-major form.
fn batched_kernel(params: &LstmParams, batch: &[LabeledExample]) -> LstmGrads {
    let layout = params.layout();
    let (h, d) = (layout.h, layout.d);
    let b = batch.len();
    let n = batch[0].bits.len();
    let bits: Vec<&Bitstring> = batch.iter().map(|ex| &ex.bits).collect();
    let xs = gather_features(params.encoding, &bits, n);

    let zeros_hb = vec![0.0; h * b];
    let mut gates: Vec<[Vec<f64>; 4]> = Vec::with_capacity(n);
    let mut cells: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut tanh_cells: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut hiddens: Vec<Vec<f64>> = Vec::with_capacity(n);

    for t in 0..n {
        let h_prev: &[f64] = if t == 0 { &zeros_hb } else { &hiddens[t - 1] };
        let c_prev: &[f64] = if t == 0 { &zeros_hb } else { &cells[t - 1] };
        let mut z: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; h * b]);
        gate_preactivations(params, &xs[t], h_prev, b, &mut z);
        let [mut zi, mut zf, mut zo, mut zg] = z;
        map_sigmoid(&mut zi);
        map_sigmoid(&mut zf);
        map_sigmoid(&mut zo);
        map_tanh(&mut zg);
        let mut cell = vec![0.0; h * b];
        for x in 0..h * b {
            cell[x] = zf[x] * c_prev[x] + zi[x] * zg[x];
        }
        let mut tc = cell.clone();
        map_tanh(&mut tc);
        let mut hidden = vec![0.0; h * b];
        for x in 0..h * b {
            hidden[x] = zo[x] * tc[x];
        }
        gates.push([zi, zf, zo, zg]);
        cells.push(cell);
        tanh_cells.push(tc);
        hiddens.push(hidden);
    }

    let head_w = &params.data[layout.head_w()];
    let head_b = params.data[layout.head_b()];
    let h_last = &hiddens[n - 1];
    let mut dz_out = vec![head_b; b];
    for j in 0..h {
        math::axpy(&mut dz_out, head_w[j], &h_last[j * b..(j + 1) * b]);
    }
    // p - y, scaled by 1/b: the head-preactivation gradient of mean BCE
    let inv_b = 1.0 / b as f64;
    for (v, ex) in dz_out.iter_mut().zip(batch) {
        *v = (math::sigmoid(*v) - f64::from(ex.label)) * inv_b;
    }

    let mut grads = LstmGrads::zeros(params.hidden_size, params.encoding);
    for j in 0..h {
        grads.data[layout.head_w()][j] = math::dot(&dz_out, &h_last[j * b..(j + 1) * b]);
    }
    grads.data[layout.head_b()] = math::sum(&dz_out);

    let mut dh = vec![0.0; h * b];
    for j in 0..h {
        for bi in 0..b {
            dh[j * b + bi] = head_w[j] * dz_out[bi];
        }
    }
    let mut dc = vec![0.0; h * b];
    let mut dz: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; h * b]);

    for t in (0..n).rev() {
        let [gi, gf, go, gg] = &gates[t];
        let tc = &tanh_cells[t];
        let c_prev: &[f64] = if t == 0 { &zeros_hb } else { &cells[t - 1] };
        let h_prev: &[f64] = if t == 0 { &zeros_hb } else { &hiddens[t - 1] };

        for x in 0..h * b {
            let d_out = dh[x] * tc[x];
            let d_cell = dc[x] + dh[x] * go[x] * (1.0 - tc[x] * tc[x]);
            let d_in = d_cell * gg[x];
            let d_forget = d_cell * c_prev[x];
            let d_cand = d_cell * gi[x];
            dz[0][x] = d_in * gi[x] * (1.0 - gi[x]);
            dz[1][x] = d_forget * gf[x] * (1.0 - gf[x]);
            dz[2][x] = d_out * go[x] * (1.0 - go[x]);
            dz[3][x] = d_cand * (1.0 - gg[x] * gg[x]);
            dc[x] = d_cell * gf[x];
        }

        for (dzg, gate) in dz.iter().zip(Gate::ALL) {
            let wx_r = layout.wx(gate);
            let wh_r = layout.wh(gate);
            let b_r = layout.bias(gate);
            for j in 0..h {
                let dzj = &dzg[j * b..(j + 1) * b];
                for di in 0..d {
                    grads.data[wx_r.clone()][j * d + di] +=
                        math::dot(dzj, &xs[t][di * b..(di + 1) * b]);
                }
                grads.data[b_r.clone()][j] += math::sum(dzj);
                if t > 0 {
                    let dwh = &mut grads.data[wh_r.clone()];
                    for k in 0..h {
                        dwh[j * h + k] += math::dot(dzj, &h_prev[k * b..(k + 1) * b]);
                    }
                }
            }
        }

        if t > 0 {
            dh.fill(0.0);
            for (dzg, gate) in dz.iter().zip(Gate::ALL) {
                let wh = &params.data[layout.wh(gate)];
                for j in 0..h {
                    let dzj = &dzg[j * b..(j + 1) * b];
                    for k in 0..h {
                        math::axpy(&mut dh[k * b..(k + 1) * b], wh[j * h + k], dzj);
                    }
                }
            }
        }
    }
    grads
}

/// Plain SGD: every parameter decremented by `lr` times its gradient.
pub fn sgd_step(params: &mut LstmParams, grads: &LstmGrads, lr: f64) -> Result<()> {
    if params.hidden_size != grads.hidden_size || params.encoding != grads.encoding {
        return Err(Error::ShapeMismatch {
            expected: params.num_params(),
            actual: grads.data.len(),
        });
    }
    if !lr.is_finite() || lr < 0.0 {
        return Err(Error::InvalidLearningRate(lr));
    }
    math::axpy(&mut params.data, -lr, &grads.data);
    Ok(())
}

/// Momentum variant: v <- momentum * v + g, theta <- theta - lr * v.
/// `velocity` must persist across steps and start at zero.
pub fn sgd_momentum_step(
    params: &mut LstmParams,
    grads: &LstmGrads,
    velocity: &mut [f64],
    lr: f64,
    momentum: f64,
) -> Result<()> {
    if params.hidden_size != grads.hidden_size
        || params.encoding != grads.encoding
        || velocity.len() != params.data.len()
    {
        return Err(Error::ShapeMismatch {
            expected: params.num_params(),
            actual: velocity.len().min(grads.data.len()),
        });
    }
    if !lr.is_finite() || lr < 0.0 {
        return Err(Error::InvalidLearningRate(lr));
    }
    for ((v, &g), p) in velocity.iter_mut().zip(&grads.data).zip(&mut params.data) {
        *v = momentum * *v + g;
        *p -= lr * *v;
    }
    Ok(())
}

/// Probabilities for an equal-length subset of `data` selected by `idx`,
/// batch-major and trace-free.
fn batched_probs(params: &LstmParams, data: &[LabeledExample], idx: &[usize]) -> Vec<f64> {
    let layout = params.layout();
    let h = layout.h;
    let b = idx.len();
    let n = data[idx[0]].bits.len();
    let bits: Vec<&Bitstring> = idx.iter().map(|&i| &data[i].bits).collect();
    let xs = gather_features(params.encoding, &bits, n);

    let mut h_prev = vec![0.0; h * b];
    let mut c_prev = vec![0.0; h * b];
    let mut z: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; h * b]);
    for t in 0..n {
        gate_preactivations(params, &xs[t], &h_prev, b, &mut z);
        let [zi, zf, zo, zg] = &mut z;
        map_sigmoid(zi);
        map_sigmoid(zf);
        map_sigmoid(zo);
        map_tanh(zg);
        for x in 0..h * b {
            c_prev[x] = zf[x] * c_prev[x] + zi[x] * zg[x];
            let tc = math::tanh(c_prev[x]);
            h_prev[x] = zo[x] * tc;
        }
    }

    let head_w = &params.data[layout.head_w()];
    let mut z_out = vec![params.data[layout.head_b()]; b];
    for j in 0..h {
        math::axpy(&mut z_out, head_w[j], &h_prev[j * b..(j + 1) * b]);
    }
    z_out.iter().map(|&v| math::sigmoid(v)).collect()
}

/// Chunk width for batched evaluation; keeps working buffers inside L2.
const EVAL_CHUNK: usize = 256;

/// Fraction of examples classified correctly at threshold 0.5, with the
/// boundary p = 0.5 predicting class 1. Examples are grouped by length
/// and evaluated through the batch-major kernel; the correct count is an
/// integer sum, so the result is independent of grouping or thread
/// scheduling.
pub fn accuracy(params: &LstmParams, data: &[LabeledExample]) -> Result<f64> {
    use rayon::prelude::*;

    if data.is_empty() {
        return Err(Error::EmptyBatch);
    }
    params.assert_finite()?;
    let mut by_length: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (i, ex) in data.iter().enumerate() {
        by_length.entry(ex.bits.len()).or_default().push(i);
    }
    let chunks: Vec<Vec<usize>> = by_length
        .values()
        .flat_map(|idx| idx.chunks(EVAL_CHUNK).map(<[usize]>::to_vec))
        .collect();
    let correct: usize = chunks
        .par_iter()
        .map(|idx| {
            batched_probs(params, data, idx)
                .iter()
                .zip(idx)
                .filter(|&(&p, &i)| (p >= 0.5) == (data[i].label == 1))
                .count()
        })
        .sum();
    Ok(correct as f64 / data.len() as f64)
}

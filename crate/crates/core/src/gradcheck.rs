//! Finite-difference verification of the BPTT gradients. The numeric
//! side goes through the per-example forward path, so the two gradient
//! computations share no unrolling code.

use crate::datagen::{make_labeled_batch, LabeledExample, SamplerSpec};
use crate::error::Result;
use crate::lstm::{self, InputEncoding, LstmParams};
use crate::rng::{substream, Purpose};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Floor in the relative-error denominator. Central differences on the
/// clamped BCE carry absolute noise around |L| * eps / step ~ 1e-11, so
/// below this magnitude the comparison is dominated by cancellation, not
/// by gradient bugs.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

/// Outcome of one or more gradient comparisons.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub instances: usize,
    pub params_checked: usize,
    pub max_rel_error: f64,
}

/// Numeric gradient of the mean batch BCE by central differences.
pub fn fd_gradient(params: &LstmParams, batch: &[LabeledExample], step: f64) -> Result<Vec<f64>> {
    let mut probe = params.clone();
    let mut grad = vec![0.0; params.num_params()];
    for i in 0..grad.len() {
        let original = probe.values()[i];
        probe.values_mut()[i] = original + step;
        let plus = lstm::mean_bce(&probe, batch)?;
        probe.values_mut()[i] = original - step;
        let minus = lstm::mean_bce(&probe, batch)?;
        probe.values_mut()[i] = original;
        grad[i] = (plus - minus) / (2.0 * step);
    }
    Ok(grad)
}

fn max_rel_error(numeric: &[f64], analytic: &[f64]) -> f64 {
    numeric
        .iter()
        .zip(analytic)
        .map(|(&n, &a)| (n - a).abs() / n.abs().max(a.abs()).max(REL_ERROR_FLOOR))
        .fold(0.0, f64::max)
}

/// Compares BPTT against central differences on one (params, batch)
/// instance and returns the worst relative error.
pub fn check_instance(params: &LstmParams, batch: &[LabeledExample], step: f64) -> Result<f64> {
    let analytic = lstm::backward(params, batch)?;
    let numeric = fd_gradient(params, batch, step)?;
    Ok(max_rel_error(&numeric, analytic.values()))
}

/// The standard verification suite: 20 random instances over
/// hidden_size in {2, 4} crossed with sequence length in {3, 8}, five
/// instances per combination, batch size 8.
pub fn standard_suite(master_seed: u64) -> Result<GradCheckReport> {
    let mut report = GradCheckReport {
        instances: 0,
        params_checked: 0,
        max_rel_error: 0.0,
    };
    for (combo, &(hidden, n)) in [(2usize, 3usize), (2, 8), (4, 3), (4, 8)]
        .iter()
        .enumerate()
    {
        for instance in 0..5 {
            let seed = master_seed
                .wrapping_add(1000 * combo as u64)
                .wrapping_add(instance as u64);
            let mut winit = substream(seed, Purpose::WeightInit);
            let params = lstm::init_params(hidden, InputEncoding::Scalar, &mut winit)?;
            let mut data = substream(seed, Purpose::Data);
            let batch = make_labeled_batch(&SamplerSpec::LatentCurriculum { n }, 8, &mut data)?;
            let err = check_instance(&params, &batch, FD_STEP)?;
            report.instances += 1;
            report.params_checked += params.num_params();
            report.max_rel_error = report.max_rel_error.max(err);
        }
    }
    Ok(report)
}

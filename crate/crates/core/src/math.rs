//! Scalar math kernels for the recurrent model.
//!
//! The training loop spends nearly all of its time in elementwise gate math
//! and short dot products, so the activations here are branch-free
//! polynomial implementations that the compiler can vectorize. They are
//! plain IEEE f64 arithmetic in a fixed evaluation order, which keeps run
//! results bit-reproducible across machines (libm's `exp`/`tanh` do not
//! guarantee that).

/// High/low split of ln(2) for accurate range reduction.
const LN2_HI: f64 = 0.693_147_180_369_123_8;
const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
const LOG2_E: f64 = std::f64::consts::LOG2_E;

/// exp(x) with ~1e-14 relative error, branch-free.
///
/// Range-reduces to exp(r)·2^k with |r| ≤ ln2/2, evaluates a degree-11
/// Taylor polynomial by Horner's rule, and rebuilds 2^k through the
/// exponent bits. Inputs are clamped to ±708 so the result never
/// overflows; beyond that exp has left f64 range anyway.
#[inline]
pub fn exp(x: f64) -> f64 {
    let x = x.clamp(-708.0, 708.0);
    let kf = (x * LOG2_E).round();
    let r = (x - kf * LN2_HI) - kf * LN2_LO;

    // Taylor coefficients 1/11! .. 1/2!, then the 1 + r tail.
    let mut p = 2.505_210_838_544_172e-8;
    p = p * r + 2.755_731_922_398_589_1e-7;
    p = p * r + 2.755_731_922_398_589e-6;
    p = p * r + 2.480_158_730_158_73e-5;
    p = p * r + 1.984_126_984_126_984_2e-4;
    p = p * r + 1.388_888_888_888_889e-3;
    p = p * r + 8.333_333_333_333_333e-3;
    p = p * r + 4.166_666_666_666_666_4e-2;
    p = p * r + 1.666_666_666_666_666_6e-1;
    p = p * r + 0.5;
    let poly = (p * r + 1.0) * r + 1.0;

    let scale = f64::from_bits(((kf as i64 + 1023) as u64) << 52);
    poly * scale
}

/// Logistic function 1 / (1 + e^(-x)).
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + exp(-x))
}

/// Hyperbolic tangent via (e^(2x) - 1) / (e^(2x) + 1).
#[inline]
pub fn tanh(x: f64) -> f64 {
    let t = exp(2.0 * x);
    (t - 1.0) / (t + 1.0)
}

/// y[i] += a * x[i]. Elementwise, so it vectorizes without reassociation.
#[inline]
pub fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

const LANES: usize = 8;

/// Dot product with eight independent accumulator lanes.
///
/// The lane structure is part of the result: summation order is fixed, so
/// the value is deterministic, while the independent lanes let the
/// reduction vectorize.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; LANES];
    let chunks = a.len() / LANES;
    for i in 0..chunks {
        let (av, bv) = (
            &a[i * LANES..(i + 1) * LANES],
            &b[i * LANES..(i + 1) * LANES],
        );
        for l in 0..LANES {
            acc[l] += av[l] * bv[l];
        }
    }
    let mut tail = 0.0;
    for i in chunks * LANES..a.len() {
        tail += a[i] * b[i];
    }
    let half = [
        acc[0] + acc[4],
        acc[1] + acc[5],
        acc[2] + acc[6],
        acc[3] + acc[7],
    ];
    ((half[0] + half[2]) + (half[1] + half[3])) + tail
}

/// Sum with the same deterministic lane structure as [`dot`].
#[inline]
pub fn sum(a: &[f64]) -> f64 {
    let mut acc = [0.0f64; LANES];
    let chunks = a.len() / LANES;
    for i in 0..chunks {
        let av = &a[i * LANES..(i + 1) * LANES];
        for l in 0..LANES {
            acc[l] += av[l];
        }
    }
    let mut tail = 0.0;
    for v in &a[chunks * LANES..] {
        tail += v;
    }
    let half = [
        acc[0] + acc[4],
        acc[1] + acc[5],
        acc[2] + acc[6],
        acc[3] + acc[7],
    ];
    ((half[0] + half[2]) + (half[1] + half[3])) + tail
}

//! End-to-end verification gate. Each test pins one guarantee of the
//! finished system, from exhaustive oracle agreement on the combinatorial
//! layers to the full-scale learning results, at fixed tolerances.
//!
//! The learning tests run real training and dominate the suite's runtime
//! (hours on one core); everything else finishes in seconds.

use std::sync::OnceLock;

use nimparity::datagen::{self, SamplerSpec};
use nimparity::experiment::{
    self, aggregate_by_length, max_noise_search, sweep_lengths, NoiseSearchOutcome,
    NoiseSearchSpec, SweepSpec,
};
use nimparity::gradcheck;
use nimparity::lstm::InputEncoding;
use nimparity::nim::{self, NimPosition};
use nimparity::noise::{self, NoiseSchedule};
use nimparity::rng::{substream, Purpose};
use nimparity::trainer::{train, RunRecord, TrainConfig};
use nimparity::Bitstring;

// ---------------------------------------------------------------- parity

/// Every trit string of length 1..=10, checked against a popcount oracle
/// that shares nothing with the library's parity implementation.
#[test]
fn parity_matches_popcount_oracle_exhaustively() {
    let mut checked = 0u64;
    for n in 1..=10usize {
        let mut values = vec![-1i8; n];
        loop {
            let mask: u32 = values
                .iter()
                .enumerate()
                .map(|(i, &v)| u32::from(v == 1) << i)
                .sum();
            let expected = (mask.count_ones() % 2) as u8;
            assert_eq!(
                Bitstring::new(values.clone()).unwrap().parity(),
                expected,
                "length {n}, values {values:?}"
            );
            checked += 1;
            // odometer increment over {-1, 0, 1}^n
            let mut pos = 0;
            loop {
                if pos == n {
                    break;
                }
                if values[pos] < 1 {
                    values[pos] += 1;
                    break;
                }
                values[pos] = -1;
                pos += 1;
            }
            if pos == n {
                break;
            }
        }
    }
    assert_eq!(checked, (3u64.pow(11) - 3) / 2); // sum of 3^n, n = 1..=10
}

// ------------------------------------------------------------------- nim

/// XOR-rule Grundy values against the independent mex recursion for every
/// position with up to 3 heaps of up to 6 counters, and the winning-move
/// generator nonempty exactly on the nonzero-Grundy positions.
#[test]
fn grundy_matches_mex_recursion_exhaustively() {
    let mut three_heap_positions = 0;
    for heap_count in 1..=3usize {
        let mut heaps = vec![0u32; heap_count];
        loop {
            let pos = NimPosition::new(heaps.clone());
            let fast = nim::grundy(&pos);
            let slow = nim::grundy_oracle(&pos).unwrap();
            assert_eq!(fast, slow, "heaps {heaps:?}");
            assert_eq!(nim::is_winning(&pos), fast != 0);
            if pos.is_terminal() {
                assert_eq!(fast, 0);
                assert!(nim::winning_moves(&pos).is_err());
            } else {
                let moves = nim::winning_moves(&pos).unwrap();
                assert_eq!(!moves.is_empty(), fast != 0, "heaps {heaps:?}");
                for (heap, take) in moves {
                    assert!(!nim::is_winning(&pos.apply_move(heap, take)));
                }
            }
            if heap_count == 3 {
                three_heap_positions += 1;
            }
            let mut idx = 0;
            loop {
                if idx == heap_count {
                    break;
                }
                if heaps[idx] < 6 {
                    heaps[idx] += 1;
                    break;
                }
                heaps[idx] = 0;
                idx += 1;
            }
            if idx == heap_count {
                break;
            }
        }
    }
    assert_eq!(three_heap_positions, 343);
}

/// Ten thousand trajectory-sampled boards at heaps [5,5,5], capacity 5:
/// the batch label must equal the game value of the decoded position.
#[test]
fn nim_trajectory_labels_match_game_value() {
    let spec = SamplerSpec::NimTrajectory {
        heaps: vec![5, 5, 5],
        capacity: 5,
        scrambled: false,
    };
    let mut rng = substream(2024, Purpose::Data);
    let batch = datagen::make_labeled_batch(&spec, 10_000, &mut rng).unwrap();
    assert_eq!(batch.len(), 10_000);
    for ex in &batch {
        let enc = nim::BoardEncoding::from_bits(5, ex.bits.clone()).unwrap();
        let pos = nim::decode_board(&enc).unwrap();
        assert_eq!(ex.label, u8::from(nim::is_winning(&pos)));
        assert!(!ex.label_is_corrupted);
    }
}

// ------------------------------------------------------------- gradients

/// BPTT against central finite differences (step 1e-5) on 20 fresh
/// instances across hidden sizes {2, 4} and lengths {3, 8}.
#[test]
fn bptt_matches_finite_differences() {
    let report = gradcheck::standard_suite(42).unwrap();
    assert_eq!(report.instances, 20);
    assert!(
        report.max_rel_error < 1e-4,
        "max relative error {}",
        report.max_rel_error
    );
}

// ----------------------------------------------------------------- noise

/// The corruption-rate formula on a fixed accuracy x rho0 grid, exactly,
/// and the exact-count guarantee of the corruptor across 1000 seeded
/// calls at every tested rate.
#[test]
fn noise_schedule_and_corruption_counts_are_exact() {
    for &rho0 in &[0.0f64, 0.05, 0.45] {
        let schedule = NoiseSchedule::new(rho0).unwrap();
        for &acc in &[0.0f64, 0.25, 0.5, 0.51, 0.75, 1.0] {
            let expected = if acc <= 0.5 {
                rho0
            } else {
                2.0 * rho0 * (1.0 - acc)
            };
            assert_eq!(noise::noise_rate(schedule, acc).unwrap(), expected);
        }
    }

    let mut data_rng = substream(99, Purpose::Data);
    let clean =
        datagen::make_labeled_batch(&SamplerSpec::Uniform01 { n: 8 }, 128, &mut data_rng).unwrap();
    for &rho in &[0.0f64, 0.05, 0.5, 1.0] {
        let expected = (rho * 128.0).round_ties_even() as usize;
        let mut noise_rng = substream(99, Purpose::Noise);
        for _ in 0..1000 {
            let mut batch = clean.clone();
            let flips = noise::corrupt_labels(&mut batch, rho, &mut noise_rng).unwrap();
            assert_eq!(flips, expected);
            assert_eq!(
                batch.iter().filter(|ex| ex.label_is_corrupted).count(),
                expected
            );
            for (before, after) in clean.iter().zip(&batch) {
                assert_eq!(before.bits, after.bits);
            }
        }
    }
}

// -------------------------------------------------------------- learning

fn full_scale_sweep() -> &'static Vec<RunRecord> {
    static SWEEP: OnceLock<Vec<RunRecord>> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let mut base = TrainConfig::new(SamplerSpec::LatentCurriculum { n: 10 }, 0.0, 0);
        base.max_steps = 300_000;
        let spec = SweepSpec {
            lengths: vec![10, 20],
            seeds: (1..=10).collect(),
            base,
            parallelism: None,
        };
        sweep_lengths(&spec).unwrap()
    })
}

/// Noiseless latent-curriculum training at the protocol scale (hidden 16,
/// batch 128, default learning rate, 300k-step budget, seeds 1-10):
/// every seed succeeds at length 10 and at least 8 of 10 at length 20.
#[test]
fn length_sweep_succeeds_at_protocol_scale() {
    let aggregates = aggregate_by_length(full_scale_sweep()).unwrap();
    assert_eq!(aggregates.len(), 2);
    assert_eq!(aggregates[0].length, 10);
    assert_eq!(aggregates[0].runs, 10);
    assert_eq!(
        aggregates[0].success_count, 10,
        "length 10 aggregates: {aggregates:?}"
    );
    assert_eq!(aggregates[1].length, 20);
    assert_eq!(aggregates[1].runs, 10);
    assert!(
        aggregates[1].success_count >= 8,
        "length 20 aggregates: {aggregates:?}"
    );
}

/// Over the seeds that succeed at both lengths, the median number of
/// steps to success grows with the string length.
#[test]
fn longer_strings_need_more_steps() {
    let records = full_scale_sweep();
    let steps_for = |length: usize, seed: u64| -> Option<u64> {
        records
            .iter()
            .find(|r| r.config.sweep_length() == Some(length) && r.seed == seed)
            .and_then(|r| r.steps_to_success)
    };
    let mut at_10 = Vec::new();
    let mut at_20 = Vec::new();
    for seed in 1..=10 {
        if let (Some(a), Some(b)) = (steps_for(10, seed), steps_for(20, seed)) {
            at_10.push(a);
            at_20.push(b);
        }
    }
    assert!(at_10.len() >= 2, "too few seeds succeeded at both lengths");
    at_10.sort_unstable();
    at_20.sort_unstable();
    let median_10 = experiment::median(&at_10).unwrap();
    let median_20 = experiment::median(&at_20).unwrap();
    assert!(
        median_20 > median_10,
        "median steps: length 10 -> {median_10}, length 20 -> {median_20}"
    );
}

/// The maximum tolerated initial noise fraction, searched on a 0.05 grid
/// under the majority rule with the 300k budget, is nonincreasing in
/// string length and at least 0.15 at length 10.
#[test]
fn tolerated_noise_shrinks_with_length() {
    let mut base = TrainConfig::new(SamplerSpec::LatentCurriculum { n: 10 }, 0.0, 0);
    base.max_steps = 300_000;
    let mut outcomes: Vec<NoiseSearchOutcome> = Vec::new();
    for length in [10usize, 15, 20] {
        let spec = NoiseSearchSpec {
            length,
            seeds: (1..=5).collect(),
            granularity: 0.05,
            success_rule: 0.5,
            base: base.clone(),
        };
        outcomes.push(max_noise_search(&spec).unwrap());
    }
    let rho_max: Vec<f64> = outcomes.iter().map(|o| o.rho_max).collect();
    assert!(
        rho_max[0] >= 0.15,
        "length 10 tolerated rho0 {} (grid {:?})",
        rho_max[0],
        outcomes[0].grid
    );
    assert!(
        rho_max[0] >= rho_max[1] && rho_max[1] >= rho_max[2],
        "rho_max by length: {rho_max:?}"
    );
}

// ----------------------------------------------------------- determinism

/// Repeating any train, sweep, or noise-search invocation with the same
/// config and seeds reproduces the records, the search outcome, and the
/// exported CSVs byte for byte (wall time excluded).
#[test]
fn repeated_invocations_are_byte_identical() {
    let mut base = TrainConfig::new(SamplerSpec::LatentCurriculum { n: 4 }, 0.1, 0);
    base.batch_size = 32;
    base.max_steps = 2_000;
    base.eval_interval = 200;
    base.test_set_size = 300;
    base.hidden_size = 8;
    base.lr = 0.3;

    let mut single = base.clone();
    single.master_seed = 5;
    let (record_a, _) = train(&single).unwrap();
    let (record_b, _) = train(&single).unwrap();
    let bytes = |r: &RunRecord| serde_json::to_vec(&r.canonical()).unwrap();
    assert_eq!(bytes(&record_a), bytes(&record_b));
    assert!(record_a.wall_time_secs.is_some());

    let sweep = SweepSpec {
        lengths: vec![2, 4],
        seeds: vec![1, 2, 3],
        base: base.clone(),
        parallelism: None,
    };
    let runs_a = sweep_lengths(&sweep).unwrap();
    let runs_b = sweep_lengths(&sweep).unwrap();
    let all_bytes = |rs: &[RunRecord]| {
        serde_json::to_vec(&rs.iter().map(RunRecord::canonical).collect::<Vec<_>>()).unwrap()
    };
    assert_eq!(all_bytes(&runs_a), all_bytes(&runs_b));

    let dir = tempfile::tempdir().unwrap();
    let csv = |name: &str, records: &[RunRecord]| {
        let path = dir.path().join(name);
        nimparity::export::write_fig1b_csv(records, &path).unwrap();
        std::fs::read(path).unwrap()
    };
    assert_eq!(csv("a.csv", &runs_a), csv("b.csv", &runs_b));

    let agg_a = aggregate_by_length(&runs_a).unwrap();
    let agg_b = aggregate_by_length(&runs_b).unwrap();
    let agg_csv = |name: &str, aggs| {
        let path = dir.path().join(name);
        nimparity::export::write_fig1a_csv(aggs, &path).unwrap();
        std::fs::read(path).unwrap()
    };
    assert_eq!(agg_csv("agg_a.csv", &agg_a), agg_csv("agg_b.csv", &agg_b));

    let search = NoiseSearchSpec {
        length: 2,
        seeds: vec![1, 2, 3],
        granularity: 0.5,
        success_rule: 0.5,
        base,
    };
    let out_a = max_noise_search(&search).unwrap();
    let out_b = max_noise_search(&search).unwrap();
    assert_eq!(
        serde_json::to_vec(&out_a).unwrap(),
        serde_json::to_vec(&out_b).unwrap()
    );
    let fig3 = |name: &str, out: &NoiseSearchOutcome| {
        let path = dir.path().join(name);
        nimparity::export::write_fig3_csv(std::slice::from_ref(out), &path).unwrap();
        std::fs::read(path).unwrap()
    };
    assert_eq!(fig3("f3a.csv", &out_a), fig3("f3b.csv", &out_b));
}

// A smoke check that the default protocol config is what the learning
// tests above claim to exercise.
#[test]
fn protocol_defaults_are_pinned() {
    let config = TrainConfig::new(SamplerSpec::LatentCurriculum { n: 10 }, 0.0, 1);
    assert_eq!(config.batch_size, 128);
    assert_eq!(config.hidden_size, 16);
    assert_eq!(config.lr, 0.2);
    assert_eq!(config.success_threshold, 0.95);
    assert_eq!(config.eval_interval, 1_000);
    assert_eq!(config.test_set_size, 10_000);
    assert_eq!(config.max_steps, 7_500_000);
    assert_eq!(config.encoding, InputEncoding::Scalar);
}

//! Multi-seed orchestration: length sweeps and the maximum-noise grid
//! search. Runs share nothing mutable, schedule in canonical
//! (length, seed) order, and report in that order regardless of which
//! worker finishes first.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trainer::{train, Outcome, RunRecord, TrainConfig};

/// A Figure-1-style sweep: every length crossed with every seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub lengths: Vec<usize>,
    pub seeds: Vec<u64>,
    pub base: TrainConfig,
    /// Maximum concurrent runs; None uses one worker per core.
    #[serde(default)]
    pub parallelism: Option<usize>,
}

impl SweepSpec {
    fn validate(&self) -> Result<()> {
        if self.lengths.is_empty() || self.lengths.iter().any(|&n| n == 0) {
            return Err(Error::InvalidConfig(
                "lengths must be nonempty, each >= 1".into(),
            ));
        }
        if self.parallelism == Some(0) {
            return Err(Error::InvalidConfig(
                "parallelism must be >= 1 when set".into(),
            ));
        }
        validate_seeds(&self.seeds)?;
        self.base.validate()
    }
}

fn validate_seeds(seeds: &[u64]) -> Result<()> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("seed list must be nonempty".into()));
    }
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != seeds.len() {
        return Err(Error::InvalidConfig("seed list must be distinct".into()));
    }
    Ok(())
}

/// One run per (length, seed) pair, in that nesting order. Aborted runs
/// are recorded like any other; only configuration errors stop a sweep.
/// Records come back in job order no matter which worker finishes first.
pub fn sweep_lengths(spec: &SweepSpec) -> Result<Vec<RunRecord>> {
    spec.validate()?;
    let mut jobs = Vec::with_capacity(spec.lengths.len() * spec.seeds.len());
    for &length in &spec.lengths {
        let sampler = spec.base.sampler.with_length(length)?;
        for &seed in &spec.seeds {
            let mut config = spec.base.clone();
            config.sampler = sampler.clone();
            config.master_seed = seed;
            jobs.push(config);
        }
    }
    let run_all = || {
        jobs.par_iter()
            .map(|config| train(config).map(|(record, _)| record))
            .collect()
    };
    match spec.parallelism {
        None => run_all(),
        Some(workers) => rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?
            .install(run_all),
    }
}

/// Per-length summary of a sweep: the quantities the figures plot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthAggregate {
    pub length: usize,
    pub runs: usize,
    pub success_count: usize,
    /// Median steps_to_success over successful runs; None when none
    /// succeeded.
    pub median_steps: Option<f64>,
}

/// Groups records by swept length, in ascending length order.
pub fn aggregate_by_length(records: &[RunRecord]) -> Result<Vec<LengthAggregate>> {
    if records.is_empty() {
        return Err(Error::EmptyExport("no run records to aggregate"));
    }
    let mut by_length: std::collections::BTreeMap<usize, Vec<&RunRecord>> = Default::default();
    for record in records {
        let length = record
            .config
            .sweep_length()
            .ok_or(Error::NoSweepLength("nim_trajectory"))?;
        by_length.entry(length).or_default().push(record);
    }
    Ok(by_length
        .into_iter()
        .map(|(length, group)| {
            let mut steps: Vec<u64> = group.iter().filter_map(|r| r.steps_to_success).collect();
            steps.sort_unstable();
            LengthAggregate {
                length,
                runs: group.len(),
                success_count: steps.len(),
                median_steps: median(&steps),
            }
        })
        .collect())
}

/// Median of a sorted slice; even counts average the middle pair.
pub fn median(sorted: &[u64]) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let mid = sorted.len() / 2;
    Some(if sorted.len() % 2 == 1 {
        sorted[mid] as f64
    } else {
        (sorted[mid - 1] as f64 + sorted[mid] as f64) / 2.0
    })
}

/// The Figure-3 question for one length: how much initial noise the
/// model tolerates while still succeeding on enough seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseSearchSpec {
    pub length: usize,
    pub seeds: Vec<u64>,
    /// Grid spacing for rho0.
    pub granularity: f64,
    /// Minimum fraction of seeds that must succeed for a grid point to
    /// pass; 0.5 is the majority rule.
    pub success_rule: f64,
    pub base: TrainConfig,
}

impl NoiseSearchSpec {
    fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::InvalidConfig("length must be >= 1".into()));
        }
        if !(self.granularity > 0.0 && self.granularity <= 0.5) {
            return Err(Error::InvalidConfig(format!(
                "granularity must lie in (0, 0.5], got {}",
                self.granularity
            )));
        }
        if !(self.success_rule > 0.0 && self.success_rule <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "success_rule must lie in (0, 1], got {}",
                self.success_rule
            )));
        }
        validate_seeds(&self.seeds)?;
        self.base.validate()
    }
}

/// What happened at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPointResult {
    pub rho0: f64,
    pub successes: usize,
    pub failures: usize,
    /// Seeds actually run; the point is decided as soon as the required
    /// success count is reached or becomes unreachable.
    pub runs_executed: usize,
    pub passed: bool,
}

/// Result of the ascending grid search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSearchOutcome {
    pub length: usize,
    pub granularity: f64,
    pub success_rule: f64,
    pub rho_max: f64,
    pub grid: Vec<GridPointResult>,
}

/// Walks rho0 up the grid {0, g, 2g, ...} (capped at 1) and stops at the
/// first point where too few seeds succeed. Returns the last passing
/// point, or 0 when even noiseless training fails. Seeds are tried in
/// order within a point and the point is decided early once its verdict
/// is fixed, which keeps the search affordable without changing the
/// answer.
pub fn max_noise_search(spec: &NoiseSearchSpec) -> Result<NoiseSearchOutcome> {
    spec.validate()?;
    let sampler = spec.base.sampler.with_length(spec.length)?;
    let total = spec.seeds.len();
    let needed = ((spec.success_rule * total as f64).ceil() as usize).max(1);

    let mut grid = Vec::new();
    let mut rho_max = 0.0;
    for k in 0.. {
        // clear accumulated float crumbs so grid values print cleanly
        let rho0 = ((k as f64 * spec.granularity) * 1e10).round() / 1e10;
        if rho0 > 1.0 {
            break;
        }
        let mut point = GridPointResult {
            rho0,
            successes: 0,
            failures: 0,
            runs_executed: 0,
            passed: false,
        };
        for &seed in &spec.seeds {
            let mut config = spec.base.clone();
            config.sampler = sampler.clone();
            config.rho0 = rho0;
            config.master_seed = seed;
            let (record, _) = train(&config)?;
            point.runs_executed += 1;
            match record.outcome {
                Outcome::Success => point.successes += 1,
                Outcome::Failure | Outcome::Aborted => point.failures += 1,
            }
            let remaining = total - point.runs_executed;
            if point.successes >= needed || point.successes + remaining < needed {
                break;
            }
        }
        point.passed = point.successes >= needed;
        let passed = point.passed;
        grid.push(point);
        if !passed {
            break;
        }
        rho_max = rho0;
    }

    Ok(NoiseSearchOutcome {
        length: spec.length,
        granularity: spec.granularity,
        success_rule: spec.success_rule,
        rho_max,
        grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::SamplerSpec;

    // Hot learning rate so the short-budget runs in this module converge;
    // at length <= 4 it is stable and several times faster than the default.
    fn tiny_base() -> TrainConfig {
        let mut config = TrainConfig::new(SamplerSpec::LatentCurriculum { n: 4 }, 0.0, 0);
        config.batch_size = 32;
        config.max_steps = 6_000;
        config.eval_interval = 200;
        config.test_set_size = 400;
        config.hidden_size = 8;
        config.lr = 0.3;
        config
    }

    #[test]
    fn sweep_produces_the_cartesian_product() {
        let spec = SweepSpec {
            lengths: vec![2, 3],
            seeds: vec![1, 2, 3],
            parallelism: None,
            base: {
                let mut b = tiny_base();
                b.max_steps = 100;
                b.eval_interval = 100;
                b.test_set_size = 50;
                b
            },
        };
        let records = sweep_lengths(&spec).unwrap();
        assert_eq!(records.len(), 6);
        let keys: Vec<(usize, u64)> = records
            .iter()
            .map(|r| (r.config.sweep_length().unwrap(), r.seed))
            .collect();
        assert_eq!(keys, vec![(2, 1), (2, 2), (2, 3), (3, 1), (3, 2), (3, 3)]);
    }

    #[test]
    fn sweep_is_reproducible() {
        let spec = SweepSpec {
            lengths: vec![3],
            seeds: vec![5, 6],
            parallelism: None,
            base: {
                let mut b = tiny_base();
                b.max_steps = 400;
                b.test_set_size = 100;
                b
            },
        };
        let a = sweep_lengths(&spec).unwrap();
        let b = sweep_lengths(&spec).unwrap();
        let canon = |rs: &[RunRecord]| rs.iter().map(RunRecord::canonical).collect::<Vec<_>>();
        assert_eq!(canon(&a), canon(&b));
    }

    #[test]
    fn aggregates_ignore_seed_order() {
        let mut spec = SweepSpec {
            lengths: vec![2, 4],
            seeds: vec![1, 2, 3, 4],
            base: tiny_base(),
            parallelism: None,
        };
        let forward = aggregate_by_length(&sweep_lengths(&spec).unwrap()).unwrap();
        spec.seeds = vec![4, 2, 3, 1];
        let shuffled = aggregate_by_length(&sweep_lengths(&spec).unwrap()).unwrap();
        assert_eq!(forward, shuffled);
        assert_eq!(forward.len(), 2);
        assert_eq!(forward[0].length, 2);
        assert_eq!(forward[1].length, 4);
        assert!(forward.iter().all(|a| a.runs == 4));
    }

    #[test]
    fn worker_count_never_changes_results() {
        let mut spec = SweepSpec {
            lengths: vec![2, 3],
            seeds: vec![1, 2],
            base: {
                let mut b = tiny_base();
                b.max_steps = 300;
                b.test_set_size = 100;
                b
            },
            parallelism: Some(1),
        };
        let serial = sweep_lengths(&spec).unwrap();
        spec.parallelism = Some(2);
        let pooled = sweep_lengths(&spec).unwrap();
        let canon = |rs: &[RunRecord]| rs.iter().map(RunRecord::canonical).collect::<Vec<_>>();
        assert_eq!(canon(&serial), canon(&pooled));

        spec.parallelism = Some(0);
        assert!(sweep_lengths(&spec).is_err());
    }

    #[test]
    fn median_definition() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[7]), Some(7.0));
        assert_eq!(median(&[1, 3]), Some(2.0));
        assert_eq!(median(&[1, 3, 10]), Some(3.0));
        assert_eq!(median(&[1, 3, 10, 11]), Some(6.5));
    }

    #[test]
    fn grid_values_are_exact_multiples() {
        // an impossible budget fails immediately at rho0 = 0
        let spec = NoiseSearchSpec {
            length: 12,
            seeds: vec![1, 2],
            granularity: 0.05,
            success_rule: 0.5,
            base: {
                let mut b = tiny_base();
                b.max_steps = 100;
                b.eval_interval = 100;
                b.test_set_size = 100;
                b
            },
        };
        let outcome = max_noise_search(&spec).unwrap();
        assert_eq!(outcome.rho_max, 0.0);
        assert_eq!(outcome.grid.len(), 1);
        assert_eq!(outcome.grid[0].rho0, 0.0);
        assert!(!outcome.grid[0].passed);
    }

    #[test]
    fn search_walks_up_until_failure() {
        // length 2 parity is learnable fast even under heavy noise, so
        // use a coarse grid and let the 1.0 cap terminate the walk
        let spec = NoiseSearchSpec {
            length: 2,
            seeds: vec![1, 2, 3],
            granularity: 0.5,
            success_rule: 0.5,
            base: {
                let mut b = tiny_base();
                b.max_steps = 2_000;
                b.test_set_size = 200;
                b
            },
        };
        let outcome = max_noise_search(&spec).unwrap();
        assert!(
            outcome.grid[0].passed,
            "noiseless length-2 run must succeed"
        );
        assert!(outcome.rho_max > 0.0 || outcome.grid.len() == 2);
        for (k, point) in outcome.grid.iter().enumerate() {
            assert_eq!(point.rho0, k as f64 * 0.5);
        }
        // every point but possibly the last passed; the walk stops at
        // the first failure or the top of the grid
        for point in &outcome.grid[..outcome.grid.len() - 1] {
            assert!(point.passed);
        }
    }

    #[test]
    fn early_decision_never_changes_the_verdict() {
        let spec = NoiseSearchSpec {
            length: 3,
            seeds: vec![1, 2, 3, 4, 5],
            granularity: 0.5,
            success_rule: 0.5,
            base: {
                let mut b = tiny_base();
                b.max_steps = 1_500;
                b.test_set_size = 200;
                b
            },
        };
        let outcome = max_noise_search(&spec).unwrap();
        for point in &outcome.grid {
            // 5 seeds, majority 3: decided within at most 5 runs, and
            // the verdict matches the counts actually observed
            assert!(point.runs_executed <= 5);
            assert_eq!(point.passed, point.successes >= 3);
            assert_eq!(point.successes + point.failures, point.runs_executed);
        }
    }

    #[test]
    fn specs_validate() {
        let base = tiny_base();
        assert!(sweep_lengths(&SweepSpec {
            lengths: vec![],
            seeds: vec![1],
            base: base.clone(),
            parallelism: None
        })
        .is_err());
        assert!(sweep_lengths(&SweepSpec {
            lengths: vec![2],
            seeds: vec![1, 1],
            base: base.clone(),
            parallelism: None
        })
        .is_err());
        let bad = NoiseSearchSpec {
            length: 4,
            seeds: vec![1],
            granularity: 0.0,
            success_rule: 0.5,
            base: base.clone(),
        };
        assert!(max_noise_search(&bad).is_err());
        let bad = NoiseSearchSpec {
            length: 4,
            seeds: vec![1],
            granularity: 0.05,
            success_rule: 1.5,
            base,
        };
        assert!(max_noise_search(&bad).is_err());
    }
}

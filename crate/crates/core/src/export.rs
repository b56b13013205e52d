//! Plot-data and log emission: per-figure CSVs and an append-only JSONL
//! record log. Output ordering is canonical so identical inputs yield
//! byte-identical files.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiment::{LengthAggregate, NoiseSearchOutcome};
use crate::trainer::RunRecord;

/// Success counts per length: one row per distinct length, ascending.
pub fn write_fig1a_csv(aggregates: &[LengthAggregate], path: &Path) -> Result<()> {
    if aggregates.is_empty() {
        return Err(Error::EmptyExport(
            "no aggregates for the success-count table",
        ));
    }
    let mut out = String::from("length,success_count\n");
    let mut sorted: Vec<&LengthAggregate> = aggregates.iter().collect();
    sorted.sort_by_key(|a| a.length);
    for agg in sorted {
        out.push_str(&format!("{},{}\n", agg.length, agg.success_count));
    }
    write_file(path, &out)
}

/// Steps-to-success per successful run: one row per (length, seed).
pub fn write_fig1b_csv(records: &[RunRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::EmptyExport("no run records for the steps table"));
    }
    let mut rows = Vec::new();
    for record in records {
        let length = record
            .config
            .sweep_length()
            .ok_or(Error::NoSweepLength("nim_trajectory"))?;
        if let Some(steps) = record.steps_to_success {
            rows.push((length, record.seed, steps));
        }
    }
    rows.sort_unstable();
    let mut out = String::from("length,seed,steps_to_success\n");
    for (length, seed, steps) in rows {
        out.push_str(&format!("{length},{seed},{steps}\n"));
    }
    write_file(path, &out)
}

/// Maximum tolerated noise per length: one row per search outcome.
pub fn write_fig3_csv(outcomes: &[NoiseSearchOutcome], path: &Path) -> Result<()> {
    if outcomes.is_empty() {
        return Err(Error::EmptyExport("no search outcomes for the noise table"));
    }
    let mut sorted: Vec<&NoiseSearchOutcome> = outcomes.iter().collect();
    sorted.sort_by_key(|o| o.length);
    let mut out = String::from("length,rho_max\n");
    for outcome in sorted {
        out.push_str(&format!("{},{}\n", outcome.length, outcome.rho_max));
    }
    write_file(path, &out)
}

/// Appends one canonical (wall-time-free) JSON document per record.
/// The log is append-only: existing lines are never rewritten.
pub fn append_records_jsonl(records: &[RunRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::EmptyExport("no run records to log"));
    }
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    for record in records {
        let line = serde_json::to_string(&record.canonical())?;
        writeln!(file, "{line}")?;
    }
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut file = File::create(path)?;
    file.write_all(contents.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::SamplerSpec;
    use crate::experiment::{aggregate_by_length, sweep_lengths, SweepSpec};
    use crate::trainer::TrainConfig;

    fn tiny_records() -> Vec<RunRecord> {
        let mut base = TrainConfig::new(SamplerSpec::LatentCurriculum { n: 2 }, 0.0, 0);
        base.batch_size = 16;
        base.max_steps = 600;
        base.eval_interval = 100;
        base.test_set_size = 100;
        base.hidden_size = 4;
        sweep_lengths(&SweepSpec {
            lengths: vec![2, 3],
            seeds: vec![1, 2],
            base,
            parallelism: None,
        })
        .unwrap()
    }

    #[test]
    fn fig1a_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fig1a.csv");
        let records = tiny_records();
        let aggregates = aggregate_by_length(&records).unwrap();
        write_fig1a_csv(&aggregates, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("length,success_count"));
        let rows: Vec<(usize, usize)> = lines
            .map(|l| {
                let (a, b) = l.split_once(',').unwrap();
                (a.parse().unwrap(), b.parse().unwrap())
            })
            .collect();
        assert_eq!(rows.len(), aggregates.len());
        for (row, agg) in rows.iter().zip(&aggregates) {
            assert_eq!(*row, (agg.length, agg.success_count));
        }
    }

    #[test]
    fn fig1b_lists_only_successes_in_canonical_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fig1b.csv");
        let records = tiny_records();
        write_fig1b_csv(&records, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let expected_rows = records
            .iter()
            .filter(|r| r.steps_to_success.is_some())
            .count();
        assert_eq!(text.lines().count(), expected_rows + 1);
        let keys: Vec<(usize, u64)> = text
            .lines()
            .skip(1)
            .map(|l| {
                let mut parts = l.split(',');
                let length = parts.next().unwrap().parse().unwrap();
                let seed = parts.next().unwrap().parse().unwrap();
                let steps: u64 = parts.next().unwrap().parse().unwrap();
                assert!(steps > 0);
                (length, seed)
            })
            .collect();
        let mut sorted = keys.clone();
        sorted.sort_unstable();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn fig3_orders_by_length() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fig3.csv");
        let outcomes = vec![
            NoiseSearchOutcome {
                length: 20,
                granularity: 0.05,
                success_rule: 0.5,
                rho_max: 0.15,
                grid: vec![],
            },
            NoiseSearchOutcome {
                length: 10,
                granularity: 0.05,
                success_rule: 0.5,
                rho_max: 0.3,
                grid: vec![],
            },
        ];
        write_fig3_csv(&outcomes, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "length,rho_max\n10,0.3\n20,0.15\n");
    }

    #[test]
    fn jsonl_log_appends_parseable_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("runs.jsonl");
        let records = tiny_records();
        append_records_jsonl(&records, &path).unwrap();
        append_records_jsonl(&records[..1], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), records.len() + 1);
        for line in &lines {
            let parsed: RunRecord = serde_json::from_str(line).unwrap();
            assert_eq!(parsed.wall_time_secs, None);
        }
    }

    #[test]
    fn empty_inputs_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            write_fig1a_csv(&[], &dir.path().join("a.csv")),
            Err(Error::EmptyExport(_))
        ));
        assert!(matches!(
            write_fig1b_csv(&[], &dir.path().join("b.csv")),
            Err(Error::EmptyExport(_))
        ));
        assert!(matches!(
            write_fig3_csv(&[], &dir.path().join("c.csv")),
            Err(Error::EmptyExport(_))
        ));
        assert!(matches!(
            append_records_jsonl(&[], &dir.path().join("d.jsonl")),
            Err(Error::EmptyExport(_))
        ));
    }
}

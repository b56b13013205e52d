//! `nimparity`, the command-line harness over the library: game queries,
//! data sampling, gradient verification, training runs, multi-seed
//! sweeps, the maximum-noise search, and CSV export.

mod config;

use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use nimparity::datagen::{self, SamplerSpec};
use nimparity::experiment::{
    aggregate_by_length, max_noise_search, sweep_lengths, NoiseSearchOutcome, NoiseSearchSpec,
    SweepSpec,
};
use nimparity::nim::{self, BoardEncoding, NimPosition};
use nimparity::rng::{substream, Purpose};
use nimparity::trainer::{train, Outcome, RunRecord};
use nimparity::{checkpoint, export, gradcheck, Bitstring};

use config::{
    load_config_file, parse_seed_list, parse_trits, parse_u32_list, parse_usize_list,
    resolve_out_dir, Overlay,
};

#[derive(Parser)]
#[command(
    name = "nimparity",
    version,
    about = "Parity learning and Nim experiment harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parity and Hamming weight of a trit string
    Parity {
        /// Trits, e.g. "1,0,-1,1" or "1 0 -1 1"
        trits: String,
    },
    /// Nim game queries
    Nim {
        #[command(subcommand)]
        action: NimAction,
    },
    /// Dataset inspection
    Datagen {
        #[command(subcommand)]
        action: DatagenAction,
    },
    /// Verify BPTT gradients against finite differences
    Gradcheck {
        /// Master seed for the generated instances
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Maximum tolerated relative error
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
    /// One training run
    Train {
        #[command(flatten)]
        knobs: TrainKnobs,
        /// Also write the final parameters next to the record
        #[arg(long)]
        save_params: bool,
    },
    /// One run per (length, seed) pair, plus figure CSVs
    Sweep {
        #[command(flatten)]
        knobs: TrainKnobs,
        /// Lengths to sweep, e.g. "10,15,20"
        #[arg(long)]
        lengths: String,
        /// Seeds: "1,2,3" or inclusive range "1..10"
        #[arg(long, default_value = "1..10")]
        seeds: String,
        /// Max concurrent runs (default: one per core)
        #[arg(long)]
        parallelism: Option<usize>,
    },
    /// Largest initial noise fraction that still learns, per length
    NoiseSearch {
        #[command(flatten)]
        knobs: TrainKnobs,
        /// Lengths to search, e.g. "10,15,20"
        #[arg(long)]
        lengths: String,
        /// Seeds: "1,2,3" or inclusive range "1..10"
        #[arg(long, default_value = "1..10")]
        seeds: String,
        /// Grid spacing for the searched rho0
        #[arg(long, default_value_t = 0.05)]
        granularity: f64,
        /// Fraction of seeds that must succeed at a grid point
        #[arg(long, default_value_t = 0.5)]
        success_rule: f64,
    },
    /// Regenerate figure CSVs from stored records
    Export {
        /// JSONL log of run records
        #[arg(long)]
        records: Option<PathBuf>,
        /// Noise-search outcome JSON files (repeatable)
        #[arg(long)]
        search: Vec<PathBuf>,
        /// Output directory for the CSVs
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum NimAction {
    /// Grundy value, win/loss, and the winning moves of a position
    Eval {
        /// Heap sizes, e.g. "3,5,7"; omit when decoding --bits
        #[arg(long)]
        heaps: Option<String>,
        /// Trit-string encoding to decode instead of --heaps
        #[arg(long, conflicts_with = "heaps")]
        bits: Option<String>,
        /// Per-heap capacity; required with --bits, optional with --heaps
        /// to also print the board encoding
        #[arg(long)]
        capacity: Option<u32>,
    },
}

#[derive(Subcommand)]
enum DatagenAction {
    /// Print labeled examples from a sampler
    Sample {
        #[command(flatten)]
        knobs: TrainKnobs,
        /// Number of examples
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// Emit one JSON object per line instead of plain text
        #[arg(long)]
        json: bool,
    },
}

/// The shared training-configuration surface. Every flag is optional;
/// unset values fall back to the config file, then to the defaults.
#[derive(Args)]
struct TrainKnobs {
    /// key=value config file supplying defaults for these flags
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (also NIMPARITY_OUT_DIR; default ./runs)
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Data distribution
    #[arg(long, visible_alias = "kind", value_enum)]
    sampler: Option<config::SamplerKindArg>,
    /// Bitstring length (max length for variable-length)
    #[arg(long)]
    n: Option<usize>,
    /// Starting heaps for nim-trajectory, e.g. "5,5,5"
    #[arg(long)]
    heaps: Option<String>,
    /// Per-heap slot capacity for nim-trajectory
    #[arg(long)]
    capacity: Option<u32>,
    /// Shuffle counters within each heap block
    #[arg(long)]
    scrambled: bool,
    /// Initial label-corruption fraction
    #[arg(long)]
    rho0: Option<f64>,
    #[arg(long, value_enum)]
    noise_mode: Option<config::NoiseModeArg>,
    /// Which accuracy drives the corruption rate
    #[arg(long, value_enum)]
    feedback: Option<config::FeedbackArg>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_steps: Option<u64>,
    /// Held-out accuracy that counts as success
    #[arg(long)]
    success_threshold: Option<f64>,
    #[arg(long)]
    eval_interval: Option<u64>,
    #[arg(long)]
    test_set_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long, visible_alias = "hidden")]
    hidden_size: Option<usize>,
    /// Input encoding of each trit
    #[arg(long, value_enum)]
    encoding: Option<config::EncodingArg>,
    /// Materialize a fixed corpus of this size instead of online sampling
    #[arg(long)]
    dataset_size: Option<usize>,
    /// Master seed
    #[arg(long)]
    seed: Option<u64>,
}

impl TrainKnobs {
    /// Flags over config file over defaults.
    fn overlay(&self) -> Result<Overlay> {
        let file = match &self.config {
            Some(path) => load_config_file(path)?,
            None => Overlay::default(),
        };
        let cli = Overlay {
            sampler: self.sampler,
            n: self.n,
            heaps: self.heaps.as_deref().map(parse_u32_list).transpose()?,
            capacity: self.capacity,
            scrambled: self.scrambled.then_some(true),
            rho0: self.rho0,
            noise_mode: self.noise_mode,
            feedback: self.feedback,
            batch_size: self.batch_size,
            max_steps: self.max_steps,
            success_threshold: self.success_threshold,
            eval_interval: self.eval_interval,
            test_set_size: self.test_set_size,
            lr: self.lr,
            momentum: self.momentum,
            hidden_size: self.hidden_size,
            encoding: self.encoding,
            dataset_size: self.dataset_size,
            seed: self.seed,
        };
        Ok(cli.over(file))
    }

    fn out_dir(&self) -> Result<PathBuf> {
        let dir = resolve_out_dir(self.out_dir.clone());
        fs::create_dir_all(&dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(dir)
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Parity { trits } => cmd_parity(&trits),
        Command::Nim { action } => match action {
            NimAction::Eval {
                heaps,
                bits,
                capacity,
            } => cmd_nim_eval(heaps, bits, capacity),
        },
        Command::Datagen { action } => match action {
            DatagenAction::Sample { knobs, count, json } => cmd_sample(&knobs, count, json),
        },
        Command::Gradcheck { seed, tolerance } => cmd_gradcheck(seed, tolerance),
        Command::Train { knobs, save_params } => cmd_train(&knobs, save_params),
        Command::Sweep {
            knobs,
            lengths,
            seeds,
            parallelism,
        } => cmd_sweep(&knobs, &lengths, &seeds, parallelism),
        Command::NoiseSearch {
            knobs,
            lengths,
            seeds,
            granularity,
            success_rule,
        } => cmd_noise_search(&knobs, &lengths, &seeds, granularity, success_rule),
        Command::Export {
            records,
            search,
            out_dir,
        } => cmd_export(records, &search, out_dir),
    }
}

fn cmd_parity(text: &str) -> Result<()> {
    let bits = Bitstring::new(parse_trits(text)?)?;
    println!("length {}", bits.len());
    println!("hamming_weight {}", bits.hamming_weight());
    println!("parity {}", bits.parity());
    Ok(())
}

fn cmd_nim_eval(heaps: Option<String>, bits: Option<String>, capacity: Option<u32>) -> Result<()> {
    let pos = match (&heaps, &bits) {
        (Some(h), None) => NimPosition::new(parse_u32_list(h)?),
        (None, Some(b)) => {
            let capacity =
                capacity.ok_or_else(|| anyhow!("--bits needs --capacity to delimit heaps"))?;
            let enc = BoardEncoding::from_bits(capacity, Bitstring::new(parse_trits(b)?)?)?;
            nim::decode_board(&enc)?
        }
        _ => bail!("pass exactly one of --heaps or --bits"),
    };
    println!("heaps {:?}", pos.heaps());
    let g = nim::grundy(&pos);
    println!("grundy {g}");
    println!(
        "status {}",
        if nim::is_winning(&pos) {
            "winning"
        } else {
            "losing"
        }
    );
    if pos.is_terminal() {
        println!("moves none (terminal)");
    } else {
        let moves = nim::winning_moves(&pos)?;
        if moves.is_empty() {
            println!("moves none (every move hands the opponent a win)");
        } else {
            for (heap, take) in moves {
                println!("move take {take} from heap {heap}");
            }
        }
    }
    if bits.is_none() {
        if let Some(capacity) = capacity {
            let enc = nim::encode_board(&pos, capacity)?;
            let rendered: Vec<String> = enc.bits().values().iter().map(|v| v.to_string()).collect();
            println!("encoding {}", rendered.join(","));
        }
    }
    Ok(())
}

fn cmd_sample(knobs: &TrainKnobs, count: usize, json: bool) -> Result<()> {
    let overlay = knobs.overlay()?;
    let spec = overlay.sampler_spec(None)?;
    let mut rng = substream(overlay.seed.unwrap_or(0), Purpose::Data);
    let batch = datagen::make_labeled_batch(&spec, count, &mut rng)?;
    for ex in &batch {
        if json {
            println!("{}", serde_json::to_string(ex)?);
        } else {
            let rendered: Vec<String> = ex.bits.values().iter().map(|v| v.to_string()).collect();
            println!("{}\tlabel {}", rendered.join(","), ex.label);
        }
    }
    Ok(())
}

fn cmd_gradcheck(seed: u64, tolerance: f64) -> Result<()> {
    let report = gradcheck::standard_suite(seed)?;
    println!(
        "instances {}  parameters checked {}  max relative error {:.3e}",
        report.instances, report.params_checked, report.max_rel_error
    );
    if report.max_rel_error >= tolerance {
        bail!(
            "gradient check failed: {:.3e} >= {tolerance:.1e}",
            report.max_rel_error
        );
    }
    println!("within tolerance {tolerance:.1e}");
    Ok(())
}

/// A short, filesystem-safe tag describing the data distribution.
fn sampler_tag(spec: &SamplerSpec) -> String {
    match spec {
        SamplerSpec::Uniform01 { n } => format!("uniform01_n{n}"),
        SamplerSpec::LatentCurriculum { n } => format!("latent_n{n}"),
        SamplerSpec::VariableLength { max_n } => format!("varlen_n{max_n}"),
        SamplerSpec::NimTrajectory {
            heaps,
            capacity,
            scrambled,
        } => {
            let heaps: Vec<String> = heaps.iter().map(|h| h.to_string()).collect();
            let suffix = if *scrambled { "_scrambled" } else { "" };
            format!("nim_{}_cap{capacity}{suffix}", heaps.join("-"))
        }
    }
}

fn write_pretty_json<T: serde::Serialize>(path: &PathBuf, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn describe(record: &RunRecord) -> String {
    let outcome = match record.outcome {
        Outcome::Success => "success",
        Outcome::Failure => "failure",
        Outcome::Aborted => "aborted",
    };
    let last = record.trace.last().map(|e| e.accuracy).unwrap_or(0.0);
    match record.steps_to_success {
        Some(steps) => format!("{outcome} at step {steps} (final accuracy {last:.4})"),
        None => format!(
            "{outcome} after {} steps (final accuracy {last:.4})",
            record.steps_executed
        ),
    }
}

fn cmd_train(knobs: &TrainKnobs, save_params: bool) -> Result<()> {
    let overlay = knobs.overlay()?;
    let config = overlay.train_config(None)?;
    let out_dir = knobs.out_dir()?;
    let tag = format!(
        "{}_seed{}",
        sampler_tag(&config.sampler),
        config.master_seed
    );

    let (mut record, params) = train(&config)?;
    if save_params {
        let params_path = out_dir.join(format!("train_{tag}_params.json"));
        checkpoint::save(&params, config.master_seed, &params_path)?;
        record.checkpoint = Some(params_path.display().to_string());
    }

    let record_path = out_dir.join(format!("train_{tag}.json"));
    write_pretty_json(&record_path, &record)?;
    export::append_records_jsonl(
        std::slice::from_ref(&record),
        &out_dir.join("records.jsonl"),
    )?;

    println!("{}", describe(&record));
    println!("record {}", record_path.display());
    if let Some(checkpoint) = &record.checkpoint {
        println!("params {checkpoint}");
    }
    Ok(())
}

fn cmd_sweep(
    knobs: &TrainKnobs,
    lengths: &str,
    seeds: &str,
    parallelism: Option<usize>,
) -> Result<()> {
    let lengths = parse_usize_list(lengths)?;
    let seeds = parse_seed_list(seeds)?;
    let overlay = knobs.overlay()?;
    let base = overlay.train_config(lengths.first().copied())?;
    let out_dir = knobs.out_dir()?;

    let spec = SweepSpec {
        lengths,
        seeds,
        base,
        parallelism,
    };
    let records = sweep_lengths(&spec)?;
    let aggregates = aggregate_by_length(&records)?;

    export::append_records_jsonl(&records, &out_dir.join("records.jsonl"))?;
    let fig1a = out_dir.join("fig1a.csv");
    let fig1b = out_dir.join("fig1b.csv");
    export::write_fig1a_csv(&aggregates, &fig1a)?;
    export::write_fig1b_csv(&records, &fig1b)?;

    for agg in &aggregates {
        let median = agg
            .median_steps
            .map(|m| format!("median steps {m}"))
            .unwrap_or_else(|| "no successes".into());
        println!(
            "length {:>3}: {}/{} succeeded, {}",
            agg.length, agg.success_count, agg.runs, median
        );
    }
    println!(
        "records appended to {}",
        out_dir.join("records.jsonl").display()
    );
    println!("wrote {} and {}", fig1a.display(), fig1b.display());
    Ok(())
}

fn cmd_noise_search(
    knobs: &TrainKnobs,
    lengths: &str,
    seeds: &str,
    granularity: f64,
    success_rule: f64,
) -> Result<()> {
    let lengths = parse_usize_list(lengths)?;
    let seeds = parse_seed_list(seeds)?;
    let overlay = knobs.overlay()?;
    let base = overlay.train_config(lengths.first().copied())?;
    let out_dir = knobs.out_dir()?;

    let mut outcomes: Vec<NoiseSearchOutcome> = Vec::new();
    for &length in &lengths {
        let spec = NoiseSearchSpec {
            length,
            seeds: seeds.clone(),
            granularity,
            success_rule,
            base: base.clone(),
        };
        let outcome = max_noise_search(&spec)?;
        write_pretty_json(&out_dir.join(format!("search_n{length}.json")), &outcome)?;
        println!(
            "length {:>3}: rho_max {} ({} grid points)",
            length,
            outcome.rho_max,
            outcome.grid.len()
        );
        outcomes.push(outcome);
    }
    let fig3 = out_dir.join("fig3.csv");
    export::write_fig3_csv(&outcomes, &fig3)?;
    println!("wrote {}", fig3.display());
    Ok(())
}

fn cmd_export(
    records: Option<PathBuf>,
    search: &[PathBuf],
    out_dir: Option<PathBuf>,
) -> Result<()> {
    if records.is_none() && search.is_empty() {
        bail!("nothing to export: pass --records and/or --search");
    }
    let out_dir = resolve_out_dir(out_dir);
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;

    if let Some(path) = records {
        let text = fs::read_to_string(&path)
            .with_context(|| format!("reading records from {}", path.display()))?;
        let mut records: Vec<RunRecord> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record = serde_json::from_str(line).with_context(|| {
                format!("{}:{}: malformed run record", path.display(), lineno + 1)
            })?;
            records.push(record);
        }
        let aggregates = aggregate_by_length(&records)?;
        let fig1a = out_dir.join("fig1a.csv");
        let fig1b = out_dir.join("fig1b.csv");
        export::write_fig1a_csv(&aggregates, &fig1a)?;
        export::write_fig1b_csv(&records, &fig1b)?;
        println!(
            "wrote {} and {} from {} records",
            fig1a.display(),
            fig1b.display(),
            records.len()
        );
    }

    if !search.is_empty() {
        let mut outcomes: Vec<NoiseSearchOutcome> = Vec::new();
        for path in search {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading search outcome {}", path.display()))?;
            outcomes.push(
                serde_json::from_str(&text)
                    .with_context(|| format!("{}: malformed search outcome", path.display()))?,
            );
        }
        let fig3 = out_dir.join("fig3.csv");
        export::write_fig3_csv(&outcomes, &fig3)?;
        println!("wrote {} from {} searches", fig3.display(), outcomes.len());
    }
    Ok(())
}

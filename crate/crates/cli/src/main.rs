//! Runs pooled/unpooled and fresh/cached benchmark sweeps and writes CSV.

use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use tlpool::harness::{run_experiment, Benchmark, ExperimentConfig, Mode, DEFAULT_REPEATS};
use tlpool::montecarlo::RASTRIGIN_BOUND;
use tlpool::pairs::{ValuePrecision, DEFAULT_RING_SIZE};
use tlpool::pool::DEFAULT_POOL_SIZE;
use tlpool::report::{emit_csv, summarize};

#[derive(Debug, Parser)]
#[command(name = "tlpool-bench", version, about)]
struct Args {
    /// Which benchmark to run: montecarlo or pairs.
    #[arg(long)]
    benchmark: Benchmark,

    /// Modes to compare (default: both modes of the benchmark).
    #[arg(long, value_delimiter = ',')]
    modes: Vec<Mode>,

    /// Worker thread counts (default: number of logical processors).
    #[arg(long, value_delimiter = ',')]
    threads: Vec<usize>,

    /// Function evaluation counts (montecarlo).
    #[arg(long, value_delimiter = ',', default_value = "1000000")]
    evals: Vec<u64>,

    /// Object counts (pairs).
    #[arg(long, value_delimiter = ',', default_value = "10000000")]
    objects: Vec<u64>,

    /// Search dimensions (montecarlo).
    #[arg(long, value_delimiter = ',', default_value = "1000")]
    dims: Vec<usize>,

    #[arg(long, default_value_t = DEFAULT_RING_SIZE)]
    ring_size: usize,

    /// Capacity of each per-thread pool.
    #[arg(long, default_value_t = DEFAULT_POOL_SIZE)]
    pool_size: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Timed repetitions per cell, after one untimed warm-up.
    #[arg(long, default_value_t = DEFAULT_REPEATS)]
    repeats: usize,

    /// Where to write the CSV report (default: standard output).
    #[arg(long)]
    csv: Option<PathBuf>,

    /// Print mean/min durations and speedup ratios to standard output.
    #[arg(long)]
    summary: bool,

    /// Lower search bound per coordinate (montecarlo).
    #[arg(long, default_value_t = -RASTRIGIN_BOUND, allow_hyphen_values = true)]
    low: f64,

    /// Upper search bound per coordinate (montecarlo).
    #[arg(long, default_value_t = RASTRIGIN_BOUND, allow_hyphen_values = true)]
    high: f64,

    /// Round pair values through f32 as the original benchmark did.
    #[arg(long)]
    single_precision: bool,
}

impl Args {
    fn into_config(self) -> ExperimentConfig {
        let threads = if self.threads.is_empty() {
            vec![std::thread::available_parallelism().map_or(1, |n| n.get())]
        } else {
            self.threads
        };
        let workloads = match self.benchmark {
            Benchmark::MonteCarlo => self.evals,
            Benchmark::Pairs => self.objects,
        };
        ExperimentConfig {
            benchmark: self.benchmark,
            modes: if self.modes.is_empty() {
                self.benchmark.modes().to_vec()
            } else {
                self.modes
            },
            threads,
            workloads,
            dims: self.dims,
            ring_size: self.ring_size,
            pool_size: self.pool_size,
            seed: self.seed,
            repeats: self.repeats,
            bounds: (self.low, self.high),
            precision: if self.single_precision {
                ValuePrecision::Single
            } else {
                ValuePrecision::Double
            },
        }
    }
}

fn run(args: Args) -> Result<()> {
    let csv = args.csv.clone();
    let summary = args.summary;
    let cfg = args.into_config();
    let report = run_experiment(&cfg)?;

    match &csv {
        Some(path) => emit_csv(&report, path)?,
        None if !summary => report.write_csv(io::stdout().lock()).context("writing CSV to stdout")?,
        None => {}
    }
    if summary {
        print!("{}", summarize(&report));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

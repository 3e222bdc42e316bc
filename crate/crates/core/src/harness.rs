//! Experiment sweeps over the two benchmarks.
//!
//! A cell is one (dim, workload, threads, mode) combination. Cells run one
//! at a time in this order, outermost first:
//!
//! ```text
//! repetition > dim > workload > threads > mode
//! ```
//!
//! Each cell gets one untimed warm-up run right before its first timed
//! repetition. Every repetition must reproduce the warm-up's checksum
//! bit-for-bit, otherwise the experiment stops with
//! [`HarnessError::Nondeterministic`].

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::memory::PeakSampler;
use crate::montecarlo::{monte_carlo_optimize, BoxBounds, GeneratorMode, SearchError, RASTRIGIN_BOUND};
use crate::pairs::{run_pairs_benchmark, PairMode, PairWorkload, PairsError, ValuePrecision, DEFAULT_RING_SIZE};
use crate::pool::DEFAULT_POOL_SIZE;
use crate::report::{BenchReport, Row};

pub const DEFAULT_REPEATS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Benchmark {
    MonteCarlo,
    Pairs,
}

impl Benchmark {
    pub fn modes(self) -> [Mode; 2] {
        match self {
            Benchmark::MonteCarlo => [Mode::Fresh, Mode::Cached],
            Benchmark::Pairs => [Mode::Unpooled, Mode::Pooled],
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Benchmark::MonteCarlo => "montecarlo",
            Benchmark::Pairs => "pairs",
        })
    }
}

impl FromStr for Benchmark {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "montecarlo" => Ok(Benchmark::MonteCarlo),
            "pairs" => Ok(Benchmark::Pairs),
            other => Err(format!("unknown benchmark `{other}` (expected montecarlo or pairs)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Fresh,
    Cached,
    Pooled,
    Unpooled,
}

impl Mode {
    pub fn benchmark(self) -> Benchmark {
        match self {
            Mode::Fresh | Mode::Cached => Benchmark::MonteCarlo,
            Mode::Pooled | Mode::Unpooled => Benchmark::Pairs,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Fresh => "fresh",
            Mode::Cached => "cached",
            Mode::Pooled => "pooled",
            Mode::Unpooled => "unpooled",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fresh" => Ok(Mode::Fresh),
            "cached" => Ok(Mode::Cached),
            "pooled" => Ok(Mode::Pooled),
            "unpooled" => Ok(Mode::Unpooled),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub benchmark: Benchmark,
    pub modes: Vec<Mode>,
    pub threads: Vec<usize>,
    /// Evaluation counts (montecarlo) or object counts (pairs).
    pub workloads: Vec<u64>,
    /// Search dimensions; ignored by pairs.
    pub dims: Vec<usize>,
    pub ring_size: usize,
    pub pool_size: usize,
    pub seed: u64,
    pub repeats: usize,
    /// Per-coordinate search box for montecarlo.
    pub bounds: (f64, f64),
    pub precision: ValuePrecision,
}

impl ExperimentConfig {
    pub fn new(benchmark: Benchmark) -> Self {
        ExperimentConfig {
            benchmark,
            modes: benchmark.modes().to_vec(),
            threads: vec![1],
            workloads: vec![],
            dims: vec![],
            ring_size: DEFAULT_RING_SIZE,
            pool_size: DEFAULT_POOL_SIZE,
            seed: 0,
            repeats: DEFAULT_REPEATS,
            bounds: (-RASTRIGIN_BOUND, RASTRIGIN_BOUND),
            precision: ValuePrecision::Double,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.modes.is_empty() {
            return bad("at least one mode is required".into());
        }
        if let Some(m) = self.modes.iter().find(|m| m.benchmark() != self.benchmark) {
            return bad(format!("mode `{m}` does not apply to benchmark `{}`", self.benchmark));
        }
        if let Some((i, m)) = self
            .modes
            .iter()
            .enumerate()
            .find(|(i, m)| self.modes[..*i].contains(m))
        {
            return bad(format!("mode `{m}` is listed more than once (position {i})"));
        }
        if self.repeats < 1 {
            return bad("repeats must be at least 1".into());
        }
        if self.threads.is_empty() || self.threads.contains(&0) {
            return bad("thread counts must be a non-empty list of positive integers".into());
        }
        if self.workloads.is_empty() {
            return bad("at least one workload size is required".into());
        }
        if let Some(&w) = self.workloads.iter().find(|&&w| w < self.max_threads() as u64) {
            return bad(format!(
                "workload {w} is smaller than the thread count {}",
                self.max_threads()
            ));
        }
        match self.benchmark {
            Benchmark::MonteCarlo => {
                if self.dims.is_empty() || self.dims.contains(&0) {
                    return bad("montecarlo needs a non-empty list of positive dimensions".into());
                }
                let (lo, hi) = self.bounds;
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return bad(format!("invalid bounds [{lo}, {hi}]"));
                }
            }
            Benchmark::Pairs => {
                if self.ring_size < 1 {
                    return bad("ring size must be at least 1".into());
                }
                if self.pool_size < 1 {
                    return bad("pool size must be at least 1".into());
                }
            }
        }
        Ok(())
    }

    fn max_threads(&self) -> usize {
        self.threads.iter().copied().max().unwrap_or(1)
    }

    fn cell_dims(&self) -> Vec<Option<usize>> {
        match self.benchmark {
            Benchmark::MonteCarlo => self.dims.iter().map(|&d| Some(d)).collect(),
            Benchmark::Pairs => vec![None],
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment: {0}")]
    Config(String),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Pairs(#[from] PairsError),
    #[error(
        "nondeterministic result in cell {cell}: repetition {repetition} gave checksum {got:e}, expected {expected:e}"
    )]
    Nondeterministic {
        cell: String,
        repetition: usize,
        expected: f64,
        got: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Cell {
    mode: Mode,
    threads: usize,
    workload: u64,
    dim: Option<usize>,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "mode={} threads={} workload={}",
            self.mode, self.threads, self.workload
        )?;
        if let Some(d) = self.dim {
            write!(f, " dim={d}")?;
        }
        Ok(())
    }
}

struct Measurement {
    duration_ms: u64,
    peak_mem_bytes: u64,
    checksum: f64,
}

fn run_cell(cfg: &ExperimentConfig, cell: Cell) -> Result<Measurement, HarnessError> {
    match cell.mode {
        Mode::Fresh | Mode::Cached => {
            let dim = cell.dim.expect("montecarlo cell has a dimension");
            let bounds = BoxBounds::uniform(dim, cfg.bounds.0, cfg.bounds.1)?;
            let mode = if cell.mode == Mode::Fresh {
                GeneratorMode::Fresh
            } else {
                GeneratorMode::Cached
            };
            let sampler = PeakSampler::start();
            let out = monte_carlo_optimize(&bounds, cell.workload, cell.threads, cfg.seed, mode)?;
            Ok(Measurement {
                duration_ms: out.duration.as_millis() as u64,
                peak_mem_bytes: sampler.finish(),
                checksum: out.incumbent.value,
            })
        }
        Mode::Pooled | Mode::Unpooled => {
            let w = PairWorkload {
                total_objects: cell.workload,
                threads: cell.threads,
                ring_size: cfg.ring_size,
                mode: if cell.mode == Mode::Pooled {
                    PairMode::Pooled
                } else {
                    PairMode::Unpooled
                },
                pool_size: cfg.pool_size,
                precision: cfg.precision,
            };
            let out = run_pairs_benchmark(&w)?;
            Ok(Measurement {
                duration_ms: out.duration.as_millis() as u64,
                peak_mem_bytes: out.peak_mem_bytes,
                checksum: out.total_value,
            })
        }
    }
}

/// Runs every cell of `cfg` `cfg.repeats` times and returns the timed rows.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<BenchReport, HarnessError> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for dim in cfg.cell_dims() {
        for &workload in &cfg.workloads {
            for &threads in &cfg.threads {
                for &mode in &cfg.modes {
                    cells.push(Cell {
                        mode,
                        threads,
                        workload,
                        dim,
                    });
                }
            }
        }
    }

    let mut reference: HashMap<Cell, f64> = HashMap::new();
    let mut rows = Vec::with_capacity(cells.len() * cfg.repeats);
    for repetition in 0..cfg.repeats {
        for &cell in &cells {
            if repetition == 0 {
                log::info!("warm-up {cell}");
                let warm = run_cell(cfg, cell)?;
                reference.insert(cell, warm.checksum);
            }
            log::info!("run {repetition} {cell}");
            let m = run_cell(cfg, cell)?;
            let expected = reference[&cell];
            if m.checksum.to_bits() != expected.to_bits() {
                return Err(HarnessError::Nondeterministic {
                    cell: cell.to_string(),
                    repetition,
                    expected,
                    got: m.checksum,
                });
            }
            rows.push(Row {
                benchmark: cfg.benchmark.to_string(),
                mode: cell.mode.to_string(),
                threads: cell.threads,
                workload: cell.workload,
                dim: cell.dim,
                repetition,
                duration_ms: m.duration_ms,
                peak_mem_bytes: m.peak_mem_bytes,
                checksum: m.checksum,
            });
        }
    }
    Ok(BenchReport { rows })
}

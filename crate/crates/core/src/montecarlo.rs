//! Parallel pure random search on the Rastrigin function.
//!
//! Each worker draws points uniformly from a box, evaluates them and keeps a
//! local best. The two [`GeneratorMode`]s differ only in where the sampled
//! vector lives: `Fresh` allocates a new vector per draw, `Cached` overwrites
//! a single vector owned by the generator. Given the same seed both modes
//! consume the random stream identically, so they find the same incumbent.

use std::borrow::Cow;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::partition::partition;

/// Conventional half-width of the Rastrigin search domain.
pub const RASTRIGIN_BOUND: f64 = 5.12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("rastrigin is undefined for an empty vector")]
    EmptyPoint,
    #[error("bounds must have at least one dimension")]
    EmptyBounds,
    #[error("bounds have mismatched lengths ({low} lower, {high} upper)")]
    BoundsLength { low: usize, high: usize },
    #[error("invalid bound in dimension {dim}: [{low}, {high}]")]
    InvalidBound { dim: usize, low: f64, high: f64 },
    #[error("need total_evals >= threads >= 1, got {evals} evals on {threads} threads")]
    BadWorkSplit { evals: u64, threads: usize },
    #[error("search worker panicked")]
    WorkerPanicked,
}

/// `10 n + sum(x_i^2 - 10 cos(2 pi x_i))`, summed left to right.
pub fn rastrigin(x: &[f64]) -> Result<f64, SearchError> {
    if x.is_empty() {
        return Err(SearchError::EmptyPoint);
    }
    Ok(rastrigin_unchecked(x))
}

#[inline]
fn rastrigin_unchecked(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    x.iter()
        .fold(10.0 * n, |acc, &xi| acc + (xi * xi - 10.0 * (2.0 * PI * xi).cos()))
}

/// Per-coordinate closed box `low[i] <= x[i] <= high[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds {
    low: Vec<f64>,
    high: Vec<f64>,
}

impl BoxBounds {
    pub fn new(low: Vec<f64>, high: Vec<f64>) -> Result<Self, SearchError> {
        if low.len() != high.len() {
            return Err(SearchError::BoundsLength {
                low: low.len(),
                high: high.len(),
            });
        }
        if low.is_empty() {
            return Err(SearchError::EmptyBounds);
        }
        for (dim, (&l, &h)) in low.iter().zip(&high).enumerate() {
            if !(l.is_finite() && h.is_finite() && l <= h) {
                return Err(SearchError::InvalidBound { dim, low: l, high: h });
            }
        }
        Ok(BoxBounds { low, high })
    }

    /// The same interval in every one of `dim` coordinates.
    pub fn uniform(dim: usize, low: f64, high: f64) -> Result<Self, SearchError> {
        Self::new(vec![low; dim], vec![high; dim])
    }

    /// `[-5.12, 5.12]^dim`.
    pub fn rastrigin_domain(dim: usize) -> Result<Self, SearchError> {
        Self::uniform(dim, -RASTRIGIN_BOUND, RASTRIGIN_BOUND)
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    pub fn low(&self) -> &[f64] {
        &self.low
    }

    pub fn high(&self) -> &[f64] {
        &self.high
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GeneratorMode {
    Fresh,
    Cached,
}

impl fmt::Display for GeneratorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GeneratorMode::Fresh => "fresh",
            GeneratorMode::Cached => "cached",
        })
    }
}

impl FromStr for GeneratorMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fresh" => Ok(GeneratorMode::Fresh),
            "cached" => Ok(GeneratorMode::Cached),
            other => Err(format!("unknown generator mode `{other}`")),
        }
    }
}

/// Produces uniformly random points inside a box.
#[derive(Debug, Clone)]
pub struct ArgumentGenerator {
    mode: GeneratorMode,
    cache: Option<Vec<f64>>,
}

impl ArgumentGenerator {
    pub fn new(mode: GeneratorMode) -> Self {
        ArgumentGenerator { mode, cache: None }
    }

    pub fn mode(&self) -> GeneratorMode {
        self.mode
    }

    /// Draws the next point. `Fresh` returns a newly allocated vector;
    /// `Cached` overwrites and lends out the generator's own vector, which is
    /// only reallocated when the dimension changes.
    pub fn next_vector<R: Rng + ?Sized>(&mut self, bounds: &BoxBounds, rng: &mut R) -> Cow<'_, [f64]> {
        let n = bounds.dim();
        match self.mode {
            GeneratorMode::Fresh => {
                let mut x = vec![0.0; n];
                fill_uniform(&mut x, bounds, rng);
                Cow::Owned(x)
            }
            GeneratorMode::Cached => {
                if self.cache.as_ref().is_none_or(|c| c.len() != n) {
                    self.cache = Some(vec![0.0; n]);
                }
                let x = self.cache.as_mut().expect("cache just sized");
                fill_uniform(x, bounds, rng);
                Cow::Borrowed(x)
            }
        }
    }
}

#[inline]
fn fill_uniform<R: Rng + ?Sized>(x: &mut [f64], bounds: &BoxBounds, rng: &mut R) {
    for ((xi, &l), &h) in x.iter_mut().zip(&bounds.low).zip(&bounds.high) {
        *xi = l + (h - l) * rng.random::<f64>();
    }
}

/// Best point found so far and its objective value.
#[derive(Debug, Clone, PartialEq)]
pub struct Incumbent {
    pub point: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkerReport {
    pub worker: usize,
    pub evals: u64,
    pub incumbent: Incumbent,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub incumbent: Incumbent,
    pub workers: Vec<WorkerReport>,
    /// Wall clock from before the first worker starts to after the last joins.
    pub duration: Duration,
}

/// Random stream of one worker: ChaCha8 keyed by `seed`, one stream per
/// worker index.
pub fn worker_rng(seed: u64, worker: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(worker as u64);
    rng
}

fn search_worker(bounds: &BoxBounds, evals: u64, mode: GeneratorMode, mut rng: ChaCha8Rng) -> Incumbent {
    let mut generator = ArgumentGenerator::new(mode);
    let mut best = vec![0.0; bounds.dim()];
    let mut best_value = f64::INFINITY;
    for _ in 0..evals {
        let x = generator.next_vector(bounds, &mut rng);
        let y = rastrigin_unchecked(&x);
        if y < best_value {
            best.copy_from_slice(&x);
            best_value = y;
        }
    }
    Incumbent {
        point: best,
        value: best_value,
    }
}

/// Minimizes Rastrigin over `bounds` with `total_evals` uniform samples split
/// across `threads` workers.
///
/// Worker `k` uses [`worker_rng`]`(seed, k)`. The global incumbent is the
/// smallest local value; on ties the lowest worker index wins.
pub fn monte_carlo_optimize(
    bounds: &BoxBounds,
    total_evals: u64,
    threads: usize,
    seed: u64,
    mode: GeneratorMode,
) -> Result<SearchOutcome, SearchError> {
    let shares = partition(total_evals, threads).ok_or(SearchError::BadWorkSplit {
        evals: total_evals,
        threads,
    })?;

    let start = Instant::now();
    let results: Vec<Option<Incumbent>> = std::thread::scope(|s| {
        let handles: Vec<_> = shares
            .iter()
            .map(|sh| {
                let rng = worker_rng(seed, sh.worker);
                s.spawn(move || search_worker(bounds, sh.count, mode, rng))
            })
            .collect();
        handles.into_iter().map(|h| h.join().ok()).collect()
    });
    let duration = start.elapsed();

    let mut workers = Vec::with_capacity(results.len());
    for (sh, r) in shares.iter().zip(results) {
        workers.push(WorkerReport {
            worker: sh.worker,
            evals: sh.count,
            incumbent: r.ok_or(SearchError::WorkerPanicked)?,
        });
    }
    let best = workers
        .iter()
        .fold(None::<&WorkerReport>, |best, w| match best {
            Some(b) if b.incumbent.value <= w.incumbent.value => Some(b),
            _ => Some(w),
        })
        .expect("at least one worker");

    Ok(SearchOutcome {
        incumbent: best.incumbent.clone(),
        workers,
        duration,
    })
}

//! Small-object allocation stress test.
//!
//! Every worker creates `count` short-lived `(id, value)` pairs, keeps the
//! most recent `ring_size` of them alive in a ring buffer and sums their
//! values. In `Unpooled` mode each pair is a fresh heap allocation and an
//! overwritten ring slot frees the old one. In `Pooled` mode pairs come from
//! the worker thread's [`pool`](crate::pool) and the whole ring is released
//! back to it every time the ring wraps.

use std::any::Any;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::memory::PeakSampler;
use crate::partition::partition;
use crate::pool::{self, acquire, PoolError, PoolFactory, Poolable, PoolableItem};

pub const DEFAULT_RING_SIZE: usize = 10_000;

/// An item id with its value.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PairItem {
    item_id: i64,
    value: f64,
}

impl PairItem {
    pub fn new(item_id: i64, value: f64) -> Self {
        PairItem { item_id, value }
    }

    pub fn item_id(&self) -> i64 {
        self.item_id
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn set(&mut self, item_id: i64, value: f64) {
        self.item_id = item_id;
        self.value = value;
    }
}

impl Poolable for PairItem {
    /// Expects `(i64, f64)`.
    fn set_data(&mut self, args: &[&dyn Any]) {
        let (Some(id), Some(v)) = (
            args.first().and_then(|a| a.downcast_ref::<i64>()),
            args.get(1).and_then(|a| a.downcast_ref::<f64>()),
        ) else {
            panic!("PairItem::set_data expects (i64, f64) arguments");
        };
        self.set(*id, *v);
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PairFactory;

impl PoolFactory for PairFactory {
    type Item = PairItem;

    fn unique_type_id(&self) -> usize {
        0
    }

    fn make_unmanaged(&self, _args: &[&dyn Any]) -> PairItem {
        PairItem::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairMode {
    Unpooled,
    Pooled,
}

impl fmt::Display for PairMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PairMode::Unpooled => "unpooled",
            PairMode::Pooled => "pooled",
        })
    }
}

impl FromStr for PairMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unpooled" => Ok(PairMode::Unpooled),
            "pooled" => Ok(PairMode::Pooled),
            other => Err(format!("unknown pairs mode `{other}`")),
        }
    }
}

/// How the per-item value `2 i` is computed and stored.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum ValuePrecision {
    /// Exact for every `i` below 2^52, so sums match the closed form.
    #[default]
    Double,
    /// Rounded through `f32` like the original benchmark; large runs drift
    /// from the closed form.
    Single,
}

#[inline]
fn pair_value(i: u64, precision: ValuePrecision) -> f64 {
    match precision {
        ValuePrecision::Double => 2.0 * i as f64,
        ValuePrecision::Single => (2.0f32 * i as f32) as f64,
    }
}

#[derive(Debug, Error)]
pub enum PairsError {
    #[error("need total_objects >= threads >= 1, got {objects} objects on {threads} threads")]
    BadWorkSplit { objects: u64, threads: usize },
    #[error("ring size must be at least 1")]
    EmptyRing,
    #[error("pool error in worker: {0}")]
    Pool(#[from] PoolError),
    #[error("pairs worker {0} panicked")]
    WorkerPanicked(usize),
}

/// Runs one worker's share on the calling thread and returns its sum.
///
/// In pooled mode items come from, and go back to, the calling thread's
/// pool for `factory`. Items still in the ring when the loop ends are not
/// released, matching the benchmark as originally written.
pub fn run_pairs_worker(
    offset: u64,
    count: u64,
    ring_size: usize,
    mode: PairMode,
    precision: ValuePrecision,
    factory: &PairFactory,
) -> Result<f64, PairsError> {
    if ring_size == 0 {
        return Err(PairsError::EmptyRing);
    }
    let end = offset + count;
    let mut sum = 0.0f64;
    match mode {
        PairMode::Unpooled => {
            let mut ring: Vec<Option<Box<PairItem>>> = vec![None; ring_size];
            let mut ind = 0;
            for i in offset..end {
                let mut p = Box::new(PairItem::new(0, 0.0));
                p.set(i as i64, pair_value(i, precision));
                sum += p.value();
                ring[ind] = Some(p);
                ind += 1;
                if ind == ring_size {
                    ind = 0;
                }
            }
        }
        PairMode::Pooled => {
            let mut ring: Vec<Option<PoolableItem<PairItem>>> = (0..ring_size).map(|_| None).collect();
            let mut ind = 0;
            for i in offset..end {
                let id = i as i64;
                let v = pair_value(i, precision);
                let p = acquire(factory, &[&id, &v])?;
                sum += p.value();
                ring[ind] = Some(p);
                ind += 1;
                if ind == ring_size {
                    for p in ring.iter_mut().flatten() {
                        p.release()?;
                    }
                    ind = 0;
                }
            }
        }
    }
    Ok(sum)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairWorkload {
    pub total_objects: u64,
    pub threads: usize,
    pub ring_size: usize,
    pub mode: PairMode,
    pub pool_size: usize,
    pub precision: ValuePrecision,
}

impl PairWorkload {
    pub fn new(total_objects: u64, threads: usize, mode: PairMode) -> Self {
        PairWorkload {
            total_objects,
            threads,
            ring_size: DEFAULT_RING_SIZE,
            mode,
            pool_size: pool::DEFAULT_POOL_SIZE,
            precision: ValuePrecision::Double,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PairsOutcome {
    pub total_value: f64,
    pub worker_sums: Vec<f64>,
    /// Wall clock from before spawning the workers to after joining them.
    pub duration: Duration,
    pub peak_mem_bytes: u64,
}

/// Makes the process-wide pool size equal `size`, which only succeeds while
/// no pool exists yet unless it already has that value.
pub fn ensure_pool_size(size: usize) -> Result<(), PoolError> {
    if pool::get_pool_size() == size {
        return Ok(());
    }
    pool::set_pool_size(size)
}

/// Runs the full benchmark: spawns `threads` workers over a partition of
/// `0..total_objects`, joins them and adds up their sums.
///
/// In pooled mode the process-wide pool size is set to `w.pool_size` first,
/// which fails if pools of another size already exist.
pub fn run_pairs_benchmark(w: &PairWorkload) -> Result<PairsOutcome, PairsError> {
    let shares = partition(w.total_objects, w.threads).ok_or(PairsError::BadWorkSplit {
        objects: w.total_objects,
        threads: w.threads,
    })?;
    if w.ring_size == 0 {
        return Err(PairsError::EmptyRing);
    }
    if w.mode == PairMode::Pooled {
        ensure_pool_size(w.pool_size)?;
    }

    let sampler = PeakSampler::start();
    let start = Instant::now();
    let results: Vec<Result<f64, PairsError>> = std::thread::scope(|s| {
        let handles: Vec<_> = shares
            .iter()
            .map(|sh| {
                s.spawn(move || run_pairs_worker(sh.offset, sh.count, w.ring_size, w.mode, w.precision, &PairFactory))
            })
            .collect();
        handles
            .into_iter()
            .enumerate()
            .map(|(k, h)| h.join().unwrap_or(Err(PairsError::WorkerPanicked(k))))
            .collect()
    });
    let duration = start.elapsed();
    let peak_mem_bytes = sampler.finish();

    let worker_sums = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let total_value = worker_sums.iter().sum();
    Ok(PairsOutcome {
        total_value,
        worker_sums,
        duration,
        peak_mem_bytes,
    })
}

/// `N (N - 1)`, the sum of `2 i` for `i` in `0..N`, computed in integers and
/// rounded once.
pub fn expected_pairs_sum(total_objects: u64) -> f64 {
    let n = total_objects as u128;
    (n * n.saturating_sub(1)) as f64
}

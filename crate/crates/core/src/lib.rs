//! Thread-confined object pools and the benchmarks that exercise them.
//!
//! * [`pool`]: per-thread, lock-free pools of recyclable items.
//! * [`montecarlo`]: random search with fresh vs. cached argument vectors.
//! * [`pairs`]: many short-lived pair objects, pooled vs. unpooled.
//! * [`harness`] and [`report`]: parameter sweeps, CSV rows, summaries.

pub mod harness;
pub mod memory;
pub mod montecarlo;
pub mod pairs;
pub mod partition;
pub mod pool;
pub mod report;

pub use harness::{run_experiment, Benchmark, ExperimentConfig, HarnessError, Mode};
pub use pool::{
    acquire, delete_thread_local_pool, existing_thread_local_pool, get_pool_size, get_thread_local_pool, set_pool_size,
    PoolError, PoolFactory, Poolable, PoolableItem,
};
pub use report::{emit_csv, summarize, BenchReport, Row, Summary};

//! Acceptance suite. Each test checks one criterion and prints a single
//! `[PASS]`/`[FAIL]` line; run with `--nocapture` to see them.
//!
//! Tests take a shared lock so timed runs never overlap. Work that depends
//! on the process-wide pool size runs in a child process: either this test
//! binary re-invoked on a single child test, or the `tlpool-bench` binary.

use std::any::Any;
use std::path::Path;
use std::process::Command;
use std::sync::{Mutex, MutexGuard};
use std::time::{Duration, Instant};

use tlpool::harness::{run_experiment, Benchmark, ExperimentConfig, Mode};
use tlpool::montecarlo::{monte_carlo_optimize, rastrigin, BoxBounds, GeneratorMode};
use tlpool::pairs::{PairFactory, PairItem};
use tlpool::pool::{
    acquire, existing_thread_local_pool, get_pool_size, get_thread_local_pool, set_pool_size, PoolError, PoolFactory,
    Poolable,
};
use tlpool::report::{emit_csv, read_csv, summarize, BenchReport};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

const CHILD_ENV: &str = "TLPOOL_ACCEPTANCE_CHILD";

fn report(n: u32, what: &str, ok: bool, detail: &str) {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {n}: {what} ({detail})");
}

fn bench() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tlpool-bench"))
}

fn run_bench(args: &[String], csv: &Path) -> (BenchReport, String) {
    let out = bench().args(args).arg("--csv").arg(csv).output().unwrap();
    assert!(
        out.status.success(),
        "tlpool-bench {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    (read_csv(csv).unwrap(), String::from_utf8(out.stdout).unwrap())
}

fn args(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

// ---------------------------------------------------------------------------
// 1. Pool invariants

#[derive(Default)]
struct Probe(i64);

impl Poolable for Probe {
    fn set_data(&mut self, args: &[&dyn Any]) {
        self.0 = *args[0].downcast_ref::<i64>().unwrap();
    }
}

struct ProbeFactory;

impl PoolFactory for ProbeFactory {
    type Item = Probe;
    fn unique_type_id(&self) -> usize {
        1
    }
    fn make_unmanaged(&self, _args: &[&dyn Any]) -> Probe {
        Probe::default()
    }
}

const CHILD_POOL: usize = 8;

/// Body of criterion 1. Only does anything when re-invoked as a child, where
/// it owns a fresh process and therefore the pool-size gate.
#[test]
fn criterion_1_child() {
    if std::env::var(CHILD_ENV).as_deref() != Ok("1") {
        return;
    }
    // set_pool_size gate
    assert_eq!(set_pool_size(0), Err(PoolError::InvalidPoolSize(0)));
    set_pool_size(CHILD_POOL).unwrap();
    let mut first = acquire(&ProbeFactory, &[&0i64]).unwrap();
    assert_eq!(set_pool_size(CHILD_POOL + 1), Err(PoolError::PoolSizeLocked));
    assert_eq!(get_pool_size(), CHILD_POOL);
    let pool = existing_thread_local_pool(&ProbeFactory).unwrap();
    assert_eq!(pool.capacity(), CHILD_POOL);
    assert_eq!(pool.available(), CHILD_POOL - 1);
    first.release().unwrap();

    // conservation over a fixed interleaving
    let mut held = Vec::new();
    let script = "aaaraarrraaaaaaaarrarrrrrrrraaarrr";
    for (step, c) in script.chars().enumerate() {
        if c == 'a' {
            held.push(acquire(&ProbeFactory, &[&(step as i64)]).unwrap());
        } else {
            let mut it = held.remove(held.len() / 2);
            it.release().unwrap();
        }
        let outstanding = held.iter().filter(|h| h.is_managed()).count();
        assert_eq!(pool.available() + outstanding, CHILD_POOL, "step {step}");
        assert_eq!(pool.borrow().retained_above_top(), 0);
    }
    for h in &mut held {
        h.release().unwrap();
    }
    assert_eq!(pool.available(), CHILD_POOL);

    // LIFO order
    let mut items: Vec<_> = (0..5i64).map(|i| acquire(&ProbeFactory, &[&i]).unwrap()).collect();
    let tags: Vec<_> = items.iter().map(|i| i.tag().unwrap()).collect();
    for it in &mut items {
        it.release().unwrap();
    }
    let again: Vec<_> = (0..5i64).map(|i| acquire(&ProbeFactory, &[&i]).unwrap()).collect();
    let again_tags: Vec<_> = again.iter().map(|i| i.tag().unwrap()).collect();
    assert_eq!(again_tags, tags.iter().rev().copied().collect::<Vec<_>>());
    drop(again);
    // Dropped without release: those five are gone from the pool.
    assert_eq!(pool.available(), CHILD_POOL - 5);

    // double release
    let mut d = acquire(&ProbeFactory, &[&1i64]).unwrap();
    d.release().unwrap();
    let e = d.release().unwrap_err();
    assert_eq!(e, PoolError::NotInUse);
    assert_eq!(e.to_string(), "Object not currently used");

    // exhaustion fallback and unmanaged release
    let avail = pool.available();
    let mut drain: Vec<_> = (0..avail as i64 + 2)
        .map(|i| acquire(&ProbeFactory, &[&i]).unwrap())
        .collect();
    assert_eq!(drain.iter().filter(|h| h.is_managed()).count(), avail);
    let last = drain.last_mut().unwrap();
    assert!(!last.is_managed());
    assert_eq!(last.0, avail as i64 + 1);
    last.release().unwrap();
    last.release().unwrap();
    for h in &mut drain {
        h.release().unwrap();
    }
    assert_eq!(pool.available(), avail);

    // cross-thread release
    let mut x = acquire(&ProbeFactory, &[&7i64]).unwrap();
    let mut x = std::thread::spawn(move || {
        assert_eq!(x.release(), Err(PoolError::WrongThread));
        x
    })
    .join()
    .unwrap();
    assert!(x.is_in_use());
    x.release().unwrap();

    // per-thread distinctness
    let here = get_thread_local_pool(&ProbeFactory, &[]).unwrap();
    assert!(here.ptr_eq(&pool));
    let there = std::thread::spawn(|| {
        let p = get_thread_local_pool(&ProbeFactory, &[]).unwrap();
        let q = get_thread_local_pool(&ProbeFactory, &[]).unwrap();
        assert!(p.ptr_eq(&q));
        (p.id(), p.capacity())
    })
    .join()
    .unwrap();
    assert_ne!(there.0, here.id());
    assert_eq!(there.1, CHILD_POOL);
    let pair = get_thread_local_pool(&PairFactory, &[]).unwrap();
    assert_ne!(pair.id(), here.id());
    let _: &PairItem = &acquire(&PairFactory, &[&1i64, &2.0f64]).unwrap();
}

#[test]
fn criterion_1_pool_invariants() {
    let _g = serial();
    let start = Instant::now();
    let out = Command::new(std::env::current_exe().unwrap())
        .args(["--exact", "criterion_1_child", "--nocapture", "--test-threads", "1"])
        .env(CHILD_ENV, "1")
        .output()
        .unwrap();
    let elapsed = start.elapsed();
    let stdout = String::from_utf8_lossy(&out.stdout);
    let ran = stdout.contains("1 passed");
    let ok = out.status.success() && ran && elapsed < Duration::from_secs(5);
    report(
        1,
        "pool invariant suite",
        ok,
        &format!("child exit {:?}, {:.2?}", out.status.code(), elapsed),
    );
    assert!(ok, "{stdout}\n{}", String::from_utf8_lossy(&out.stderr));
}

// ---------------------------------------------------------------------------
// 2. Monte-Carlo mode equivalence

/// Independent Rastrigin: constant term added last.
fn rastrigin_reference(x: &[f64]) -> f64 {
    let mut s = 0.0;
    for &v in x {
        s += v * v - 10.0 * (2.0 * std::f64::consts::PI * v).cos();
    }
    s + 10.0 * x.len() as f64
}

#[test]
fn criterion_2_montecarlo_mode_equivalence() {
    let _g = serial();
    let start = Instant::now();
    let mut cells = 0;
    for dim in [2usize, 10, 100] {
        let b = BoxBounds::rastrigin_domain(dim).unwrap();
        for evals in [1_000u64, 100_000] {
            for threads in [1usize, 4] {
                for seed in [0u64, 1, 42] {
                    let f = monte_carlo_optimize(&b, evals, threads, seed, GeneratorMode::Fresh).unwrap();
                    let c = monte_carlo_optimize(&b, evals, threads, seed, GeneratorMode::Cached).unwrap();
                    let ctx = format!("dim={dim} evals={evals} threads={threads} seed={seed}");
                    assert_eq!(f.incumbent.value.to_bits(), c.incumbent.value.to_bits(), "{ctx}");
                    assert!(
                        f.incumbent
                            .point
                            .iter()
                            .zip(&c.incumbent.point)
                            .all(|(a, b)| a.to_bits() == b.to_bits()),
                        "{ctx}"
                    );
                    assert_eq!(rastrigin(&f.incumbent.point).unwrap(), f.incumbent.value, "{ctx}");
                    let r = rastrigin_reference(&f.incumbent.point);
                    assert!((r - f.incumbent.value).abs() <= 1e-9 * r.abs().max(1.0), "{ctx}");
                    cells += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = elapsed < Duration::from_secs(30);
    report(
        2,
        "fresh and cached incumbents bitwise identical",
        ok,
        &format!("{cells} cells in {elapsed:.2?}"),
    );
    assert!(ok);
}

// ---------------------------------------------------------------------------
// 3. Rastrigin oracle

#[test]
fn criterion_3_rastrigin_oracle() {
    let _g = serial();
    for dim in [1usize, 10, 1000] {
        assert_eq!(rastrigin(&vec![0.0; dim]).unwrap(), 0.0, "dim {dim}");
    }
    // Values from an independent scripted evaluation of
    // 10 n + sum(v^2 - 10 cos(2 pi v)).
    let half = rastrigin(&[0.5]).unwrap();
    let one = rastrigin(&[1.0]).unwrap();
    let ok = (half - 20.25).abs() < 1e-9
        && (one - 1.0).abs() < 1e-9
        && (rastrigin_reference(&[0.5]) - half).abs() < 1e-9
        && (rastrigin_reference(&[1.0]) - one).abs() < 1e-9;
    report(3, "rastrigin oracle", ok, &format!("f([0.5])={half}, f([1.0])={one}"));
    assert!(ok);
}

// ---------------------------------------------------------------------------
// 4. Pairs checksum oracle

#[test]
fn criterion_4_pairs_checksum_oracle() {
    let _g = serial();
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let mut checked = 0;
    for pool_size in [1usize, 100, 100_000] {
        for ring in [1usize, 7, 10_000] {
            let csv = dir.path().join(format!("pairs-{pool_size}-{ring}.csv"));
            let a = args(&format!(
                "--benchmark pairs --modes unpooled,pooled --objects 10,1000,1000000 --threads 1,3,8 \
                 --ring-size {ring} --pool-size {pool_size} --repeats 1"
            ));
            let (rep, _) = run_bench(&a, &csv);
            assert_eq!(rep.rows.len(), 3 * 3 * 2);
            for r in &rep.rows {
                let n = r.workload as u128;
                let expected = (n * (n - 1)) as f64;
                assert_eq!(r.checksum, expected, "pool={pool_size} ring={ring} {r:?}");
            }
            for p in rep.rows.iter().filter(|r| r.mode == "pooled") {
                let u = rep
                    .rows
                    .iter()
                    .find(|u| u.mode == "unpooled" && u.workload == p.workload && u.threads == p.threads)
                    .unwrap();
                assert_eq!(p.checksum.to_bits(), u.checksum.to_bits());
                checked += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = elapsed < Duration::from_secs(30);
    report(
        4,
        "pairs total = N(N-1), pooled = unpooled",
        ok,
        &format!("{checked} pooled/unpooled pairs in {elapsed:.2?}"),
    );
    assert!(ok);
}

// ---------------------------------------------------------------------------
// 5. Desk-scale performance report

fn logical_processors() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[test]
fn criterion_5_performance_report() {
    let _g = serial();
    let dir = tempfile::tempdir().unwrap();
    let threads = logical_processors();

    let csv = dir.path().join("pairs.csv");
    let a = args(&format!(
        "--benchmark pairs --objects 50000000 --threads {threads} --repeats 5 --summary"
    ));
    let (rep, stdout) = run_bench(&a, &csv);
    println!("{stdout}");
    let summary = summarize(&rep);
    let cell = &summary.cells[0];
    let unpooled = cell.stats("unpooled").unwrap().mean_ms;
    let pooled = cell.stats("pooled").unwrap().mean_ms;
    let ratio = cell.ratio("unpooled");
    let emitted = stdout.contains("unpooled/pooled = ");
    let ok = emitted && ratio.is_some() && pooled <= unpooled;
    report(
        5,
        "pairs unpooled/pooled ratio (gate: pooled mean <= unpooled mean)",
        ok,
        &format!(
            "threads={threads} unpooled={unpooled:.1} ms pooled={pooled:.1} ms ratio={:.3} (reference 5.8/2.9 = 2.0)",
            ratio.unwrap_or(f64::NAN)
        ),
    );

    let csv = dir.path().join("mc.csv");
    let a = args(&format!(
        "--benchmark montecarlo --dims 1000 --evals 1000000 --threads {threads} --repeats 1 --summary"
    ));
    let (mc, stdout) = run_bench(&a, &csv);
    println!("{stdout}");
    let mc_ratio = summarize(&mc).cells[0].ratio("fresh");
    let mc_emitted = stdout.contains("fresh/cached = ");
    report(
        5,
        "montecarlo fresh/cached ratio (report only)",
        mc_emitted,
        &format!(
            "threads={threads} ratio={:.3} (reference 202/130 = 1.55)",
            mc_ratio.unwrap_or(f64::NAN)
        ),
    );
    assert!(ok, "pooled mean {pooled} ms > unpooled mean {unpooled} ms");
    assert!(mc_emitted);
}

// ---------------------------------------------------------------------------
// 6. Determinism gate and CSV round trip

#[test]
fn criterion_6_determinism_and_round_trip() {
    let _g = serial();
    let mc = ExperimentConfig {
        workloads: vec![20_000],
        dims: vec![10],
        threads: vec![4],
        seed: 42,
        repeats: 10,
        ..ExperimentConfig::new(Benchmark::MonteCarlo)
    };
    let pairs = ExperimentConfig {
        workloads: vec![100_000],
        threads: vec![3],
        repeats: 10,
        modes: vec![Mode::Pooled, Mode::Unpooled],
        ..ExperimentConfig::new(Benchmark::Pairs)
    };
    let dir = tempfile::tempdir().unwrap();
    let mut ok = true;
    let mut rows = 0;
    for cfg in [mc, pairs] {
        let rep = run_experiment(&cfg).unwrap();
        for mode in &cfg.modes {
            let sums: Vec<u64> = rep
                .rows
                .iter()
                .filter(|r| r.mode == mode.to_string())
                .map(|r| r.checksum.to_bits())
                .collect();
            ok &= sums.len() == 10 && sums.iter().all(|s| *s == sums[0]);
        }
        let path = dir.path().join(format!("{}.csv", cfg.benchmark));
        emit_csv(&rep, &path).unwrap();
        ok &= read_csv(&path).unwrap() == rep;
        rows += rep.rows.len();
    }
    report(
        6,
        "10 identical checksums per cell, CSV round trip",
        ok,
        &format!("{rows} rows"),
    );
    assert!(ok);
}

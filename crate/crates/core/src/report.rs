//! Benchmark rows, CSV I/O and the speedup summary.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("CSV error in {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

/// One timed repetition of one experiment cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub benchmark: String,
    pub mode: String,
    pub threads: usize,
    /// Function evaluations (montecarlo) or objects created (pairs).
    pub workload: u64,
    /// Search dimension; empty for benchmarks without one.
    pub dim: Option<usize>,
    pub repetition: usize,
    pub duration_ms: u64,
    pub peak_mem_bytes: u64,
    /// Incumbent value (montecarlo) or total value (pairs).
    pub checksum: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<Row>,
}

impl BenchReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        w.write_record(CSV_HEADER)?;
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, csv::Error> {
        let mut r = csv::Reader::from_reader(input);
        let rows = r.deserialize().collect::<Result<Vec<Row>, _>>()?;
        Ok(BenchReport { rows })
    }
}

pub const CSV_HEADER: [&str; 9] = [
    "benchmark",
    "mode",
    "threads",
    "workload",
    "dim",
    "repetition",
    "duration_ms",
    "peak_mem_bytes",
    "checksum",
];

/// Writes `report` to `path` as CSV: a header line, then one line per row.
pub fn emit_csv(report: &BenchReport, path: &Path) -> Result<(), ReportError> {
    let file = File::create(path).map_err(|source| ReportError::Io {
        path: path.to_owned(),
        source,
    })?;
    report
        .write_csv(io::BufWriter::new(file))
        .map_err(|source| ReportError::Csv {
            path: path.to_owned(),
            source,
        })
}

pub fn read_csv(path: &Path) -> Result<BenchReport, ReportError> {
    let file = File::open(path).map_err(|source| ReportError::Io {
        path: path.to_owned(),
        source,
    })?;
    BenchReport::read_csv(file).map_err(|source| ReportError::Csv {
        path: path.to_owned(),
        source,
    })
}

/// Mode pairs compared in the summary, as (baseline, improved).
pub const COMPARISONS: [(&str, &str); 2] = [("unpooled", "pooled"), ("fresh", "cached")];

#[derive(Debug, Clone, PartialEq)]
pub struct ModeStats {
    pub mode: String,
    pub runs: usize,
    pub mean_ms: f64,
    pub min_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ratio {
    pub baseline: String,
    pub improved: String,
    /// `mean(baseline) / mean(improved)`; `None` when it cannot be formed.
    pub value: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryCell {
    pub benchmark: String,
    pub threads: usize,
    pub workload: u64,
    pub dim: Option<usize>,
    pub modes: Vec<ModeStats>,
    pub ratios: Vec<Ratio>,
}

impl SummaryCell {
    pub fn stats(&self, mode: &str) -> Option<&ModeStats> {
        self.modes.iter().find(|m| m.mode == mode)
    }

    pub fn ratio(&self, baseline: &str) -> Option<f64> {
        self.ratios.iter().find(|r| r.baseline == baseline)?.value
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    pub cells: Vec<SummaryCell>,
}

type CellKey = (String, usize, u64, Option<usize>);

/// Mean and minimum duration per mode for every (threads, workload, dim)
/// cell, plus the baseline/improved ratio of the means for each mode pair
/// in [`COMPARISONS`] whose baseline or improved mode appears in the cell.
pub fn summarize(report: &BenchReport) -> Summary {
    let mut by_cell: BTreeMap<CellKey, BTreeMap<String, Vec<u64>>> = BTreeMap::new();
    for r in &report.rows {
        by_cell
            .entry((r.benchmark.clone(), r.threads, r.workload, r.dim))
            .or_default()
            .entry(r.mode.clone())
            .or_default()
            .push(r.duration_ms);
    }

    let cells = by_cell
        .into_iter()
        .map(|((benchmark, threads, workload, dim), modes)| {
            let modes: Vec<ModeStats> = modes
                .into_iter()
                .map(|(mode, d)| ModeStats {
                    runs: d.len(),
                    mean_ms: d.iter().sum::<u64>() as f64 / d.len() as f64,
                    min_ms: *d.iter().min().expect("non-empty"),
                    mode,
                })
                .collect();
            let find = |m: &str| modes.iter().find(|s| s.mode == m);
            let ratios = COMPARISONS
                .iter()
                .filter(|(b, i)| find(b).is_some() || find(i).is_some())
                .map(|&(b, i)| {
                    let (value, note) = match (find(b), find(i)) {
                        (Some(sb), Some(si)) if si.mean_ms > 0.0 => (Some(sb.mean_ms / si.mean_ms), None),
                        (Some(_), Some(_)) => (None, Some(format!("{i} mean is 0 ms"))),
                        (None, _) => (None, Some(format!("no {b} rows"))),
                        (_, None) => (None, Some(format!("no {i} rows"))),
                    };
                    Ratio {
                        baseline: b.to_string(),
                        improved: i.to_string(),
                        value,
                        note,
                    }
                })
                .collect();
            SummaryCell {
                benchmark,
                threads,
                workload,
                dim,
                modes,
                ratios,
            }
        })
        .collect();
    Summary { cells }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<11} {:>7} {:>12} {:>6}  {:<9} {:>5} {:>11} {:>9}",
            "benchmark", "threads", "workload", "dim", "mode", "runs", "mean_ms", "min_ms"
        )?;
        for c in &self.cells {
            let dim = c.dim.map_or_else(|| "-".to_string(), |d| d.to_string());
            for m in &c.modes {
                writeln!(
                    f,
                    "{:<11} {:>7} {:>12} {:>6}  {:<9} {:>5} {:>11.1} {:>9}",
                    c.benchmark, c.threads, c.workload, dim, m.mode, m.runs, m.mean_ms, m.min_ms
                )?;
            }
            for r in &c.ratios {
                match (r.value, &r.note) {
                    (Some(v), _) => writeln!(f, "{:>40}  {}/{} = {:.3}", "", r.baseline, r.improved, v)?,
                    (None, Some(n)) => writeln!(f, "{:>40}  {}/{} omitted: {}", "", r.baseline, r.improved, n)?,
                    (None, None) => {}
                }
            }
        }
        Ok(())
    }
}

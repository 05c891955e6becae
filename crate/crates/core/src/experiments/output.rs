//! Directory outputs of the benchmark, ingestion and rate-probe commands.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::experiments::bench::{
    failure_rate, row_line, rows_csv, run_benchmark_with, timing_csv, trace_line, BenchmarkRow, ROWS_HEADER, TRACES_HEADER,
};
use crate::experiments::binning::{bin_by_alpha, binned_csv, BinSummary};
use crate::experiments::ingest::{Ingested, Rejected};
use crate::experiments::rate_probe::{cells_csv, RateReport};
use crate::experiments::scenario::ScenarioSpec;
use crate::stats::median;

pub const BIN_WIDTH: f64 = 0.2;

pub const BENCH_SCHEMA: &str = "\
rows.csv: one line per (run, estimator), sorted by run then estimator (npmc, mh, abc)
  run          run index, 0-based
  alpha..delta true parameters drawn for the run
  estimator    npmc | mh | abc
  mse_a..mse_d final per-parameter MSE, (mean - truth)^2 + variance; empty if nothing was produced
  mse_global   mean of mse_a..mse_d
  ness         final normalized effective sample size (npmc, abc) or autocorrelation ESS fraction (mh)
  failed       1 if the estimator flagged a failure, else 0
  reason       failure message, empty otherwise

traces.csv: one line per (run, estimator, iteration)
  run, estimator, iter, ness, mse_a..mse_d, mse_global as in rows.csv

binned.csv: per estimator, alpha bin (bin_lo, bin_hi] of width 0.2 and metric
  metric       mse_global | ness | mse_a | mse_b | mse_g | mse_d
  count        rows in the bin, failed ones included
  n            non-failed rows with a finite value of the metric
  mean, median, q05, q95 over those n values (empty when n = 0)

timing.csv: only with --timing; wall-clock seconds per estimator call, data generation excluded
  run, estimator, seconds
  Not reproducible; every other file is byte-identical across reruns.

report.json: scenario, failure_rate (percent per estimator), per-estimator
  median and mean final mse_global over non-failed rows, and the binned table.
";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorSummary {
    pub runs: usize,
    pub failed: usize,
    pub median_mse_global: Option<f64>,
    pub mean_mse_global: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub scenario: ScenarioSpec,
    pub failure_rate: BTreeMap<String, f64>,
    pub estimators: BTreeMap<String, EstimatorSummary>,
    pub binned: Vec<BinSummary>,
}

pub fn summarize_rows(spec: &ScenarioSpec, rows: &[BenchmarkRow]) -> Result<BenchReport> {
    let mut estimators = BTreeMap::new();
    for est in failure_rate(rows).keys() {
        let mine: Vec<&BenchmarkRow> = rows.iter().filter(|r| &r.estimator == est).collect();
        let mse: Vec<f64> = mine.iter().filter(|r| !r.failed).filter_map(|r| r.mse_global).filter(|v| v.is_finite()).collect();
        estimators.insert(
            est.clone(),
            EstimatorSummary {
                runs: mine.len(),
                failed: mine.iter().filter(|r| r.failed).count(),
                median_mse_global: (!mse.is_empty()).then(|| median(&mse)),
                mean_mse_global: (!mse.is_empty()).then(|| mse.iter().sum::<f64>() / mse.len() as f64),
            },
        );
    }
    Ok(BenchReport { scenario: spec.clone(), failure_rate: failure_rate(rows), estimators, binned: bin_by_alpha(rows, BIN_WIDTH)? })
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Runs the scenario, appending to `rows.csv` and `traces.csv` after each run.
/// `timing.csv` is written only when `timing` is set.
pub fn write_benchmark(spec: &ScenarioSpec, dir: &Path, timing: bool) -> Result<BenchReport> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("schema.txt"), BENCH_SCHEMA)?;
    let mut rows_out = BufWriter::new(File::create(dir.join("rows.csv"))?);
    let mut traces_out = BufWriter::new(File::create(dir.join("traces.csv"))?);
    rows_out.write_all(ROWS_HEADER.as_bytes())?;
    traces_out.write_all(TRACES_HEADER.as_bytes())?;
    rows_out.flush()?;
    traces_out.flush()?;
    let outcomes = run_benchmark_with(spec, |o| {
        for r in &o.rows {
            rows_out.write_all(row_line(r).as_bytes())?;
        }
        for t in &o.traces {
            traces_out.write_all(trace_line(t).as_bytes())?;
        }
        rows_out.flush()?;
        traces_out.flush()?;
        Ok(())
    })?;
    let rows: Vec<BenchmarkRow> = outcomes.into_iter().flat_map(|o| o.rows).collect();
    debug_assert_eq!(fs::read_to_string(dir.join("rows.csv")).ok(), Some(rows_csv(&rows)));
    let report = summarize_rows(spec, &rows)?;
    fs::write(dir.join("binned.csv"), binned_csv(&report.binned))?;
    if timing {
        fs::write(dir.join("timing.csv"), timing_csv(&rows))?;
    }
    fs::write(dir.join("report.json"), json(&report))?;
    Ok(report)
}

pub const INGEST_SCHEMA: &str = "\
displacements.csv: one line per displacement of an accepted individual
  individual_id, index (0-based), from_day, to_day, displacement_m (position[to] - position[from]),
  gap (1 when to_day - from_day > 1)

obs/<individual_id>.csv: displacement series in observation format, usable with fit-* --data

report.json: accepted individuals with T_n and gap indices, rejected individuals with reasons,
  and the histogram of T_n (T_n -> number of individuals)
";

#[derive(Serialize)]
struct IngestReport<'a> {
    accepted: Vec<AcceptedEntry<'a>>,
    rejected: &'a [Rejected],
    length_histogram: BTreeMap<usize, usize>,
}

#[derive(Serialize)]
struct AcceptedEntry<'a> {
    id: &'a str,
    displacements: usize,
    gaps: &'a [usize],
}

fn file_stem(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

pub fn write_ingest(ingested: &Ingested, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join("obs"))?;
    fs::write(dir.join("schema.txt"), INGEST_SCHEMA)?;
    fs::write(dir.join("displacements.csv"), ingested.displacements_csv())?;
    for t in &ingested.tracks {
        t.observations.write(&dir.join("obs").join(format!("{}.csv", file_stem(&t.id))))?;
    }
    let report = IngestReport {
        accepted: ingested.tracks.iter().map(|t| AcceptedEntry { id: &t.id, displacements: t.observations.len(), gaps: &t.gaps }).collect(),
        rejected: &ingested.rejected,
        length_histogram: ingested.length_histogram(),
    };
    fs::write(dir.join("report.json"), json(&report))?;
    Ok(())
}

pub const RATE_SCHEMA: &str = "\
cells.csv: one line per (M, epsilon)
  m, clip (floor(sqrt(M))), epsilon
  mae_unclipped, mae_clipped  mean absolute error of the self-normalized estimates of (f, pi)
  mean_gap, max_gap           mean and max |clipped - unclipped| over replications
  bound                       2 a_e^2 sup|f| M_T / M
  bound_violations            replications with gap > bound

report.json: probe settings, exact (f, pi), a, sup|f|, C, the cells, and line fits
  (slope, intercept, slope_se, 95% interval) of log MAE and log gap on log M at the
  smallest epsilon, and of MAE on epsilon at the largest M
";

pub fn write_rate_probe(report: &RateReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("schema.txt"), RATE_SCHEMA)?;
    fs::write(dir.join("cells.csv"), cells_csv(report))?;
    fs::write(dir.join("report.json"), json(report))?;
    Ok(())
}
